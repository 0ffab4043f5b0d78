#include "mfbsde/solver.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "mfbsde/detail/parallel.hpp"
#include "mfbsde/detail/quadrature.hpp"
#include "mfbsde/detail/rng.hpp"
#include "mfbsde/martingale.hpp"

namespace mfbsde {

namespace {

std::vector<double> uniform_grid(double horizon, int steps) {
  if (steps < 1) throw domain_error("steps must be >= 1");
  std::vector<double> grid(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    grid[k] = horizon * static_cast<double>(k) / steps;
  }
  grid.back() = horizon;
  return grid;
}

std::vector<double> half_grid_of(const std::vector<double>& grid) {
  std::vector<double> half(2 * grid.size() - 1);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    half[2 * k] = grid[k];
    half[2 * k + 1] = 0.5 * (grid[k] + grid[k + 1]);
  }
  half.back() = grid.back();
  return half;
}

// Exact law on the half grid, as a (2K+1) x N matrix.
Eigen::MatrixXd law_half_matrix(const meanfield_problem& p,
                                const std::vector<double>& half) {
  const state_law_path lp = evolve_law(p.gen, p.mu0, half);
  Eigen::MatrixXd mu(half.size(), p.num_states());
  for (std::size_t k = 0; k < half.size(); ++k) mu.row(k) = lp.laws[k].transpose();
  return mu;
}

// Cubic Hermite basis at local coordinate th in [0, 1].
struct hermite_basis {
  double h00, h10, h01, h11;
  explicit hermite_basis(double th) {
    const double th2 = th * th;
    const double om = 1.0 - th;
    h00 = (1.0 + 2.0 * th) * om * om;
    h10 = th * om * om;
    h01 = th2 * (3.0 - 2.0 * th);
    h11 = th2 * (th - 1.0);
  }
};

// One backward RK4 sweep over the uniform grid. `rhs(h, seg, u, out)`
// evaluates du/dt at half-grid index h with the cell's segment. Also
// records per-cell endpoint slopes for Hermite evaluation.
template <typename Rhs>
void rk4_backward(const meanfield_problem& p, const std::vector<double>& grid,
                  const Eigen::VectorXd& terminal, const Rhs& rhs, Eigen::MatrixXd& u,
                  Eigen::MatrixXd& du_left, Eigen::MatrixXd& du_right) {
  const int steps = static_cast<int>(grid.size()) - 1;
  const int n = p.num_states();
  u.resize(steps + 1, n);
  du_left.resize(steps, n);
  du_right.resize(steps, n);
  Eigen::VectorXd uk = terminal, s1(n), s2(n), s3(n), s4(n), tmp(n);
  u.row(steps) = uk.transpose();
  for (int k = steps; k >= 1; --k) {
    const double dt = grid[k] - grid[k - 1];
    const std::size_t seg = p.gen.segment_index(0.5 * (grid[k] + grid[k - 1]));
    rhs(2 * k, seg, uk, s1);
    tmp = uk - (0.5 * dt) * s1;
    rhs(2 * k - 1, seg, tmp, s2);
    tmp = uk - (0.5 * dt) * s2;
    rhs(2 * k - 1, seg, tmp, s3);
    tmp = uk - dt * s3;
    rhs(2 * k - 2, seg, tmp, s4);
    du_right.row(k - 1) = s1.transpose();
    uk -= (dt / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4);
    if (!uk.allFinite()) {
      throw nonfinite_error("backward sweep produced a non-finite value at t = " +
                            std::to_string(grid[k - 1]));
    }
    u.row(k - 1) = uk.transpose();
    rhs(2 * k - 2, seg, uk, s1);
    du_left.row(k - 1) = s1.transpose();
  }
}

// Hermite value of a grid function with per-cell endpoint slopes.
void hermite_row(const std::vector<double>& grid, const Eigen::MatrixXd& vals,
                 const Eigen::MatrixXd& ml, const Eigen::MatrixXd& mr, double t,
                 Eigen::Ref<Eigen::RowVectorXd> out) {
  const int steps = static_cast<int>(grid.size()) - 1;
  const double T = grid.back();
  if (!(t >= 0.0 && t <= T + 1e-12)) {
    throw domain_error("evaluation time outside [0, horizon]");
  }
  const double dt = T / steps;
  int k = std::min(steps - 1, static_cast<int>(t / dt));
  if (k < 0) k = 0;
  double th = (t - grid[k]) / (grid[k + 1] - grid[k]);
  th = std::clamp(th, 0.0, 1.0);
  const hermite_basis b(th);
  const double h = grid[k + 1] - grid[k];
  out = b.h00 * vals.row(k) + b.h01 * vals.row(k + 1) +
        (b.h10 * h) * ml.row(k) + (b.h11 * h) * mr.row(k);
}

}  // namespace

// Builder with access to markovian_solution's private fields.
class solver_backend {
 public:
  static markovian_solution assemble(const meanfield_problem& p,
                                     std::vector<double> grid, Eigen::MatrixXd u,
                                     Eigen::MatrixXd du_left, Eigen::MatrixXd du_right,
                                     const Eigen::MatrixXd& mu_half) {
    markovian_solution s;
    s.grid_ = std::move(grid);
    s.u_ = std::move(u);
    s.du_left_ = std::move(du_left);
    s.du_right_ = std::move(du_right);
    const int steps = static_cast<int>(s.grid_.size()) - 1;
    s.mu_.resize(steps + 1, p.num_states());
    for (int k = 0; k <= steps; ++k) s.mu_.row(k) = mu_half.row(2 * k);
    s.gen_ = std::make_shared<generator>(p.gen);
    return s;
  }
};

Eigen::VectorXd markovian_solution::value_at(double t) const {
  Eigen::RowVectorXd row(num_states());
  value_at(t, row);
  return row.transpose();
}

void markovian_solution::value_at(double t, Eigen::Ref<Eigen::RowVectorXd> out) const {
  hermite_row(grid_, u_, du_left_, du_right_, t, out);
}

Eigen::VectorXd markovian_solution::law_at(double t) const {
  const int steps = this->steps();
  const double T = grid_.back();
  if (!(t >= 0.0 && t <= T + 1e-12)) {
    throw domain_error("evaluation time outside [0, horizon]");
  }
  const double dt = T / steps;
  int k = std::min(steps - 1, static_cast<int>(t / dt));
  if (k < 0) k = 0;
  double th = (t - grid_[k]) / (grid_[k + 1] - grid_[k]);
  th = std::clamp(th, 0.0, 1.0);
  // Slopes A mu at the cell endpoints, with A from the cell's segment.
  const auto& a = gen_->segment(gen_->segment_index(0.5 * (grid_[k] + grid_[k + 1]))).rates;
  const Eigen::VectorXd m0 = a * mu_.row(k).transpose();
  const Eigen::VectorXd m1 = a * mu_.row(k + 1).transpose();
  const hermite_basis b(th);
  const double h = grid_[k + 1] - grid_[k];
  Eigen::VectorXd out = b.h00 * mu_.row(k).transpose() + b.h01 * mu_.row(k + 1).transpose() +
                        (b.h10 * h) * m0 + (b.h11 * h) * m1;
  // A probability vector up to interpolation error; clip tiny negatives.
  for (int i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
  return out;
}

state_law_path markovian_solution::law() const {
  state_law_path lp;
  lp.grid = grid_;
  lp.laws.resize(grid_.size());
  for (std::size_t k = 0; k < grid_.size(); ++k) lp.laws[k] = mu_.row(k).transpose();
  return lp;
}

namespace {

// Shared stage evaluation: out = -A^T u - E'[f] with the three freezing
// modes of the backward maps.
enum class stage_mode { direct, freeze_y, freeze_z_prime };

struct stage_rhs {
  const meanfield_problem* p;
  const std::vector<double>* half_t;
  const Eigen::MatrixXd* mu_half;
  stage_mode mode = stage_mode::direct;
  const Eigen::MatrixXd* frozen_u = nullptr;  // (2K+1) x N, freeze_y
  const Eigen::MatrixXd* frozen_z = nullptr;  // (2K+1) x N, freeze_z_prime

  mutable Eigen::RowVectorXd z_row, zp_row;

  void operator()(int h, std::size_t seg, const Eigen::VectorXd& u,
                  Eigen::VectorXd& out) const {
    const int n = p->num_states();
    const double t = (*half_t)[h];
    const auto& a = p->gen.segment(seg).rates;
    out.noalias() = -(a.transpose() * u);
    z_row = u.transpose();
    const Eigen::RowVectorXd* zp = &z_row;
    if (mode == stage_mode::freeze_z_prime) {
      zp_row = frozen_z->row(h);
      zp = &zp_row;
    }
    for (int i = 0; i < n; ++i) {
      const double y = mode == stage_mode::freeze_y ? (*frozen_u)(h, i) : u[i];
      double acc = 0.0;
      for (int ip = 0; ip < n; ++ip) {
        const double w = (*mu_half)(h, ip);
        if (w == 0.0) continue;
        const double yp = mode == stage_mode::freeze_y ? (*frozen_u)(h, ip) : u[ip];
        acc += w * p->f.eval(driver_args{t, ip, yp, *zp, i, y, z_row, p->gen,
                                         static_cast<int>(seg)});
      }
      out[i] -= acc;
    }
  }
};

Eigen::VectorXd terminal_vector(const meanfield_problem& p) {
  if (!p.terminal.is_markovian()) {
    throw domain_error("grid solvers need a Markovian terminal payoff vector");
  }
  return p.terminal.payoff();
}

markovian_solution solve_once(const meanfield_problem& p, int steps) {
  const std::vector<double> grid = uniform_grid(p.horizon(), steps);
  const std::vector<double> half = half_grid_of(grid);
  const Eigen::MatrixXd mu_half = law_half_matrix(p, half);
  stage_rhs rhs{&p, &half, &mu_half};
  Eigen::MatrixXd u, dl, dr;
  rk4_backward(p, grid, terminal_vector(p), rhs, u, dl, dr);
  return solver_backend::assemble(p, grid, std::move(u), std::move(dl), std::move(dr),
                                  mu_half);
}

}  // namespace

markovian_solution solve_markovian(const meanfield_problem& p, int steps,
                                   const solve_options& opts) {
  p.validate();
  markovian_solution sol = solve_once(p, steps);
  if (opts.coarse_check_tol && steps % 2 == 0 && steps >= 2) {
    const markovian_solution half_res = solve_once(p, steps / 2);
    const double shift =
        (sol.values().row(0) - half_res.values().row(0)).cwiseAbs().maxCoeff();
    if (shift > *opts.coarse_check_tol) sol.grid_too_coarse = true;
  }
  return sol;
}

std::pair<markovian_solution, picard_diagnostics> picard_solve(
    const meanfield_problem& p, int steps, picard_variant variant,
    const picard_options& opts) {
  p.validate();
  if (opts.max_iter < 1) throw domain_error("max_iter must be >= 1");
  const int n = p.num_states();
  const std::vector<double> grid = uniform_grid(p.horizon(), steps);
  const std::vector<double> half = half_grid_of(grid);
  const Eigen::MatrixXd mu_half = law_half_matrix(p, half);
  const Eigen::VectorXd g = terminal_vector(p);
  const int hs = static_cast<int>(half.size());

  picard_diagnostics diag;
  diag.variant = variant;

  // Iterate 0 on the half grid: u = 0; z from the requested start.
  Eigen::MatrixXd frozen_u = Eigen::MatrixXd::Zero(hs, n);
  Eigen::MatrixXd frozen_z = Eigen::MatrixXd::Zero(hs, n);
  if (variant == picard_variant::z_prime_scheme && opts.initial_z) {
    const Eigen::MatrixXd& z0 = *opts.initial_z;
    if (z0.rows() != steps + 1 || z0.cols() != n) {
      throw dimension_error("initial_z must be (steps+1) x N");
    }
    for (int k = 0; k <= steps; ++k) frozen_z.row(2 * k) = z0.row(k);
    for (int k = 0; k < steps; ++k) {
      frozen_z.row(2 * k + 1) = 0.5 * (z0.row(k) + z0.row(k + 1));
    }
  }

  // Previous iterate's node values, for the gap metrics.
  Eigen::MatrixXd prev_nodes = Eigen::MatrixXd::Zero(steps + 1, n);

  stage_rhs rhs{&p, &half, &mu_half};
  rhs.mode = variant == picard_variant::y_scheme ? stage_mode::freeze_y
                                                 : stage_mode::freeze_z_prime;
  rhs.frozen_u = &frozen_u;
  rhs.frozen_z = &frozen_z;

  markovian_solution sol;
  double prev_total_gap = 0.0;
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    Eigen::MatrixXd u, dl, dr;
    rk4_backward(p, grid, g, rhs, u, dl, dr);

    // Gap metrics against the previous iterate.
    picard_iteration it;
    it.u_gap = (u - prev_nodes).cwiseAbs().maxCoeff();
    double zacc = 0.0;
    Eigen::RowVectorXd dz(n);
    for (int k = 0; k <= steps; ++k) {
      const double w = (k == 0 || k == steps) ? 0.5 : 1.0;
      const double cell = p.horizon() / steps;
      const std::size_t seg = p.gen.segment_index(
          k < steps ? 0.5 * (grid[k] + grid[k + 1]) : 0.5 * (grid[k - 1] + grid[k]));
      dz = u.row(k) - prev_nodes.row(k);
      double q = 0.0;
      for (int i = 0; i < n; ++i) {
        q += mu_half(2 * k, i) * seminorm_sq_in_segment(dz, p.gen, seg, i);
      }
      zacc += w * cell * q;
    }
    it.z_gap = std::sqrt(zacc);
    const double total = it.u_gap + it.z_gap;
    it.ratio = iter > 1 && prev_total_gap > 0.0 ? total / prev_total_gap : 0.0;
    diag.iterations.push_back(it);
    if (opts.record_iterates) diag.iterate_values.push_back(u);

    prev_total_gap = total;
    prev_nodes = u;

    // Refresh the frozen half-grid arrays from this iterate.
    Eigen::RowVectorXd mid(n);
    for (int k = 0; k <= steps; ++k) frozen_u.row(2 * k) = u.row(k);
    for (int k = 0; k < steps; ++k) {
      const double h = grid[k + 1] - grid[k];
      mid = 0.5 * (u.row(k) + u.row(k + 1)) + (h / 8.0) * (dl.row(k) - dr.row(k));
      frozen_u.row(2 * k + 1) = mid;
    }
    frozen_z = frozen_u;

    const bool done = total <= opts.tol;
    if (done || iter == opts.max_iter) {
      diag.converged = done;
      sol = solver_backend::assemble(p, grid, std::move(u), std::move(dl), std::move(dr),
                                     mu_half);
      break;
    }
  }
  return {std::move(sol), std::move(diag)};
}

namespace {

struct residual_partial {
  double sum = 0.0, sum2 = 0.0, max_abs = 0.0;
  std::size_t count = 0;
};

}  // namespace

residual_stats residual_check(const markovian_solution& sol, const meanfield_problem& p,
                              int n_paths, std::uint64_t seed) {
  p.validate();
  if (n_paths < 2) throw domain_error("residual check needs at least 2 paths");
  const int n = p.num_states();
  const int steps = sol.steps();
  const std::vector<double>& grid = sol.grid();

  // phi_i(s) = E'[f(s, ., i, u_i(s), u(s))] is deterministic given the
  // pre-jump state i; tabulate its primitive per state on the law grid.
  // Buffers are passed in so concurrent chunks never share scratch space.
  const auto eval_phi = [&](double s, std::size_t seg, int i, Eigen::RowVectorXd& urow,
                            Eigen::VectorXd& mu) {
    sol.value_at(s, urow);
    mu = sol.law_at(s);
    double acc = 0.0;
    for (int ip = 0; ip < n; ++ip) {
      const double w = mu[ip];
      if (w == 0.0) continue;
      acc += w * p.f.eval(driver_args{s, ip, urow[ip], urow, i, urow[i], urow, p.gen,
                                      static_cast<int>(seg)});
    }
    return acc;
  };

  const auto phi_cell_integral = [&](double a, double b, int i, Eigen::RowVectorXd& urow,
                                     Eigen::VectorXd& mu) {
    if (!(b > a)) return 0.0;
    const std::size_t seg = p.gen.segment_index(0.5 * (a + b));
    return detail::gauss5([&](double s) { return eval_phi(s, seg, i, urow, mu); }, a, b);
  };

  Eigen::MatrixXd cum = Eigen::MatrixXd::Zero(steps + 1, n);
  {
    Eigen::RowVectorXd urow(n);
    Eigen::VectorXd mu(n);
    for (int k = 0; k < steps; ++k) {
      for (int i = 0; i < n; ++i) {
        cum(k + 1, i) = cum(k, i) + phi_cell_integral(grid[k], grid[k + 1], i, urow, mu);
      }
    }
  }

  const double dt = p.horizon() / steps;
  const auto driver_piece_integral = [&](double a, double b, int i,
                                         Eigen::RowVectorXd& urow, Eigen::VectorXd& mu) {
    // Full cells via the cumulative table, partial end cells via Gauss.
    const int ka = std::min(steps, static_cast<int>(std::ceil(a / dt - 1e-12)));
    const int kb = std::max(0, static_cast<int>(std::floor(b / dt + 1e-12)));
    if (ka > kb) return phi_cell_integral(a, b, i, urow, mu);
    double acc = cum(kb, i) - cum(ka, i);
    acc += phi_cell_integral(a, grid[ka], i, urow, mu);
    acc += phi_cell_integral(grid[kb], b, i, urow, mu);
    return acc;
  };

  const predictable_row z_fun = [&sol](double t, int, Eigen::Ref<Eigen::RowVectorXd> out) {
    sol.value_at(t, out);
  };

  const std::size_t n_chunks =
      (static_cast<std::size_t>(n_paths) + detail::chunk_size - 1) / detail::chunk_size;
  auto partials = detail::run_chunks<residual_partial>(n_chunks, [&](std::size_t c) {
    residual_partial part;
    Eigen::RowVectorXd urow_local(n);
    Eigen::VectorXd mu_local(n);
    const std::size_t lo = c * detail::chunk_size;
    const std::size_t hi =
        std::min(lo + detail::chunk_size, static_cast<std::size_t>(n_paths));
    for (std::size_t k = lo; k < hi; ++k) {
      std::mt19937_64 rng(detail::mix_seed(seed, k));
      const int x0 = detail::draw_from_law(rng, p.mu0);
      const chain_path path = sample_path(p.gen, x0, rng());
      const martingale_path mp(p.gen, path);

      double driver_int = 0.0;
      double pos = 0.0;
      int state = x0;
      for (const auto& e : path.events) {
        driver_int += driver_piece_integral(pos, e.time, state, urow_local, mu_local);
        pos = e.time;
        state = e.state;
      }
      driver_int += driver_piece_integral(pos, p.horizon(), state, urow_local, mu_local);

      const double z_int = mp.stochastic_integral(z_fun, 1e-10);
      const double xi = p.terminal.evaluate(path);
      const double r = xi + driver_int - z_int - sol.y0(x0);
      part.sum += r;
      part.sum2 += r * r;
      part.max_abs = std::max(part.max_abs, std::abs(r));
      ++part.count;
    }
    return part;
  });

  residual_partial tot;
  for (const auto& part : partials) {
    tot.sum += part.sum;
    tot.sum2 += part.sum2;
    tot.max_abs = std::max(tot.max_abs, part.max_abs);
    tot.count += part.count;
  }
  residual_stats st;
  st.n_paths = static_cast<int>(tot.count);
  const double cnt = static_cast<double>(tot.count);
  st.mean = tot.sum / cnt;
  const double var = std::max(0.0, (tot.sum2 - cnt * st.mean * st.mean) / (cnt - 1.0));
  st.std_error = std::sqrt(var / cnt);
  st.max_abs = tot.max_abs;
  return st;
}

comparison_verdict compare_solutions(const meanfield_problem& p1,
                                     const meanfield_problem& p2, int steps) {
  p1.validate();
  p2.validate();
  if (!(p1.gen == p2.gen)) {
    throw domain_error("comparison needs both problems on the same generator");
  }
  if (p1.mu0 != p2.mu0) {
    throw domain_error("comparison needs both problems to share mu0");
  }
  if (!p1.terminal.is_markovian() || !p2.terminal.is_markovian()) {
    throw domain_error("comparison needs Markovian terminal payoffs");
  }
  const int n = p1.num_states();

  comparison_verdict v;
  const Eigen::VectorXd& g1 = p1.terminal.payoff();
  const Eigen::VectorXd& g2 = p2.terminal.payoff();
  for (int i = 0; i < n; ++i) {
    if (g1[i] < g2[i] - 1e-12) {
      v.terminal_ok = false;
      v.first_terminal_violation = i;
      break;
    }
  }

  const markovian_solution s1 = solve_markovian(p1, steps);
  const markovian_solution s2 = solve_markovian(p2, steps);

  v.min_gap = (s1.values() - s2.values()).minCoeff();

  // Driver dominance f1 >= f2 along solution 2.
  const std::vector<double>& grid = s2.grid();
  Eigen::RowVectorXd zrow(n);
  for (int k = 0; k <= steps && v.driver_ok; ++k) {
    const double t = grid[k];
    const std::size_t seg = p1.gen.segment_index(
        k < steps ? 0.5 * (grid[k] + grid[k + 1]) : 0.5 * (grid[k - 1] + grid[k]));
    zrow = s2.values().row(k);
    for (int ip = 0; ip < n && v.driver_ok; ++ip) {
      for (int i = 0; i < n; ++i) {
        const driver_args args{t,
                               ip,
                               s2.values()(k, ip),
                               zrow,
                               i,
                               s2.values()(k, i),
                               zrow,
                               p1.gen,
                               static_cast<int>(seg)};
        const double f1 = p1.f.eval(args);
        const double f2 = p2.f.eval(args);
        if (f1 < f2 - 1e-12) {
          v.driver_ok = false;
          v.first_driver_violation =
              comparison_verdict::driver_violation{t, ip, i, f1, f2};
          break;
        }
      }
    }
  }
  return v;
}

}  // namespace mfbsde
