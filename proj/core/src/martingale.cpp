#include "mfbsde/martingale.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mfbsde/detail/parallel.hpp"
#include "mfbsde/detail/quadrature.hpp"
#include "mfbsde/detail/rng.hpp"

namespace mfbsde {

namespace {

// Calls cb(a, b, state, segment) for every maximal interval on which both
// the state and the generator segment are constant.
template <typename Cb>
void for_each_piece(const generator& gen, const chain_path& path, double t_end,
                    const Cb& cb) {
  double pos = 0.0;
  int state = path.x0;
  std::size_t seg = 0;
  std::size_t ev = 0;
  while (pos < t_end) {
    const double seg_end = std::min(gen.segment_end(seg), t_end);
    const double jump_at = ev < path.events.size()
                               ? std::min(path.events[ev].time, t_end)
                               : t_end;
    const double stop = std::min(seg_end, jump_at);
    if (stop > pos) cb(pos, stop, state, seg);
    if (ev < path.events.size() && path.events[ev].time <= stop) {
      state = path.events[ev].state;
      ++ev;
    }
    if (stop == seg_end && seg + 1 < gen.num_segments()) ++seg;
    pos = stop;
  }
}

}  // namespace

martingale_path::martingale_path(const generator& gen, chain_path path)
    : gen_(&gen), path_(std::move(path)) {
  if (path_.x0 < 0 || path_.x0 >= gen.num_states()) {
    throw dimension_error("path initial state outside the generator's state space");
  }
  if (std::abs(path_.horizon - gen.horizon()) > 1e-12) {
    throw dimension_error("path horizon differs from the generator horizon");
  }
  for (const auto& e : path_.events) {
    if (e.state < 0 || e.state >= gen.num_states()) {
      throw dimension_error("path visits a state outside the generator's state space");
    }
  }
}

Eigen::VectorXd martingale_path::compensator(double t) const {
  if (!(t >= 0.0 && t <= path_.horizon + 1e-12)) {
    throw domain_error("time outside [0, horizon]");
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(gen_->num_states());
  for_each_piece(*gen_, path_, std::min(t, path_.horizon),
                 [&](double a, double b, int state, std::size_t seg) {
                   acc += (b - a) * gen_->segment(seg).rates.col(state);
                 });
  return acc;
}

Eigen::VectorXd martingale_path::value(double t) const {
  Eigen::VectorXd m = -compensator(t);
  m[path_.state_at(t)] += 1.0;
  m[path_.x0] -= 1.0;
  return m;
}

Eigen::MatrixXd martingale_path::realized_qv() const {
  const int n = gen_->num_states();
  Eigen::MatrixXd qv = Eigen::MatrixXd::Zero(n, n);
  int prev = path_.x0;
  for (const auto& e : path_.events) {
    // Outer product of (e_new - e_prev) with itself.
    qv(e.state, e.state) += 1.0;
    qv(prev, prev) += 1.0;
    qv(e.state, prev) -= 1.0;
    qv(prev, e.state) -= 1.0;
    prev = e.state;
  }
  return qv;
}

Eigen::MatrixXd martingale_path::predictable_qv() const {
  const int n = gen_->num_states();
  Eigen::MatrixXd qv = Eigen::MatrixXd::Zero(n, n);
  for_each_piece(*gen_, path_, path_.horizon,
                 [&](double a, double b, int state, std::size_t seg) {
                   qv += (b - a) * gen_->phi_table(seg, state);
                 });
  return qv;
}

double martingale_path::stochastic_integral(const predictable_row& z,
                                            double quad_tol) const {
  const int n = gen_->num_states();
  Eigen::RowVectorXd row(n);

  // Jump part: z(s, X_{s-}) . (e_new - e_old), exact.
  double acc = 0.0;
  int prev = path_.x0;
  for (const auto& e : path_.events) {
    z(e.time, prev, row);
    acc += row[e.state] - row[prev];
    prev = e.state;
  }

  // Compensator part: minus the time integral of z(s, X_{s-}) . A_s X_{s-}.
  const double total = path_.horizon;
  for_each_piece(*gen_, path_, path_.horizon,
                 [&](double a, double b, int state, std::size_t seg) {
                   const auto col = gen_->segment(seg).rates.col(state);
                   const auto g = [&](double s) {
                     z(s, state, row);
                     return row.dot(col);
                   };
                   const double tol = quad_tol * std::max(1e-3, (b - a) / total);
                   acc -= detail::adaptive_simpson(g, a, b, tol);
                 });
  return acc;
}

namespace {

struct battery_partial {
  Eigen::VectorXd sum_m, sum_m2;       // terminal martingale value
  Eigen::MatrixXd sum_d, sum_d2;       // realized minus predictable QV
  double sum_i = 0.0, sum_i2 = 0.0;    // test stochastic integral
  double sum_j = 0.0, sum_j2 = 0.0;    // jump count
  std::size_t count = 0;
};

// E[number of jumps] = int_0^T sum_i mu_i(s) lambda_i(s) ds. The fine grid
// includes every segment start so no trapezoid cell straddles a rate jump.
double expected_jump_count(const generator& gen, const Eigen::VectorXd& mu0) {
  std::set<double> knots;
  const int fine = 2000;
  for (int k = 0; k <= fine; ++k) {
    knots.insert(gen.horizon() * static_cast<double>(k) / fine);
  }
  for (std::size_t s = 0; s < gen.num_segments(); ++s) {
    knots.insert(gen.segment(s).t_start);
  }
  const std::vector<double> grid(knots.begin(), knots.end());
  const state_law_path lp = evolve_law(gen, mu0, grid);
  const int n = gen.num_states();
  double acc = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const std::size_t seg = gen.segment_index(0.5 * (grid[k - 1] + grid[k]));
    double lo = 0.0, hi = 0.0;
    for (int i = 0; i < n; ++i) {
      lo += lp.laws[k - 1][i] * gen.exit_rate(seg, i);
      hi += lp.laws[k][i] * gen.exit_rate(seg, i);
    }
    acc += 0.5 * (lo + hi) * (grid[k] - grid[k - 1]);
  }
  return acc;
}

}  // namespace

std::vector<battery_row> martingale_battery(const generator& gen,
                                            const Eigen::VectorXd& mu0, int n_paths,
                                            std::uint64_t seed) {
  const int n = gen.num_states();
  if (n_paths < 2) throw domain_error("battery needs at least 2 paths");
  if (mu0.size() != n) throw dimension_error("mu0 size differs from the state count");

  // Bounded smooth test integrand for the E[int z dM] = 0 statistic.
  const predictable_row test_z = [n](double t, int state,
                                     Eigen::Ref<Eigen::RowVectorXd> out) {
    for (int j = 0; j < n; ++j) {
      out[j] = std::sin(t * (1.0 + j)) + (state == j ? 0.5 : 0.0);
    }
  };

  const std::size_t n_chunks =
      (static_cast<std::size_t>(n_paths) + detail::chunk_size - 1) / detail::chunk_size;
  auto partials = detail::run_chunks<battery_partial>(n_chunks, [&](std::size_t c) {
    battery_partial p;
    p.sum_m = Eigen::VectorXd::Zero(n);
    p.sum_m2 = Eigen::VectorXd::Zero(n);
    p.sum_d = Eigen::MatrixXd::Zero(n, n);
    p.sum_d2 = Eigen::MatrixXd::Zero(n, n);
    const std::size_t lo = c * detail::chunk_size;
    const std::size_t hi = std::min(lo + detail::chunk_size,
                                    static_cast<std::size_t>(n_paths));
    for (std::size_t k = lo; k < hi; ++k) {
      std::mt19937_64 rng(detail::mix_seed(seed, k));
      const int x0 = detail::draw_from_law(rng, mu0);
      martingale_path mp(gen, sample_path(gen, x0, rng()));
      const Eigen::VectorXd m = mp.value(gen.horizon());
      const Eigen::MatrixXd d = mp.realized_qv() - mp.predictable_qv();
      const double si = mp.stochastic_integral(test_z);
      const double jumps = static_cast<double>(mp.path().num_jumps());
      p.sum_m += m;
      p.sum_m2 += m.cwiseProduct(m);
      p.sum_d += d;
      p.sum_d2 += d.cwiseProduct(d);
      p.sum_i += si;
      p.sum_i2 += si * si;
      p.sum_j += jumps;
      p.sum_j2 += jumps * jumps;
      ++p.count;
    }
    return p;
  });

  battery_partial tot;
  tot.sum_m = Eigen::VectorXd::Zero(n);
  tot.sum_m2 = Eigen::VectorXd::Zero(n);
  tot.sum_d = Eigen::MatrixXd::Zero(n, n);
  tot.sum_d2 = Eigen::MatrixXd::Zero(n, n);
  for (const auto& p : partials) {
    tot.sum_m += p.sum_m;
    tot.sum_m2 += p.sum_m2;
    tot.sum_d += p.sum_d;
    tot.sum_d2 += p.sum_d2;
    tot.sum_i += p.sum_i;
    tot.sum_i2 += p.sum_i2;
    tot.sum_j += p.sum_j;
    tot.sum_j2 += p.sum_j2;
    tot.count += p.count;
  }

  const double cnt = static_cast<double>(tot.count);
  const auto make_row = [&](const std::string& name, double sum, double sum2,
                            double target) {
    battery_row r;
    r.statistic = name;
    const double mean = sum / cnt;
    const double var = std::max(0.0, (sum2 - cnt * mean * mean) / (cnt - 1.0));
    // Every battery row reports the deviation from its identity's target, so
    // all estimates should sit at 0 within a few standard errors.
    r.estimate = mean - target;
    r.std_error = std::sqrt(var / cnt);
    r.z_score = r.std_error > 0.0 ? r.estimate / r.std_error
                                  : (r.estimate == 0.0 ? 0.0 : INFINITY);
    return r;
  };

  std::vector<battery_row> rows;
  for (int i = 0; i < n; ++i) {
    rows.push_back(make_row("mean_M_T_" + std::to_string(i + 1), tot.sum_m[i],
                            tot.sum_m2[i], 0.0));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      rows.push_back(make_row(
          "qv_gap_" + std::to_string(i + 1) + "_" + std::to_string(j + 1),
          tot.sum_d(i, j), tot.sum_d2(i, j), 0.0));
    }
  }
  rows.push_back(make_row("stoch_integral_mean", tot.sum_i, tot.sum_i2, 0.0));
  rows.push_back(make_row("jump_count_gap", tot.sum_j, tot.sum_j2,
                          expected_jump_count(gen, mu0)));
  return rows;
}

}  // namespace mfbsde
