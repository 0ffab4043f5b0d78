#include "mfbsde/problem.hpp"

#include <cmath>
#include <random>

#include "mfbsde/detail/rng.hpp"

namespace mfbsde {

terminal_condition terminal_condition::markovian(Eigen::VectorXd payoff) {
  if (!payoff.allFinite()) throw nonfinite_error("terminal payoff has a non-finite entry");
  terminal_condition tc;
  tc.markovian_ = true;
  tc.payoff_ = std::move(payoff);
  return tc;
}

terminal_condition terminal_condition::from_expr(const dsl::expression& expr,
                                                 int n_states) {
  Eigen::VectorXd g(n_states);
  dsl::eval_values v;
  v.n = static_cast<double>(n_states);
  for (int i = 0; i < n_states; ++i) {
    v.i = static_cast<double>(i + 1);
    g[i] = expr.evaluate(v);
  }
  if (!g.allFinite()) throw nonfinite_error("terminal expression evaluates to a non-finite value");
  return markovian(std::move(g));
}

terminal_condition terminal_condition::path_dependent(path_functional f) {
  terminal_condition tc;
  tc.markovian_ = false;
  tc.functional_ = std::move(f);
  return tc;
}

const Eigen::VectorXd& terminal_condition::payoff() const {
  if (!markovian_) throw domain_error("terminal condition is path-dependent, no payoff vector");
  return payoff_;
}

const path_functional& terminal_condition::functional() const {
  if (markovian_) throw domain_error("terminal condition is Markovian, no path functional");
  return functional_;
}

double terminal_condition::evaluate(const chain_path& path) const {
  if (markovian_) return payoff_[path.state_at(path.horizon)];
  return functional_.eval(path);
}

void meanfield_problem::validate() const {
  const int n = gen.num_states();
  if (mu0.size() != n) {
    throw dimension_error("mu0 has size " + std::to_string(mu0.size()) +
                          ", generator has " + std::to_string(n) + " states");
  }
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(mu0[i] >= -1e-8)) throw simplex_error("mu0 has a negative entry");
    sum += mu0[i];
  }
  if (std::abs(sum - 1.0) > 1e-8) throw simplex_error("mu0 does not sum to 1");
  if (terminal.is_markovian() && terminal.payoff().size() != n) {
    throw dimension_error("terminal payoff has size " +
                          std::to_string(terminal.payoff().size()) + ", expected " +
                          std::to_string(n));
  }
  if (!f.eval) throw domain_error("problem has no driver");
}

double meanfield_expectation(const Eigen::VectorXd& law, const Eigen::VectorXd& u_primed,
                             const Eigen::MatrixXd& z_rows, const driver& f, double t,
                             int state, double y, const Eigen::RowVectorXd& z_outer,
                             const generator& gen, int segment) {
  const int n = gen.num_states();
  if (law.size() != n || u_primed.size() != n) {
    throw dimension_error("law / primed values must have one entry per state");
  }
  if (z_rows.rows() != 1 && z_rows.rows() != n) {
    throw dimension_error("z_rows must have 1 or N rows");
  }
  const bool shared = z_rows.rows() == 1;
  double acc = 0.0;
  Eigen::RowVectorXd zp;
  for (int ip = 0; ip < n; ++ip) {
    const double w = law[ip];
    if (w == 0.0) continue;
    zp = z_rows.row(shared ? 0 : ip);
    acc += w * f.eval(driver_args{t, ip, u_primed[ip], zp, state, y, z_outer, gen, segment});
  }
  return acc;
}

driver make_driver(dsl::expression expr, double lipschitz) {
  driver d;
  d.lipschitz = lipschitz;
  d.description = expr.format();
  const bool wants_snorm_z = expr.uses_snorm_z();
  const bool wants_snorm_zp = expr.uses_snorm_zp();
  d.eval = [e = std::move(expr), wants_snorm_z, wants_snorm_zp](const driver_args& a) {
    dsl::eval_values v;
    v.t = a.t;
    v.y = a.y;
    v.yp = a.y_prime;
    v.i = static_cast<double>(a.state + 1);
    v.ip = static_cast<double>(a.primed_state + 1);
    v.z = a.z.data();
    v.zp = a.z_prime.data();
    v.n = static_cast<double>(a.gen.num_states());
    const std::size_t seg = a.segment >= 0 ? static_cast<std::size_t>(a.segment)
                                           : a.gen.segment_index(a.t);
    if (wants_snorm_z) {
      v.snorm_z = std::sqrt(seminorm_sq_in_segment(a.z, a.gen, seg, a.state));
    }
    if (wants_snorm_zp) {
      v.snorm_zp = std::sqrt(seminorm_sq_in_segment(a.z_prime, a.gen, seg, a.primed_state));
    }
    return e.evaluate(v);
  };
  return d;
}

driver named_driver(const std::string& name) {
  driver d;
  d.description = name;
  if (name == "zero") {
    d.lipschitz = 0.0;
    d.eval = [](const driver_args&) { return 0.0; };
    return d;
  }
  if (name == "pure_meanfield") {
    // f = y': with a constant terminal payoff c the solution is
    // u_i(t) = c e^{T-t} for every state.
    d.lipschitz = 1.0;
    d.eval = [](const driver_args& a) { return a.y_prime; };
    return d;
  }
  if (name == "linear_decay") {
    // f = -y: with a constant terminal payoff c the solution is
    // u_i(t) = c e^{-(T-t)}.
    d.lipschitz = 1.0;
    d.eval = [](const driver_args& a) { return -a.y; };
    return d;
  }
  throw unknown_form_error("unknown driver '" + name + "'");
}

double a_priori_bound(const meanfield_problem& p) {
  const double T = p.horizon();
  const double c = p.f.lipschitz;
  double g_inf = 0.0;
  if (p.terminal.is_markovian()) {
    g_inf = p.terminal.payoff().cwiseAbs().maxCoeff();
  } else {
    g_inf = p.terminal.functional().bound;
  }
  // sup over a time grid and state pairs of |f(t, 0, 0, 0, 0)|.
  const int n = p.num_states();
  Eigen::RowVectorXd zero_row = Eigen::RowVectorXd::Zero(n);
  double f0 = 0.0;
  const int grid = 64;
  for (int k = 0; k <= grid; ++k) {
    const double t = T * static_cast<double>(k) / grid;
    for (int ip = 0; ip < n; ++ip) {
      for (int i = 0; i < n; ++i) {
        f0 = std::max(f0, std::abs(p.f.eval(
                              driver_args{t, ip, 0.0, zero_row, i, 0.0, zero_row, p.gen})));
      }
    }
  }
  return std::exp((2.0 * c + 1.0) * T) * (g_inf + T * f0);
}

lipschitz_report lipschitz_spot_check(const driver& f, const generator& gen,
                                      int n_pairs, std::uint64_t seed) {
  lipschitz_report rep;
  rep.declared = f.lipschitz;
  const int n = gen.num_states();
  std::mt19937_64 rng(seed);
  const auto u = [&] { return 4.0 * detail::uniform01(rng) - 2.0; };
  Eigen::RowVectorXd za(n), zb(n), zpa(n), zpb(n);
  for (int k = 0; k < n_pairs; ++k) {
    const double t = gen.horizon() * detail::uniform01(rng);
    const int ip = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    const int i = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    const double ya = u(), yb = u(), ypa = u(), ypb = u();
    for (int j = 0; j < n; ++j) {
      za[j] = u();
      zb[j] = u();
      zpa[j] = u();
      zpb[j] = u();
    }
    const double fa = f.eval(driver_args{t, ip, ypa, zpa, i, ya, za, gen});
    const double fb = f.eval(driver_args{t, ip, ypb, zpb, i, yb, zb, gen});
    double denom = std::abs(ypa - ypb) +
                   std::sqrt(seminorm_sq(zpa - zpb, gen, t, ip)) +
                   std::abs(ya - yb) + std::sqrt(seminorm_sq(za - zb, gen, t, i));
    const double diff = std::abs(fa - fb);
    if (denom < 1e-12) {
      // Arguments agree up to the seminorm's kernel; a genuinely Lipschitz
      // driver must agree too, so a visible gap means an unbounded ratio.
      if (diff <= 1e-12) continue;
      denom = 1e-12;
    }
    rep.max_ratio = std::max(rep.max_ratio, diff / denom);
  }
  rep.ok = rep.max_ratio <= 1.05 * rep.declared + 1e-12;
  return rep;
}

}  // namespace mfbsde
