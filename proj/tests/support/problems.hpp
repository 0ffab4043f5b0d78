#pragma once

// Shared test problems. All eight have Markovian terminals so every grid
// solver, oracle and residual check can run on the full set.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mfbsde/dsl.hpp"
#include "mfbsde/generator.hpp"
#include "mfbsde/problem.hpp"

namespace testsupport {

inline Eigen::MatrixXd flip_rates(double rate = 1.0) {
  Eigen::MatrixXd a(2, 2);
  a << -rate, rate, rate, -rate;
  return a;
}

inline mfbsde::generator flip_chain(double horizon = 1.0) {
  return mfbsde::generator({{0.0, flip_rates()}}, horizon);
}

inline mfbsde::generator three_state_chain(double horizon = 1.0) {
  Eigen::MatrixXd a(3, 3);
  a << -2.0, 1.0, 0.0,
        1.0, -2.0, 1.0,
        1.0, 1.0, -1.0;
  return mfbsde::generator({{0.0, a}}, horizon);
}

inline Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

inline Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

inline mfbsde::driver expr_driver(const std::string& text, double lipschitz, int n) {
  return mfbsde::make_driver(mfbsde::dsl::parse_driver_expr(text, n), lipschitz);
}

// 1: linear problem with no driver, N = 3; closed form u(t) = P(t,T)^T g.
inline mfbsde::meanfield_problem p1_zero_driver() {
  return {three_state_chain(), vec3(0.5, 0.3, 0.2),
          mfbsde::terminal_condition::markovian(vec3(1.0, -1.0, 0.5)),
          mfbsde::named_driver("zero")};
}

// 2: f = y', constant terminal 1; closed form u_i(t) = e^{T-t}.
inline mfbsde::meanfield_problem p2_pure_meanfield() {
  return {flip_chain(), vec2(0.5, 0.5),
          mfbsde::terminal_condition::markovian(vec2(1.0, 1.0)),
          mfbsde::named_driver("pure_meanfield")};
}

// 3: f = -y, constant terminal 2; closed form u_i(t) = 2 e^{-(T-t)}.
inline mfbsde::meanfield_problem p3_linear_decay() {
  return {flip_chain(), vec2(0.5, 0.5),
          mfbsde::terminal_condition::markovian(vec2(2.0, 2.0)),
          mfbsde::named_driver("linear_decay")};
}

// 4: smooth nonlinearity in (y', y).
inline mfbsde::meanfield_problem p4_tanh_sin() {
  return {flip_chain(), vec2(0.5, 0.5),
          mfbsde::terminal_condition::markovian(vec2(1.0, -1.0)),
          expr_driver("0.5*tanh(yp) + 0.3*sin(y)", 0.8, 2)};
}

// 5: driver touching the z seminorm, N = 3.
inline mfbsde::meanfield_problem p5_seminorm_driver() {
  return {three_state_chain(), vec3(0.5, 0.3, 0.2),
          mfbsde::terminal_condition::markovian(vec3(0.5, 1.0, -0.5)),
          expr_driver("0.4*tanh(snorm(z)) - 0.2*y + 0.1*cos(t)*yp", 0.4, 3)};
}

// 6: driver touching the primed z seminorm on an asymmetric chain.
inline mfbsde::meanfield_problem p6_primed_seminorm() {
  Eigen::MatrixXd a(2, 2);
  a << -2.0, 0.5,
        2.0, -0.5;
  return {mfbsde::generator({{0.0, a}}, 1.0), vec2(0.5, 0.5),
          mfbsde::terminal_condition::markovian(vec2(2.0, 0.5)),
          expr_driver("0.3*tanh(snorm_p(zp)) + 0.3*tanh(yp)", 0.3, 2)};
}

// 7: two generator segments with a rate switch at t = 0.5.
inline mfbsde::meanfield_problem p7_two_segments() {
  Eigen::MatrixXd b(2, 2);
  b << -0.5, 2.0,
        0.5, -2.0;
  mfbsde::generator gen({{0.0, flip_rates()}, {0.5, b}}, 1.0);
  return {std::move(gen), vec2(0.4, 0.6),
          mfbsde::terminal_condition::markovian(vec2(1.0, 2.0)),
          expr_driver("-0.5*y", 0.5, 2)};
}

// 8: absorbing second state and a kinked driver.
inline mfbsde::meanfield_problem p8_absorbing() {
  Eigen::MatrixXd a(2, 2);
  a << -1.0, 0.0,
        1.0, 0.0;
  return {mfbsde::generator({{0.0, a}}, 1.0), vec2(0.7, 0.3),
          mfbsde::terminal_condition::markovian(vec2(1.0, 0.0)),
          expr_driver("0.5*max(y, 0)", 0.5, 2)};
}

inline std::vector<mfbsde::meanfield_problem> acceptance_problems() {
  std::vector<mfbsde::meanfield_problem> out;
  out.push_back(p1_zero_driver());
  out.push_back(p2_pure_meanfield());
  out.push_back(p3_linear_decay());
  out.push_back(p4_tanh_sin());
  out.push_back(p5_seminorm_driver());
  out.push_back(p6_primed_seminorm());
  out.push_back(p7_two_segments());
  out.push_back(p8_absorbing());
  return out;
}

inline const char* acceptance_problem_name(std::size_t k) {
  static const char* names[] = {
      "zero_driver",    "pure_meanfield", "linear_decay",    "tanh_sin",
      "seminorm_driver", "primed_seminorm", "two_segments", "absorbing",
  };
  return names[k];
}

// Random valid generator with off-diagonal rates U[0, max_rate].
inline mfbsde::generator random_generator(std::mt19937_64& rng, int n, int n_segments,
                                          double horizon, double max_rate = 3.0) {
  std::uniform_real_distribution<double> rate(0.0, max_rate);
  std::vector<mfbsde::generator_segment> segs;
  for (int s = 0; s < n_segments; ++s) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int col = 0; col < n; ++col) {
      double total = 0.0;
      for (int row = 0; row < n; ++row) {
        if (row == col) continue;
        const double r = rate(rng);
        a(row, col) = r;
        total += r;
      }
      a(col, col) = -total;
    }
    segs.push_back({horizon * s / n_segments, std::move(a)});
  }
  return mfbsde::generator(std::move(segs), horizon);
}

inline Eigen::VectorXd random_simplex(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  Eigen::VectorXd mu(n);
  for (int i = 0; i < n; ++i) mu[i] = unit(rng);
  mu /= mu.sum();
  return mu;
}

// Smooth driver with slot coefficients (a, b, c) for (y', y, ||z||); the
// sum-form Lipschitz constant is max(|a|, |b|, |c|).
struct random_driver_coeffs {
  double a, b, c;
};

inline mfbsde::driver random_lipschitz_driver(std::mt19937_64& rng,
                                              double max_coeff = 0.8) {
  std::uniform_real_distribution<double> coeff(-max_coeff, max_coeff);
  const random_driver_coeffs k{coeff(rng), coeff(rng), coeff(rng)};
  mfbsde::driver f;
  f.lipschitz = std::max({std::abs(k.a), std::abs(k.b), std::abs(k.c)});
  f.description = "random tanh/sin/seminorm driver";
  f.eval = [k](const mfbsde::driver_args& arg) {
    const std::size_t seg = arg.segment >= 0
                                ? static_cast<std::size_t>(arg.segment)
                                : arg.gen.segment_index(arg.t);
    const double zn =
        std::sqrt(mfbsde::seminorm_sq_in_segment(arg.z, arg.gen, seg, arg.state));
    return k.a * std::tanh(arg.y_prime) + k.b * std::sin(arg.y) +
           k.c * std::tanh(zn);
  };
  return f;
}

// Random problem with Lipschitz constant <= max_coeff and bounded terminal.
inline mfbsde::meanfield_problem random_lipschitz_problem(std::mt19937_64& rng,
                                                          double max_coeff = 0.8) {
  std::uniform_int_distribution<int> states(2, 4);
  std::uniform_int_distribution<int> n_segs(1, 2);
  std::uniform_real_distribution<double> payoff(-2.0, 2.0);
  const int n = states(rng);
  mfbsde::generator gen = random_generator(rng, n, n_segs(rng), 1.0, 2.0);
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i) g[i] = payoff(rng);
  Eigen::VectorXd mu0 = random_simplex(rng, n);
  return {std::move(gen), std::move(mu0),
          mfbsde::terminal_condition::markovian(std::move(g)),
          random_lipschitz_driver(rng, max_coeff)};
}

// Ordered pair for comparison runs: problem 1 dominates problem 2 through a
// nonnegative terminal bump and a nonnegative driver offset.
inline std::pair<mfbsde::meanfield_problem, mfbsde::meanfield_problem>
random_ordered_pair(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> bump(0.0, 1.0);
  mfbsde::meanfield_problem p2 = random_lipschitz_problem(rng, 0.6);

  Eigen::VectorXd g1 = p2.terminal.payoff();
  for (Eigen::Index i = 0; i < g1.size(); ++i) g1[i] += bump(rng);

  const double d0 = 0.5 * bump(rng);
  const double d1 = 0.5 * bump(rng);
  mfbsde::driver f1;
  f1.lipschitz = p2.f.lipschitz;
  f1.description = "dominating driver";
  f1.eval = [base = p2.f.eval, d0, d1](const mfbsde::driver_args& a) {
    return base(a) + d0 + d1 * (1.0 + std::cos(3.0 * a.t)) / 2.0;
  };

  mfbsde::meanfield_problem p1{p2.gen, p2.mu0,
                               mfbsde::terminal_condition::markovian(std::move(g1)),
                               std::move(f1)};
  return {std::move(p1), std::move(p2)};
}

}  // namespace testsupport
