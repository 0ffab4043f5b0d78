#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "mfbsde/solver.hpp"
#include "support/problems.hpp"

using mfbsde::markovian_solution;
using mfbsde::meanfield_problem;
using mfbsde::picard_options;
using mfbsde::picard_variant;
using mfbsde::solve_options;

namespace {

double sup_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// sup over grid nodes and states of |u - reference(t)|
double sup_error(const markovian_solution& sol,
                 const std::function<Eigen::VectorXd(double)>& reference) {
  double worst = 0.0;
  for (int k = 0; k <= sol.steps(); ++k) {
    const double t = sol.grid()[k];
    const Eigen::VectorXd ref = reference(t);
    worst = std::max(worst,
                     (sol.values().row(k).transpose() - ref).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace

TEST_CASE("closed forms at 200 steps") {
  SUBCASE("zero driver: u(t) = P(t,T)^T g") {
    const meanfield_problem p = testsupport::p1_zero_driver();
    const markovian_solution sol = mfbsde::solve_markovian(p, 200);
    const Eigen::VectorXd g = p.terminal.payoff();
    const auto exact = [&](double t) -> Eigen::VectorXd {
      return mfbsde::transition_matrix(p.gen, t, 1.0).transpose() * g;
    };
    CHECK(sup_error(sol, exact) < 1e-8);
    // interpolated points too: worst case is mid-cell
    for (int k = 0; k < 40; ++k) {
      const double t = (k + 0.5) / 40.0;
      CHECK((sol.value_at(t) - exact(t)).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
  SUBCASE("pure mean-field: u = e^{T-t}") {
    const markovian_solution sol =
        mfbsde::solve_markovian(testsupport::p2_pure_meanfield(), 200);
    const auto exact = [](double t) {
      return Eigen::VectorXd::Constant(2, std::exp(1.0 - t)).eval();
    };
    CHECK(sup_error(sol, exact) < 1e-8);
  }
  SUBCASE("linear decay: u = 2 e^{-(T-t)}") {
    const markovian_solution sol =
        mfbsde::solve_markovian(testsupport::p3_linear_decay(), 200);
    const auto exact = [](double t) {
      return Eigen::VectorXd::Constant(2, 2.0 * std::exp(t - 1.0)).eval();
    };
    CHECK(sup_error(sol, exact) < 1e-8);
  }
}

TEST_CASE("law on the solution grid matches the pushed-forward law") {
  const meanfield_problem p = testsupport::p7_two_segments();
  const markovian_solution sol = mfbsde::solve_markovian(p, 64);
  const mfbsde::state_law_path lp = mfbsde::evolve_law(p.gen, p.mu0, sol.grid());
  for (int k = 0; k <= sol.steps(); ++k)
    CHECK((sol.law_values().row(k).transpose() - lp.laws[k]).cwiseAbs().maxCoeff() <
          1e-12);

  const mfbsde::state_law_path own = sol.law();
  REQUIRE(own.grid.size() == sol.grid().size());
  for (std::size_t k = 0; k < own.grid.size(); ++k) {
    CHECK(own.grid[k] == sol.grid()[k]);
    CHECK((own.laws[k].transpose() - sol.law_values().row(k)).cwiseAbs().maxCoeff() ==
          0.0);
  }
}

TEST_CASE("interpolation between nodes") {
  const meanfield_problem p = testsupport::p4_tanh_sin();
  const markovian_solution coarse = mfbsde::solve_markovian(p, 100);
  const markovian_solution fine = mfbsde::solve_markovian(p, 1600);

  SUBCASE("nodes reproduce grid values exactly") {
    for (int k = 0; k <= coarse.steps(); ++k)
      CHECK((coarse.value_at(coarse.grid()[k]).transpose() - coarse.values().row(k))
                .cwiseAbs()
                .maxCoeff() < 1e-14);
  }
  SUBCASE("mid-cell values track a much finer solve") {
    for (int j = 0; j < 25; ++j) {
      const double t = (16 * (4 * j) + 8) / 1600.0;  // coarse mid-cell, fine node
      CHECK((coarse.value_at(t) - fine.value_at(t)).cwiseAbs().maxCoeff() < 1e-7);
    }
  }
  SUBCASE("interpolated law stays a probability vector") {
    for (int j = 0; j < 50; ++j) {
      const double t = (j + 0.3) / 50.0;
      const Eigen::VectorXd mu = coarse.law_at(t);
      CHECK(mu.minCoeff() >= 0.0);
      CHECK(mu.sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  SUBCASE("evaluation outside the horizon throws") {
    CHECK_THROWS_AS(coarse.value_at(-0.01), mfbsde::domain_error);
    CHECK_THROWS_AS(coarse.value_at(1.01), mfbsde::domain_error);
    CHECK_THROWS_AS(coarse.law_at(1.01), mfbsde::domain_error);
  }
}

TEST_CASE("fourth-order half-grid convergence on a smooth problem") {
  const meanfield_problem p = testsupport::p4_tanh_sin();
  const markovian_solution ref = mfbsde::solve_markovian(p, 1600);
  std::vector<double> errs;
  for (const int steps : {25, 50, 100}) {
    const markovian_solution sol = mfbsde::solve_markovian(p, steps);
    errs.push_back(
        (sol.values().row(0) - ref.values().row(0)).cwiseAbs().maxCoeff());
  }
  for (std::size_t k = 0; k + 1 < errs.size(); ++k) {
    const double ratio = errs[k] / errs[k + 1];
    CHECK(ratio >= 12.0);
    CHECK(ratio <= 20.0);
  }
}

TEST_CASE("picard iterates reproduce the exponential's Taylor tail") {
  // f = y', terminal 1: iterate n is the degree-(n-1) Taylor polynomial of
  // e^{T-t} and the sup gap between consecutive iterates is 1/(n-1)!.
  const meanfield_problem p = testsupport::p2_pure_meanfield();
  picard_options opts;
  opts.record_iterates = true;
  opts.max_iter = 10;
  opts.tol = 1e-14;
  const auto [sol, diag] =
      mfbsde::picard_solve(p, 200, picard_variant::y_scheme, opts);
  REQUIRE(diag.iterate_values.size() >= 8);

  for (int n = 1; n <= 8; ++n) {
    const Eigen::MatrixXd& iter_u = diag.iterate_values[n - 1];
    double worst = 0.0;
    for (int k = 0; k <= 200; ++k) {
      const double tau = 1.0 - sol.grid()[k];
      double partial = 0.0, term = 1.0;
      for (int m = 0; m < n; ++m) {
        partial += term;
        term *= tau / (m + 1);
      }
      worst = std::max(worst, std::abs(iter_u(k, 0) - partial));
      worst = std::max(worst, std::abs(iter_u(k, 1) - partial));
    }
    CHECK(worst < 1e-8);
  }

  double factorial = 1.0;
  for (int n = 1; n <= 8; ++n) {
    CHECK(diag.iterations[n - 1].u_gap ==
          doctest::Approx(1.0 / factorial).epsilon(1e-7));
    factorial *= n;
  }

  // contraction envelope (T = 1, C = 1, c = 2C + 1 + 2C^2 + 1): gaps sit far
  // below gap_1 c^{n-1} e^c / (n-1)!
  const double c = 6.0;
  const double gap1 = diag.iterations[0].u_gap + diag.iterations[0].z_gap;
  double env = gap1 * std::exp(c);
  factorial = 1.0;
  for (std::size_t n = 1; n <= diag.iterations.size(); ++n) {
    const double gap = diag.iterations[n - 1].u_gap + diag.iterations[n - 1].z_gap;
    CHECK(gap <= env * std::pow(c, n - 1) / factorial * (1.0 + 1e-12));
    factorial *= static_cast<double>(n);
  }
}

TEST_CASE("picard converges and reports factorial-type ratio decay") {
  const auto [sol, diag] = mfbsde::picard_solve(testsupport::p2_pure_meanfield(),
                                                200, picard_variant::y_scheme);
  CHECK(diag.converged);
  REQUIRE(diag.iterations.size() >= 4);
  const auto& it = diag.iterations;
  CHECK(it[it.size() - 2].ratio < it[1].ratio);
  CHECK(sup_error(sol, [](double t) {
          return Eigen::VectorXd::Constant(2, std::exp(1.0 - t)).eval();
        }) < 1e-8);
}

TEST_CASE("picard variants and the direct solve agree on every suite problem") {
  const auto problems = testsupport::acceptance_problems();
  picard_options opts;
  opts.tol = 1e-11;
  for (std::size_t k = 0; k < problems.size(); ++k) {
    CAPTURE(testsupport::acceptance_problem_name(k));
    const meanfield_problem& p = problems[k];
    const markovian_solution direct = mfbsde::solve_markovian(p, 200);
    const auto [y_sol, y_diag] =
        mfbsde::picard_solve(p, 200, picard_variant::y_scheme, opts);
    const auto [z_sol, z_diag] =
        mfbsde::picard_solve(p, 200, picard_variant::z_prime_scheme, opts);
    CHECK(y_diag.converged);
    CHECK(z_diag.converged);
    CHECK(sup_diff(direct.values(), y_sol.values()) < 1e-8);
    CHECK(sup_diff(direct.values(), z_sol.values()) < 1e-8);
    CHECK(sup_diff(y_sol.values(), z_sol.values()) < 1e-8);
  }
}

TEST_CASE("z-prime scheme lands on the same solution from any start") {
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> entry(-1.0, 1.0);
  std::vector<meanfield_problem> problems;
  problems.push_back(testsupport::p5_seminorm_driver());
  problems.push_back(testsupport::p6_primed_seminorm());
  for (int k = 0; k < 4; ++k)
    problems.push_back(testsupport::random_lipschitz_problem(rng));

  const int steps = 100;
  picard_options opts;
  opts.tol = 1e-11;
  for (std::size_t k = 0; k < problems.size(); ++k) {
    CAPTURE(k);
    const meanfield_problem& p = problems[k];
    const auto [from_zero, diag0] =
        mfbsde::picard_solve(p, steps, picard_variant::z_prime_scheme, opts);
    CHECK(diag0.converged);
    for (int trial = 0; trial < 2; ++trial) {
      picard_options seeded = opts;
      Eigen::MatrixXd z0(steps + 1, p.num_states());
      for (Eigen::Index r = 0; r < z0.rows(); ++r)
        for (Eigen::Index c = 0; c < z0.cols(); ++c) z0(r, c) = entry(rng);
      seeded.initial_z = std::move(z0);
      const auto [seeded_sol, diag] =
          mfbsde::picard_solve(p, steps, picard_variant::z_prime_scheme, seeded);
      CHECK(diag.converged);
      CHECK(sup_diff(from_zero.values(), seeded_sol.values()) < 1e-8);
    }
  }
}

TEST_CASE("picard option validation and non-convergence reporting") {
  const meanfield_problem p = testsupport::p4_tanh_sin();

  picard_options bad_shape;
  bad_shape.initial_z = Eigen::MatrixXd::Zero(5, 2);
  CHECK_THROWS_AS(
      mfbsde::picard_solve(p, 100, picard_variant::z_prime_scheme, bad_shape),
      mfbsde::dimension_error);

  picard_options zero_iter;
  zero_iter.max_iter = 0;
  CHECK_THROWS_AS(mfbsde::picard_solve(p, 100, picard_variant::y_scheme, zero_iter),
                  mfbsde::domain_error);

  picard_options strangled;
  strangled.max_iter = 2;
  strangled.tol = 1e-15;
  const auto [sol, diag] =
      mfbsde::picard_solve(p, 100, picard_variant::y_scheme, strangled);
  CHECK(!diag.converged);
  CHECK(diag.iterations.size() == 2);
}

TEST_CASE("coarse-grid advisory flag") {
  const meanfield_problem p = testsupport::p4_tanh_sin();
  solve_options tight;
  tight.coarse_check_tol = 1e-12;
  CHECK(mfbsde::solve_markovian(p, 10, tight).grid_too_coarse);
  solve_options loose;
  loose.coarse_check_tol = 1e-3;
  CHECK(!mfbsde::solve_markovian(p, 200, loose).grid_too_coarse);
  CHECK(!mfbsde::solve_markovian(p, 10).grid_too_coarse);  // off by default
}

TEST_CASE("residual check is pathwise exact when z vanishes") {
  // constant-in-state solutions never charge the martingale term
  const meanfield_problem p = testsupport::p3_linear_decay();
  const markovian_solution sol = mfbsde::solve_markovian(p, 400);
  const mfbsde::residual_stats res = mfbsde::residual_check(sol, p, 500, 99);
  CHECK(res.n_paths == 500);
  CHECK(res.max_abs <= 1e-8);
  CHECK(res.pass());
}

TEST_CASE("residual check passes on nonlinear problems") {
  for (auto make : {&testsupport::p4_tanh_sin, &testsupport::p8_absorbing}) {
    const meanfield_problem p = make();
    const markovian_solution sol = mfbsde::solve_markovian(p, 200);
    const mfbsde::residual_stats res = mfbsde::residual_check(sol, p, 4000, 2024);
    CHECK(res.pass());
    CHECK(res.std_error > 0.0);
    CHECK(res.max_abs < 10.0 * mfbsde::a_priori_bound(p));
  }
}

TEST_CASE("residual check input validation") {
  const meanfield_problem p = testsupport::p3_linear_decay();
  const markovian_solution sol = mfbsde::solve_markovian(p, 50);
  CHECK_THROWS_AS(mfbsde::residual_check(sol, p, 1, 7), mfbsde::domain_error);
}

TEST_CASE("comparison: dominated data gives ordered solutions") {
  const meanfield_problem hi = testsupport::p3_linear_decay();
  meanfield_problem lo = testsupport::p3_linear_decay();
  lo.terminal = mfbsde::terminal_condition::markovian(testsupport::vec2(1.5, 1.8));

  const mfbsde::comparison_verdict v = mfbsde::compare_solutions(hi, lo, 200);
  CHECK(v.terminal_ok);
  CHECK(v.driver_ok);
  CHECK(v.hypotheses_ok());
  CHECK(v.min_gap > 0.0);
  CHECK(v.ordered());

  // swapped arguments violate terminal dominance and report the state
  const mfbsde::comparison_verdict swapped = mfbsde::compare_solutions(lo, hi, 200);
  CHECK(!swapped.terminal_ok);
  REQUIRE(swapped.first_terminal_violation.has_value());
  CHECK(!swapped.ordered());
}

TEST_CASE("comparison: driver domination failures are reported with context") {
  meanfield_problem small = testsupport::p2_pure_meanfield();
  small.f = mfbsde::named_driver("zero");
  const meanfield_problem big = testsupport::p2_pure_meanfield();

  // f1 = 0 < f2 = y' along solution 2, so the hypothesis fails
  const mfbsde::comparison_verdict v = mfbsde::compare_solutions(small, big, 100);
  CHECK(v.terminal_ok);
  CHECK(!v.driver_ok);
  REQUIRE(v.first_driver_violation.has_value());
  CHECK(v.first_driver_violation->f2 > v.first_driver_violation->f1);
  CHECK(v.first_driver_violation->t >= 0.0);
  CHECK(v.first_driver_violation->t <= 1.0);
  CHECK(!v.ordered());
}

TEST_CASE("comparison requires shared chain data and Markovian terminals") {
  const meanfield_problem a = testsupport::p2_pure_meanfield();
  CHECK_THROWS_AS(
      mfbsde::compare_solutions(a, testsupport::p1_zero_driver(), 100),
      mfbsde::domain_error);

  meanfield_problem shifted = testsupport::p2_pure_meanfield();
  shifted.mu0 = testsupport::vec2(0.9, 0.1);
  CHECK_THROWS_AS(mfbsde::compare_solutions(a, shifted, 100), mfbsde::domain_error);

  meanfield_problem pathdep = testsupport::p2_pure_meanfield();
  mfbsde::path_functional jumps;
  jumps.bound = 1.0;
  jumps.eval = [](const mfbsde::chain_path&) { return 1.0; };
  pathdep.terminal = mfbsde::terminal_condition::path_dependent(jumps);
  CHECK_THROWS_AS(mfbsde::compare_solutions(a, pathdep, 100), mfbsde::domain_error);
}

TEST_CASE("comparison: random dominated pairs are ordered") {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 10; ++trial) {
    const auto [p_hi, p_lo] = testsupport::random_ordered_pair(rng);
    const mfbsde::comparison_verdict v = mfbsde::compare_solutions(p_hi, p_lo, 100);
    CAPTURE(trial);
    CHECK(v.hypotheses_ok());
    CHECK(v.ordered());
  }
}
