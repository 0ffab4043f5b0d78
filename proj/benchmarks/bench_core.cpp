#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "mfbsde/chain.hpp"
#include "mfbsde/generator.hpp"
#include "mfbsde/martingale.hpp"
#include "mfbsde/oracle.hpp"
#include "mfbsde/problem.hpp"
#include "mfbsde/solver.hpp"

namespace {

mfbsde::generator three_state() {
  Eigen::MatrixXd a(3, 3);
  a << -2.0, 1.0, 0.0,
        1.0, -2.0, 1.0,
        1.0, 1.0, -1.0;
  return mfbsde::generator({{0.0, a}}, 1.0);
}

Eigen::VectorXd three_law() {
  Eigen::VectorXd mu(3);
  mu << 0.5, 0.3, 0.2;
  return mu;
}

mfbsde::meanfield_problem nonlinear_problem() {
  Eigen::VectorXd g(3);
  g << 0.5, 1.0, -0.5;
  mfbsde::driver f;
  f.lipschitz = 0.7;
  f.description = "0.4*tanh(yp) - 0.3*y";
  f.eval = [](const mfbsde::driver_args& a) {
    return 0.4 * std::tanh(a.y_prime) - 0.3 * a.y;
  };
  return {three_state(), three_law(), mfbsde::terminal_condition::markovian(g),
          std::move(f)};
}

void bm_transition_matrix(benchmark::State& state) {
  const mfbsde::generator gen = three_state();
  for (auto _ : state) {
    benchmark::DoNotOptimize(mfbsde::transition_matrix(gen, 0.0, 1.0));
  }
}
BENCHMARK(bm_transition_matrix);

void bm_sample_path(benchmark::State& state) {
  const mfbsde::generator gen = three_state();
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mfbsde::sample_path(gen, 0, seed++));
  }
}
BENCHMARK(bm_sample_path);

void bm_martingale_qv(benchmark::State& state) {
  const mfbsde::generator gen = three_state();
  const mfbsde::martingale_path mp(gen, mfbsde::sample_path(gen, 0, 42));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mp.predictable_qv());
  }
}
BENCHMARK(bm_martingale_qv);

void bm_solve_markovian(benchmark::State& state) {
  const mfbsde::meanfield_problem p = nonlinear_problem();
  const int steps = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mfbsde::solve_markovian(p, steps));
  }
}
BENCHMARK(bm_solve_markovian)->Arg(50)->Arg(200)->Arg(800);

void bm_picard_y_scheme(benchmark::State& state) {
  const mfbsde::meanfield_problem p = nonlinear_problem();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        mfbsde::picard_solve(p, 200, mfbsde::picard_variant::y_scheme));
  }
}
BENCHMARK(bm_picard_y_scheme);

void bm_tree_collapsed(benchmark::State& state) {
  const mfbsde::meanfield_problem p = nonlinear_problem();
  const mfbsde::discrete_problem dp =
      mfbsde::discrete_problem::from(p, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mfbsde::tree_solve(dp));
  }
}
BENCHMARK(bm_tree_collapsed)->Arg(8)->Arg(32);

void bm_residual_check(benchmark::State& state) {
  const mfbsde::meanfield_problem p = nonlinear_problem();
  const mfbsde::markovian_solution sol = mfbsde::solve_markovian(p, 200);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mfbsde::residual_check(sol, p, 256, 7));
  }
}
BENCHMARK(bm_residual_check);

}  // namespace

BENCHMARK_MAIN();
