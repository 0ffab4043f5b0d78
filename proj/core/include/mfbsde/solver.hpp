#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "mfbsde/problem.hpp"

namespace mfbsde {

// Backward solution in Markovian representation: Y_t = u(t) . X_t with the
// canonical row Z_t = u(t). u lives on a uniform grid; between nodes it is
// evaluated by cubic Hermite interpolation whose endpoint slopes come from
// the backward ODE itself (one slope pair per cell, so generator segment
// switches at grid nodes stay exact). The law is reproduced exactly at
// nodes and interpolated the same way with slopes A mu.
class markovian_solution {
 public:
  const std::vector<double>& grid() const { return grid_; }
  const Eigen::MatrixXd& values() const { return u_; }          // (K+1) x N
  const Eigen::MatrixXd& law_values() const { return mu_; }     // (K+1) x N
  int steps() const { return static_cast<int>(grid_.size()) - 1; }
  int num_states() const { return static_cast<int>(u_.cols()); }
  double horizon() const { return grid_.back(); }

  // u(t) as a column vector / z-row; cubic Hermite between nodes.
  Eigen::VectorXd value_at(double t) const;
  void value_at(double t, Eigen::Ref<Eigen::RowVectorXd> out) const;
  Eigen::VectorXd law_at(double t) const;

  double y0(int state) const { return u_(0, state); }

  state_law_path law() const;

  // Advisory flag: set when re-solving at half resolution moved u(0) by
  // more than the requested tolerance.
  bool grid_too_coarse = false;

 private:
  friend class solver_backend;
  std::vector<double> grid_;
  Eigen::MatrixXd u_, mu_;
  // Per-cell endpoint slopes of u (cell k spans [grid_k, grid_{k+1}]).
  Eigen::MatrixXd du_left_, du_right_;  // K x N
  // Per-cell slopes of the law are recomputed from A mu on the fly; the
  // solution keeps its own copy of the generator so it outlives the problem.
  std::shared_ptr<const generator> gen_;
};

struct solve_options {
  // When set, re-solve at half resolution and flag grid_too_coarse if u(0)
  // moves by more than this.
  std::optional<double> coarse_check_tol;
};

// Solves the coupled forward law / backward value system with classical RK4
// on a uniform grid of `steps` cells; the law is computed exactly on the
// half grid so RK4 stages never interpolate it. Throws nonfinite_error if
// the iteration blows up.
markovian_solution solve_markovian(const meanfield_problem& p, int steps,
                                   const solve_options& opts = {});

enum class picard_variant { y_scheme, z_prime_scheme };

struct picard_iteration {
  double u_gap = 0.0;    // sup-norm gap to the previous iterate
  double z_gap = 0.0;    // law-weighted L2 seminorm gap of the z rows
  double ratio = 0.0;    // total gap vs the previous iteration's total gap
};

struct picard_diagnostics {
  std::vector<picard_iteration> iterations;
  bool converged = false;
  picard_variant variant = picard_variant::y_scheme;
  // Filled when record_iterates was requested: u-grids of iterates 1, 2, ...
  std::vector<Eigen::MatrixXd> iterate_values;
};

struct picard_options {
  int max_iter = 60;
  double tol = 1e-9;
  bool record_iterates = false;
  // z_prime_scheme only: starting z-rows on the solution grid ((K+1) x N);
  // defaults to 0. Interpolated linearly where stages need values between
  // nodes (the roughness of the start washes out by contraction).
  std::optional<Eigen::MatrixXd> initial_z;
};

// Picard iteration around the solution's fixed-point characterization. Variant
// y_scheme freezes (y', y) at the previous iterate and keeps both z slots
// current; variant z_prime_scheme freezes only z' and keeps y', y, z
// current. Either way each iteration is one explicit backward ODE solve.
// Iterate 0 is identically zero. Non-convergence within max_iter is
// reported through diagnostics.converged, not an exception.
std::pair<markovian_solution, picard_diagnostics> picard_solve(
    const meanfield_problem& p, int steps, picard_variant variant,
    const picard_options& opts = {});

// Monte Carlo residual of the backward equation along sampled paths:
// R = xi + int_0^T E'[f] ds - int_0^T u dM - Y_0. The dM integral goes
// through martingale_path::stochastic_integral; the E'[f] part is
// tabulated per state on the law grid (Gauss quadrature per cell) since it
// is deterministic given the pre-jump state.
struct residual_stats {
  int n_paths = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double max_abs = 0.0;
  // |mean| <= 3 std_error + budget is the pass condition; the budget covers
  // deterministic discretization error that a z-test cannot average away.
  double budget = 1e-8;
  bool pass() const { return std::abs(mean) <= 3.0 * std_error + budget; }
};
residual_stats residual_check(const markovian_solution& sol, const meanfield_problem& p,
                              int n_paths, std::uint64_t seed);

// Comparison verdict for two problems sharing (generator, mu0, horizon).
// Hypotheses: terminal dominance xi1 >= xi2 componentwise and driver
// dominance f1 >= f2 evaluated at solution-2 arguments on the grid. A
// violated hypothesis is reported here, not thrown: the ordering claim just
// carries no guarantee then.
struct comparison_verdict {
  double min_gap = 0.0;  // min over grid and states of u1 - u2
  bool terminal_ok = true;
  bool driver_ok = true;
  struct driver_violation {
    double t;
    int primed_state;
    int state;
    double f1, f2;
  };
  std::optional<driver_violation> first_driver_violation;
  std::optional<int> first_terminal_violation;  // 0-based state

  bool hypotheses_ok() const { return terminal_ok && driver_ok; }
  bool ordered(double tol = 1e-7) const { return hypotheses_ok() && min_gap >= -tol; }
};
comparison_verdict compare_solutions(const meanfield_problem& p1,
                                     const meanfield_problem& p2, int steps);

}  // namespace mfbsde
