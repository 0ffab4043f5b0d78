#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "mfbsde/chain.hpp"
#include "mfbsde/dsl.hpp"
#include "mfbsde/generator.hpp"

namespace mfbsde {

// Arguments of a mean-field driver evaluation f(t, y', z', y, z). The primed
// slot carries an independent copy of the solution (its state, value and
// z-row); the unprimed slot is the outer one. States are 0-based. The
// generator is passed so state-dependent seminorms of the z rows can be
// evaluated at the right state.
struct driver_args {
  double t;
  int primed_state;
  double y_prime;
  const Eigen::RowVectorXd& z_prime;
  int state;
  double y;
  const Eigen::RowVectorXd& z;
  const generator& gen;
  // Segment to evaluate state-dependent seminorms in; -1 resolves the
  // segment from t. Integrators pass the segment of the cell they are
  // working in so evaluations at cell endpoints that touch a segment
  // boundary stay consistent with that cell's dynamics.
  int segment = -1;
};

struct driver {
  std::function<double(const driver_args&)> eval;
  // Declared Lipschitz constant in (y', z', y, z); 0 means the driver
  // ignores all four slots.
  double lipschitz = 0.0;
  std::string description;
};

// Terminal data: either a payoff vector g (Markovian, Y_T = g . X_T) or a
// bounded functional of the whole trajectory.
struct path_functional {
  std::function<double(const chain_path&)> eval;
  double bound = 0.0;
  std::string description;
};

class terminal_condition {
 public:
  static terminal_condition markovian(Eigen::VectorXd payoff);
  static terminal_condition from_expr(const dsl::expression& expr, int n_states);
  static terminal_condition path_dependent(path_functional f);

  bool is_markovian() const { return markovian_; }
  const Eigen::VectorXd& payoff() const;
  const path_functional& functional() const;
  double evaluate(const chain_path& path) const;

 private:
  bool markovian_ = true;
  Eigen::VectorXd payoff_;
  path_functional functional_;
};

struct meanfield_problem {
  generator gen;
  Eigen::VectorXd mu0;
  terminal_condition terminal;
  driver f;

  int num_states() const { return gen.num_states(); }
  double horizon() const { return gen.horizon(); }
  void validate() const;  // throws dimension_error / simplex_error
};

// E'[f] at time t for outer data (state, y, z): the expectation of
// f(t, X', Y', Z', y, z) over an independent copy with law `law`, where the
// primed solution takes value u_primed[k] in state k. z_rows supplies the
// primed z-row: either a single row shared by every state (the canonical
// Markovian case, where only the seminorm is state-dependent) or one row
// per state.
double meanfield_expectation(const Eigen::VectorXd& law, const Eigen::VectorXd& u_primed,
                             const Eigen::MatrixXd& z_rows, const driver& f, double t,
                             int state, double y, const Eigen::RowVectorXd& z_outer,
                             const generator& gen, int segment = -1);

// Wraps a parsed driver-profile expression. i/ip evaluate 1-based;
// snorm(z) / snorm_p(zp) evaluate through the generator at the outer /
// primed state.
driver make_driver(dsl::expression expr, double lipschitz);

// Named drivers with known closed-form solutions; see closed_form() in
// oracle.hpp. Throws unknown_form_error for anything else.
driver named_driver(const std::string& name);

// sup-norm bound exp((2C+1)T) (|g|_inf + T sup|f(t, 0, 0, 0, 0)|) on the
// solution, from Gronwall applied to the backward representation. For
// path-dependent terminals |g|_inf is the declared functional bound.
double a_priori_bound(const meanfield_problem& p);

// Randomized Lipschitz spot check: draws `n_pairs` pairs of argument tuples
// sharing (t, state, primed state) and returns the largest observed ratio
// |f(a) - f(b)| / (|dy'| + ||dz'||_{i'} + |dy| + ||dz||_i). Callers warn
// when it exceeds the declared constant by more than 5%.
struct lipschitz_report {
  double max_ratio = 0.0;
  double declared = 0.0;
  bool ok = true;
};
lipschitz_report lipschitz_spot_check(const driver& f, const generator& gen,
                                      int n_pairs = 1000, std::uint64_t seed = 20240901);

}  // namespace mfbsde
