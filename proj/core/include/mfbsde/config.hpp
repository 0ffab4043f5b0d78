#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mfbsde/generator.hpp"
#include "mfbsde/problem.hpp"
#include "mfbsde/solver.hpp"

namespace mfbsde {

// Terminal data as configured: exactly one of the three shapes.
//   payoff        per-state vector g, Y_T = g . X_T
//   expr          terminal-profile expression in (i, n), tabulated per state
//   visits        path functional: `hit` if the trajectory ever occupies
//                 the given state (0-based here, 1-based in the file),
//                 `miss` otherwise
struct terminal_spec {
  struct visit_reward {
    int state = 0;
    double hit = 1.0;
    double miss = 0.0;
  };
  std::optional<Eigen::VectorXd> payoff;
  std::optional<std::string> expr;
  std::optional<visit_reward> visits;
};

// Driver as configured: a named form with a known closed-form solution, or
// an expression with a user-declared Lipschitz constant.
struct driver_spec {
  std::optional<std::string> name;
  std::optional<std::string> expr;
  double lipschitz = 0.0;
};

struct experiment_config {
  // problem
  double horizon = 1.0;
  std::vector<generator_segment> segments;
  Eigen::VectorXd mu0;
  terminal_spec terminal;
  driver_spec driver;

  // solver
  int steps = 200;
  double tol = 1e-9;
  int max_iter = 60;
  picard_variant variant = picard_variant::y_scheme;

  // verify
  int verify_paths = 100000;
  std::uint64_t seed = 12345;

  // compare: overrides defining the second problem (generator, mu0 and
  // horizon are shared by construction)
  std::optional<terminal_spec> compare_terminal;
  std::optional<driver_spec> compare_driver;

  // converge
  std::vector<int> converge_steps{25, 50, 100, 200};
  std::string converge_reference = "fine_grid";  // or "closed_form"
  int reference_steps = 2000;

  // oracle
  std::string oracle_mode = "tree";  // or "closed_form"
  int oracle_steps = 8;
  std::string oracle_form;           // closed-form name when mode demands it

  std::string output_dir = "out";
};

// Parses and schema-checks a config document. Unknown keys, wrong types and
// malformed shapes are rejected with a config_error carrying the JSON
// pointer of the offending node. Numerical validity of the generator / law
// is checked later, by build_problem.
experiment_config parse_config(const std::string& text);
experiment_config load_config(const std::filesystem::path& path);

// Materializes the configured problem (constructing the generator validates
// it). Throws the usual validation errors plus config_error for shapes the
// schema cannot see (expression dimensions, unknown driver names).
meanfield_problem build_problem(const experiment_config& cfg);

// The second problem of a compare run: the base problem with the configured
// terminal / driver overrides applied. Requires at least one override.
meanfield_problem build_compare_problem(const experiment_config& cfg);

}  // namespace mfbsde
