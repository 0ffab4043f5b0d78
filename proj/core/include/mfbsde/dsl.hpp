#pragma once

#include <memory>
#include <string>

#include "mfbsde/errors.hpp"

namespace mfbsde::dsl {

struct node;
using node_ptr = std::shared_ptr<const node>;

// Which variable set and function set an expression may use.
//
// driver profile: variables t, y, yp, i, ip, z1..zN, zp1..zpN, snorm(z),
// snorm_p(zp); functions min, max, abs, sin, cos, tanh. Unbounded functions
// (exp, sqrt, pow) are deliberately rejected so parsed drivers stay
// plausibly Lipschitz.
//
// terminal profile: variables i, n; adds exp, sqrt, pow to the functions.
// Terminal payoffs only need to be bounded, so the wider set is safe there.
enum class profile { driver, terminal };

// Values an expression is evaluated against. i and ip are 1-based (they
// name the states e_1..e_N). z/zp point at N-component rows; snorm_z and
// snorm_zp carry the seminorm values of z at the outer state and zp at the
// primed state, precomputed by the caller when the expression uses them.
struct eval_values {
  double t = 0.0;
  double y = 0.0;
  double yp = 0.0;
  double i = 1.0;
  double ip = 1.0;
  const double* z = nullptr;
  const double* zp = nullptr;
  double snorm_z = 0.0;
  double snorm_zp = 0.0;
  double n = 0.0;
};

// A parsed expression. Immutable; cheap to copy.
class expression {
 public:
  expression() = default;

  double evaluate(const eval_values& v) const;

  // Round-trips: parse(format()) reproduces the same tree.
  std::string format() const;

  bool uses_snorm_z() const { return uses_snorm_z_; }
  bool uses_snorm_zp() const { return uses_snorm_zp_; }
  // Highest z_k / zp_k component referenced (0 when none).
  int max_z_index() const { return max_z_index_; }
  int max_zp_index() const { return max_zp_index_; }

  bool operator==(const expression& other) const;

  friend expression parse(const std::string& text, profile p, int n_states);

 private:
  node_ptr root_;
  bool uses_snorm_z_ = false;
  bool uses_snorm_zp_ = false;
  int max_z_index_ = 0;
  int max_zp_index_ = 0;
};

// Parses `text` under the given profile. n_states bounds the z/zp component
// indices for the driver profile (pass 0 to accept any index and check it
// later against max_z_index()). Throws syntax_error with the byte position
// and the expected-token description, or unknown_variable_error for
// identifiers outside the profile's variable set.
expression parse(const std::string& text, profile p, int n_states = 0);

inline expression parse_driver_expr(const std::string& text, int n_states = 0) {
  return parse(text, profile::driver, n_states);
}
inline expression parse_terminal_expr(const std::string& text) {
  return parse(text, profile::terminal, 0);
}

}  // namespace mfbsde::dsl
