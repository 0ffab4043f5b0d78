#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfbsde {

// Base class for every failure this library reports deliberately.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Structural problems with inputs: mismatched sizes, N < 2, non-square rate
// matrices, a path that does not fit the generator, and the like.
class dimension_error : public error {
 public:
  using error::error;
};

// A scalar argument outside its admissible range (t outside [0, horizon],
// s > t, state index out of range, nonpositive step counts...).
class domain_error : public error {
 public:
  using error::error;
};

// Generator validation failures. Indices stored here are 0-based; messages
// render them 1-based to match the e_1..e_N state naming used everywhere
// user-facing.
class generator_error : public error {
 public:
  using error::error;
};

class column_sum_error : public generator_error {
 public:
  column_sum_error(std::size_t segment_, int column_, double sum_)
      : generator_error("rate matrix column " + std::to_string(column_ + 1) +
                        " of segment " + std::to_string(segment_ + 1) +
                        " sums to " + std::to_string(sum_) + ", expected 0"),
        segment(segment_),
        column(column_),
        sum(sum_) {}
  std::size_t segment;
  int column;  // 0-based
  double sum;
};

class negative_off_diagonal_error : public generator_error {
 public:
  negative_off_diagonal_error(std::size_t segment_, int row_, int column_, double value_)
      : generator_error("rate matrix entry (" + std::to_string(row_ + 1) + "," +
                        std::to_string(column_ + 1) + ") of segment " +
                        std::to_string(segment_ + 1) + " is " +
                        std::to_string(value_) + "; off-diagonal rates must be >= 0"),
        segment(segment_),
        row(row_),
        column(column_),
        value(value_) {}
  std::size_t segment;
  int row;     // 0-based
  int column;  // 0-based
  double value;
};

class bad_segment_times_error : public generator_error {
 public:
  using generator_error::generator_error;
};

// A probability vector failed the simplex check (negative entry or sum far
// from 1).
class simplex_error : public error {
 public:
  using error::error;
};

// A numeric computation produced NaN or infinity.
class nonfinite_error : public error {
 public:
  using error::error;
};

// Path enumeration would exceed the node budget.
class tree_too_large_error : public error {
 public:
  tree_too_large_error(int num_states_, int steps_, double nodes_, double cap_)
      : error("path tree with " + std::to_string(num_states_) + " states and " +
              std::to_string(steps_) + " steps has ~" + std::to_string(nodes_) +
              " leaves, over the cap of " + std::to_string(cap_)),
        num_states(num_states_),
        steps(steps_),
        nodes(nodes_),
        cap(cap_) {}
  int num_states;
  int steps;
  double nodes;
  double cap;
};

// Request for a closed form this library does not know.
class unknown_form_error : public error {
 public:
  using error::error;
};

// Expression-parsing failures carry the byte offset of the offending token.
class parse_error : public error {
 public:
  parse_error(const std::string& message, std::size_t position_)
      : error(message + " (at position " + std::to_string(position_) + ")"),
        position(position_) {}
  std::size_t position;
};

class syntax_error : public parse_error {
 public:
  syntax_error(std::size_t position_, const std::string& expected_)
      : parse_error("syntax error: expected " + expected_, position_),
        expected(expected_) {}
  std::string expected;
};

class unknown_variable_error : public parse_error {
 public:
  unknown_variable_error(const std::string& name_, std::size_t position_)
      : parse_error("unknown variable '" + name_ + "'", position_), name(name_) {}
  std::string name;
};

// Config-file problems; `pointer` is a JSON pointer to the offending node.
class config_error : public error {
 public:
  config_error(const std::string& pointer_, const std::string& message)
      : error("config error at " + pointer_ + ": " + message), pointer(pointer_) {}
  std::string pointer;
};

}  // namespace mfbsde
