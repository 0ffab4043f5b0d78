#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mfbsde/chain.hpp"
#include "mfbsde/generator.hpp"

namespace mfbsde {

// JSON round trips for the core value types. Indices serialized 1-based to
// match the e_1..e_N naming (internal representation is 0-based).
std::string generator_to_json(const generator& gen);
generator generator_from_json(const std::string& text);

std::string law_path_to_json(const state_law_path& lp);
state_law_path law_path_from_json(const std::string& text, double horizon_hint = -1.0);

std::string chain_path_to_json(const chain_path& path);
chain_path chain_path_from_json(const std::string& text);

// CSV with the jump schema (jump_time,new_state), states 1-based.
std::string chain_path_to_csv(const chain_path& path);

// Doubles formatted with "%.17g": shortest form that round-trips exactly and
// stays byte-stable across runs.
std::string format_double(double v);

// Minimal deterministic CSV assembly.
class csv_writer {
 public:
  explicit csv_writer(std::vector<std::string> columns);
  void add_row(std::vector<std::string> cells);  // throws dimension_error
  const std::string& str() const { return body_; }

 private:
  std::size_t n_cols_;
  std::string body_;
};

// Writes via a temp file + rename so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace mfbsde
