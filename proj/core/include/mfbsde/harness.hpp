#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace mfbsde {

// Command-line overrides layered on top of the config file.
struct run_overrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::optional<std::string> variant;  // "y" or "zprime"
};

inline constexpr int exit_success = 0;
inline constexpr int exit_internal_error = 1;
inline constexpr int exit_validation_failure = 2;

// Runs one subcommand (solve | picard | verify | compare | converge |
// oracle) against a config file, writing CSV artifacts plus manifest.json
// into the output directory. Returns the process exit status: 0 on success,
// 2 when validation or a verified hypothesis fails (bad config, Monte Carlo
// statistic outside 3 sigma, comparison violation, tree cap, Picard not
// converged), 1 on internal errors (numerical blowup, I/O).
int run(const std::string& config_path, const std::string& subcommand,
        const run_overrides& overrides = {});

}  // namespace mfbsde
