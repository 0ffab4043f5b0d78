#include "mfbsde/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mfbsde/config.hpp"
#include "mfbsde/detail/rng.hpp"
#include "mfbsde/io.hpp"
#include "mfbsde/martingale.hpp"
#include "mfbsde/oracle.hpp"
#include "mfbsde/solver.hpp"
#include "mfbsde/version.hpp"

namespace mfbsde {

using nlohmann::json;

namespace {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct run_context {
  experiment_config cfg;
  std::string subcommand;
  std::string config_hash;
  std::filesystem::path out;
};

void write_manifest(const run_context& ctx) {
  json m;
  m["subcommand"] = ctx.subcommand;
  m["config_hash"] = ctx.config_hash;
  m["seed"] = ctx.cfg.seed;
  m["steps"] = ctx.cfg.steps;
  m["paths"] = ctx.cfg.verify_paths;
  m["variant"] = ctx.cfg.variant == picard_variant::y_scheme ? "y" : "zprime";
  m["versions"]["mfbsde"] = version_string;
  m["versions"]["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                           std::to_string(EIGEN_MAJOR_VERSION) + "." +
                           std::to_string(EIGEN_MINOR_VERSION);
  write_file_atomic(ctx.out / "manifest.json", m.dump(2) + "\n");
}

// Builds the configured problem and warns (stderr only) when a sampled
// Lipschitz ratio of an expression driver exceeds its declared constant.
meanfield_problem make_problem(const experiment_config& cfg) {
  meanfield_problem p = build_problem(cfg);
  if (cfg.driver.expr) {
    const lipschitz_report rep = lipschitz_spot_check(p.f, p.gen);
    if (!rep.ok) {
      std::fprintf(stderr,
                   "warning: observed driver Lipschitz ratio %.6g exceeds the "
                   "declared constant %.6g\n",
                   rep.max_ratio, rep.declared);
    }
  }
  return p;
}

void write_solution_csv(const run_context& ctx, const markovian_solution& sol,
                        const char* name = "solution.csv") {
  csv_writer w({"t", "state", "u", "mu"});
  const auto& grid = sol.grid();
  const auto& u = sol.values();
  const auto& mu = sol.law_values();
  for (int k = 0; k <= sol.steps(); ++k) {
    for (int i = 0; i < sol.num_states(); ++i) {
      w.add_row({format_double(grid[static_cast<std::size_t>(k)]),
                 std::to_string(i + 1), format_double(u(k, i)),
                 format_double(mu(k, i))});
    }
  }
  write_file_atomic(ctx.out / name, w.str());
}

int run_solve(const run_context& ctx) {
  const meanfield_problem p = make_problem(ctx.cfg);
  const markovian_solution sol = solve_markovian(p, ctx.cfg.steps);
  write_solution_csv(ctx, sol);
  return exit_success;
}

int run_picard(const run_context& ctx) {
  const meanfield_problem p = make_problem(ctx.cfg);
  picard_options opts;
  opts.max_iter = ctx.cfg.max_iter;
  opts.tol = ctx.cfg.tol;
  const auto [sol, diag] = picard_solve(p, ctx.cfg.steps, ctx.cfg.variant, opts);
  write_solution_csv(ctx, sol);

  csv_writer w({"iteration", "u_gap", "z_gap", "ratio"});
  for (std::size_t k = 0; k < diag.iterations.size(); ++k) {
    const auto& it = diag.iterations[k];
    w.add_row({std::to_string(k + 1), format_double(it.u_gap),
               format_double(it.z_gap), format_double(it.ratio)});
  }
  write_file_atomic(ctx.out / "diagnostics.csv", w.str());

  if (!diag.converged) {
    std::fprintf(stderr, "picard iteration did not reach tol %.3g in %d iterations\n",
                 ctx.cfg.tol, ctx.cfg.max_iter);
    return exit_validation_failure;
  }
  return exit_success;
}

int run_verify(const run_context& ctx) {
  const meanfield_problem p = make_problem(ctx.cfg);
  const markovian_solution sol = solve_markovian(p, ctx.cfg.steps);

  const std::vector<battery_row> rows =
      martingale_battery(p.gen, p.mu0, ctx.cfg.verify_paths, ctx.cfg.seed);
  const residual_stats res =
      residual_check(sol, p, ctx.cfg.verify_paths, ctx.cfg.seed);

  csv_writer w({"statistic", "estimate", "std_error", "z_score"});
  bool battery_ok = true;
  for (const auto& r : rows) {
    w.add_row({r.statistic, format_double(r.estimate), format_double(r.std_error),
               format_double(r.z_score)});
    if (std::abs(r.z_score) > 3.0) battery_ok = false;
  }
  const double res_z = res.std_error > 0.0 ? res.mean / res.std_error : 0.0;
  w.add_row({"residual_mean", format_double(res.mean), format_double(res.std_error),
             format_double(res_z)});
  w.add_row({"residual_max_abs", format_double(res.max_abs), format_double(0.0),
             format_double(0.0)});
  write_file_atomic(ctx.out / "battery.csv", w.str());

  std::mt19937_64 rng(detail::mix_seed(ctx.cfg.seed, 0));
  const int x0 = detail::draw_from_law(rng, p.mu0);
  write_file_atomic(ctx.out / "sample_path.csv",
                    chain_path_to_csv(sample_path(p.gen, x0, rng())));

  if (!battery_ok) {
    std::fprintf(stderr, "martingale battery has a statistic outside 3 sigma\n");
    return exit_validation_failure;
  }
  if (!res.pass()) {
    std::fprintf(stderr, "pathwise residual mean %.6g is outside 3 sigma + budget\n",
                 res.mean);
    return exit_validation_failure;
  }
  return exit_success;
}

int run_compare(const run_context& ctx) {
  const meanfield_problem p1 = make_problem(ctx.cfg);
  const meanfield_problem p2 = build_compare_problem(ctx.cfg);
  const comparison_verdict verdict = compare_solutions(p1, p2, ctx.cfg.steps);
  const markovian_solution s1 = solve_markovian(p1, ctx.cfg.steps);
  const markovian_solution s2 = solve_markovian(p2, ctx.cfg.steps);

  csv_writer w({"t", "state", "u1", "u2", "gap"});
  for (int k = 0; k <= s1.steps(); ++k) {
    for (int i = 0; i < s1.num_states(); ++i) {
      w.add_row({format_double(s1.grid()[static_cast<std::size_t>(k)]),
                 std::to_string(i + 1), format_double(s1.values()(k, i)),
                 format_double(s2.values()(k, i)),
                 format_double(s1.values()(k, i) - s2.values()(k, i))});
    }
  }
  write_file_atomic(ctx.out / "compare.csv", w.str());

  json v;
  v["min_gap"] = verdict.min_gap;
  v["terminal_ok"] = verdict.terminal_ok;
  v["driver_ok"] = verdict.driver_ok;
  v["ordered"] = verdict.ordered();
  if (verdict.first_terminal_violation) {
    v["first_terminal_violation_state"] = *verdict.first_terminal_violation + 1;
  }
  if (verdict.first_driver_violation) {
    const auto& d = *verdict.first_driver_violation;
    v["first_driver_violation"] = {{"t", d.t},
                                   {"primed_state", d.primed_state + 1},
                                   {"state", d.state + 1},
                                   {"f1", d.f1},
                                   {"f2", d.f2}};
  }
  write_file_atomic(ctx.out / "verdict.json", v.dump(2) + "\n");

  if (!verdict.ordered()) {
    if (!verdict.hypotheses_ok()) {
      std::fprintf(stderr, "comparison hypotheses not satisfied (terminal_ok=%d, "
                           "driver_ok=%d)\n",
                   verdict.terminal_ok ? 1 : 0, verdict.driver_ok ? 1 : 0);
    } else {
      std::fprintf(stderr, "solution ordering violated: min gap %.6g\n",
                   verdict.min_gap);
    }
    return exit_validation_failure;
  }
  return exit_success;
}

// Closed-form reference for converge runs, derived from a named driver.
std::function<double(double, int)> closed_form_reference(
    const meanfield_problem& p, const experiment_config& cfg) {
  if (!cfg.driver.name) {
    throw config_error("/converge/reference",
                       "closed_form reference needs a named driver");
  }
  closed_form_params params;
  params.horizon = p.horizon();
  if (*cfg.driver.name == "zero") {
    params.gen = &p.gen;
    params.payoff = p.terminal.payoff();
    return closed_form(closed_form_kind::zero_driver, params);
  }
  const Eigen::VectorXd& g = p.terminal.payoff();
  for (Eigen::Index i = 1; i < g.size(); ++i) {
    if (g[i] != g[0]) {
      throw config_error("/problem/terminal/payoff",
                         "this closed form needs a constant payoff vector");
    }
  }
  params.c = g[0];
  if (*cfg.driver.name == "pure_meanfield") {
    return closed_form(closed_form_kind::pure_meanfield_exp, params);
  }
  if (*cfg.driver.name == "linear_decay") {
    return closed_form(closed_form_kind::linear_decay, params);
  }
  throw config_error("/converge/reference",
                     "no closed form for driver " + *cfg.driver.name);
}

int run_converge(const run_context& ctx) {
  const meanfield_problem p = make_problem(ctx.cfg);

  std::function<double(double, int)> ref;
  if (ctx.cfg.converge_reference == "fine_grid") {
    auto fine = std::make_shared<markovian_solution>(
        solve_markovian(p, ctx.cfg.reference_steps));
    ref = [fine](double t, int i) { return fine->value_at(t)[i]; };
  } else {
    ref = closed_form_reference(p, ctx.cfg);
  }

  csv_writer w({"steps", "sup_error"});
  for (const int steps : ctx.cfg.converge_steps) {
    const markovian_solution sol = solve_markovian(p, steps);
    double err = 0.0;
    for (int k = 0; k <= sol.steps(); ++k) {
      const double t = sol.grid()[static_cast<std::size_t>(k)];
      for (int i = 0; i < sol.num_states(); ++i) {
        err = std::max(err, std::abs(sol.values()(k, i) - ref(t, i)));
      }
    }
    w.add_row({std::to_string(steps), format_double(err)});
  }
  write_file_atomic(ctx.out / "convergence.csv", w.str());
  return exit_success;
}

int run_oracle(const run_context& ctx) {
  const meanfield_problem p = make_problem(ctx.cfg);
  csv_writer w({"t", "state", "y", "mu"});

  if (ctx.cfg.oracle_mode == "tree") {
    const discrete_problem dp = discrete_problem::from(p, ctx.cfg.oracle_steps);
    const tree_solution ts = tree_solve(dp);
    if (ts.collapsed) {
      for (std::size_t k = 0; k < dp.grid.size(); ++k) {
        for (int i = 0; i < p.num_states(); ++i) {
          w.add_row({format_double(dp.grid[k]), std::to_string(i + 1),
                     format_double(ts.y_grid(static_cast<Eigen::Index>(k), i)),
                     format_double(ts.law[k][i])});
        }
      }
    } else {
      // Path-dependent terminal: y is only a per-state function at t = 0.
      for (int i = 0; i < p.num_states(); ++i) {
        w.add_row({format_double(0.0), std::to_string(i + 1),
                   format_double(ts.y0[i]), format_double(ts.law[0][i])});
      }
    }
  } else {
    const closed_form_kind kind = closed_form_by_name(ctx.cfg.oracle_form);
    closed_form_params params;
    params.horizon = p.horizon();
    params.gen = &p.gen;
    if (p.terminal.is_markovian()) {
      params.payoff = p.terminal.payoff();
      if (kind != closed_form_kind::zero_driver) {
        params.c = params.payoff[0];
        for (Eigen::Index i = 1; i < params.payoff.size(); ++i) {
          if (params.payoff[i] != params.payoff[0]) {
            throw config_error("/problem/terminal/payoff",
                               "this closed form needs a constant payoff vector");
          }
        }
      }
    }
    const auto u = closed_form(kind, params);
    std::vector<double> grid(static_cast<std::size_t>(ctx.cfg.oracle_steps) + 1);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      grid[k] = p.horizon() * static_cast<double>(k) /
                static_cast<double>(ctx.cfg.oracle_steps);
    }
    grid.back() = p.horizon();
    const state_law_path law = evolve_law(p.gen, p.mu0, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      for (int i = 0; i < p.num_states(); ++i) {
        w.add_row({format_double(grid[k]), std::to_string(i + 1),
                   format_double(u(grid[k], i)), format_double(law.laws[k][i])});
      }
    }
  }
  write_file_atomic(ctx.out / "oracle.csv", w.str());
  return exit_success;
}

}  // namespace

int run(const std::string& config_path, const std::string& subcommand,
        const run_overrides& overrides) {
  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
      std::fprintf(stderr, "error: cannot read config %s\n", config_path.c_str());
      return exit_validation_failure;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string raw = buf.str();

    run_context ctx;
    ctx.cfg = parse_config(raw);
    ctx.subcommand = subcommand;
    ctx.config_hash = hex64(fnv1a64(raw));

    if (overrides.out_dir) ctx.cfg.output_dir = *overrides.out_dir;
    if (overrides.seed) ctx.cfg.seed = *overrides.seed;
    if (overrides.steps) ctx.cfg.steps = *overrides.steps;
    if (overrides.variant) {
      if (*overrides.variant == "y") {
        ctx.cfg.variant = picard_variant::y_scheme;
      } else if (*overrides.variant == "zprime") {
        ctx.cfg.variant = picard_variant::z_prime_scheme;
      } else {
        throw config_error("/solver/variant", "expected \"y\" or \"zprime\"");
      }
    }

    ctx.out = ctx.cfg.output_dir;
    std::filesystem::create_directories(ctx.out);
    write_manifest(ctx);

    if (subcommand == "solve") return run_solve(ctx);
    if (subcommand == "picard") return run_picard(ctx);
    if (subcommand == "verify") return run_verify(ctx);
    if (subcommand == "compare") return run_compare(ctx);
    if (subcommand == "converge") return run_converge(ctx);
    if (subcommand == "oracle") return run_oracle(ctx);
    std::fprintf(stderr, "error: unknown subcommand '%s'\n", subcommand.c_str());
    return exit_validation_failure;
  } catch (const nonfinite_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_internal_error;
  } catch (const error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_validation_failure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_internal_error;
  }
}

}  // namespace mfbsde
