#include "mfbsde/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mfbsde/dsl.hpp"

namespace mfbsde {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw config_error(where + "/" + it.key(), "unknown key");
  }
}

const json& object_at(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key)) throw config_error(where + "/" + key, "missing");
  return obj.at(key);
}

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw config_error(where, "expected a number");
  return j.get<double>();
}

int as_positive_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw config_error(where, "expected an integer");
  const auto v = j.get<long long>();
  if (v < 1) throw config_error(where, "expected a positive integer");
  if (v > 100000000) throw config_error(where, "unreasonably large");
  return static_cast<int>(v);
}

std::string as_string(const json& j, const std::string& where) {
  if (!j.is_string()) throw config_error(where, "expected a string");
  return j.get<std::string>();
}

Eigen::VectorXd as_vector(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw config_error(where, "expected a non-empty array of numbers");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw config_error(where, "entries must be numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd as_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw config_error(where, "expected a non-empty array of rows");
  }
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  Eigen::MatrixXd m;
  for (std::size_t i = 0; i < rows; ++i) {
    const json& row = j[i];
    if (!row.is_array()) throw config_error(where, "expected an array of rows");
    if (i == 0) {
      cols = row.size();
      if (cols == 0) throw config_error(where, "rows must be non-empty");
      m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    } else if (row.size() != cols) {
      throw config_error(where, "rows have inconsistent lengths");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (!row[k].is_number()) throw config_error(where, "entries must be numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          row[k].get<double>();
    }
  }
  return m;
}

terminal_spec parse_terminal(const json& j, const std::string& where) {
  if (!j.is_object()) throw config_error(where, "expected an object");
  check_keys(j, where, {"payoff", "expr", "visits_state", "hit", "miss"});
  terminal_spec out;
  int shapes = 0;
  if (j.contains("payoff")) {
    out.payoff = as_vector(j.at("payoff"), where + "/payoff");
    ++shapes;
  }
  if (j.contains("expr")) {
    out.expr = as_string(j.at("expr"), where + "/expr");
    ++shapes;
  }
  if (j.contains("visits_state")) {
    terminal_spec::visit_reward v;
    const int s = as_positive_int(j.at("visits_state"), where + "/visits_state");
    v.state = s - 1;
    if (j.contains("hit")) v.hit = as_number(j.at("hit"), where + "/hit");
    if (j.contains("miss")) v.miss = as_number(j.at("miss"), where + "/miss");
    out.visits = v;
    ++shapes;
  } else if (j.contains("hit") || j.contains("miss")) {
    throw config_error(where, "hit/miss are only valid alongside visits_state");
  }
  if (shapes != 1) {
    throw config_error(where, "expected exactly one of payoff, expr, visits_state");
  }
  return out;
}

driver_spec parse_driver_spec(const json& j, const std::string& where) {
  if (!j.is_object()) throw config_error(where, "expected an object");
  check_keys(j, where, {"name", "expr", "lipschitz"});
  driver_spec out;
  const bool named = j.contains("name");
  const bool expr = j.contains("expr");
  if (named == expr) throw config_error(where, "expected exactly one of name, expr");
  if (named) {
    if (j.contains("lipschitz")) {
      throw config_error(where + "/lipschitz", "only valid with expr");
    }
    out.name = as_string(j.at("name"), where + "/name");
  } else {
    out.expr = as_string(j.at("expr"), where + "/expr");
    out.lipschitz = as_number(object_at(j, where, "lipschitz"), where + "/lipschitz");
    if (!(out.lipschitz >= 0.0) || !std::isfinite(out.lipschitz)) {
      throw config_error(where + "/lipschitz", "expected a finite value >= 0");
    }
  }
  return out;
}

}  // namespace

experiment_config parse_config(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw config_error("/", "malformed JSON");
  if (!j.is_object()) throw config_error("/", "expected an object");
  check_keys(j, "",
             {"problem", "solver", "verify", "compare", "converge", "oracle", "output"});

  experiment_config cfg;

  const json& p = object_at(j, "", "problem");
  if (!p.is_object()) throw config_error("/problem", "expected an object");
  check_keys(p, "/problem", {"horizon", "generator", "mu0", "terminal", "driver"});
  cfg.horizon = as_number(object_at(p, "/problem", "horizon"), "/problem/horizon");

  const json& g = object_at(p, "/problem", "generator");
  if (!g.is_object()) throw config_error("/problem/generator", "expected an object");
  check_keys(g, "/problem/generator", {"segments"});
  const json& segs = object_at(g, "/problem/generator", "segments");
  if (!segs.is_array() || segs.empty()) {
    throw config_error("/problem/generator/segments", "expected a non-empty array");
  }
  for (std::size_t k = 0; k < segs.size(); ++k) {
    const std::string where = "/problem/generator/segments/" + std::to_string(k);
    const json& s = segs[k];
    if (!s.is_object()) throw config_error(where, "expected an object");
    check_keys(s, where, {"t_start", "rates"});
    generator_segment seg;
    seg.t_start = as_number(object_at(s, where, "t_start"), where + "/t_start");
    seg.rates = as_matrix(object_at(s, where, "rates"), where + "/rates");
    cfg.segments.push_back(std::move(seg));
  }

  cfg.mu0 = as_vector(object_at(p, "/problem", "mu0"), "/problem/mu0");
  cfg.terminal = parse_terminal(object_at(p, "/problem", "terminal"), "/problem/terminal");
  cfg.driver = parse_driver_spec(object_at(p, "/problem", "driver"), "/problem/driver");

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    if (!s.is_object()) throw config_error("/solver", "expected an object");
    check_keys(s, "/solver", {"steps", "tol", "max_iter", "variant"});
    if (s.contains("steps")) cfg.steps = as_positive_int(s.at("steps"), "/solver/steps");
    if (s.contains("tol")) {
      cfg.tol = as_number(s.at("tol"), "/solver/tol");
      if (!(cfg.tol > 0.0)) throw config_error("/solver/tol", "expected a value > 0");
    }
    if (s.contains("max_iter")) {
      cfg.max_iter = as_positive_int(s.at("max_iter"), "/solver/max_iter");
    }
    if (s.contains("variant")) {
      const std::string v = as_string(s.at("variant"), "/solver/variant");
      if (v == "y") {
        cfg.variant = picard_variant::y_scheme;
      } else if (v == "zprime") {
        cfg.variant = picard_variant::z_prime_scheme;
      } else {
        throw config_error("/solver/variant", "expected \"y\" or \"zprime\"");
      }
    }
  }

  if (j.contains("verify")) {
    const json& v = j.at("verify");
    if (!v.is_object()) throw config_error("/verify", "expected an object");
    check_keys(v, "/verify", {"paths", "seed"});
    if (v.contains("paths")) {
      cfg.verify_paths = as_positive_int(v.at("paths"), "/verify/paths");
    }
    if (v.contains("seed")) {
      const json& s = v.at("seed");
      if (!s.is_number_integer() ||
          (!s.is_number_unsigned() && s.get<long long>() < 0)) {
        throw config_error("/verify/seed", "expected a non-negative integer");
      }
      cfg.seed = s.get<std::uint64_t>();
    }
  }

  if (j.contains("compare")) {
    const json& c = j.at("compare");
    if (!c.is_object()) throw config_error("/compare", "expected an object");
    check_keys(c, "/compare", {"terminal", "driver"});
    if (c.contains("terminal")) {
      cfg.compare_terminal = parse_terminal(c.at("terminal"), "/compare/terminal");
    }
    if (c.contains("driver")) {
      cfg.compare_driver = parse_driver_spec(c.at("driver"), "/compare/driver");
    }
    if (!cfg.compare_terminal && !cfg.compare_driver) {
      throw config_error("/compare", "expected at least one of terminal, driver");
    }
  }

  if (j.contains("converge")) {
    const json& c = j.at("converge");
    if (!c.is_object()) throw config_error("/converge", "expected an object");
    check_keys(c, "/converge", {"steps_list", "reference", "reference_steps"});
    if (c.contains("steps_list")) {
      const json& sl = c.at("steps_list");
      if (!sl.is_array() || sl.empty()) {
        throw config_error("/converge/steps_list", "expected a non-empty array");
      }
      cfg.converge_steps.clear();
      for (std::size_t k = 0; k < sl.size(); ++k) {
        cfg.converge_steps.push_back(
            as_positive_int(sl[k], "/converge/steps_list/" + std::to_string(k)));
      }
    }
    if (c.contains("reference")) {
      cfg.converge_reference = as_string(c.at("reference"), "/converge/reference");
      if (cfg.converge_reference != "fine_grid" &&
          cfg.converge_reference != "closed_form") {
        throw config_error("/converge/reference",
                           "expected \"fine_grid\" or \"closed_form\"");
      }
    }
    if (c.contains("reference_steps")) {
      cfg.reference_steps =
          as_positive_int(c.at("reference_steps"), "/converge/reference_steps");
    }
  }

  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    if (!o.is_object()) throw config_error("/oracle", "expected an object");
    check_keys(o, "/oracle", {"mode", "steps", "form"});
    if (o.contains("mode")) {
      cfg.oracle_mode = as_string(o.at("mode"), "/oracle/mode");
      if (cfg.oracle_mode != "tree" && cfg.oracle_mode != "closed_form") {
        throw config_error("/oracle/mode", "expected \"tree\" or \"closed_form\"");
      }
    }
    if (o.contains("steps")) {
      cfg.oracle_steps = as_positive_int(o.at("steps"), "/oracle/steps");
    }
    if (o.contains("form")) cfg.oracle_form = as_string(o.at("form"), "/oracle/form");
    if (cfg.oracle_mode == "closed_form" && cfg.oracle_form.empty()) {
      throw config_error("/oracle/form", "required when mode is \"closed_form\"");
    }
  }

  if (j.contains("output")) {
    const json& o = j.at("output");
    if (!o.is_object()) throw config_error("/output", "expected an object");
    check_keys(o, "/output", {"dir"});
    if (o.contains("dir")) {
      cfg.output_dir = as_string(o.at("dir"), "/output/dir");
      if (cfg.output_dir.empty()) throw config_error("/output/dir", "expected a path");
    }
  }

  return cfg;
}

experiment_config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("/", "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace {

terminal_condition build_terminal(const terminal_spec& ts, int n,
                                  const std::string& where) {
  if (ts.payoff) {
    if (ts.payoff->size() != n) {
      throw config_error(where + "/payoff",
                         "expected " + std::to_string(n) + " entries");
    }
    return terminal_condition::markovian(*ts.payoff);
  }
  if (ts.expr) {
    return terminal_condition::from_expr(dsl::parse_terminal_expr(*ts.expr), n);
  }
  const auto v = *ts.visits;
  if (v.state >= n) {
    throw config_error(where + "/visits_state", "state out of range");
  }
  path_functional f;
  f.eval = [v](const chain_path& path) {
    if (path.x0 == v.state) return v.hit;
    for (const auto& e : path.events) {
      if (e.state == v.state) return v.hit;
    }
    return v.miss;
  };
  f.bound = std::max(std::abs(v.hit), std::abs(v.miss));
  f.description = "reward for visiting state " + std::to_string(v.state + 1);
  return terminal_condition::path_dependent(std::move(f));
}

driver build_driver(const driver_spec& ds, int n) {
  if (ds.name) return named_driver(*ds.name);
  return make_driver(dsl::parse_driver_expr(*ds.expr, n), ds.lipschitz);
}

}  // namespace

meanfield_problem build_problem(const experiment_config& cfg) {
  generator gen(cfg.segments, cfg.horizon);
  const int n = gen.num_states();
  meanfield_problem p{std::move(gen), cfg.mu0,
                      build_terminal(cfg.terminal, n, "/problem/terminal"),
                      build_driver(cfg.driver, n)};
  p.validate();
  return p;
}

meanfield_problem build_compare_problem(const experiment_config& cfg) {
  if (!cfg.compare_terminal && !cfg.compare_driver) {
    throw config_error("/compare", "missing");
  }
  generator gen(cfg.segments, cfg.horizon);
  const int n = gen.num_states();
  const terminal_spec& ts =
      cfg.compare_terminal ? *cfg.compare_terminal : cfg.terminal;
  const driver_spec& ds = cfg.compare_driver ? *cfg.compare_driver : cfg.driver;
  meanfield_problem p{std::move(gen), cfg.mu0,
                      build_terminal(ts, n, "/compare/terminal"), build_driver(ds, n)};
  p.validate();
  return p;
}

}  // namespace mfbsde
