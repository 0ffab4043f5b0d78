#include "mfbsde/io.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

namespace mfbsde {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw config_error(where, "expected a non-empty array of rows");
  }
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  Eigen::MatrixXd m;
  for (std::size_t i = 0; i < rows; ++i) {
    const json& row = j[i];
    if (!row.is_array()) throw config_error(where, "expected an array of arrays");
    if (i == 0) {
      cols = row.size();
      m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    } else if (row.size() != cols) {
      throw config_error(where, "rows have inconsistent lengths");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (!row[k].is_number()) throw config_error(where, "matrix entries must be numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& where) {
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

json parse_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw config_error("/", "malformed JSON");
  return j;
}

}  // namespace

std::string generator_to_json(const generator& gen) {
  json j;
  j["horizon"] = gen.horizon();
  json segs = json::array();
  for (std::size_t k = 0; k < gen.num_segments(); ++k) {
    json s;
    s["t_start"] = gen.segment(k).t_start;
    s["rates"] = matrix_to_json(gen.segment(k).rates);
    segs.push_back(std::move(s));
  }
  j["segments"] = std::move(segs);
  return j.dump(2);
}

generator generator_from_json(const std::string& text) {
  const json j = parse_text(text);
  if (!j.contains("horizon") || !j["horizon"].is_number()) {
    throw config_error("/horizon", "expected a number");
  }
  if (!j.contains("segments") || !j["segments"].is_array()) {
    throw config_error("/segments", "expected an array");
  }
  std::vector<generator_segment> segs;
  for (std::size_t k = 0; k < j["segments"].size(); ++k) {
    const json& s = j["segments"][k];
    const std::string where = "/segments/" + std::to_string(k);
    if (!s.contains("t_start") || !s["t_start"].is_number()) {
      throw config_error(where + "/t_start", "expected a number");
    }
    if (!s.contains("rates")) throw config_error(where + "/rates", "missing");
    segs.push_back({s["t_start"].get<double>(),
                    matrix_from_json(s["rates"], where + "/rates")});
  }
  return generator(std::move(segs), j["horizon"].get<double>());
}

std::string law_path_to_json(const state_law_path& lp) {
  json j;
  j["grid"] = lp.grid;
  json laws = json::array();
  for (const auto& mu : lp.laws) {
    json row = json::array();
    for (Eigen::Index i = 0; i < mu.size(); ++i) row.push_back(mu[i]);
    laws.push_back(std::move(row));
  }
  j["laws"] = std::move(laws);
  return j.dump(2);
}

state_law_path law_path_from_json(const std::string& text, double) {
  const json j = parse_text(text);
  if (!j.contains("grid") || !j["grid"].is_array()) {
    throw config_error("/grid", "expected an array");
  }
  if (!j.contains("laws") || !j["laws"].is_array() ||
      j["laws"].size() != j["grid"].size()) {
    throw config_error("/laws", "expected one law per grid point");
  }
  state_law_path lp;
  lp.grid.reserve(j["grid"].size());
  for (const auto& t : j["grid"]) {
    if (!t.is_number()) throw config_error("/grid", "entries must be numbers");
    lp.grid.push_back(t.get<double>());
  }
  lp.laws.reserve(j["laws"].size());
  for (std::size_t k = 0; k < j["laws"].size(); ++k) {
    lp.laws.push_back(vector_from_json(j["laws"][k], "/laws/" + std::to_string(k)));
  }
  return lp;
}

std::string chain_path_to_json(const chain_path& path) {
  json j;
  j["x0"] = path.x0 + 1;
  j["horizon"] = path.horizon;
  json evs = json::array();
  for (const auto& e : path.events) {
    json ev;
    ev["time"] = e.time;
    ev["state"] = e.state + 1;
    evs.push_back(std::move(ev));
  }
  j["events"] = std::move(evs);
  return j.dump(2);
}

chain_path chain_path_from_json(const std::string& text) {
  const json j = parse_text(text);
  chain_path path;
  if (!j.contains("x0") || !j["x0"].is_number_integer()) {
    throw config_error("/x0", "expected a 1-based state index");
  }
  if (!j.contains("horizon") || !j["horizon"].is_number()) {
    throw config_error("/horizon", "expected a number");
  }
  path.x0 = j["x0"].get<int>() - 1;
  path.horizon = j["horizon"].get<double>();
  if (j.contains("events")) {
    if (!j["events"].is_array()) throw config_error("/events", "expected an array");
    for (std::size_t k = 0; k < j["events"].size(); ++k) {
      const json& ev = j["events"][k];
      const std::string where = "/events/" + std::to_string(k);
      if (!ev.contains("time") || !ev["time"].is_number() || !ev.contains("state") ||
          !ev["state"].is_number_integer()) {
        throw config_error(where, "expected {time, state}");
      }
      path.events.push_back({ev["time"].get<double>(), ev["state"].get<int>() - 1});
    }
  }
  return path;
}

std::string chain_path_to_csv(const chain_path& path) {
  csv_writer w({"jump_time", "new_state"});
  for (const auto& e : path.events) {
    w.add_row({format_double(e.time), std::to_string(e.state + 1)});
  }
  return w.str();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

csv_writer::csv_writer(std::vector<std::string> columns) : n_cols_(columns.size()) {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i > 0) body_ += ',';
    body_ += columns[i];
  }
  body_ += '\n';
}

void csv_writer::add_row(std::vector<std::string> cells) {
  if (cells.size() != n_cols_) {
    throw dimension_error("csv row has " + std::to_string(cells.size()) +
                          " cells, expected " + std::to_string(n_cols_));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) body_ += ',';
    body_ += cells[i];
  }
  body_ += '\n';
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace mfbsde
