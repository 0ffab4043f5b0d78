#include "mfbsde/chain.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "mfbsde/detail/rng.hpp"

namespace mfbsde {

namespace {

constexpr double law_clip_tol = 1e-10;
constexpr double simplex_tol = 1e-8;

void check_simplex(const Eigen::VectorXd& mu, int n) {
  if (mu.size() != n) {
    throw dimension_error("law vector has size " + std::to_string(mu.size()) +
                          ", expected " + std::to_string(n));
  }
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(mu[i] >= -simplex_tol)) {
      throw simplex_error("law entry " + std::to_string(i + 1) + " is " +
                          std::to_string(mu[i]) + ", below 0");
    }
    sum += mu[i];
  }
  if (std::abs(sum - 1.0) > simplex_tol) {
    throw simplex_error("law sums to " + std::to_string(sum) + ", expected 1");
  }
}

}  // namespace

state_law_path evolve_law(const generator& gen, const Eigen::VectorXd& mu0,
                          const std::vector<double>& grid) {
  const int n = gen.num_states();
  check_simplex(mu0, n);
  if (grid.size() < 2 || grid.front() != 0.0 ||
      std::abs(grid.back() - gen.horizon()) > 1e-12) {
    throw domain_error("law grid must start at 0 and end at the horizon");
  }
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) {
      throw domain_error("law grid must be strictly increasing");
    }
  }

  // Uniform grids inside one segment reuse the same exponential.
  std::map<std::pair<std::size_t, double>, Eigen::MatrixXd> expm_cache;
  const auto piece_exp = [&](std::size_t seg, double dt) -> const Eigen::MatrixXd& {
    auto key = std::make_pair(seg, dt);
    auto it = expm_cache.find(key);
    if (it == expm_cache.end()) {
      it = expm_cache.emplace(key, (gen.segment(seg).rates * dt).exp()).first;
    }
    return it->second;
  };

  state_law_path out;
  out.grid = grid;
  out.laws.resize(grid.size());
  Eigen::VectorXd mu = mu0;
  // Project the (already validated) start onto the simplex exactly.
  mu = mu.cwiseMax(0.0);
  mu /= mu.sum();
  out.laws[0] = mu;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    double pos = grid[k - 1];
    const double stop = grid[k];
    std::size_t seg = gen.segment_index(pos);
    while (pos < stop) {
      const double end = std::min(gen.segment_end(seg), stop);
      const double dt = end - pos;
      if (dt > 0.0) mu = piece_exp(seg, dt) * mu;
      pos = end;
      ++seg;
    }
    for (int i = 0; i < n; ++i) {
      if (mu[i] < 0.0) {
        if (mu[i] < -law_clip_tol) {
          throw simplex_error("law drifted off the simplex at t = " +
                              std::to_string(stop));
        }
        mu[i] = 0.0;
      }
    }
    mu /= mu.sum();
    out.laws[k] = mu;
  }
  return out;
}

int chain_path::state_at(double t) const {
  int s = x0;
  for (const auto& e : events) {
    if (e.time <= t) s = e.state; else break;
  }
  return s;
}

int chain_path::state_before(double t) const {
  int s = x0;
  for (const auto& e : events) {
    if (e.time < t) s = e.state; else break;
  }
  return s;
}

chain_path sample_path(const generator& gen, int x0, std::uint64_t seed) {
  const int n = gen.num_states();
  if (x0 < 0 || x0 >= n) {
    throw domain_error("initial state " + std::to_string(x0) + " outside [0, " +
                       std::to_string(n) + ")");
  }
  std::mt19937_64 rng(seed);
  chain_path path;
  path.x0 = x0;
  path.horizon = gen.horizon();

  int state = x0;
  double t = 0.0;
  std::size_t seg = 0;
  while (t < gen.horizon()) {
    const double seg_end = std::min(gen.segment_end(seg), gen.horizon());
    const double rate = gen.exit_rate(seg, state);
    if (rate <= 0.0) {
      t = seg_end;
      ++seg;
      continue;
    }
    const double wait = detail::exponential(rng, rate);
    if (t + wait >= seg_end) {
      // The clock loses: restart in the next segment (memoryless).
      t = seg_end;
      ++seg;
      continue;
    }
    t += wait;
    // Pick the destination proportionally to the off-diagonal rates of the
    // current column.
    const Eigen::MatrixXd& a = gen.segment(seg).rates;
    double v = detail::uniform01(rng) * rate;
    int next = -1;
    for (int j = 0; j < n; ++j) {
      if (j == state) continue;
      const double r = a(j, state);
      if (r <= 0.0) continue;
      next = j;
      v -= r;
      if (v < 0.0) break;
    }
    if (next < 0) continue;  // numerical corner: no positive rate found
    state = next;
    path.events.push_back({t, state});
  }
  return path;
}

}  // namespace mfbsde
