#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mfbsde/generator.hpp"

namespace mfbsde {

// Marginal law of the chain on a time grid.
struct state_law_path {
  std::vector<double> grid;
  std::vector<Eigen::VectorXd> laws;  // one probability vector per grid point
};

// Pushes mu0 forward through the generator: laws[k] = P(0, grid[k]) mu0,
// computed stepwise with one matrix exponential per distinct (segment, dt)
// piece. Entries are clipped at 0 (tolerance 1e-10) and renormalized, so
// every output is exactly a probability vector.
//
// Pre: grid starts at 0, ends at horizon, strictly increasing; mu0 on the
// simplex within 1e-8. Throws simplex_error / domain_error.
state_law_path evolve_law(const generator& gen, const Eigen::VectorXd& mu0,
                          const std::vector<double>& grid);

// One cadlag trajectory of the chain. States are 0-based indices into
// e_1..e_N; `events` records each jump (strictly increasing times, each new
// state different from the previous one).
struct chain_path {
  struct event {
    double time;
    int state;
  };
  int x0 = 0;
  double horizon = 0.0;
  std::vector<event> events;

  std::size_t num_jumps() const { return events.size(); }

  // State at time t (cadlag: jumps take effect at the jump time).
  int state_at(double t) const;

  // Left limit X_{t-}: the state just before t; equals x0 at t = 0.
  int state_before(double t) const;
};

// Samples a trajectory on [0, horizon] by competing exponential clocks.
// Piecewise-constant rates are handled by the memoryless property: the clock
// restarts at each segment boundary. Deterministic in (gen, x0, seed).
chain_path sample_path(const generator& gen, int x0, std::uint64_t seed);

}  // namespace mfbsde
