#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "mfbsde/problem.hpp"

namespace mfbsde {

// Time-discretized version of a mean-field problem: exact one-step
// transition matrices on a uniform grid plus the original terminal data and
// driver. Used as an independent cross-check of the grid solvers.
struct discrete_problem {
  static discrete_problem from(const meanfield_problem& p, int steps);

  const meanfield_problem* problem = nullptr;
  std::vector<double> grid;                 // K+1 points
  std::vector<Eigen::MatrixXd> step_mats;   // K matrices, P_k maps law k -> k+1
};

enum class tree_mode {
  automatic,  // collapse for Markovian terminals, enumerate otherwise
  collapse,   // per-state recursion (requires a Markovian terminal)
  enumerate_paths,
};

struct tree_solution {
  Eigen::VectorXd y0;                  // per starting state
  std::vector<Eigen::VectorXd> law;    // marginal law per step
  // Collapsed mode only: per-step state tables.
  Eigen::MatrixXd y_grid;              // (K+1) x N
  std::vector<Eigen::MatrixXd> z_grid; // K entries, N x N (row i = z at state i)
  bool collapsed = true;
};

// Explicit backward scheme on the discrete chain:
//   Y_k = E[Y_{k+1} | F_k] + dt E'[f(t_k, ., h, Zh)]
// where h is the conditional expectation and the z-row is the least-squares
// coefficient of the one-step martingale increment (pseudo-inverse of the
// conditional covariance, singular values below 1e-10 dropped).
//
// Markovian terminals provably collapse to a per-state table (Y_k is a
// function of X_k by backward induction), so the cap on enumerated paths
// (N^(K+1) nodes <= cap) only applies to genuinely path-dependent terminals.
tree_solution tree_solve(const discrete_problem& dp,
                         tree_mode mode = tree_mode::automatic,
                         double node_cap = 1e7);

// Closed-form solutions used as test oracles.
//
//   zero_driver         u(t) = P(t, T)^T g, any generator (needs gen, payoff)
//   pure_meanfield_exp  u_i(t) = c e^(T-t), driver f = y' with constant
//                       payoff c (needs c, horizon)
//   linear_decay        u_i(t) = c e^(-(T-t)), driver f = -y with constant
//                       payoff c (needs c, horizon)
enum class closed_form_kind { zero_driver, pure_meanfield_exp, linear_decay };

closed_form_kind closed_form_by_name(const std::string& name);  // unknown_form_error

struct closed_form_params {
  const generator* gen = nullptr;
  Eigen::VectorXd payoff;
  double c = 0.0;
  double horizon = 0.0;
};

// Returns an evaluator u(t, state). Throws domain_error when the parameters
// required by the requested form are missing.
std::function<double(double, int)> closed_form(closed_form_kind kind,
                                               const closed_form_params& params);

}  // namespace mfbsde
