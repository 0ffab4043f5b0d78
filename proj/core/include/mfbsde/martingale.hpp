#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfbsde/chain.hpp"
#include "mfbsde/generator.hpp"

namespace mfbsde {

// Row-vector integrand z(t, state) for stochastic integrals against the
// chain martingale. Must write an N-vector into `out`; called with the
// pre-jump state, so it is predictable along the path.
using predictable_row =
    std::function<void(double t, int state, Eigen::Ref<Eigen::RowVectorXd> out)>;

// View of one sampled trajectory through its compensated-jump martingale
// M_t = X_t - X_0 - int_0^t A_s X_{s-} ds.
class martingale_path {
 public:
  martingale_path(const generator& gen, chain_path path);

  const chain_path& path() const { return path_; }
  const generator& gen() const { return *gen_; }

  // int_0^t A_s X_{s-} ds, exact (the integrand is constant between jumps
  // and segment boundaries).
  Eigen::VectorXd compensator(double t) const;

  // M_t = X_t - X_0 - compensator(t).
  Eigen::VectorXd value(double t) const;

  // Realized quadratic covariation [M, M]_T = sum of outer products of the
  // jumps.
  Eigen::MatrixXd realized_qv() const;

  // Predictable quadratic covariation <M, M>_T = int_0^T Phi_s(X_{s-}) ds,
  // exact per piece.
  Eigen::MatrixXd predictable_qv() const;

  // int_0^T z(s, X_{s-}) dM_s: jump part summed exactly, the compensator
  // part integrated by adaptive Simpson with absolute tolerance `quad_tol`
  // on each inter-jump piece.
  double stochastic_integral(const predictable_row& z, double quad_tol = 1e-10) const;

 private:
  const generator* gen_;
  chain_path path_;
};

// One row of the Monte Carlo verification battery.
struct battery_row {
  std::string statistic;
  double estimate = 0.0;
  double std_error = 0.0;
  double z_score = 0.0;
};

// Samples n_paths trajectories (initial states drawn from mu0) and tests the
// martingale identities: E[M_T] = 0 componentwise, E[[M,M]_T] = E[<M,M>_T]
// entrywise, E[int z dM] = 0 for a fixed smooth test integrand, and the mean
// jump count against its compensator. Estimates are accumulated in fixed
// 1024-path chunks merged in order, so the output depends only on (gen, mu0,
// n_paths, seed), never on thread count.
std::vector<battery_row> martingale_battery(const generator& gen,
                                            const Eigen::VectorXd& mu0, int n_paths,
                                            std::uint64_t seed);

}  // namespace mfbsde
