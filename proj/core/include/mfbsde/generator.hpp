#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "mfbsde/errors.hpp"

namespace mfbsde {

// Piecewise-constant generator of a finite-state Markov chain whose states
// are the unit vectors e_1..e_N of R^N.
//
// Rate matrix convention (column-based): column i describes what happens in
// state i. Entry A(j, i) with j != i is the jump rate from state i to state
// j, the diagonal entry A(i, i) = -sum of the rest of the column, so every
// column sums to 0. Example for a two-state chain flipping at rate 1:
//
//     A = [ -1   1 ]      column 1 = (-1, 1): leave state 1 at rate 1
//         [  1  -1 ]      column 2 = (1, -1): leave state 2 at rate 1
//
// The law mu_t of the chain then evolves forward by d(mu)/dt = A mu.
//
// Segments partition [0, horizon): segment k applies on [t_start_k,
// t_start_{k+1}) and the last one runs to the horizon. The first t_start
// must be 0 and the starts must be strictly increasing below the horizon.
struct generator_segment {
  double t_start = 0.0;
  Eigen::MatrixXd rates;
};

class generator {
 public:
  // Validates and precomputes per-segment tables. Throws dimension_error,
  // bad_segment_times_error, column_sum_error or negative_off_diagonal_error.
  generator(std::vector<generator_segment> segments, double horizon);

  int num_states() const { return n_; }
  double horizon() const { return horizon_; }
  std::size_t num_segments() const { return segments_.size(); }
  const generator_segment& segment(std::size_t k) const { return segments_[k]; }

  // Index of the segment whose window contains t. Windows are closed on the
  // left; t == horizon resolves to the last segment. Pre: 0 <= t <= horizon.
  std::size_t segment_index(double t) const;
  double segment_end(std::size_t k) const;
  const Eigen::MatrixXd& rates_at(double t) const;

  // Per-segment precomputed tables, indexed by (segment, state).
  const Eigen::MatrixXd& phi_table(std::size_t seg, int state) const;
  double exit_rate(std::size_t seg, int state) const;

  bool operator==(const generator& other) const;

 private:
  int n_ = 0;
  double horizon_ = 0.0;
  std::vector<generator_segment> segments_;
  std::vector<std::vector<Eigen::MatrixXd>> phi_;  // [segment][state]
  std::vector<std::vector<double>> exit_rate_;     // [segment][state]
};

// Predictable quadratic-variation density of the chain martingale while the
// chain sits in `state`: symmetric positive semidefinite, rows and columns
// sum to 0. Pre: 0 <= t <= horizon, 0 <= state < N.
Eigen::MatrixXd phi(const generator& gen, double t, int state);

// Squared seminorm z Phi z^T induced by phi. The all-ones direction is in
// the kernel, so the seminorm is invariant under adding a constant to every
// component of z. Clamped at 0 against roundoff.
double seminorm_sq(const Eigen::RowVectorXd& z, const generator& gen, double t, int state);

// Same but with the segment fixed by the caller. Solvers integrating across
// a cell that ends exactly at a segment boundary need the left segment's
// phi there, which a plain time lookup cannot express.
double seminorm_sq_in_segment(const Eigen::RowVectorXd& z, const generator& gen,
                              std::size_t seg, int state);

// Transition matrix P(s, t) mapping the law at time s to the law at time t
// (mu_t = P(s, t) mu_s), computed as the ordered product of matrix
// exponentials of the constant pieces between s and t. Pre: 0 <= s <= t <=
// horizon.
Eigen::MatrixXd transition_matrix(const generator& gen, double s, double t);

}  // namespace mfbsde
