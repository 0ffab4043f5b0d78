#include "mfbsde/generator.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace mfbsde {

namespace {

constexpr double column_sum_tol = 1e-12;

void check_state(const generator& gen, int state) {
  if (state < 0 || state >= gen.num_states()) {
    throw domain_error("state index " + std::to_string(state) + " outside [0, " +
                       std::to_string(gen.num_states()) + ")");
  }
}

void check_time(const generator& gen, double t) {
  if (!(t >= 0.0 && t <= gen.horizon())) {
    throw domain_error("time " + std::to_string(t) + " outside [0, " +
                       std::to_string(gen.horizon()) + "]");
  }
}

}  // namespace

generator::generator(std::vector<generator_segment> segments, double horizon)
    : horizon_(horizon), segments_(std::move(segments)) {
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) {
    throw domain_error("horizon must be positive and finite");
  }
  if (segments_.empty()) {
    throw bad_segment_times_error("generator needs at least one segment");
  }
  if (segments_.front().t_start != 0.0) {
    throw bad_segment_times_error("first segment must start at t = 0");
  }
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const auto& seg = segments_[k];
    if (!std::isfinite(seg.t_start) || seg.t_start < 0.0 || seg.t_start >= horizon_) {
      throw bad_segment_times_error("segment " + std::to_string(k + 1) +
                                    " starts at " + std::to_string(seg.t_start) +
                                    ", outside [0, horizon)");
    }
    if (k > 0 && !(seg.t_start > segments_[k - 1].t_start)) {
      throw bad_segment_times_error("segment starts must be strictly increasing");
    }
    if (seg.rates.rows() != seg.rates.cols()) {
      throw dimension_error("rate matrix of segment " + std::to_string(k + 1) +
                            " is not square");
    }
    if (k == 0) {
      n_ = static_cast<int>(seg.rates.rows());
      if (n_ < 2) throw dimension_error("need at least 2 states");
    } else if (seg.rates.rows() != n_) {
      throw dimension_error("segment " + std::to_string(k + 1) +
                            " has a different state count");
    }
    if (!seg.rates.allFinite()) {
      throw generator_error("segment " + std::to_string(k + 1) +
                            " has a non-finite rate");
    }
    for (int i = 0; i < n_; ++i) {
      double sum = 0.0;
      for (int j = 0; j < n_; ++j) {
        const double a = seg.rates(j, i);
        if (j != i && a < 0.0) {
          throw negative_off_diagonal_error(k, j, i, a);
        }
        sum += a;
      }
      if (std::abs(sum) > column_sum_tol) {
        throw column_sum_error(k, i, sum);
      }
    }
  }

  // Phi for state i picks out the rates of column i: Phi_ii = -A_ii,
  // Phi_jj = A_ji, Phi_ij = Phi_ji = -A_ji for j != i, zero elsewhere.
  // Rows/columns sum to 0 and the matrix is PSD by construction.
  phi_.resize(segments_.size());
  exit_rate_.resize(segments_.size());
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const auto& a = segments_[k].rates;
    phi_[k].resize(n_);
    exit_rate_[k].resize(n_);
    for (int i = 0; i < n_; ++i) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_, n_);
      for (int j = 0; j < n_; ++j) {
        if (j == i) continue;
        const double rate = std::max(0.0, a(j, i));
        m(j, j) = rate;
        m(i, j) = -rate;
        m(j, i) = -rate;
      }
      m(i, i) = std::max(0.0, -a(i, i));
      phi_[k][i] = std::move(m);
      exit_rate_[k][i] = std::max(0.0, -a(i, i));
    }
  }
}

std::size_t generator::segment_index(double t) const {
  check_time(*this, t);
  std::size_t lo = 0;
  for (std::size_t k = 1; k < segments_.size(); ++k) {
    if (segments_[k].t_start <= t) lo = k; else break;
  }
  return lo;
}

double generator::segment_end(std::size_t k) const {
  return k + 1 < segments_.size() ? segments_[k + 1].t_start : horizon_;
}

const Eigen::MatrixXd& generator::rates_at(double t) const {
  return segments_[segment_index(t)].rates;
}

const Eigen::MatrixXd& generator::phi_table(std::size_t seg, int state) const {
  return phi_[seg][state];
}

double generator::exit_rate(std::size_t seg, int state) const {
  return exit_rate_[seg][state];
}

bool generator::operator==(const generator& other) const {
  if (n_ != other.n_ || horizon_ != other.horizon_ ||
      segments_.size() != other.segments_.size()) {
    return false;
  }
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    if (segments_[k].t_start != other.segments_[k].t_start) return false;
    if (segments_[k].rates != other.segments_[k].rates) return false;
  }
  return true;
}

Eigen::MatrixXd phi(const generator& gen, double t, int state) {
  check_state(gen, state);
  return gen.phi_table(gen.segment_index(t), state);
}

double seminorm_sq(const Eigen::RowVectorXd& z, const generator& gen, double t, int state) {
  return seminorm_sq_in_segment(z, gen, gen.segment_index(t), state);
}

double seminorm_sq_in_segment(const Eigen::RowVectorXd& z, const generator& gen,
                              std::size_t seg, int state) {
  check_state(gen, state);
  if (seg >= gen.num_segments()) {
    throw domain_error("segment index out of range");
  }
  if (z.size() != gen.num_states()) {
    throw dimension_error("seminorm argument has size " + std::to_string(z.size()) +
                          ", generator has " + std::to_string(gen.num_states()) +
                          " states");
  }
  const Eigen::MatrixXd& m = gen.phi_table(seg, state);
  const double q = z * m * z.transpose();
  return std::max(0.0, q);
}

Eigen::MatrixXd transition_matrix(const generator& gen, double s, double t) {
  if (!(s >= 0.0 && t <= gen.horizon() && s <= t)) {
    throw domain_error("transition_matrix needs 0 <= s <= t <= horizon, got s=" +
                       std::to_string(s) + " t=" + std::to_string(t));
  }
  const int n = gen.num_states();
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n);
  if (s == t) return p;
  std::size_t k = gen.segment_index(s);
  double pos = s;
  while (pos < t) {
    const double end = std::min(gen.segment_end(k), t);
    const double dt = end - pos;
    if (dt > 0.0) {
      p = (gen.segment(k).rates * dt).exp() * p;
    }
    pos = end;
    ++k;
  }
  return p;
}

}  // namespace mfbsde
