#include "mfbsde/oracle.hpp"

#include <cmath>
#include <utility>

namespace mfbsde {

namespace {

// Least-squares z-row for one backward step: minimizes the L2 distance
// between the one-step martingale increment representation and the observed
// residuals r_j = Y_next(j) - h under jump distribution p (column of the
// step matrix). Normal equations use the conditional covariance
// G = diag(p) - p p^T; directions with eigenvalue below the cutoff carry no
// information and are dropped.
Eigen::RowVectorXd regress_z(const Eigen::VectorXd& p, const Eigen::VectorXd& r,
                             double cutoff = 1e-10) {
  const int n = static_cast<int>(p.size());
  Eigen::MatrixXd g = Eigen::MatrixXd(p.asDiagonal()) - p * p.transpose();
  Eigen::RowVectorXd b(n);
  for (int j = 0; j < n; ++j) b[j] = p[j] * r[j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  Eigen::RowVectorXd z = Eigen::RowVectorXd::Zero(n);
  for (int k = 0; k < n; ++k) {
    const double lam = es.eigenvalues()[k];
    if (lam <= cutoff) continue;
    const Eigen::VectorXd v = es.eigenvectors().col(k);
    z += (b * v)(0) / lam * v.transpose();
  }
  return z;
}

chain_path path_from_sequence(const std::vector<int>& seq,
                              const std::vector<double>& grid) {
  chain_path path;
  path.x0 = seq[0];
  path.horizon = grid.back();
  for (std::size_t k = 1; k < seq.size(); ++k) {
    if (seq[k] != seq[k - 1]) path.events.push_back({grid[k], seq[k]});
  }
  return path;
}

tree_solution tree_collapsed(const discrete_problem& dp) {
  const meanfield_problem& p = *dp.problem;
  const int n = p.num_states();
  const int steps = static_cast<int>(dp.step_mats.size());
  const double dt = p.horizon() / steps;

  tree_solution out;
  out.collapsed = true;
  out.law.resize(steps + 1);
  out.law[0] = p.mu0.cwiseMax(0.0);
  out.law[0] /= out.law[0].sum();
  for (int k = 0; k < steps; ++k) out.law[k + 1] = dp.step_mats[k] * out.law[k];

  out.y_grid.resize(steps + 1, n);
  out.y_grid.row(steps) = p.terminal.payoff().transpose();
  out.z_grid.assign(steps, Eigen::MatrixXd::Zero(n, n));

  Eigen::VectorXd h(n), r(n);
  for (int k = steps - 1; k >= 0; --k) {
    const Eigen::MatrixXd& pk = dp.step_mats[k];
    const Eigen::VectorXd y_next = out.y_grid.row(k + 1).transpose();
    Eigen::MatrixXd z(n, n);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd pcol = pk.col(i);
      h[i] = pcol.dot(y_next);
      r = y_next.array() - h[i];
      z.row(i) = regress_z(pcol, r);
    }
    const int seg = static_cast<int>(
        p.gen.segment_index(0.5 * (dp.grid[k] + dp.grid[k + 1])));
    const double t = dp.grid[k];
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      const Eigen::RowVectorXd zi = z.row(i);
      for (int ip = 0; ip < n; ++ip) {
        const double w = out.law[k][ip];
        if (w == 0.0) continue;
        const Eigen::RowVectorXd zp = z.row(ip);
        acc += w * p.f.eval(driver_args{t, ip, h[ip], zp, i, h[i], zi, p.gen, seg});
      }
      out.y_grid(k, i) = h[i] + dt * acc;
    }
    out.z_grid[k] = std::move(z);
  }
  out.y0 = out.y_grid.row(0).transpose();
  return out;
}

tree_solution tree_enumerated(const discrete_problem& dp, double node_cap) {
  const meanfield_problem& p = *dp.problem;
  const int n = p.num_states();
  const int steps = static_cast<int>(dp.step_mats.size());
  const double dt = p.horizon() / steps;

  const double leaves = std::pow(static_cast<double>(n), static_cast<double>(steps));
  if (leaves > node_cap) {
    throw tree_too_large_error(n, steps, leaves, node_cap);
  }

  // Node m at depth k encodes the state sequence base N, digit j = state at
  // step j; child(m, s) at depth k+1 is m + s N^(k+1).
  std::vector<std::size_t> level_size(steps + 1);
  level_size[0] = static_cast<std::size_t>(n);
  for (int k = 1; k <= steps; ++k) level_size[k] = level_size[k - 1] * n;

  // Forward pass: node probabilities per depth.
  std::vector<std::vector<double>> prob(steps + 1);
  prob[0].resize(level_size[0]);
  Eigen::VectorXd mu0 = p.mu0.cwiseMax(0.0);
  mu0 /= mu0.sum();
  for (int i = 0; i < n; ++i) prob[0][i] = mu0[i];
  std::vector<std::vector<int>> last(steps + 1);
  last[0].resize(level_size[0]);
  for (int i = 0; i < n; ++i) last[0][i] = i;
  for (int k = 0; k < steps; ++k) {
    prob[k + 1].resize(level_size[k + 1]);
    last[k + 1].resize(level_size[k + 1]);
    const Eigen::MatrixXd& pk = dp.step_mats[k];
    for (std::size_t m = 0; m < level_size[k]; ++m) {
      const int i = last[k][m];
      for (int j = 0; j < n; ++j) {
        const std::size_t child = m + static_cast<std::size_t>(j) * level_size[k];
        prob[k + 1][child] = prob[k][m] * pk(j, i);
        last[k + 1][child] = j;
      }
    }
  }

  // Terminal values per leaf.
  std::vector<double> y(level_size[steps]);
  {
    std::vector<int> seq(steps + 1);
    for (std::size_t m = 0; m < level_size[steps]; ++m) {
      std::size_t d = m;
      for (int k = 0; k <= steps; ++k) {
        seq[k] = static_cast<int>(d % static_cast<std::size_t>(n));
        d /= static_cast<std::size_t>(n);
      }
      y[m] = p.terminal.evaluate(path_from_sequence(seq, dp.grid));
    }
  }

  // Backward pass with per-node regression and a probability-weighted E'.
  for (int k = steps - 1; k >= 0; --k) {
    const Eigen::MatrixXd& pk = dp.step_mats[k];
    const std::size_t sz = level_size[k];
    std::vector<double> h(sz);
    std::vector<Eigen::RowVectorXd> z(sz);
    Eigen::VectorXd r(n);
    for (std::size_t m = 0; m < sz; ++m) {
      const int i = last[k][m];
      const Eigen::VectorXd pcol = pk.col(i);
      double hm = 0.0;
      for (int j = 0; j < n; ++j) {
        hm += pcol[j] * y[m + static_cast<std::size_t>(j) * sz];
      }
      h[m] = hm;
      for (int j = 0; j < n; ++j) {
        r[j] = y[m + static_cast<std::size_t>(j) * sz] - hm;
      }
      z[m] = regress_z(pcol, r);
    }
    const int seg = static_cast<int>(
        p.gen.segment_index(0.5 * (dp.grid[k] + dp.grid[k + 1])));
    const double t = dp.grid[k];
    std::vector<double> y_new(sz);
    for (std::size_t m = 0; m < sz; ++m) {
      double acc = 0.0;
      for (std::size_t mp = 0; mp < sz; ++mp) {
        const double w = prob[k][mp];
        if (w == 0.0) continue;
        acc += w * p.f.eval(driver_args{t, last[k][mp], h[mp], z[mp], last[k][m], h[m],
                                        z[m], p.gen, seg});
      }
      y_new[m] = h[m] + dt * acc;
    }
    y = std::move(y_new);
  }

  tree_solution out;
  out.collapsed = false;
  out.y0.resize(n);
  for (int i = 0; i < n; ++i) out.y0[i] = y[i];
  out.law.resize(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
    for (std::size_t node = 0; node < level_size[k]; ++node) {
      m[last[k][node]] += prob[k][node];
    }
    out.law[k] = m;
  }
  return out;
}

}  // namespace

discrete_problem discrete_problem::from(const meanfield_problem& p, int steps) {
  p.validate();
  if (steps < 1) throw domain_error("steps must be >= 1");
  discrete_problem dp;
  dp.problem = &p;
  dp.grid.resize(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    dp.grid[k] = p.horizon() * static_cast<double>(k) / steps;
  }
  dp.grid.back() = p.horizon();
  dp.step_mats.reserve(steps);
  for (int k = 0; k < steps; ++k) {
    dp.step_mats.push_back(transition_matrix(p.gen, dp.grid[k], dp.grid[k + 1]));
  }
  return dp;
}

tree_solution tree_solve(const discrete_problem& dp, tree_mode mode, double node_cap) {
  if (dp.problem == nullptr || dp.step_mats.empty()) {
    throw domain_error("discrete problem is empty");
  }
  const bool markovian = dp.problem->terminal.is_markovian();
  switch (mode) {
    case tree_mode::automatic:
      return markovian ? tree_collapsed(dp) : tree_enumerated(dp, node_cap);
    case tree_mode::collapse:
      if (!markovian) {
        throw domain_error("collapsed tree needs a Markovian terminal payoff");
      }
      return tree_collapsed(dp);
    case tree_mode::enumerate_paths:
      return tree_enumerated(dp, node_cap);
  }
  throw domain_error("bad tree mode");
}

closed_form_kind closed_form_by_name(const std::string& name) {
  if (name == "zero_driver") return closed_form_kind::zero_driver;
  if (name == "pure_meanfield_exp") return closed_form_kind::pure_meanfield_exp;
  if (name == "linear_decay") return closed_form_kind::linear_decay;
  throw unknown_form_error("unknown closed form '" + name + "'");
}

std::function<double(double, int)> closed_form(closed_form_kind kind,
                                               const closed_form_params& params) {
  switch (kind) {
    case closed_form_kind::zero_driver: {
      if (params.gen == nullptr) {
        throw domain_error("zero_driver closed form needs a generator");
      }
      const generator* gen = params.gen;
      if (params.payoff.size() != gen->num_states()) {
        throw dimension_error("payoff size must match the state count");
      }
      const Eigen::VectorXd g = params.payoff;
      return [gen, g](double t, int state) {
        const Eigen::VectorXd u = transition_matrix(*gen, t, gen->horizon()).transpose() * g;
        return u[state];
      };
    }
    case closed_form_kind::pure_meanfield_exp: {
      const double T = params.gen != nullptr ? params.gen->horizon() : params.horizon;
      if (!(T > 0.0)) throw domain_error("closed form needs a positive horizon");
      const double c = params.c;
      return [c, T](double t, int) { return c * std::exp(T - t); };
    }
    case closed_form_kind::linear_decay: {
      const double T = params.gen != nullptr ? params.gen->horizon() : params.horizon;
      if (!(T > 0.0)) throw domain_error("closed form needs a positive horizon");
      const double c = params.c;
      return [c, T](double t, int) { return c * std::exp(-(T - t)); };
    }
  }
  throw unknown_form_error("bad closed form kind");
}

}  // namespace mfbsde
