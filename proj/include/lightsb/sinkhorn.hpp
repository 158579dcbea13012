#pragma once

// Discrete entropic OT between weighted point clouds, used as an independent
// reference for the continuous solver. Log-domain Sinkhorn on the cost
// C_ij = |x_i - y_j|^2 / 2 with regularization eps.

#include "lightsb/core.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace lightsb {

struct DiscretePlan {
  Matrix support0;  // N x D
  Matrix support1;  // M x D
  Matrix log_plan;  // N x M log joint masses
  bool converged = false;
  Index iterations = 0;
  /// Max absolute row-marginal violation after each iteration (columns are exact after the update).
  std::vector<double> violations;

  [[nodiscard]] Matrix plan() const { return log_plan.array().exp().matrix(); }

  /// E[x1 | x0 = support0_i] under the plan.
  [[nodiscard]] Matrix barycentric_projection() const {
    const Matrix p = plan();
    const Vector row_mass = p.rowwise().sum();
    Matrix out = p * support1;
    for (Index i = 0; i < out.rows(); ++i) {
      out.row(i) /= row_mass[i];
    }
    return out;
  }
};

inline Matrix squared_distance_cost(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols()) {
    throw DimensionError("squared_distance_cost: supports have different dimensions");
  }
  Matrix c(x.rows(), y.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < y.rows(); ++j) {
      c(i, j) = 0.5 * (x.row(i) - y.row(j)).squaredNorm();
    }
  }
  return c;
}

/// <C, P> + eps KL(P || a b').
inline double entropic_objective(const Matrix& cost, const Matrix& log_plan, const Vector& marg0,
                                 const Vector& marg1, double epsilon) {
  double transport = 0.0;
  double kl = 0.0;
  for (Index i = 0; i < cost.rows(); ++i) {
    for (Index j = 0; j < cost.cols(); ++j) {
      const double lp = log_plan(i, j);
      const double p = std::exp(lp);
      if (p > 0.0) {
        transport += p * cost(i, j);
        kl += p * (lp - std::log(marg0[i]) - std::log(marg1[j]));
      }
    }
  }
  return transport + epsilon * kl;
}

inline DiscretePlan sinkhorn_oracle(const Matrix& support0, const Matrix& support1, const Vector& marg0,
                                    const Vector& marg1, double epsilon, double tol, Index max_iter) {
  const Index n = support0.rows();
  const Index m = support1.rows();
  if (marg0.size() != n || marg1.size() != m) {
    throw DimensionError("sinkhorn_oracle: marginal length does not match support");
  }
  if (!(marg0.array() > 0.0).all() || !(marg1.array() > 0.0).all()) {
    throw std::invalid_argument("sinkhorn_oracle: marginals must be strictly positive");
  }
  if (std::abs(marg0.sum() - 1.0) > 1e-9 || std::abs(marg1.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument("sinkhorn_oracle: marginals must sum to one");
  }
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("sinkhorn_oracle: epsilon must be positive");
  }

  const Matrix scaled = squared_distance_cost(support0, support1) / epsilon;
  const Vector log_a = marg0.array().log();
  const Vector log_b = marg1.array().log();
  // Dual potentials divided by eps.
  Vector f = Vector::Zero(n);
  Vector g = Vector::Zero(m);
  Vector buf_row(m);
  Vector buf_col(n);

  DiscretePlan out;
  out.support0 = support0;
  out.support1 = support1;
  for (Index it = 1; it <= max_iter; ++it) {
    for (Index i = 0; i < n; ++i) {
      buf_row = g - scaled.row(i).transpose();
      f[i] = log_a[i] - log_sum_exp(buf_row);
    }
    for (Index j = 0; j < m; ++j) {
      buf_col = f - scaled.col(j);
      g[j] = log_b[j] - log_sum_exp(buf_col);
    }
    double violation = 0.0;
    for (Index i = 0; i < n; ++i) {
      buf_row = g - scaled.row(i).transpose();
      violation = std::max(violation, std::abs(std::exp(f[i] + log_sum_exp(buf_row)) - marg0[i]));
    }
    out.violations.push_back(violation);
    out.iterations = it;
    if (violation < tol) {
      out.converged = true;
      break;
    }
  }
  out.log_plan = (-scaled).colwise() + f;
  out.log_plan.rowwise() += g.transpose();
  return out;
}

}  // namespace lightsb
