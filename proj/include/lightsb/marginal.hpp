#pragma once

// Density model for the source marginal, fitted separately by EM, so that the
// full plan density p(x0) pi(x1 | x0) can be evaluated.

#include "lightsb/core.hpp"
#include "lightsb/mixture_potential.hpp"
#include "lightsb/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace lightsb {

/// Normalized diagonal-covariance Gaussian mixture.
struct MarginalModel {
  Vector weights;    // K, sums to one
  Matrix means;      // K x D
  Matrix variances;  // K x D, positive

  [[nodiscard]] Index dim() const noexcept { return means.cols(); }
  [[nodiscard]] Index n_components() const noexcept { return means.rows(); }

  [[nodiscard]] double log_density(const ConstVectorRef& x) const {
    if (x.size() != dim()) {
      throw DimensionError("MarginalModel::log_density: dimension mismatch");
    }
    return log_mixture_density(weights.array().log().matrix(), means, variances, x);
  }
};

struct EmFit {
  MarginalModel model;
  /// Log-likelihood (sum over samples) before each iteration and after the last.
  std::vector<double> log_likelihood;
  /// Set when a component variance fell below the floor and was clamped.
  bool variance_clamped = false;
};

inline constexpr double kEmVarianceFloor = 1e-8;

/// Diagonal-covariance Gaussian-mixture EM. Initial means are k distinct rows
/// chosen at random, initial variances the pooled per-coordinate variance.
inline EmFit fit_marginal_em(const SampleSet& samples, Index k, Index iters, CounterRng& rng) {
  const Index n = samples.size();
  const Index dim = samples.dim();
  if (k < 1 || n < k) {
    throw std::invalid_argument("fit_marginal_em: need 1 <= k <= number of samples");
  }
  const Matrix& x = samples.data();

  // Partial Fisher-Yates for k distinct rows.
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }

  const Vector mean = x.colwise().mean().transpose();
  const Vector pooled_var =
      ((x.rowwise() - mean.transpose()).array().square().colwise().sum() / static_cast<double>(n))
          .transpose()
          .max(kEmVarianceFloor);

  EmFit fit;
  MarginalModel& m = fit.model;
  m.weights = Vector::Constant(k, 1.0 / static_cast<double>(k));
  m.means.resize(k, dim);
  m.variances.resize(k, dim);
  for (Index j = 0; j < k; ++j) {
    m.means.row(j) = x.row(idx[static_cast<std::size_t>(j)]);
    m.variances.row(j) = pooled_var.transpose();
  }

  Matrix resp(n, k);
  auto e_step = [&]() {
    const Vector log_w = m.weights.array().log();
    const Matrix log_var = m.variances.array().log();
    double ll = 0.0;
    Vector row(k);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < k; ++j) {
        row[j] = log_w[j] + detail::log_normal_diag(x.row(i).transpose(), m.means.row(j).transpose(),
                                                    log_var.row(j).transpose());
      }
      const double lse = log_sum_exp(row);
      ll += lse;
      resp.row(i) = (row.array() - lse).exp().transpose();
    }
    return ll;
  };

  for (Index it = 0; it < iters; ++it) {
    fit.log_likelihood.push_back(e_step());
    const Vector nk = resp.colwise().sum().transpose();
    for (Index j = 0; j < k; ++j) {
      // An empty component keeps its previous parameters.
      if (!(nk[j] > 0.0)) {
        continue;
      }
      const Vector mu = (resp.col(j).transpose() * x).transpose() / nk[j];
      Vector var = (resp.col(j).transpose() * (x.rowwise() - mu.transpose()).array().square().matrix())
                       .transpose() /
                   nk[j];
      for (Index d = 0; d < dim; ++d) {
        if (!(var[d] >= kEmVarianceFloor)) {
          var[d] = kEmVarianceFloor;
          fit.variance_clamped = true;
        }
      }
      m.means.row(j) = mu.transpose();
      m.variances.row(j) = var.transpose();
    }
    m.weights = nk / nk.sum();
  }
  fit.log_likelihood.push_back(e_step());
  return fit;
}

/// log p(x0) + log pi(x1 | x0).
inline double log_plan_density(const MarginalModel& marginal, const MixturePotential& pot,
                               const ConstVectorRef& x0, const ConstVectorRef& x1) {
  if (marginal.dim() != pot.dim()) {
    throw DimensionError("log_plan_density: marginal and potential dimensions differ");
  }
  return marginal.log_density(x0) + log_pi_cond(pot, x0, x1);
}

}  // namespace lightsb
