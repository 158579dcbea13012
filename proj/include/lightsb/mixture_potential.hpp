#pragma once

// Gaussian-mixture parameterization of the adjusted Schrodinger potential
//
//   v(x1) = sum_k alpha_k N(x1 | r_k, eps * S_k),   S_k diagonal,
//
// and the closed-form conditional plan it induces:
//
//   pi(x1 | x0) = sum_k alpha~_k(x0) N(x1 | r_k + S_k x0, eps * S_k) / c(x0)
//   alpha~_k(x0) = alpha_k exp((x0' S_k x0 + 2 r_k' x0) / (2 eps))
//   c(x0)        = sum_k alpha~_k(x0).
//
// Everything is evaluated in the log domain; alpha~ overflows double precision
// long before eps reaches the values used in practice.

#include "lightsb/core.hpp"
#include "lightsb/parallel.hpp"
#include "lightsb/rng.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

namespace lightsb {

using ConstVectorRef = Eigen::Ref<const Vector>;

/// theta = {log alpha_k, r_k, log diag S_k} plus the volatility eps.
class MixturePotential {
public:
  MixturePotential() = default;

  MixturePotential(double epsilon, Vector log_weights, Matrix means, Matrix log_scales)
      : epsilon_(epsilon),
        log_weights_(std::move(log_weights)),
        means_(std::move(means)),
        log_scales_(std::move(log_scales)) {
    validate();
  }

  /// K components in D dimensions with unit weights, zero means and S_k = I.
  static MixturePotential standard(Index dim, Index n_components, double epsilon) {
    return {epsilon, Vector::Zero(n_components), Matrix::Zero(n_components, dim),
            Matrix::Zero(n_components, dim)};
  }

  [[nodiscard]] Index dim() const noexcept { return means_.cols(); }
  [[nodiscard]] Index n_components() const noexcept { return means_.rows(); }
  [[nodiscard]] double epsilon() const noexcept { return epsilon_; }
  [[nodiscard]] const Vector& log_weights() const noexcept { return log_weights_; }
  [[nodiscard]] const Matrix& means() const noexcept { return means_; }
  [[nodiscard]] const Matrix& log_scales() const noexcept { return log_scales_; }

  Vector& log_weights() noexcept { return log_weights_; }
  Matrix& means() noexcept { return means_; }
  Matrix& log_scales() noexcept { return log_scales_; }

  /// Diagonal entries of S_k.
  [[nodiscard]] Matrix scales() const { return log_scales_.array().exp().matrix(); }

  void validate() const {
    if (!(epsilon_ > 0.0) || !std::isfinite(epsilon_)) {
      throw std::invalid_argument("MixturePotential: epsilon must be positive and finite");
    }
    const Index k = log_weights_.size();
    if (k < 1 || means_.rows() != k || log_scales_.rows() != k || means_.cols() < 1 ||
        log_scales_.cols() != means_.cols()) {
      throw DimensionError("MixturePotential: inconsistent parameter shapes");
    }
    if (!all_finite(log_weights_) || !all_finite(means_) || !all_finite(log_scales_)) {
      throw std::invalid_argument("MixturePotential: non-finite parameter");
    }
  }

  friend bool operator==(const MixturePotential& a, const MixturePotential& b) {
    return a.epsilon_ == b.epsilon_ && a.log_weights_.size() == b.log_weights_.size() &&
           a.means_.rows() == b.means_.rows() && a.means_.cols() == b.means_.cols() &&
           a.log_weights_ == b.log_weights_ && a.means_ == b.means_ &&
           a.log_scales_ == b.log_scales_;
  }

private:
  double epsilon_ = 1.0;
  Vector log_weights_;
  Matrix means_;
  Matrix log_scales_;
};

/// pi(x1 | x0) for one x0: a normalized Gaussian mixture with diagonal covariances.
struct ConditionalMixture {
  Vector log_tilde_weights;  // log alpha~_k(x0), unnormalized
  Matrix cond_means;         // r_k + S_k x0
  Matrix cov_diags;          // eps * diag S_k
  double log_norm = 0.0;     // log c(x0)

  [[nodiscard]] Vector weights() const { return (log_tilde_weights.array() - log_norm).exp().matrix(); }
};

namespace detail {

inline void check_point(const MixturePotential& pot, const ConstVectorRef& x, const char* what) {
  if (x.size() != pot.dim()) {
    throw DimensionError(std::string(what) + ": point dimension does not match potential");
  }
  require_finite(x, what);
}

/// log N(x | mean, diag(var)) for one component.
inline double log_normal_diag(const ConstVectorRef& x, const Eigen::Ref<const Vector>& mean,
                              const Eigen::Ref<const Vector>& log_var) {
  double acc = 0.0;
  for (Index d = 0; d < x.size(); ++d) {
    const double diff = x[d] - mean[d];
    acc += kLog2Pi + log_var[d] + diff * diff * std::exp(-log_var[d]);
  }
  return -0.5 * acc;
}

}  // namespace detail

/// Per-component log terms of log v(x1): log alpha_k + log N(x1 | r_k, eps S_k).
inline Vector log_v_terms(const MixturePotential& pot, const ConstVectorRef& x1) {
  const double log_eps = std::log(pot.epsilon());
  const double inv_eps = 1.0 / pot.epsilon();
  const Index dim = pot.dim();
  Vector terms(pot.n_components());
  for (Index k = 0; k < pot.n_components(); ++k) {
    double acc = 0.0;
    for (Index d = 0; d < dim; ++d) {
      const double ls = pot.log_scales()(k, d);
      const double diff = x1[d] - pot.means()(k, d);
      acc += kLog2Pi + log_eps + ls + diff * diff * inv_eps * std::exp(-ls);
    }
    terms[k] = pot.log_weights()[k] - 0.5 * acc;
  }
  return terms;
}

/// log v(x1).
inline double log_v(const MixturePotential& pot, const ConstVectorRef& x1) {
  detail::check_point(pot, x1, "log_v");
  return log_sum_exp(log_v_terms(pot, x1));
}

/// log alpha~_k(x0) = log alpha_k + (x0' S_k x0 + 2 r_k' x0) / (2 eps).
inline Vector log_tilde_weights(const MixturePotential& pot, const ConstVectorRef& x0) {
  const double inv_2eps = 0.5 / pot.epsilon();
  Vector out(pot.n_components());
  for (Index k = 0; k < pot.n_components(); ++k) {
    double quad = 0.0;
    for (Index d = 0; d < pot.dim(); ++d) {
      const double xd = x0[d];
      quad += std::exp(pot.log_scales()(k, d)) * xd * xd + 2.0 * pot.means()(k, d) * xd;
    }
    out[k] = pot.log_weights()[k] + quad * inv_2eps;
  }
  return out;
}

/// log c(x0).
inline double log_normalizer(const MixturePotential& pot, const ConstVectorRef& x0) {
  detail::check_point(pot, x0, "log_normalizer");
  return log_sum_exp(log_tilde_weights(pot, x0));
}

inline ConditionalMixture conditional_plan(const MixturePotential& pot, const ConstVectorRef& x0) {
  detail::check_point(pot, x0, "conditional_plan");
  ConditionalMixture out;
  out.log_tilde_weights = log_tilde_weights(pot, x0);
  out.log_norm = log_sum_exp(out.log_tilde_weights);
  const Matrix scales = pot.scales();
  out.cond_means = pot.means() + (scales.array().rowwise() * x0.transpose().array()).matrix();
  out.cov_diags = pot.epsilon() * scales;
  return out;
}

/// log density of a normalized diagonal-covariance mixture with log weights `log_w` (already normalized).
inline double log_mixture_density(const Vector& log_w, const Matrix& means, const Matrix& cov_diags,
                                  const ConstVectorRef& x) {
  Vector terms(log_w.size());
  const Matrix log_cov = cov_diags.array().log().matrix();
  for (Index k = 0; k < log_w.size(); ++k) {
    terms[k] = log_w[k] + detail::log_normal_diag(x, means.row(k).transpose(), log_cov.row(k).transpose());
  }
  return log_sum_exp(terms);
}

inline double log_pi_cond(const ConditionalMixture& cond, const ConstVectorRef& x1) {
  const Vector log_w = cond.log_tilde_weights.array() - cond.log_norm;
  return log_mixture_density(log_w, cond.cond_means, cond.cov_diags, x1);
}

/// log pi(x1 | x0).
inline double log_pi_cond(const MixturePotential& pot, const ConstVectorRef& x0, const ConstVectorRef& x1) {
  detail::check_point(pot, x1, "log_pi_cond");
  return log_pi_cond(conditional_plan(pot, x0), x1);
}

/// One draw from a conditional mixture using the generator `rng`.
inline void draw_from(const ConditionalMixture& cond, const Vector& weights, CounterRng& rng,
                      Eigen::Ref<Vector> out) {
  const Index k_count = weights.size();
  const double u = rng.uniform();
  double cumulative = 0.0;
  Index k = k_count - 1;
  for (Index j = 0; j < k_count; ++j) {
    cumulative += weights[j];
    if (u < cumulative) {
      k = j;
      break;
    }
  }
  for (Index d = 0; d < out.size(); ++d) {
    out[d] = cond.cond_means(k, d) + std::sqrt(cond.cov_diags(k, d)) * rng.normal();
  }
}

/// n draws from pi(. | x0). Draw i uses substream i of a key forked from `rng`.
inline SampleSet sample_conditional(const MixturePotential& pot, const ConstVectorRef& x0, Index n,
                                    CounterRng& rng) {
  if (n < 1) {
    throw std::invalid_argument("sample_conditional: n must be >= 1");
  }
  const ConditionalMixture cond = conditional_plan(pot, x0);
  const Vector weights = cond.weights();
  const CounterRng base = rng.fork();
  Matrix out(n, pot.dim());
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    CounterRng local = base.substream(i);
    Vector row(pot.dim());
    draw_from(cond, weights, local, row);
    out.row(static_cast<Index>(i)) = row.transpose();
  }, 256);
  return SampleSet(std::move(out));
}

/// One x1 ~ pi(. | x0_i) for every row of `x0`; row i uses substream i.
inline SampleSet push_forward(const MixturePotential& pot, const SampleSet& x0, CounterRng& rng) {
  if (x0.dim() != pot.dim()) {
    throw DimensionError("push_forward: sample dimension does not match potential");
  }
  const CounterRng base = rng.fork();
  Matrix out(x0.size(), pot.dim());
  parallel_for(static_cast<std::size_t>(x0.size()), [&](std::size_t i) {
    const ConditionalMixture cond = conditional_plan(pot, x0.row(static_cast<Index>(i)).transpose());
    CounterRng local = base.substream(i);
    Vector row(pot.dim());
    draw_from(cond, cond.weights(), local, row);
    out.row(static_cast<Index>(i)) = row.transpose();
  }, 64);
  return SampleSet(std::move(out));
}

/// Mean and full covariance of a diagonal-covariance Gaussian mixture.
struct GaussianMoments {
  Vector mean;
  Matrix cov;
};

inline GaussianMoments mixture_moments(const Vector& weights, const Matrix& means, const Matrix& cov_diags) {
  const Index dim = means.cols();
  GaussianMoments m;
  m.mean = (weights.transpose() * means).transpose();
  m.cov = Matrix::Zero(dim, dim);
  for (Index k = 0; k < weights.size(); ++k) {
    const Vector centered = means.row(k).transpose() - m.mean;
    m.cov.noalias() += weights[k] * (centered * centered.transpose());
    m.cov.diagonal() += weights[k] * cov_diags.row(k).transpose();
  }
  return m;
}

/// Exact moments of pi(. | x0).
inline GaussianMoments conditional_moments(const MixturePotential& pot, const ConstVectorRef& x0) {
  const ConditionalMixture cond = conditional_plan(pot, x0);
  return mixture_moments(cond.weights(), cond.cond_means, cond.cov_diags);
}

}  // namespace lightsb
