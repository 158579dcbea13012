#pragma once

// Quality metrics and the self-benchmark: energy distance, Bures-Wasserstein
// UVP (plain and conditional), Monte-Carlo KL between plans, and a generator
// of source/target pairs whose entropic OT plan is known exactly.

#include "lightsb/core.hpp"
#include "lightsb/mixture_potential.hpp"
#include "lightsb/parallel.hpp"
#include "lightsb/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lightsb {

struct MetricEstimate {
  double value = 0.0;
  double std_error = 0.0;
  Index n = 0;
};

/// 2 E|x - y| - E|x - x'| - E|y - y'| with every expectation taken over all
/// index pairs of the empirical measures. Zero exactly when X and Y coincide.
inline double energy_distance(const SampleSet& x, const SampleSet& y) {
  if (x.dim() != y.dim()) {
    throw DimensionError("energy_distance: dimensions differ");
  }
  if (x.size() < 2 || y.size() < 2) {
    throw std::invalid_argument("energy_distance: need at least two samples per set");
  }
  const Matrix& a = x.data();
  const Matrix& b = y.data();
  auto row_sums = [](const Matrix& lhs, const Matrix& rhs) {
    std::vector<double> sums(static_cast<std::size_t>(lhs.rows()));
    parallel_for(sums.size(), [&](std::size_t i) {
      const auto li = lhs.row(static_cast<Index>(i));
      double s = 0.0;
      for (Index j = 0; j < rhs.rows(); ++j) {
        s += (li - rhs.row(j)).norm();
      }
      sums[i] = s;
    }, 32);
    double total = 0.0;
    for (const double s : sums) {
      total += s;
    }
    return total / (static_cast<double>(lhs.rows()) * static_cast<double>(rhs.rows()));
  };
  const double xy = row_sums(a, b);
  const double xx = row_sums(a, a);
  const double yy = row_sums(b, b);
  return 2.0 * xy - xx - yy;
}

namespace detail {
inline Matrix sym_sqrt(const Matrix& m) {
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const Vector roots = es.eigenvalues().array().max(0.0).sqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}
}  // namespace detail

inline GaussianMoments sample_moments(const SampleSet& x) {
  GaussianMoments m;
  m.mean = x.data().colwise().mean().transpose();
  const Matrix centered = x.data().rowwise() - m.mean.transpose();
  m.cov = (centered.transpose() * centered) / static_cast<double>(x.size() - 1);
  return m;
}

/// Squared Bures-Wasserstein distance between N(mu_x, Sx) and N(mu_y, Sy).
inline double bures_wasserstein_sq(const GaussianMoments& x, const GaussianMoments& y) {
  const Matrix root_x = detail::sym_sqrt(x.cov);
  const Matrix cross = detail::sym_sqrt(root_x * y.cov * root_x);
  return (x.mean - y.mean).squaredNorm() + (x.cov + y.cov - 2.0 * cross).trace();
}

/// 100 * BW^2 / (tr(S_target) / 2), in percent.
inline double bw2_uvp(const GaussianMoments& estimate, const GaussianMoments& target) {
  if (estimate.mean.size() != target.mean.size()) {
    throw DimensionError("bw2_uvp: dimensions differ");
  }
  return 100.0 * bures_wasserstein_sq(estimate, target) / (0.5 * target.cov.trace());
}

inline double bw2_uvp(const SampleSet& x, const SampleSet& y) {
  if (x.dim() != y.dim()) {
    throw DimensionError("bw2_uvp: dimensions differ");
  }
  if (x.size() <= x.dim() || y.size() <= y.dim()) {
    throw std::invalid_argument("bw2_uvp: need more samples than dimensions");
  }
  return bw2_uvp(sample_moments(x), sample_moments(y));
}

/// Distribution of source points for generated benchmarks.
struct SourceSpec {
  enum class Kind { gaussian, uniform };
  Kind kind = Kind::gaussian;
  double scale = 1.0;  // std-dev for gaussian, half-width for uniform

  [[nodiscard]] Vector draw(Index dim, CounterRng& rng) const {
    Vector x(dim);
    for (Index d = 0; d < dim; ++d) {
      x[d] = kind == Kind::gaussian ? scale * rng.normal() : scale * (2.0 * rng.uniform() - 1.0);
    }
    return x;
  }

  /// Row i uses substream i of a key forked from `rng`.
  [[nodiscard]] SampleSet sample(Index dim, Index n, CounterRng& rng) const {
    const CounterRng base = rng.fork();
    Matrix out(n, dim);
    for (Index i = 0; i < n; ++i) {
      CounterRng local = base.substream(static_cast<std::uint64_t>(i));
      out.row(i) = draw(dim, local).transpose();
    }
    return SampleSet(std::move(out));
  }

  [[nodiscard]] std::string name() const { return kind == Kind::gaussian ? "gaussian" : "uniform"; }
};

/// Source samples paired with x1 ~ pi*(. | x0) under a known potential. The
/// plan pi* is by construction the entropic OT plan between the source and the
/// induced target marginal.
struct GroundTruthPair {
  MixturePotential potential;
  SourceSpec source;
  SampleSet x0;
  SampleSet x1;
};

/// Random potential: means uniform in the ball of radius 3, log scales uniform
/// in [log 0.05, log 0.5], weights from a flat Dirichlet.
inline MixturePotential random_potential(Index dim, Index k, double epsilon, CounterRng& rng) {
  Vector log_w(k);
  Vector w(k);
  for (Index j = 0; j < k; ++j) {
    w[j] = -std::log(rng.uniform_pos());
  }
  log_w = (w / w.sum()).array().log();
  Matrix means(k, dim);
  Matrix log_scales(k, dim);
  const double lo = std::log(0.05);
  const double hi = std::log(0.5);
  for (Index j = 0; j < k; ++j) {
    Vector dir(dim);
    for (Index d = 0; d < dim; ++d) {
      dir[d] = rng.normal();
    }
    const double radius = 3.0 * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
    means.row(j) = (radius / dir.norm()) * dir.transpose();
    for (Index d = 0; d < dim; ++d) {
      log_scales(j, d) = lo + (hi - lo) * rng.uniform();
    }
  }
  return {epsilon, std::move(log_w), std::move(means), std::move(log_scales)};
}

inline GroundTruthPair make_ground_truth_pair(Index dim, Index k, double epsilon, const SourceSpec& source,
                                              Index n_pairs, CounterRng& rng) {
  if (n_pairs < 1 || dim < 1 || k < 1) {
    throw std::invalid_argument("make_ground_truth_pair: dim, k and n_pairs must be >= 1");
  }
  CounterRng theta_rng = rng.fork();
  CounterRng source_rng = rng.fork();
  CounterRng push_rng = rng.fork();
  MixturePotential truth = random_potential(dim, k, epsilon, theta_rng);
  SampleSet x0 = source.sample(dim, n_pairs, source_rng);
  SampleSet x1 = push_forward(truth, x0, push_rng);
  return {std::move(truth), source, std::move(x0), std::move(x1)};
}

enum class MomentMode { exact, sampled };

/// Conditional BW-UVP: bw2_uvp(pi_model(. | x0), pi_truth(. | x0)) averaged
/// (unweighted) over n_test_x0 fresh source points. With MomentMode::exact the
/// conditional moments are computed in closed form and n_cond is unused.
inline MetricEstimate cbw2_uvp(const MixturePotential& model, const MixturePotential& truth,
                               const SourceSpec& source, Index n_test_x0, Index n_cond, CounterRng& rng,
                               MomentMode mode = MomentMode::exact) {
  if (model.dim() != truth.dim()) {
    throw DimensionError("cbw2_uvp: model and truth dimensions differ");
  }
  const Index dim = truth.dim();
  if (n_test_x0 < 1 || (mode == MomentMode::sampled && n_cond < dim + 1)) {
    throw std::invalid_argument("cbw2_uvp: counts too small");
  }
  const CounterRng base = rng.fork();
  std::vector<double> values(static_cast<std::size_t>(n_test_x0));
  parallel_for(values.size(), [&](std::size_t i) {
    CounterRng local = base.substream(i);
    const Vector x0 = source.draw(dim, local);
    if (mode == MomentMode::exact) {
      values[i] = bw2_uvp(conditional_moments(model, x0), conditional_moments(truth, x0));
    } else {
      const SampleSet a = sample_conditional(model, x0, n_cond, local);
      const SampleSet b = sample_conditional(truth, x0, n_cond, local);
      values[i] = bw2_uvp(a, b);
    }
  }, 8);
  MetricEstimate out;
  out.n = n_test_x0;
  double sum = 0.0;
  for (const double v : values) {
    sum += v;
  }
  out.value = sum / static_cast<double>(n_test_x0);
  if (n_test_x0 > 1) {
    double ss = 0.0;
    for (const double v : values) {
      ss += (v - out.value) * (v - out.value);
    }
    out.std_error = std::sqrt(ss / static_cast<double>(n_test_x0 - 1) / static_cast<double>(n_test_x0));
  }
  return out;
}

inline MetricEstimate cbw2_uvp(const MixturePotential& model, const GroundTruthPair& truth, Index n_test_x0,
                               Index n_cond, CounterRng& rng, MomentMode mode = MomentMode::exact) {
  return cbw2_uvp(model, truth.potential, truth.source, n_test_x0, n_cond, rng, mode);
}

using PointSampler = std::function<Vector(CounterRng&)>;

/// Monte-Carlo estimate of KL(pi_a || pi_b) = E_x0 E_{x1 ~ pi_a(.|x0)} log(pi_a / pi_b).
/// The standard error is computed across the n_outer per-x0 inner means.
inline MetricEstimate kl_plan_mc(const MixturePotential& a, const MixturePotential& b, const PointSampler& x0_sampler,
                                 Index n_outer, Index n_inner, CounterRng& rng) {
  if (a.dim() != b.dim() || a.epsilon() != b.epsilon()) {
    throw DimensionError("kl_plan_mc: potentials must share dimension and epsilon");
  }
  if (n_outer < 2 || n_inner < 1) {
    throw std::invalid_argument("kl_plan_mc: need n_outer >= 2 and n_inner >= 1");
  }
  const CounterRng base = rng.fork();
  std::vector<double> means(static_cast<std::size_t>(n_outer));
  parallel_for(means.size(), [&](std::size_t i) {
    CounterRng local = base.substream(i);
    const Vector x0 = x0_sampler(local);
    const ConditionalMixture ca = conditional_plan(a, x0);
    const ConditionalMixture cb = conditional_plan(b, x0);
    const Vector wa = ca.weights();
    Vector x1(a.dim());
    double acc = 0.0;
    for (Index j = 0; j < n_inner; ++j) {
      draw_from(ca, wa, local, x1);
      acc += log_pi_cond(ca, x1) - log_pi_cond(cb, x1);
    }
    means[i] = acc / static_cast<double>(n_inner);
  }, 4);
  MetricEstimate out;
  out.n = n_outer * n_inner;
  double sum = 0.0;
  for (const double m : means) {
    sum += m;
  }
  out.value = sum / static_cast<double>(n_outer);
  double ss = 0.0;
  for (const double m : means) {
    ss += (m - out.value) * (m - out.value);
  }
  out.std_error = std::sqrt(ss / static_cast<double>(n_outer - 1) / static_cast<double>(n_outer));
  return out;
}

}  // namespace lightsb
