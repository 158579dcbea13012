#pragma once

// Minimizes the empirical objective
//
//   L(theta) = mean_n log c(x0_n) - mean_m log v(x1_m)
//
// over the raw parameters (log alpha, r, log diag S) with analytic gradients
// and Adam. L differs from KL(pi* || pi_theta) by a theta-independent constant.

#include "lightsb/core.hpp"
#include "lightsb/mixture_potential.hpp"
#include "lightsb/parallel.hpp"
#include "lightsb/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lightsb {

/// How component means are seeded from target rows: uniformly at random, or by
/// D^2 weighting (k-means++ style) over a subsample of at most 4096 rows.
enum class MeanInit { sample, spread };

struct SolverConfig {
  double epsilon = 0.1;
  Index n_components = 10;
  double learning_rate = 1e-2;
  Index batch_size_0 = 128;
  Index batch_size_1 = 128;
  Index n_iters = 10000;
  std::uint64_t seed = 0;
  double init_scale = 0.1;
  Index eval_every = 1000;
  MeanInit mean_init = MeanInit::sample;
  // Best-of-n start: n_restarts candidates run restart_steps each, the one with
  // the lowest loss on a fixed scoring subset continues to n_iters.
  Index n_restarts = 1;
  Index restart_steps = 250;

  void validate() const {
    if (!(epsilon > 0.0) || !(learning_rate > 0.0) || !(init_scale > 0.0)) {
      throw std::invalid_argument("SolverConfig: epsilon, learning_rate and init_scale must be positive");
    }
    if (n_components < 1 || batch_size_0 < 1 || batch_size_1 < 1 || n_iters < 1 || eval_every < 1 ||
        n_restarts < 1 || restart_steps < 1) {
      throw std::invalid_argument("SolverConfig: all counts must be >= 1");
    }
    if (n_restarts > 1 && restart_steps >= n_iters) {
      throw std::invalid_argument("SolverConfig: restart_steps must be below n_iters");
    }
  }

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

/// Flat raw-parameter layout: [log alpha (K) | r (K*D, row-major) | log s (K*D, row-major)].
using GradientVector = Vector;

inline Index raw_size(Index dim, Index n_components) { return n_components * (1 + 2 * dim); }

inline Vector to_raw(const MixturePotential& pot) {
  const Index k = pot.n_components();
  const Index kd = k * pot.dim();
  Vector raw(raw_size(pot.dim(), k));
  raw.head(k) = pot.log_weights();
  raw.segment(k, kd) = Eigen::Map<const Vector>(pot.means().data(), kd);
  raw.segment(k + kd, kd) = Eigen::Map<const Vector>(pot.log_scales().data(), kd);
  return raw;
}

inline void assign_raw(MixturePotential& pot, const Vector& raw) {
  const Index k = pot.n_components();
  const Index kd = k * pot.dim();
  if (raw.size() != raw_size(pot.dim(), k)) {
    throw DimensionError("assign_raw: raw vector has the wrong length");
  }
  pot.log_weights() = raw.head(k);
  Eigen::Map<Vector>(pot.means().data(), kd) = raw.segment(k, kd);
  Eigen::Map<Vector>(pot.log_scales().data(), kd) = raw.segment(k + kd, kd);
}

inline MixturePotential from_raw(const Vector& raw, Index dim, Index n_components, double epsilon) {
  MixturePotential pot = MixturePotential::standard(dim, n_components, epsilon);
  assign_raw(pot, raw);
  pot.validate();
  return pot;
}

/// log alpha = log(1/K), log s = log(init_scale); means are target rows drawn
/// with replacement, or D^2-weighted for MeanInit::spread.
inline MixturePotential init_params(const SolverConfig& config, const SampleSet& target, CounterRng& rng) {
  config.validate();
  if (target.size() < 1) {
    throw std::invalid_argument("init_params: empty target sample set");
  }
  const Index k = config.n_components;
  const Index n = target.size();
  Matrix means(k, target.dim());
  if (config.mean_init == MeanInit::spread) {
    const Index m = std::min<Index>(n, 4096);
    std::vector<Index> rows(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) {
      rows[static_cast<std::size_t>(i)] = m == n ? i : static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    std::vector<double> d2(rows.size(), std::numeric_limits<double>::infinity());
    Index pick = rows[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(m)))];
    for (Index j = 0; j < k; ++j) {
      means.row(j) = target.row(pick);
      double total = 0.0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        d2[i] = std::min(d2[i], (target.row(rows[i]) - means.row(j)).squaredNorm());
        total += d2[i];
      }
      if (!(total > 0.0)) {
        pick = rows[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(m)))];
        continue;
      }
      double u = rng.uniform() * total;
      std::size_t i = 0;
      for (; i + 1 < rows.size(); ++i) {
        u -= d2[i];
        if (u < 0.0) {
          break;
        }
      }
      pick = rows[i];
    }
  } else {
    for (Index j = 0; j < k; ++j) {
      means.row(j) = target.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
    }
  }
  return {config.epsilon, Vector::Constant(k, -std::log(static_cast<double>(k))), std::move(means),
          Matrix::Constant(k, target.dim(), std::log(config.init_scale))};
}

/// Raised when the loss or the parameters stop being finite.
class TrainingError : public Error {
public:
  TrainingError(const std::string& what, Index iteration) : Error(what), iteration_(iteration) {}
  [[nodiscard]] Index iteration() const noexcept { return iteration_; }

private:
  Index iteration_;
};

namespace detail {

inline void check_batches(const MixturePotential& pot, const Matrix& b0, const Matrix& b1) {
  if (b0.rows() < 1 || b1.rows() < 1) {
    throw std::invalid_argument("empirical loss: batches must be nonempty");
  }
  if (b0.cols() != pot.dim() || b1.cols() != pot.dim()) {
    throw DimensionError("empirical loss: batch dimension does not match potential");
  }
}

inline std::string non_finite_message(double eps) {
  std::ostringstream os;
  os << "non-finite loss at epsilon=" << eps
     << "; try a larger epsilon, a smaller learning rate or a smaller init scale";
  return os.str();
}

}  // namespace detail

inline double empirical_loss(const MixturePotential& pot, const Matrix& batch0, const Matrix& batch1) {
  detail::check_batches(pot, batch0, batch1);
  double sum0 = 0.0;
  for (Index n = 0; n < batch0.rows(); ++n) {
    sum0 += log_sum_exp(log_tilde_weights(pot, batch0.row(n).transpose()));
  }
  double sum1 = 0.0;
  for (Index m = 0; m < batch1.rows(); ++m) {
    sum1 += log_sum_exp(log_v_terms(pot, batch1.row(m).transpose()));
  }
  const double loss = sum0 / static_cast<double>(batch0.rows()) - sum1 / static_cast<double>(batch1.rows());
  if (!std::isfinite(loss)) {
    throw Error(detail::non_finite_message(pot.epsilon()));
  }
  return loss;
}

inline double empirical_loss(const MixturePotential& pot, const SampleSet& batch0, const SampleSet& batch1) {
  return empirical_loss(pot, batch0.data(), batch1.data());
}

struct LossAndGradient {
  double loss = 0.0;
  GradientVector gradient;
};

namespace detail {
inline constexpr Index kGradientBlock = 64;
}  // namespace detail

/// Loss and its exact gradient with respect to the raw parameters. Both
/// log-sum-exp sums differentiate into softmax-weighted component terms.
/// Rows are processed in fixed blocks reduced in order, so the result does not
/// depend on the thread count.
inline LossAndGradient loss_and_gradient(const MixturePotential& pot, const Matrix& batch0, const Matrix& batch1) {
  detail::check_batches(pot, batch0, batch1);
  const Index k_count = pot.n_components();
  const Index dim = pot.dim();
  const Index kd = k_count * dim;
  const Index size = raw_size(dim, k_count);
  const double eps = pot.epsilon();
  const double inv_eps = 1.0 / eps;
  const Matrix scales = pot.scales();
  const Matrix inv_scales = (-pot.log_scales().array()).exp().matrix();
  // Per-component constant of log alpha_k + log N(x1 | r_k, eps S_k).
  const Vector log_norm1 =
      pot.log_weights().array() -
      0.5 * (static_cast<double>(dim) * (kLog2Pi + std::log(eps)) + pot.log_scales().rowwise().sum().array());
  const Matrix& means = pot.means();
  const double scale0 = 1.0 / static_cast<double>(batch0.rows());
  const double scale1 = 1.0 / static_cast<double>(batch1.rows());

  const Index blocks0 = (batch0.rows() + detail::kGradientBlock - 1) / detail::kGradientBlock;
  const Index blocks1 = (batch1.rows() + detail::kGradientBlock - 1) / detail::kGradientBlock;
  Matrix partial = Matrix::Zero(blocks0 + blocks1, size);
  Vector sums = Vector::Zero(blocks0 + blocks1);

  parallel_for(static_cast<std::size_t>(blocks0 + blocks1), [&](std::size_t bi) {
    const auto b = static_cast<Index>(bi);
    auto g = partial.row(b);
    double* g_w = g.data();
    double* g_r = g_w + k_count;
    double* g_s = g_w + k_count + kd;
    Vector w(k_count);
    Vector terms(k_count);
    double sum = 0.0;
    if (b < blocks0) {
      const Index lo = b * detail::kGradientBlock;
      const Index hi = std::min(batch0.rows(), lo + detail::kGradientBlock);
      for (Index n = lo; n < hi; ++n) {
        const auto x = batch0.row(n);
        for (Index k = 0; k < k_count; ++k) {
          double quad = 0.0;
          for (Index d = 0; d < dim; ++d) {
            quad += (scales(k, d) * x[d] + 2.0 * means(k, d)) * x[d];
          }
          terms[k] = pot.log_weights()[k] + 0.5 * inv_eps * quad;
        }
        sum += softmax(terms, w);
        for (Index k = 0; k < k_count; ++k) {
          const double wk = w[k] * scale0;
          g_w[k] += wk;
          for (Index d = 0; d < dim; ++d) {
            const double xd = x[d];
            g_r[k * dim + d] += wk * xd * inv_eps;
            g_s[k * dim + d] += wk * scales(k, d) * xd * xd * 0.5 * inv_eps;
          }
        }
      }
      sums[b] = sum * scale0;
    } else {
      const Index lo = (b - blocks0) * detail::kGradientBlock;
      const Index hi = std::min(batch1.rows(), lo + detail::kGradientBlock);
      for (Index m = lo; m < hi; ++m) {
        const auto x = batch1.row(m);
        for (Index k = 0; k < k_count; ++k) {
          double quad = 0.0;
          for (Index d = 0; d < dim; ++d) {
            const double diff = x[d] - means(k, d);
            quad += diff * diff * inv_scales(k, d);
          }
          terms[k] = log_norm1[k] - 0.5 * inv_eps * quad;
        }
        sum += softmax(terms, w);
        for (Index k = 0; k < k_count; ++k) {
          const double uk = w[k] * scale1;
          g_w[k] -= uk;
          for (Index d = 0; d < dim; ++d) {
            const double diff = x[d] - means(k, d);
            const double z = diff * inv_scales(k, d) * inv_eps;  // (x - r) / (eps s)
            g_r[k * dim + d] -= uk * z;
            g_s[k * dim + d] -= uk * (0.5 * diff * z - 0.5);
          }
        }
      }
      sums[b] = -sum * scale1;
    }
  }, 1);

  LossAndGradient out;
  out.gradient = GradientVector::Zero(size);
  out.loss = 0.0;
  for (Index b = 0; b < partial.rows(); ++b) {
    out.gradient += partial.row(b).transpose();
    out.loss += sums[b];
  }
  if (!std::isfinite(out.loss) || !all_finite(out.gradient)) {
    throw Error(detail::non_finite_message(eps));
  }
  return out;
}

inline GradientVector loss_gradient(const MixturePotential& pot, const Matrix& batch0, const Matrix& batch1) {
  return loss_and_gradient(pot, batch0, batch1).gradient;
}

inline GradientVector loss_gradient(const MixturePotential& pot, const SampleSet& batch0, const SampleSet& batch1) {
  return loss_gradient(pot, batch0.data(), batch1.data());
}

/// Adam moments; beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
struct AdamState {
  explicit AdamState(Index size) : m(Vector::Zero(size)), v(Vector::Zero(size)) {}

  Vector m;
  Vector v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(AdamState& state, Vector& params, const GradientVector& grad, double lr) {
  if (grad.size() != params.size() || state.m.size() != params.size()) {
    throw DimensionError("adam_step: size mismatch");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (Index i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

struct TrainReport {
  Index iteration = 0;
  double loss = 0.0;
  double wallclock_ms = 0.0;
  std::map<std::string, double> metrics;
};

struct TrainResult {
  MixturePotential potential;
  std::vector<TrainReport> reports;
};

/// Called after every eval_every-th step and after the last one. May add
/// entries to report.metrics.
using TrainCallback = std::function<void(TrainReport& report, const MixturePotential& current)>;

namespace detail {
inline void draw_batch(const Matrix& source, Matrix& batch, CounterRng& rng) {
  const auto n = static_cast<std::uint64_t>(source.rows());
  for (Index i = 0; i < batch.rows(); ++i) {
    batch.row(i) = source.row(static_cast<Index>(rng.below(n)));
  }
}
}  // namespace detail

namespace detail {

/// One optimizer run: parameters, Adam moments and its own minibatch stream.
struct TrainRun {
  TrainRun(const SolverConfig& config, const SampleSet& x1, CounterRng init_rng, CounterRng batch_stream)
      : pot(init_params(config, x1, init_rng)),
        raw(to_raw(pot)),
        adam(raw.size()),
        batch_rng(batch_stream),
        b0(config.batch_size_0, x1.dim()),
        b1(config.batch_size_1, x1.dim()) {}

  double step(const SolverConfig& config, const SampleSet& x0, const SampleSet& x1, Index it) {
    draw_batch(x0.data(), b0, batch_rng);
    draw_batch(x1.data(), b1, batch_rng);
    LossAndGradient lg;
    try {
      lg = loss_and_gradient(pot, b0, b1);
    } catch (const Error& e) {
      throw TrainingError("iteration " + std::to_string(it) + ": " + e.what(), it);
    }
    adam_step(adam, raw, lg.gradient, config.learning_rate);
    if (!all_finite(raw)) {
      throw TrainingError("iteration " + std::to_string(it) + ": parameters became non-finite; " +
                              "try a smaller learning rate",
                          it);
    }
    assign_raw(pot, raw);
    return lg.loss;
  }

  MixturePotential pot;
  Vector raw;
  AdamState adam;
  CounterRng batch_rng;
  Matrix b0;
  Matrix b1;
};

inline constexpr Index kRestartScoreRows = 4096;

}  // namespace detail

/// Minibatch Adam on the empirical objective. Minibatches are drawn uniformly
/// with replacement; the run is a deterministic function of config.seed.
/// With n_restarts > 1 reports start after the restart phase.
inline TrainResult train(const SolverConfig& config, const SampleSet& x0, const SampleSet& x1,
                         const TrainCallback& callback = {}) {
  config.validate();
  if (x0.dim() != x1.dim()) {
    throw DimensionError("train: source and target dimensions differ");
  }
  CounterRng rng(config.seed);
  CounterRng init_rng = rng.fork();
  CounterRng batch_rng = rng.fork();
  std::vector<detail::TrainRun> runs;
  runs.emplace_back(config, x1, init_rng, batch_rng);

  const auto start = std::chrono::steady_clock::now();
  Index first = 1;
  if (config.n_restarts > 1) {
    for (Index r = 1; r < config.n_restarts; ++r) {
      CounterRng ir = rng.fork();
      CounterRng br = rng.fork();
      runs.emplace_back(config, x1, ir, br);
    }
    const Matrix score0 = x0.data().topRows(std::min(x0.size(), detail::kRestartScoreRows));
    const Matrix score1 = x1.data().topRows(std::min(x1.size(), detail::kRestartScoreRows));
    std::size_t best = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < runs.size(); ++r) {
      double loss = std::numeric_limits<double>::infinity();
      try {
        for (Index it = 1; it <= config.restart_steps; ++it) {
          runs[r].step(config, x0, x1, it);
        }
        loss = empirical_loss(runs[r].pot, score0, score1);
      } catch (const Error&) {
        // a diverged candidate simply loses
      }
      if (loss < best_loss) {
        best_loss = loss;
        best = r;
      }
    }
    if (!std::isfinite(best_loss)) {
      throw TrainingError("every restart candidate diverged", config.restart_steps);
    }
    std::swap(runs[0], runs[best]);
    runs.erase(runs.begin() + 1, runs.end());
    first = config.restart_steps + 1;
  }

  detail::TrainRun& run = runs.front();
  std::vector<TrainReport> reports;
  for (Index it = first; it <= config.n_iters; ++it) {
    const double loss = run.step(config, x0, x1, it);
    if (it % config.eval_every == 0 || it == config.n_iters) {
      TrainReport report;
      report.iteration = it;
      report.loss = loss;
      report.wallclock_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      if (callback) {
        callback(report, run.pot);
      }
      reports.push_back(std::move(report));
    }
  }
  return {std::move(run.pot), std::move(reports)};
}

}  // namespace lightsb
