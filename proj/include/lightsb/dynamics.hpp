#pragma once

// The bridge process associated with a mixture potential: closed-form drift,
// Euler-Maruyama integration of dX = g(X, t) dt + sqrt(eps) dW, and exact
// trajectory sampling through Brownian-bridge refinement between X0 and X1.

#include "lightsb/core.hpp"
#include "lightsb/mixture_potential.hpp"
#include "lightsb/parallel.hpp"
#include "lightsb/rng.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lightsb {

/// The drift has a 1 / (1 - t) factor; evaluation is restricted to t <= 1 - kTimeGuard.
inline constexpr double kTimeGuard = 1e-6;

/// Particle states on a common time grid.
struct TrajectoryBatch {
  std::vector<double> times;  // strictly increasing, times.front() == 0
  Matrix states;              // P x (T * D); particle p at time j occupies columns [j * D, (j + 1) * D)
  Index dim = 0;
  double epsilon = 0.0;

  [[nodiscard]] Index n_particles() const noexcept { return states.rows(); }
  [[nodiscard]] Index n_times() const noexcept { return static_cast<Index>(times.size()); }

  [[nodiscard]] auto state(Index particle, Index time) const { return states.row(particle).segment(time * dim, dim); }
  [[nodiscard]] auto state(Index particle, Index time) { return states.row(particle).segment(time * dim, dim); }

  /// All particles at time index j as a sample set.
  [[nodiscard]] SampleSet at(Index time) const { return SampleSet(states.middleCols(time * dim, dim)); }

  void validate() const {
    if (times.empty() || times.front() != 0.0) {
      throw std::invalid_argument("TrajectoryBatch: time grid must start at 0");
    }
    for (std::size_t j = 1; j < times.size(); ++j) {
      if (!(times[j] > times[j - 1])) {
        throw std::invalid_argument("TrajectoryBatch: times must be strictly increasing");
      }
    }
    if (states.cols() != n_times() * dim) {
      throw DimensionError("TrajectoryBatch: state matrix does not match time grid");
    }
    require_finite(states, "TrajectoryBatch");
  }

  friend bool operator==(const TrajectoryBatch& a, const TrajectoryBatch& b) {
    return a.times == b.times && a.dim == b.dim && a.epsilon == b.epsilon &&
           a.states.rows() == b.states.rows() && a.states.cols() == b.states.cols() && a.states == b.states;
  }
};

/// g(x, t) = eps * grad_x log( N(x | 0, eps (1-t) I) sum_k alpha_k N(r_k | 0, eps S_k) I_k(x, t) ),
/// where I_k is the Gaussian integral of exp(-x'A_k x'/2 + h_k'x') with
///   A_k = t / (eps (1-t)) I + S_k^-1 / eps,   h_k = x / (eps (1-t)) + S_k^-1 r_k / eps,
/// so that log I_k = h_k' A_k^-1 h_k / 2 - log|A_k| / 2 + const. Differentiating gives
///   g(x, t) = (sum_k w_k A_k^-1 h_k - x) / (1 - t),  w = softmax over the component terms.
inline Vector drift(const MixturePotential& pot, const ConstVectorRef& x, double t) {
  if (!(t >= 0.0) || t > 1.0 - kTimeGuard) {
    throw std::domain_error("drift: t must lie in [0, 1 - 1e-6], got " + std::to_string(t));
  }
  detail::check_point(pot, x, "drift");
  const double eps = pot.epsilon();
  const double one_minus_t = 1.0 - t;
  const double a_shared = t / (eps * one_minus_t);
  const double log_eps = std::log(eps);
  const Index k_count = pot.n_components();
  const Index dim = pot.dim();

  Vector log_terms(k_count);
  Matrix centers(k_count, dim);
  for (Index k = 0; k < k_count; ++k) {
    double acc = pot.log_weights()[k];
    for (Index d = 0; d < dim; ++d) {
      const double ls = pot.log_scales()(k, d);
      const double inv_s = std::exp(-ls);
      const double r = pot.means()(k, d);
      const double a = a_shared + inv_s / eps;
      const double h = x[d] / (eps * one_minus_t) + r * inv_s / eps;
      // log N(r | 0, eps s) + h^2 / (2 a) - log(a) / 2
      acc += -0.5 * (kLog2Pi + log_eps + ls + r * r * inv_s / eps) + 0.5 * h * h / a - 0.5 * std::log(a);
      // A^-1 h, scaled by eps (1 - t) top and bottom
      centers(k, d) = (x[d] + one_minus_t * r * inv_s) / (t + one_minus_t * inv_s);
    }
    log_terms[k] = acc;
  }
  Vector w;
  softmax(log_terms, w);
  return ((centers.transpose() * w) - x) / one_minus_t;
}

/// Euler-Maruyama with step 1 / n_steps. States are recorded every `record_stride`
/// steps and always at t = 1. Particle i draws its noise from substream i.
inline TrajectoryBatch euler_maruyama(const MixturePotential& pot, const SampleSet& x0, Index n_steps,
                                      CounterRng& rng, Index record_stride = 1) {
  if (n_steps < 1 || record_stride < 1) {
    throw std::invalid_argument("euler_maruyama: n_steps and record_stride must be >= 1");
  }
  if (x0.dim() != pot.dim()) {
    throw DimensionError("euler_maruyama: sample dimension does not match potential");
  }
  const Index dim = pot.dim();
  const double dt = 1.0 / static_cast<double>(n_steps);
  const double noise_scale = std::sqrt(pot.epsilon() * dt);

  TrajectoryBatch out;
  out.dim = dim;
  out.epsilon = pot.epsilon();
  std::vector<Index> recorded_steps;
  for (Index s = 0; s <= n_steps; ++s) {
    if (s % record_stride == 0 || s == n_steps) {
      recorded_steps.push_back(s);
      out.times.push_back(static_cast<double>(s) * dt);
    }
  }
  out.times.back() = 1.0;
  out.states.resize(x0.size(), out.n_times() * dim);

  const CounterRng base = rng.fork();
  parallel_for(static_cast<std::size_t>(x0.size()), [&](std::size_t i) {
    const auto p = static_cast<Index>(i);
    CounterRng local = base.substream(i);
    Vector x = x0.row(p).transpose();
    std::size_t slot = 0;
    out.state(p, 0) = x.transpose();
    ++slot;
    for (Index s = 0; s < n_steps; ++s) {
      const Vector g = drift(pot, x, static_cast<double>(s) * dt);
      for (Index d = 0; d < dim; ++d) {
        x[d] += g[d] * dt + noise_scale * local.normal();
      }
      if (!all_finite(x)) {
        throw Error("euler_maruyama: non-finite state at step " + std::to_string(s + 1));
      }
      if (slot < recorded_steps.size() && recorded_steps[slot] == s + 1) {
        out.state(p, static_cast<Index>(slot)) = x.transpose();
        ++slot;
      }
    }
  }, 16);
  return out;
}

/// x_t ~ N(x_l + (t - t_l) / (t_r - t_l) (x_r - x_l), eps (t - t_l)(t_r - t) / (t_r - t_l) I).
inline Vector bridge_insert(const ConstVectorRef& x_left, const ConstVectorRef& x_right, double t_left,
                            double t_right, double t, double epsilon, CounterRng& rng) {
  if (!(t_left < t && t < t_right)) {
    throw std::invalid_argument("bridge_insert: require t_left < t < t_right");
  }
  if (x_left.size() != x_right.size()) {
    throw DimensionError("bridge_insert: endpoint dimensions differ");
  }
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("bridge_insert: epsilon must be positive");
  }
  const double span = t_right - t_left;
  const double frac = (t - t_left) / span;
  const double sd = std::sqrt(epsilon * (t - t_left) * (t_right - t) / span);
  Vector out(x_left.size());
  for (Index d = 0; d < out.size(); ++d) {
    out[d] = x_left[d] + frac * (x_right[d] - x_left[d]) + sd * rng.normal();
  }
  return out;
}

namespace detail {
// Fills interior indices of (lo, hi) midpoint-first, given states at lo and hi.
inline void refine_bridge(TrajectoryBatch& batch, Index p, Index lo, Index hi, CounterRng& rng) {
  if (hi - lo < 2) {
    return;
  }
  const Index mid = lo + (hi - lo) / 2;
  const auto& ts = batch.times;
  batch.state(p, mid) = bridge_insert(batch.state(p, lo).transpose(), batch.state(p, hi).transpose(),
                                      ts[static_cast<std::size_t>(lo)], ts[static_cast<std::size_t>(hi)],
                                      ts[static_cast<std::size_t>(mid)], batch.epsilon, rng)
                            .transpose();
  refine_bridge(batch, p, lo, mid, rng);
  refine_bridge(batch, p, mid, hi, rng);
}
}  // namespace detail

/// Exact trajectories: x1 ~ pi(. | x0), then Brownian-bridge points at `times`
/// (strictly increasing, inside (0, 1)). The grid is {0, times..., 1}.
inline TrajectoryBatch sample_bridge_trajectories(const MixturePotential& pot, const SampleSet& x0,
                                                  const std::vector<double>& times, CounterRng& rng) {
  if (x0.dim() != pot.dim()) {
    throw DimensionError("sample_bridge_trajectories: sample dimension does not match potential");
  }
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (!(times[j] > 0.0 && times[j] < 1.0) || (j > 0 && !(times[j] > times[j - 1]))) {
      throw std::invalid_argument("sample_bridge_trajectories: times must be strictly increasing in (0, 1)");
    }
  }
  const Index dim = pot.dim();
  TrajectoryBatch out;
  out.dim = dim;
  out.epsilon = pot.epsilon();
  out.times.reserve(times.size() + 2);
  out.times.push_back(0.0);
  out.times.insert(out.times.end(), times.begin(), times.end());
  out.times.push_back(1.0);
  out.states.resize(x0.size(), out.n_times() * dim);
  const Index last = out.n_times() - 1;

  const CounterRng base = rng.fork();
  parallel_for(static_cast<std::size_t>(x0.size()), [&](std::size_t i) {
    const auto p = static_cast<Index>(i);
    CounterRng local = base.substream(i);
    const Vector start = x0.row(p).transpose();
    const ConditionalMixture cond = conditional_plan(pot, start);
    Vector end(dim);
    draw_from(cond, cond.weights(), local, end);
    out.state(p, 0) = start.transpose();
    out.state(p, last) = end.transpose();
    detail::refine_bridge(out, p, 0, last, local);
  }, 64);
  return out;
}

}  // namespace lightsb
