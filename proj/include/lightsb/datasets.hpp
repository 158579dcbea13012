#pragma once

#include "lightsb/core.hpp"
#include "lightsb/rng.hpp"

#include <cmath>
#include <numbers>

namespace lightsb {

/// 2D swiss roll: t = 1.5 pi (1 + 2u), point = (t cos t, t sin t) / 7.5 plus N(0, noise^2 I).
inline SampleSet swiss_roll(Index n, CounterRng& rng, double noise = 0.1) {
  Matrix out(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double t = 1.5 * std::numbers::pi * (1.0 + 2.0 * rng.uniform());
    out(i, 0) = t * std::cos(t) / 7.5 + noise * rng.normal();
    out(i, 1) = t * std::sin(t) / 7.5 + noise * rng.normal();
  }
  return SampleSet(std::move(out));
}

inline SampleSet standard_gaussian(Index n, Index dim, CounterRng& rng) {
  Matrix out(n, dim);
  for (Index i = 0; i < n; ++i) {
    for (Index d = 0; d < dim; ++d) {
      out(i, d) = rng.normal();
    }
  }
  return SampleSet(std::move(out));
}

}  // namespace lightsb
