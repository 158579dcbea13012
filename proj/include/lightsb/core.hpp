#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace lightsb {

using Vector = Eigen::VectorXd;
/// Row-major so that each sample (row) is contiguous in memory.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised on dimension mismatches between samples, potentials and files.
class DimensionError : public Error {
public:
  using Error::Error;
};

template <typename Derived>
[[nodiscard]] bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.derived().array().isFinite().all();
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& x, const char* what) {
  if (!all_finite(x)) {
    throw std::invalid_argument(std::string(what) + ": non-finite input");
  }
}

/// Numerically stable log(sum(exp(x))). Returns -inf for an empty or all -inf input.
template <typename Derived>
[[nodiscard]] double log_sum_exp(const Eigen::DenseBase<Derived>& x) {
  if (x.size() == 0) {
    return -std::numeric_limits<double>::infinity();
  }
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) {
    return m;
  }
  return m + std::log((x.derived().array() - m).exp().sum());
}

/// Softmax weights exp(x - lse) written into `out`; returns lse. One exp per entry.
template <typename Derived>
double softmax(const Eigen::DenseBase<Derived>& x, Vector& out) {
  const double m = x.size() == 0 ? -std::numeric_limits<double>::infinity() : x.maxCoeff();
  if (!std::isfinite(m)) {
    out = (x.derived().array() - m).exp().matrix();
    return m;
  }
  out = (x.derived().array() - m).exp().matrix();
  const double total = out.sum();
  out /= total;
  return m + std::log(total);
}

/// An N x D matrix of i.i.d. samples from one distribution.
class SampleSet {
public:
  SampleSet() = default;

  explicit SampleSet(Matrix data) : data_(std::move(data)) {
    if (data_.rows() < 1 || data_.cols() < 1) {
      throw std::invalid_argument("SampleSet: need at least one row and one column");
    }
    require_finite(data_, "SampleSet");
  }

  [[nodiscard]] Index size() const noexcept { return data_.rows(); }
  [[nodiscard]] Index dim() const noexcept { return data_.cols(); }
  [[nodiscard]] bool empty() const noexcept { return data_.rows() == 0; }
  [[nodiscard]] const Matrix& data() const noexcept { return data_; }
  [[nodiscard]] auto row(Index i) const { return data_.row(i); }

  friend bool operator==(const SampleSet& a, const SampleSet& b) {
    return a.data_.rows() == b.data_.rows() && a.data_.cols() == b.data_.cols() &&
           a.data_ == b.data_;
  }

private:
  Matrix data_;
};

}  // namespace lightsb
