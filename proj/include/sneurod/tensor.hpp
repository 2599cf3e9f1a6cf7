#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sneurod/errors.hpp"

namespace sneurod {

using Shape = std::vector<std::size_t>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;

template <typename Scalar>
using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major array with an explicit shape of up to four axes
/// (batch, channel, height, width).
template <typename Scalar>
class BasicTensor {
 public:
  using value_type = Scalar;
  // Over-aligned so vectorized kernels split work identically on every run.
  using Storage = std::vector<Scalar, Eigen::aligned_allocator<Scalar>>;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_numel(shape_), Scalar(0));
  }

  BasicTensor(Shape shape, const std::vector<Scalar>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    validate_shape(shape_);
    if (data_.size() != shape_numel(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                       shape_string(shape_));
    }
  }

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }

  static BasicTensor full(Shape shape, Scalar value) {
    BasicTensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<Scalar> values() noexcept { return data_; }
  std::span<const Scalar> values() const noexcept { return data_; }
  Scalar* data() noexcept { return data_.data(); }
  const Scalar* data() const noexcept { return data_.data(); }
  const Storage& storage() const noexcept { return data_; }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  const Scalar& operator[](std::size_t i) const { return data_[i]; }

  template <typename... Idx>
  Scalar& operator()(Idx... idx) {
    return data_[offset(idx...)];
  }
  template <typename... Idx>
  const Scalar& operator()(Idx... idx) const {
    return data_[offset(idx...)];
  }

  /// Same data under a new shape with equal element count.
  BasicTensor reshaped(Shape shape) const {
    if (shape_numel(shape) != size()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    BasicTensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  /// Row-major matrix view over the whole buffer.
  MatrixMap<Scalar> as_matrix(std::size_t rows, std::size_t cols) {
    check_matrix(rows, cols);
    return MatrixMap<Scalar>(data_.data(), Eigen::Index(rows), Eigen::Index(cols));
  }
  ConstMatrixMap<Scalar> as_matrix(std::size_t rows, std::size_t cols) const {
    check_matrix(rows, cols);
    return ConstMatrixMap<Scalar>(data_.data(), Eigen::Index(rows), Eigen::Index(cols));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static void validate_shape(const Shape& shape) {
    if (shape.empty() || shape.size() > 4) {
      throw ShapeError("tensor rank must be 1..4, got " + std::to_string(shape.size()));
    }
    for (std::size_t e : shape) {
      if (e == 0) throw ShapeError("tensor extents must be positive: " + shape_string(shape));
    }
  }

  void check_matrix(std::size_t rows, std::size_t cols) const {
    if (rows * cols != size()) {
      throw ShapeError("matrix view " + std::to_string(rows) + "x" + std::to_string(cols) +
                       " does not cover tensor " + shape_string(shape_));
    }
  }

  template <typename... Idx>
  std::size_t offset(Idx... idx) const {
    const std::array<std::size_t, sizeof...(Idx)> ix{static_cast<std::size_t>(idx)...};
    std::size_t off = 0;
    for (std::size_t a = 0; a < ix.size(); ++a) off = off * shape_[a] + ix[a];
    return off;
  }

  Shape shape_;
  Storage data_;
};

using Tensor = BasicTensor<double>;

template <typename Scalar>
bool all_finite(const BasicTensor<Scalar>& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](Scalar v) { return std::isfinite(v); });
}

/// Throws NumericError naming `what` if any element is NaN or infinite.
template <typename Scalar>
void require_finite(const BasicTensor<Scalar>& t, const std::string& what) {
  if (!all_finite(t)) throw NumericError("non-finite value in " + what);
}

/// xoshiro256** seeded through splitmix64; identical streams on every platform.
class Prng {
 public:
  explicit Prng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw ParameterError("uniform_index requires n >= 1");
    const std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % n);
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return r % n;
  }

  /// Standard normal via Box-Muller (one value per call).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::array<std::uint64_t, 4> state_{};
};

/// c = a * b for 2-D tensors. Each c(i,j) is accumulated from zero in
/// ascending inner index, so the result is bit-identical to a naive triple loop.
template <typename Scalar>
BasicTensor<Scalar> matmul(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + shape_string(a.shape()) + " by " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  BasicTensor<Scalar> c({m, n});
  const Scalar* pa = a.data();
  const Scalar* pb = b.data();
  Scalar* pc = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    Scalar* row = pc + i * n;
    for (std::size_t t = 0; t < k; ++t) {
      const Scalar av = pa[i * k + t];
      const Scalar* brow = pb + t * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return c;
}

template <typename Scalar>
BasicTensor<Scalar> identity(std::size_t n) {
  BasicTensor<Scalar> t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = Scalar(1);
  return t;
}

/// I.i.d. uniform values on +-sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform_init(Prng& rng, std::size_t fan_in, std::size_t fan_out, Shape shape) {
  if (fan_in == 0 || fan_out == 0) {
    throw ParameterError("glorot_uniform_init: fan_in and fan_out must be >= 1");
  }
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

/// Fisher-Yates permutation of 0..n-1.
inline std::vector<std::size_t> shuffle_indices(Prng& rng, std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace sneurod
