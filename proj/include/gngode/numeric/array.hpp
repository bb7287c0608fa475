#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gngode/errors.hpp"

namespace gngode {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

/// Dense row-major array of doubles. Rank 1 arrays behave as a single row
/// wherever a matrix is expected.
class Array {
 public:
  Array() : shape_{0} {}

  explicit Array(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_size(shape_), fill);
  }

  Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != shape_size(shape_)) {
      throw ConfigError("array data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_string(shape_));
    }
  }

  static Array scalar(double v) { return Array({1}, std::vector<double>{v}); }

  static Array vector(std::initializer_list<double> v) {
    return Array({v.size()}, std::vector<double>(v));
  }

  static Array matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> v) {
    return Array({rows, cols}, std::vector<double>(v));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t rows() const noexcept {
    return shape_.size() >= 2 ? data_.size() / shape_.back() : 1;
  }
  std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Array&, const Array&) = default;

  Array& operator+=(const Array& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Array& operator-=(const Array& o) {
    require_same_shape(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }

  Array& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  void require_same_shape(const Array& o, const char* op) const {
    if (shape_ != o.shape_) {
      throw ConfigError(std::string("shape mismatch in ") + op + ": " + shape_string(shape_) +
                        " vs " + shape_string(o.shape_));
    }
  }

 private:
  void validate_shape() const {
    if (shape_.empty()) throw ConfigError("array shape must have at least one dimension");
    for (std::size_t d : shape_) {
      if (d == 0) throw ConfigError("array dimensions must be positive: " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<double> data_;
};

inline Array operator+(Array a, const Array& b) { return a += b; }
inline Array operator-(Array a, const Array& b) { return a -= b; }
inline Array operator*(double s, Array a) { return a *= s; }
inline Array operator*(Array a, double s) { return a *= s; }

inline double max_abs(const Array& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

inline double l2_norm(const Array& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

/// ||a - b|| / max(||a||, ||b||, floor); the comparison used by gradient checks.
inline double relative_error(const Array& a, const Array& b, double floor = 1e-12) {
  a.require_same_shape(b, "relative_error");
  const double diff = l2_norm(a - b);
  return diff / std::max({l2_norm(a), l2_norm(b), floor});
}

}  // namespace gngode
