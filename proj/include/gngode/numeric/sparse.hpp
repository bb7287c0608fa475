#pragma once

#include <cstddef>
#include <tuple>
#include <vector>

#include "gngode/numeric/array.hpp"

namespace gngode {

/// Compressed sparse row matrix with constant (non-trainable) weights.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_index;
  std::vector<double> weights;

  std::size_t nonzeros() const noexcept { return weights.size(); }

  /// Builds from (row, col, weight) triplets; duplicate coordinates are summed.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<std::tuple<std::size_t, std::size_t, double>> triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    SparseMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.row_ptr.assign(rows + 1, 0);
    for (std::size_t i = 0; i < triplets.size(); ++i) {
      const auto [r, c, w] = triplets[i];
      if (r >= rows || c >= cols) throw ConfigError("sparse triplet out of range");
      if (!m.col_index.empty() && i > 0 && std::get<0>(triplets[i - 1]) == r &&
          std::get<1>(triplets[i - 1]) == c) {
        m.weights.back() += w;
        continue;
      }
      m.col_index.push_back(c);
      m.weights.push_back(w);
      ++m.row_ptr[r + 1];
    }
    for (std::size_t r = 0; r < rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
    return m;
  }

  static SparseMatrix identity(std::size_t n) {
    std::vector<std::tuple<std::size_t, std::size_t, double>> t;
    t.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.emplace_back(i, i, 1.0);
    return from_triplets(n, n, std::move(t));
  }

  Array to_dense() const {
    Array d({rows, cols});
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) d(r, col_index[k]) += weights[k];
    return d;
  }

  /// this * m
  Array multiply(const Array& m) const {
    if (m.rows() != cols) {
      throw ConfigError("sparse multiply: " + std::to_string(rows) + "x" + std::to_string(cols) +
                        " times " + shape_string(m.shape()));
    }
    const std::size_t width = m.cols();
    Array out({rows, width});
    for (std::size_t r = 0; r < rows; ++r) {
      double* dst = out.data() + r * width;
      for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
        const double w = weights[k];
        const double* src = m.data() + col_index[k] * width;
        for (std::size_t j = 0; j < width; ++j) dst[j] += w * src[j];
      }
    }
    return out;
  }

  /// out += this^T * g
  void multiply_transpose_add(const Array& g, Array& out) const {
    const std::size_t width = g.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* src = g.data() + r * width;
      for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
        const double w = weights[k];
        double* dst = out.data() + col_index[k] * width;
        for (std::size_t j = 0; j < width; ++j) dst[j] += w * src[j];
      }
    }
  }
};

}  // namespace gngode
