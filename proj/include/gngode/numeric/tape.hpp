#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gngode/errors.hpp"
#include "gngode/numeric/array.hpp"
#include "gngode/numeric/sparse.hpp"

namespace gngode {

using ParameterSet = std::map<std::string, Array>;
using GradientMap = std::map<std::string, Array>;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives and
/// has not been truncated below it.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Array& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order so
/// every operand precedes its consumers.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable leaf. Named leaves are reported by backward().
  Var variable(Array value, std::string name = {}) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    n.name = std::move(name);
    return push(std::move(n));
  }

  Var constant(Array value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
  }

  std::map<std::string, Var> bind(const ParameterSet& params) {
    std::map<std::string, Var> vars;
    for (const auto& [name, arr] : params) vars.emplace(name, variable(arr, name));
    return vars;
  }

  /// Appends an op result. `fn` receives this tape and the new node's id and
  /// must accumulate into operand gradients through grad_target().
  Var record(Array value, std::initializer_list<Var> operands, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    for (const Var& v : operands) n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
    if (n.requires_grad) n.backward = std::move(fn);
    return push(std::move(n));
  }

  const Array& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of node `id`, allocated as zeros on first use. Returns
  /// nullptr for nodes that do not require gradients.
  Array* grad_target(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return nullptr;
    if (n.grad.size() != n.value.size()) n.grad = Array(n.value.shape());
    return &n.grad;
  }

  const Array& grad(std::size_t id) const { return nodes_[id].grad; }

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Drops every node recorded after `mark`. Vars above it become invalid.
  void truncate(std::size_t mark) {
    if (mark < nodes_.size()) nodes_.resize(mark);
  }

  GradientMap backward(Var output) {
    if (output.value().size() != 1) {
      throw UsageError("backward() needs a scalar output, got shape " +
                       shape_string(output.value().shape()));
    }
    for (Node& n : nodes_) n.grad = Array();
    if (Array* g = grad_target(output.id())) (*g)[0] = 1.0;
    for (std::size_t i = output.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      n.backward(*this, i);
    }
    GradientMap grads;
    for (Node& n : nodes_) {
      if (n.name.empty()) continue;
      grads[n.name] = n.grad.size() == n.value.size() ? n.grad : Array(n.value.shape());
    }
    return grads;
  }

 private:
  struct Node {
    Array value;
    Array grad;
    BackwardFn backward;
    bool requires_grad = false;
    std::string name;
  };

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

inline const Array& Var::value() const { return tape_->value(id_); }

namespace detail {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

inline ConstMap as_matrix(const Array& a) {
  return ConstMap(a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
}
inline MutMap as_matrix(Array& a) {
  return MutMap(a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
}

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  a.value().require_same_shape(b.value(), op);
}

inline double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline void require_index(std::size_t i, std::size_t bound, const char* op) {
  if (i >= bound) {
    throw ConfigError(std::string(op) + ": row index " + std::to_string(i) + " out of range " +
                      std::to_string(bound));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

/// a[m x k] * b[k x n]
inline Var matmul(Var a, Var b) {
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ConfigError("matmul shape mismatch: " + shape_string(av.shape()) + " * " +
                      shape_string(bv.shape()));
  }
  Array out({av.rows(), bv.cols()});
  detail::as_matrix(out).noalias() = detail::as_matrix(av) * detail::as_matrix(bv);
  return a.tape().record(std::move(out), {a, b}, [ia = a.id(), ib = b.id()](Tape& t, std::size_t self) {
    const auto g = detail::as_matrix(t.grad(self));
    if (Array* ga = t.grad_target(ia)) {
      detail::as_matrix(*ga).noalias() += g * detail::as_matrix(t.value(ib)).transpose();
    }
    if (Array* gb = t.grad_target(ib)) {
      detail::as_matrix(*gb).noalias() += detail::as_matrix(t.value(ia)).transpose() * g;
    }
  });
}

/// a[m x k] * b[n x k]^T; applies a weight stored as [out x in].
inline Var matmul_nt(Var a, Var b) {
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw ConfigError("matmul_nt shape mismatch: " + shape_string(av.shape()) + " * " +
                      shape_string(bv.shape()) + "^T");
  }
  Array out({av.rows(), bv.rows()});
  detail::as_matrix(out).noalias() = detail::as_matrix(av) * detail::as_matrix(bv).transpose();
  return a.tape().record(std::move(out), {a, b}, [ia = a.id(), ib = b.id()](Tape& t, std::size_t self) {
    const auto g = detail::as_matrix(t.grad(self));
    if (Array* ga = t.grad_target(ia)) {
      detail::as_matrix(*ga).noalias() += g * detail::as_matrix(t.value(ib));
    }
    if (Array* gb = t.grad_target(ib)) {
      detail::as_matrix(*gb).noalias() += g.transpose() * detail::as_matrix(t.value(ia));
    }
  });
}

/// s[r x c] * a[c x d] for a constant sparse s.
inline Var spmm(std::shared_ptr<const SparseMatrix> s, Var a) {
  Array out = s->multiply(a.value());
  return a.tape().record(std::move(out), {a}, [s, ia = a.id()](Tape& t, std::size_t self) {
    if (Array* ga = t.grad_target(ia)) s->multiply_transpose_add(t.grad(self), *ga);
  });
}

// ---------------------------------------------------------------------------
// Elementwise

inline Var add(Var a, Var b) {
  detail::require_same_shape(a, b, "add");
  Array out = a.value() + b.value();
  return a.tape().record(std::move(out), {a, b}, [ia = a.id(), ib = b.id()](Tape& t, std::size_t self) {
    if (Array* ga = t.grad_target(ia)) *ga += t.grad(self);
    if (Array* gb = t.grad_target(ib)) *gb += t.grad(self);
  });
}

inline Var sub(Var a, Var b) {
  detail::require_same_shape(a, b, "sub");
  Array out = a.value() - b.value();
  return a.tape().record(std::move(out), {a, b}, [ia = a.id(), ib = b.id()](Tape& t, std::size_t self) {
    if (Array* ga = t.grad_target(ia)) *ga += t.grad(self);
    if (Array* gb = t.grad_target(ib)) *gb -= t.grad(self);
  });
}

inline Var mul(Var a, Var b) {
  detail::require_same_shape(a, b, "mul");
  Array out = a.value();
  const Array& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.tape().record(std::move(out), {a, b}, [ia = a.id(), ib = b.id()](Tape& t, std::size_t self) {
    const Array& g = t.grad(self);
    if (Array* ga = t.grad_target(ia)) {
      const Array& bv = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
    }
    if (Array* gb = t.grad_target(ib)) {
      const Array& av = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
    }
  });
}

/// alpha * a + beta
inline Var affine(Var a, double alpha, double beta) {
  Array out = a.value();
  for (double& v : out.values()) v = alpha * v + beta;
  return a.tape().record(std::move(out), {a}, [alpha, ia = a.id()](Tape& t, std::size_t self) {
    if (Array* ga = t.grad_target(ia)) {
      const Array& g = t.grad(self);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += alpha * g[i];
    }
  });
}

inline Var scale(Var a, double s) { return affine(a, s, 0.0); }
inline Var add_scalar(Var a, double c) { return affine(a, 1.0, c); }

/// Adds a length-n bias to every row of a[m x n].
inline Var add_row(Var a, Var bias) {
  const Array& av = a.value();
  const Array& bv = bias.value();
  if (bv.size() != av.cols()) {
    throw ConfigError("add_row: bias " + shape_string(bv.shape()) + " vs rows of " +
                      shape_string(av.shape()));
  }
  Array out = av;
  const std::size_t n = av.cols();
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bv[j];
  return a.tape().record(std::move(out), {a, bias}, [ia = a.id(), ib = bias.id()](Tape& t, std::size_t self) {
    const Array& g = t.grad(self);
    if (Array* ga = t.grad_target(ia)) *ga += g;
    if (Array* gb = t.grad_target(ib)) {
      const std::size_t n = gb->size();
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i % n] += g[i];
    }
  });
}

/// Scales row r of m[rows x n] by c[r]; c has one entry per row.
inline Var mul_col(Var c, Var m) {
  const Array& cv = c.value();
  const Array& mv = m.value();
  if (cv.size() != mv.rows()) {
    throw ConfigError("mul_col: " + shape_string(cv.shape()) + " vs " + shape_string(mv.shape()));
  }
  Array out = mv;
  const std::size_t n = mv.cols();
  for (std::size_t r = 0; r < mv.rows(); ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] *= cv[r];
  return c.tape().record(std::move(out), {c, m}, [ic = c.id(), im = m.id()](Tape& t, std::size_t self) {
    const Array& g = t.grad(self);
    const Array& cv = t.value(ic);
    const Array& mv = t.value(im);
    const std::size_t n = mv.cols();
    if (Array* gc = t.grad_target(ic)) {
      for (std::size_t r = 0; r < mv.rows(); ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += g[r * n + j] * mv[r * n + j];
        (*gc)[r] += s;
      }
    }
    if (Array* gm = t.grad_target(im)) {
      for (std::size_t r = 0; r < mv.rows(); ++r)
        for (std::size_t j = 0; j < n; ++j) (*gm)[r * n + j] += g[r * n + j] * cv[r];
    }
  });
}

inline Var sigmoid(Var a) {
  Array out = a.value();
  for (double& v : out.values()) v = detail::stable_sigmoid(v);
  return a.tape().record(std::move(out), {a}, [ia = a.id()](Tape& t, std::size_t self) {
    if (Array* ga = t.grad_target(ia)) {
      const Array& g = t.grad(self);
      const Array& y = t.value(self);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * y[i] * (1.0 - y[i]);
    }
  });
}

inline Var tanh(Var a) {
  Array out = a.value();
  for (double& v : out.values()) v = std::tanh(v);
  return a.tape().record(std::move(out), {a}, [ia = a.id()](Tape& t, std::size_t self) {
    if (Array* ga = t.grad_target(ia)) {
      const Array& g = t.grad(self);
      const Array& y = t.value(self);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * (1.0 - y[i] * y[i]);
    }
  });
}

/// log(max(a, floor)); entries at or below the floor get zero gradient.
inline Var log_clamped(Var a, double floor = 1e-12) {
  Array out = a.value();
  for (double& v : out.values()) v = std::log(std::max(v, floor));
  return a.tape().record(std::move(out), {a}, [floor, ia = a.id()](Tape& t, std::size_t self) {
    if (Array* ga = t.grad_target(ia)) {
      const Array& g = t.grad(self);
      const Array& x = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] > floor) (*ga)[i] += g[i] / x[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Row-wise normalisations

namespace detail {

inline void softmax_backward_row(std::span<const double> y, std::span<const double> g, std::span<double> gx) {
  double dot = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) dot += g[j] * y[j];
  for (std::size_t j = 0; j < y.size(); ++j) gx[j] += y[j] * (g[j] - dot);
}

inline void softmax_row(std::span<double> row) {
  double m = row[0];
  for (double v : row) m = std::max(m, v);
  double s = 0.0;
  for (double& v : row) {
    v = std::exp(v - m);
    s += v;
  }
  for (double& v : row) v /= s;
}

}  // namespace detail

/// Softmax over the last axis, max-subtracted.
inline Var softmax(Var a) {
  Array out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r) detail::softmax_row(out.row(r));
  return a.tape().record(std::move(out), {a}, [ia = a.id()](Tape& t, std::size_t self) {
    if (Array* ga = t.grad_target(ia)) {
      const Array& y = t.value(self);
      const Array& g = t.grad(self);
      for (std::size_t r = 0; r < y.rows(); ++r) detail::softmax_backward_row(y.row(r), g.row(r), ga->row(r));
    }
  });
}

/// Softmax of a column of scores within contiguous row segments
/// [offsets[i], offsets[i+1]).
inline Var segment_softmax(Var scores, std::vector<std::size_t> offsets) {
  const Array& sv = scores.value();
  if (sv.cols() != 1 && sv.rank() != 1) throw ConfigError("segment_softmax expects a column of scores");
  if (offsets.empty() || offsets.back() != sv.size()) throw ConfigError("segment_softmax offsets do not cover input");
  Array out = sv;
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    if (offsets[s + 1] > offsets[s]) {
      detail::softmax_row(out.values().subspan(offsets[s], offsets[s + 1] - offsets[s]));
    }
  }
  return scores.tape().record(std::move(out), {scores}, [offsets = std::move(offsets), ia = scores.id()](Tape& t, std::size_t self) {
    if (Array* ga = t.grad_target(ia)) {
      std::span<const double> y = t.value(self).values();
      std::span<const double> g = t.grad(self).values();
      for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
        const std::size_t b = offsets[s], n = offsets[s + 1] - offsets[s];
        detail::softmax_backward_row(y.subspan(b, n), g.subspan(b, n), ga->values().subspan(b, n));
      }
    }
  });
}

inline constexpr double kNormFloor = 1e-12;

/// Rows scaled to unit L2 norm; rows with norm below 1e-12 become zero rows.
inline Var l2_normalize_rows(Var a) {
  const Array& av = a.value();
  Array out(av.shape());
  std::vector<double> norms(av.rows());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double s = 0.0;
    for (double v : av.row(r)) s += v * v;
    norms[r] = std::sqrt(s);
    if (norms[r] < kNormFloor) continue;
    auto dst = out.row(r);
    auto src = av.row(r);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] / norms[r];
  }
  return a.tape().record(std::move(out), {a}, [norms = std::move(norms), ia = a.id()](Tape& t, std::size_t self) {
    if (Array* ga = t.grad_target(ia)) {
      const Array& y = t.value(self);
      const Array& g = t.grad(self);
      for (std::size_t r = 0; r < y.rows(); ++r) {
        if (norms[r] < kNormFloor) continue;
        auto yr = y.row(r);
        auto gr = g.row(r);
        auto dst = ga->row(r);
        double dot = 0.0;
        for (std::size_t j = 0; j < yr.size(); ++j) dot += yr[j] * gr[j];
        for (std::size_t j = 0; j < yr.size(); ++j) dst[j] += (gr[j] - yr[j] * dot) / norms[r];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Structural

/// [a | b] along the last axis.
inline Var concat_cols(Var a, Var b) {
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw ConfigError("concat row mismatch: " + shape_string(av.shape()) + " | " + shape_string(bv.shape()));
  }
  const std::size_t p = av.cols(), q = bv.cols();
  Array out({av.rows(), p + q});
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.row(r).data(), p, out.row(r).data());
    std::copy_n(bv.row(r).data(), q, out.row(r).data() + p);
  }
  return a.tape().record(std::move(out), {a, b}, [p, q, ia = a.id(), ib = b.id()](Tape& t, std::size_t self) {
    const Array& g = t.grad(self);
    Array* ga = t.grad_target(ia);
    Array* gb = t.grad_target(ib);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto gr = g.row(r);
      if (ga) for (std::size_t j = 0; j < p; ++j) (*ga)[r * p + j] += gr[j];
      if (gb) for (std::size_t j = 0; j < q; ++j) (*gb)[r * q + j] += gr[p + j];
    }
  });
}

/// Rows of a selected by index (embedding lookup).
inline Var gather_rows(Var a, std::vector<std::size_t> index) {
  const Array& av = a.value();
  const std::size_t n = av.cols();
  Array out({std::max<std::size_t>(index.size(), 1), n});
  if (index.empty()) throw ConfigError("gather_rows with an empty index list");
  for (std::size_t i = 0; i < index.size(); ++i) {
    detail::require_index(index[i], av.rows(), "gather_rows");
    std::copy_n(av.row(index[i]).data(), n, out.row(i).data());
  }
  return a.tape().record(std::move(out), {a}, [index = std::move(index), n, ia = a.id()](Tape& t, std::size_t self) {
    if (Array* ga = t.grad_target(ia)) {
      const Array& g = t.grad(self);
      for (std::size_t i = 0; i < index.size(); ++i) {
        double* dst = ga->data() + index[i] * n;
        const double* src = g.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
      }
    }
  });
}

/// out[index[i]] += a[i]; out has `out_rows` rows.
inline Var scatter_add_rows(Var a, std::vector<std::size_t> index, std::size_t out_rows) {
  const Array& av = a.value();
  if (index.size() != av.rows()) throw ConfigError("scatter_add_rows: index length differs from row count");
  const std::size_t n = av.cols();
  Array out({out_rows, n});
  for (std::size_t i = 0; i < index.size(); ++i) {
    detail::require_index(index[i], out_rows, "scatter_add_rows");
    double* dst = out.data() + index[i] * n;
    const double* src = av.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
  }
  return a.tape().record(std::move(out), {a}, [index = std::move(index), n, ia = a.id()](Tape& t, std::size_t self) {
    if (Array* ga = t.grad_target(ia)) {
      const Array& g = t.grad(self);
      for (std::size_t i = 0; i < index.size(); ++i) {
        double* dst = ga->data() + i * n;
        const double* src = g.data() + index[i] * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

inline Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape().record(Array::scalar(s), {a}, [ia = a.id()](Tape& t, std::size_t self) {
    if (Array* ga = t.grad_target(ia)) {
      const double g = t.grad(self)[0];
      for (double& v : ga->values()) v += g;
    }
  });
}

inline Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

/// Sum of squared entries.
inline Var sum_squares(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v * v;
  return a.tape().record(Array::scalar(s), {a}, [ia = a.id()](Tape& t, std::size_t self) {
    if (Array* ga = t.grad_target(ia)) {
      const double g = t.grad(self)[0];
      const Array& x = t.value(ia);
      for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += 2.0 * g * x[i];
    }
  });
}

// Operators used by the generic ODE steppers.
inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator-(Var a) { return scale(a, -1.0); }

}  // namespace gngode
