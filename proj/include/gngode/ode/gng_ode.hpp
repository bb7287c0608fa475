#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <tuple>
#include <vector>

#include "gngode/graph/session_graph.hpp"
#include "gngode/model/encoder.hpp"
#include "gngode/numeric/tape.hpp"
#include "gngode/ode/solvers.hpp"

namespace gngode {

enum class GcnNorm {
  symmetric,  // D^-1/2 (A + A^T + I) D^-1/2
  directed,  // row-normalised (A^T + I): each node averages itself and its in-neighbours
};

/// Edges of a graph that have appeared by time t (tau(e) <= t), over all nodes.
class AlignedGraphView {
 public:
  AlignedGraphView(std::span<const TemporalEdge> edges, std::size_t num_nodes, double t)
      : num_nodes_(num_nodes), time_(t) {
    for (const auto& e : edges)
      if (e.time <= t) active_.push_back(e);
  }

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  double time() const noexcept { return time_; }
  const std::vector<TemporalEdge>& edges() const noexcept { return active_; }

 private:
  std::size_t num_nodes_;
  double time_;
  std::vector<TemporalEdge> active_;
};

inline void require_unit_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("t_align: time must lie in [0, 1]");
}

inline AlignedGraphView t_align(const TemporalSessionGraph& g, double t) {
  require_unit_time(t);
  return AlignedGraphView(g.edges, g.num_nodes(), t);
}

inline AlignedGraphView t_align(const BatchGraph& g, double t) {
  require_unit_time(t);
  return AlignedGraphView(g.edges, g.num_nodes(), t);
}

/// Graph-convolution propagation matrix over `edges` (a multiset; repeated
/// transitions add weight) with self-loops on every node.
inline SparseMatrix normalized_adjacency(std::size_t num_nodes, std::span<const TemporalEdge> edges,
                                         GcnNorm norm = GcnNorm::symmetric) {
  std::vector<std::tuple<std::size_t, std::size_t, double>> trip;
  trip.reserve(num_nodes + 2 * edges.size());
  for (std::size_t i = 0; i < num_nodes; ++i) trip.emplace_back(i, i, 1.0);
  for (const auto& e : edges) {
    trip.emplace_back(e.target, e.source, 1.0);
    if (norm == GcnNorm::symmetric) trip.emplace_back(e.source, e.target, 1.0);
  }
  SparseMatrix m = SparseMatrix::from_triplets(num_nodes, num_nodes, std::move(trip));
  std::vector<double> degree(num_nodes, 0.0);
  for (std::size_t r = 0; r < num_nodes; ++r)
    for (std::size_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) degree[r] += m.weights[k];
  for (std::size_t r = 0; r < num_nodes; ++r) {
    for (std::size_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
      m.weights[k] = norm == GcnNorm::symmetric ? m.weights[k] / std::sqrt(degree[r] * degree[m.col_index[k]])
                                                : m.weights[k] / degree[r];
    }
  }
  return m;
}

inline SparseMatrix normalized_adjacency(const AlignedGraphView& view, GcnNorm norm = GcnNorm::symmetric) {
  return normalized_adjacency(view.num_nodes(), view.edges(), norm);
}

/// A_hat * M * W^T with W stored as [out x in].
inline Var gcn_aggregate(Var m, const AlignedGraphView& view, Var w, GcnNorm norm = GcnNorm::symmetric) {
  return spmm(std::make_shared<const SparseMatrix>(normalized_adjacency(view, norm)), matmul_nt(m, w));
}

struct OdeOptions {
  bool t_align = true;  // false: every edge is present for the whole integration
  GcnNorm norm = GcnNorm::symmetric;
};

inline constexpr const char* kOdePrefix = "ode.";

inline void init_ode_params(ParameterSet& params, std::size_t dim, Rng& rng) {
  GruCellVars::init(params, kOdePrefix, dim, dim, rng);
}

/// dH/dt = (1 - z) * (g - H) with graph-convolutional gates
///   r = sigma(GC(x; W_r) + GC(H; U_r) + b_r)
///   z = sigma(GC(x; W_z) + GC(H; U_z) + b_z)
///   g = tanh(GC(x; W_h) + GC(r * H; U_h) + b_h)
/// where GC runs over the edges present at time t. The input x is constant in
/// time, so its projections are computed once.
class GngOdeFunction {
 public:
  GngOdeFunction(const BatchGraph& graph, const GruCellVars& params, Var x, OdeOptions opts = {})
      : params_(params), opts_(opts), num_nodes_(graph.num_nodes()), edges_(graph.edges) {
    if (x.rows() != num_nodes_) throw ConfigError("ode: input rows differ from node count");
    std::stable_sort(edges_.begin(), edges_.end(),
                     [](const TemporalEdge& a, const TemporalEdge& b) { return a.time < b.time; });
    xw_r_ = matmul_nt(x, params.W_r);
    xw_z_ = matmul_nt(x, params.W_z);
    xw_h_ = matmul_nt(x, params.W_h);
  }

  Var operator()(double t, Var h) {
    const auto adj = adjacency_at(t);
    const Var r = sigmoid(add_row(spmm(adj, xw_r_ + matmul_nt(h, params_.U_r)), params_.b_r));
    const Var z = sigmoid(add_row(spmm(adj, xw_z_ + matmul_nt(h, params_.U_z)), params_.b_z));
    const Var g = tanh(add_row(spmm(adj, xw_h_ + matmul_nt(r * h, params_.U_h)), params_.b_h));
    return affine(z, -1.0, 1.0) * (g - h);
  }

  std::shared_ptr<const SparseMatrix> adjacency_at(double t) {
    const std::size_t active =
        opts_.t_align ? static_cast<std::size_t>(
                            std::upper_bound(edges_.begin(), edges_.end(), t,
                                             [](double v, const TemporalEdge& e) { return v < e.time; }) -
                            edges_.begin())
                      : edges_.size();
    auto& slot = cache_[active];
    if (!slot) {
      slot = std::make_shared<const SparseMatrix>(normalized_adjacency(
          num_nodes_, std::span<const TemporalEdge>(edges_.data(), active), opts_.norm));
    }
    return slot;
  }

  /// Distinct edge times, where the right-hand side may jump.
  std::vector<double> breakpoints() const {
    std::vector<double> b;
    if (!opts_.t_align) return b;
    for (const auto& e : edges_)
      if (b.empty() || e.time != b.back()) b.push_back(e.time);
    return b;
  }

 private:
  GruCellVars params_;
  OdeOptions opts_;
  std::size_t num_nodes_;
  std::vector<TemporalEdge> edges_;  // sorted by time
  Var xw_r_, xw_z_, xw_h_;
  std::map<std::size_t, std::shared_ptr<const SparseMatrix>> cache_;
};

inline Var ode_rhs(Var h, double t, const BatchGraph& g, const GruCellVars& p, Var x, OdeOptions opts = {}) {
  GngOdeFunction f(g, p, x, opts);
  return f(t, h);
}

/// Integrates the latent states from t0 to t1 (defaults: the unit session
/// timeline). Fixed-step kinds use steps_per_unit steps per unit time;
/// dopri5 stops at every edge arrival time.
inline Var solve(Var h0, const BatchGraph& g, const GruCellVars& p, Var x, const SolverConfig& cfg,
                 OdeOptions opts = {}, double t0 = 0.0, double t1 = 1.0, AdaptiveStats* stats = nullptr) {
  cfg.validate();
  if (t1 == t0) return h0;
  GngOdeFunction f(g, p, x, opts);
  if (cfg.kind == SolverKind::dopri5) {
    return integrate_dopri5(f, h0, t0, t1, f.breakpoints(), cfg, TapeRollback{&h0.tape()}, stats);
  }
  const auto steps = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(cfg.steps_per_unit) * (t1 - t0))));
  return integrate_fixed(cfg.kind, f, h0, t0, t1, steps);
}

inline Var solve(Var h0, const TemporalSessionGraph& g, const GruCellVars& p, Var x, const SolverConfig& cfg,
                 OdeOptions opts = {}) {
  return solve(h0, make_batch(std::span<const TemporalSessionGraph>(&g, 1)), p, x, cfg, opts);
}

}  // namespace gngode
