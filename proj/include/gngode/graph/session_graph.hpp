#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gngode/errors.hpp"
#include "gngode/graph/session.hpp"
#include "gngode/numeric/sparse.hpp"

namespace gngode {

struct TemporalEdge {
  std::size_t source = 0;
  std::size_t target = 0;
  double time = 0.0;  // normalised to [0, 1]

  friend bool operator==(const TemporalEdge&, const TemporalEdge&) = default;
};

/// Item-transition graph whose edges carry the (normalised) time they appear.
struct TemporalSessionGraph {
  std::vector<std::size_t> items;  // node -> item id, in first-click order
  std::vector<TemporalEdge> edges;  // one per consecutive click pair, in click order
  std::size_t last_node = 0;
  double duration = 0.0;  // seconds between first and last click

  std::size_t num_nodes() const noexcept { return items.size(); }
};

/// Distinct-node transition graph with SR-GNN style normalised weights.
/// Row u of `out_weights` holds count(u->v)/outdeg(u); row u of `in_weights`
/// holds count(v->u)/indeg(u).
struct StaticSessionGraph {
  std::vector<std::size_t> items;
  SparseMatrix in_weights;
  SparseMatrix out_weights;
  std::size_t last_node = 0;

  std::size_t num_nodes() const noexcept { return items.size(); }

  double out_weight(std::size_t u, std::size_t v) const { return lookup(out_weights, u, v); }
  double in_weight(std::size_t u, std::size_t v) const { return lookup(in_weights, u, v); }

 private:
  static double lookup(const SparseMatrix& m, std::size_t r, std::size_t c) {
    for (std::size_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k)
      if (m.col_index[k] == c) return m.weights[k];
    return 0.0;
  }
};

/// Disjoint union of temporal session graphs sharing the grid [0, 1].
struct BatchGraph {
  std::vector<std::size_t> offsets;  // first union node of each session
  std::vector<std::size_t> items;  // union node -> item id
  std::vector<std::size_t> node_session;  // union node -> session index
  std::vector<TemporalEdge> edges;  // union node indices
  std::vector<std::size_t> last_nodes;  // union index of each session's last click
  double t0 = 0.0;
  double t1 = 1.0;

  std::size_t num_nodes() const noexcept { return items.size(); }
  std::size_t num_sessions() const noexcept { return offsets.size(); }

  /// Row boundaries [offsets..., num_nodes].
  std::vector<std::size_t> segment_bounds() const {
    std::vector<std::size_t> b = offsets;
    b.push_back(items.size());
    return b;
  }
};

namespace detail {

struct NodeMap {
  std::vector<std::size_t> items;
  std::vector<std::size_t> click_node;  // click position -> node
};

inline NodeMap map_nodes(const Session& prefix) {
  NodeMap m;
  std::unordered_map<std::size_t, std::size_t> seen;
  for (const auto& c : prefix.clicks) {
    auto [it, inserted] = seen.try_emplace(c.item, m.items.size());
    if (inserted) m.items.push_back(c.item);
    m.click_node.push_back(it->second);
  }
  return m;
}

}  // namespace detail

/// Click times mapped affinely so the first click is 0 and the last is 1.
/// When every click shares one timestamp click i gets i/(n-1).
inline std::vector<double> normalized_click_times(const Session& s) {
  const std::size_t n = s.size();
  std::vector<double> t(n, 0.0);
  if (n < 2) return t;
  const double first = s.clicks.front().time;
  const double span = s.clicks.back().time - first;
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = span > 0.0 ? (s.clicks[i].time - first) / span
                      : static_cast<double>(i) / static_cast<double>(n - 1);
  }
  t.back() = 1.0;
  return t;
}

inline TemporalSessionGraph build_temporal_graph(const Session& prefix) {
  if (prefix.size() == 0) throw UsageError("cannot build a graph from an empty session");
  const auto nodes = detail::map_nodes(prefix);
  const auto times = normalized_click_times(prefix);
  TemporalSessionGraph g;
  g.items = nodes.items;
  g.last_node = nodes.click_node.back();
  g.duration = prefix.clicks.back().time - prefix.clicks.front().time;
  for (std::size_t i = 0; i + 1 < prefix.size(); ++i) {
    g.edges.push_back(TemporalEdge{nodes.click_node[i], nodes.click_node[i + 1], times[i + 1]});
  }
  return g;
}

inline StaticSessionGraph build_static_graph(const Session& prefix) {
  if (prefix.size() == 0) throw UsageError("cannot build a graph from an empty session");
  const auto nodes = detail::map_nodes(prefix);
  const std::size_t n = nodes.items.size();
  std::map<std::pair<std::size_t, std::size_t>, double> counts;
  std::vector<double> out_deg(n, 0.0), in_deg(n, 0.0);
  for (std::size_t i = 0; i + 1 < prefix.size(); ++i) {
    const std::size_t u = nodes.click_node[i], v = nodes.click_node[i + 1];
    counts[{u, v}] += 1.0;
    out_deg[u] += 1.0;
    in_deg[v] += 1.0;
  }
  std::vector<std::tuple<std::size_t, std::size_t, double>> out_t, in_t;
  for (const auto& [uv, c] : counts) {
    const auto [u, v] = uv;
    out_t.emplace_back(u, v, c / out_deg[u]);
    in_t.emplace_back(v, u, c / in_deg[v]);
  }
  StaticSessionGraph g;
  g.items = nodes.items;
  g.last_node = nodes.click_node.back();
  g.out_weights = SparseMatrix::from_triplets(n, n, std::move(out_t));
  g.in_weights = SparseMatrix::from_triplets(n, n, std::move(in_t));
  return g;
}

inline BatchGraph make_batch(std::span<const TemporalSessionGraph> graphs) {
  if (graphs.empty()) throw UsageError("make_batch needs at least one graph");
  BatchGraph b;
  for (std::size_t s = 0; s < graphs.size(); ++s) {
    const auto& g = graphs[s];
    const std::size_t off = b.items.size();
    b.offsets.push_back(off);
    b.items.insert(b.items.end(), g.items.begin(), g.items.end());
    b.node_session.insert(b.node_session.end(), g.items.size(), s);
    for (const auto& e : g.edges) b.edges.push_back(TemporalEdge{e.source + off, e.target + off, e.time});
    b.last_nodes.push_back(g.last_node + off);
  }
  return b;
}

/// Block-diagonal union of static graphs, node order matching make_batch.
inline StaticSessionGraph make_static_batch(std::span<const StaticSessionGraph> graphs) {
  if (graphs.empty()) throw UsageError("make_static_batch needs at least one graph");
  std::size_t total = 0;
  for (const auto& g : graphs) total += g.num_nodes();
  std::vector<std::tuple<std::size_t, std::size_t, double>> in_t, out_t;
  StaticSessionGraph u;
  std::size_t off = 0;
  for (const auto& g : graphs) {
    auto append = [off](const SparseMatrix& m, auto& triplets) {
      for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k)
          triplets.emplace_back(r + off, m.col_index[k] + off, m.weights[k]);
    };
    append(g.in_weights, in_t);
    append(g.out_weights, out_t);
    u.items.insert(u.items.end(), g.items.begin(), g.items.end());
    off += g.num_nodes();
  }
  u.last_node = graphs.back().last_node + (total - graphs.back().num_nodes());
  u.in_weights = SparseMatrix::from_triplets(total, total, std::move(in_t));
  u.out_weights = SparseMatrix::from_triplets(total, total, std::move(out_t));
  return u;
}

}  // namespace gngode
