#include <gtest/gtest.h>

#include <algorithm>
#include <utility>

#include "support.hpp"

using namespace gngode;
using gngode::testing::make_session;

namespace {

using ItemEdge = std::pair<std::size_t, std::size_t>;

std::vector<ItemEdge> item_edges(const TemporalSessionGraph& g, double t_max) {
  std::vector<ItemEdge> out;
  for (const auto& e : g.edges)
    if (e.time <= t_max) out.emplace_back(g.items[e.source], g.items[e.target]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(TemporalGraph, SpecExample) {
  const auto g = build_temporal_graph(make_session({{10, 10}, {20, 20}, {10, 30}}));
  EXPECT_EQ(g.items, (std::vector<std::size_t>{10, 20}));
  ASSERT_EQ(g.edges.size(), 2u);
  EXPECT_EQ(g.edges[0], (TemporalEdge{0, 1, 0.5}));
  EXPECT_EQ(g.edges[1], (TemporalEdge{1, 0, 1.0}));
  EXPECT_EQ(g.last_node, 0u);
  EXPECT_EQ(g.duration, 20.0);
}

TEST(TemporalGraph, SingleClick) {
  const auto g = build_temporal_graph(make_session({{3, 10}}));
  EXPECT_EQ(g.num_nodes(), 1u);
  EXPECT_TRUE(g.edges.empty());
  EXPECT_THROW(build_temporal_graph(Session{}), UsageError);
}

TEST(TemporalGraph, EqualTimestampsFallBackToOrdinal) {
  const auto g = build_temporal_graph(make_session({{1, 5}, {2, 5}, {3, 5}, {4, 5}, {5, 5}}));
  ASSERT_EQ(g.edges.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(g.edges[i].time, static_cast<double>(i + 1) / 4.0);
}

TEST(TemporalGraph, MonotoneInTime) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = build_temporal_graph(gngode::testing::random_session(rng, 2 + rng() % 12, 5));
    const double t1 = 0.5 * (uniform_symmetric(rng, 1.0) + 1.0);
    const double t2 = t1 + (1.0 - t1) * 0.5 * (uniform_symmetric(rng, 1.0) + 1.0);
    const auto early = t_align(g, t1).edges();
    const auto late = t_align(g, t2).edges();
    for (const auto& e : early) EXPECT_NE(std::find(late.begin(), late.end(), e), late.end());
  }
}

TEST(TemporalGraph, PrefixRestrictionMatchesPrefixGraph) {
  Rng rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const Session s = gngode::testing::random_session(rng, 2 + rng() % 12, 4);
    const auto full = build_temporal_graph(s);
    const auto times = normalized_click_times(s);
    for (std::size_t t = 1; t <= s.size(); ++t) {
      Session prefix{s.id, {s.clicks.begin(), s.clicks.begin() + static_cast<std::ptrdiff_t>(t)}};
      EXPECT_EQ(item_edges(full, times[t - 1]), item_edges(build_temporal_graph(prefix), 1.0));
    }
  }
}

TEST(StaticGraph, OutWeights) {
  const auto g = build_static_graph(make_session({{0, 1}, {1, 2}, {0, 3}, {2, 4}}));
  EXPECT_EQ(g.out_weight(0, 1), 0.5);
  EXPECT_EQ(g.out_weight(0, 2), 0.5);
  EXPECT_EQ(build_static_graph(make_session({{0, 1}, {1, 2}})).out_weight(0, 1), 1.0);
  const auto rep = build_static_graph(make_session({{0, 1}, {1, 2}, {0, 3}, {1, 4}}));
  EXPECT_EQ(rep.out_weight(0, 1), 1.0);
  EXPECT_EQ(rep.in_weight(1, 0), 1.0);
}

TEST(StaticGraph, OutWeightsSumToOne) {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = build_static_graph(gngode::testing::random_session(rng, 2 + rng() % 15, 6));
    const Array out = g.out_weights.to_dense();
    for (std::size_t u = 0; u < out.rows(); ++u) {
      double total = 0.0;
      for (double w : out.row(u)) total += w;
      if (total > 0.0) EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(BatchGraph, DisjointUnion) {
  const auto a = build_temporal_graph(make_session({{0, 1}, {1, 2}}));
  const auto b = build_temporal_graph(make_session({{2, 1}, {3, 2}, {4, 3}}));
  const std::vector<TemporalSessionGraph> gs{a, b};
  const auto batch = make_batch(gs);
  EXPECT_EQ(batch.num_nodes(), 5u);
  EXPECT_EQ(batch.offsets, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(batch.last_nodes, (std::vector<std::size_t>{1, 4}));
  EXPECT_EQ(batch.node_session, (std::vector<std::size_t>{0, 0, 1, 1, 1}));
  EXPECT_EQ(batch.segment_bounds(), (std::vector<std::size_t>{0, 2, 5}));
  EXPECT_EQ(batch.edges[1], (TemporalEdge{2, 3, 0.5}));
}

TEST(BatchGraph, SingleGraphIsIdentityWrapping) {
  const auto g = build_temporal_graph(make_session({{0, 1}, {1, 5}, {0, 9}}));
  const auto batch = make_batch(std::span<const TemporalSessionGraph>(&g, 1));
  EXPECT_EQ(batch.items, g.items);
  EXPECT_EQ(batch.edges, g.edges);
  EXPECT_EQ(batch.last_nodes, (std::vector<std::size_t>{g.last_node}));
}

TEST(BatchGraph, StaticUnionIsBlockDiagonal) {
  const auto a = build_static_graph(make_session({{0, 1}, {1, 2}}));
  const auto b = build_static_graph(make_session({{2, 1}, {3, 2}, {2, 3}}));
  const std::vector<StaticSessionGraph> gs{a, b};
  const auto u = make_static_batch(gs);
  const Array d = u.out_weights.to_dense();
  EXPECT_EQ(d(0, 1), 1.0);
  EXPECT_EQ(d(2, 3), 1.0);
  EXPECT_EQ(d(3, 2), 1.0);
  EXPECT_EQ(d(1, 2), 0.0);
  EXPECT_EQ(u.last_node, 2u);
}

TEST(TAlign, FilterDefinition) {
  TemporalSessionGraph g;
  g.items = {0, 1, 2};
  g.edges = {{0, 1, 0.5}, {1, 2, 1.0}};
  EXPECT_EQ(t_align(g, 0.6).edges(), (std::vector<TemporalEdge>{{0, 1, 0.5}}));
  EXPECT_TRUE(t_align(g, 0.0).edges().empty());
  EXPECT_EQ(t_align(g, 1.0).edges(), g.edges);
  EXPECT_THROW(t_align(g, 1.5), ConfigError);
}
