#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gngode/errors.hpp"
#include "gngode/graph/session.hpp"
#include "gngode/model/parameters.hpp"

namespace gngode {

enum class SyntheticRule {
  cycle,  // successor = predecessor + 1 (mod |V|)
  markov,  // successor drawn from a seeded sparse row-stochastic matrix
};

inline SyntheticRule parse_synthetic_rule(const std::string& s) {
  if (s == "cycle") return SyntheticRule::cycle;
  if (s == "markov") return SyntheticRule::markov;
  throw ConfigError("unknown rule '" + s + "' (expected cycle or markov)");
}

struct SyntheticOptions {
  std::size_t num_items = 50;
  std::size_t num_sessions = 2000;
  SyntheticRule rule = SyntheticRule::cycle;
  double noise = 0.0;  // probability a successor is replaced by a uniform item
  std::uint64_t seed = 1;
  std::size_t min_length = 4;
  std::size_t max_length = 10;
  double mean_gap_seconds = 60.0;
  std::size_t markov_fanout = 3;  // non-zero successors per item
  double session_spacing_seconds = 86400.0;
};

namespace detail {

inline double unit_uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(n)));
}

}  // namespace detail

/// Row-stochastic transition matrix with `fanout` random successors per item.
inline std::vector<std::vector<double>> markov_transitions(std::size_t n, std::size_t fanout, Rng& rng) {
  std::vector<std::vector<double>> p(n, std::vector<double>(n, 0.0));
  for (auto& row : p) {
    double total = 0.0;
    for (std::size_t k = 0; k < std::min(fanout, n); ++k) {
      const double w = 0.1 + detail::unit_uniform(rng);
      row[detail::uniform_index(rng, n)] += w;
      total += w;
    }
    for (double& v : row) v /= total;
  }
  return p;
}

/// Sessions of 4-10 clicks with exponential inter-click gaps. Sessions are
/// laid out one after another in time, so generation order is chronological.
inline std::vector<RawSession> generate_synthetic(const SyntheticOptions& o) {
  if (o.num_items < 2) throw ConfigError("synthetic data needs at least 2 items");
  if (!(o.noise >= 0.0 && o.noise < 1.0)) throw ConfigError("noise must lie in [0, 1)");
  if (o.min_length < 2 || o.max_length < o.min_length) throw ConfigError("invalid session length range");
  Rng rng(o.seed);
  std::vector<std::vector<double>> transitions;
  if (o.rule == SyntheticRule::markov) transitions = markov_transitions(o.num_items, o.markov_fanout, rng);

  auto successor = [&](std::size_t prev) -> std::size_t {
    if (o.noise > 0.0 && detail::unit_uniform(rng) < o.noise) return detail::uniform_index(rng, o.num_items);
    if (o.rule == SyntheticRule::cycle) return (prev + 1) % o.num_items;
    double u = detail::unit_uniform(rng);
    const auto& row = transitions[prev];
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (u < row[j]) return j;
      u -= row[j];
    }
    for (std::size_t j = row.size(); j-- > 0;)
      if (row[j] > 0.0) return j;
    return prev;
  };

  std::vector<RawSession> sessions;
  sessions.reserve(o.num_sessions);
  for (std::size_t s = 0; s < o.num_sessions; ++s) {
    RawSession session{"s" + std::to_string(s), {}};
    const std::size_t len = o.min_length + detail::uniform_index(rng, o.max_length - o.min_length + 1);
    double t = static_cast<double>(s) * o.session_spacing_seconds;
    std::size_t item = detail::uniform_index(rng, o.num_items);
    for (std::size_t i = 0; i < len; ++i) {
      if (i > 0) {
        // Rounded to milliseconds so the text form is short and exact.
        t += std::round(-o.mean_gap_seconds * std::log1p(-detail::unit_uniform(rng)) * 1000.0) / 1000.0;
        item = successor(item);
      }
      session.clicks.push_back(RawClick{std::to_string(item), t});
    }
    sessions.push_back(std::move(session));
  }
  return sessions;
}

}  // namespace gngode
