#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gngode/errors.hpp"
#include "gngode/graph/session.hpp"
#include "gngode/model/encoder.hpp"
#include "gngode/ode/gng_ode.hpp"
#include "gngode/ode/solvers.hpp"

namespace gngode {

struct ModelConfig {
  std::size_t dim = 128;
  EncoderConfig encoder;
  SolverConfig solver;
  OdeOptions ode;
  double softmax_scale = 12.0;
};

struct TrainConfig {
  ModelConfig model;
  std::size_t batch_size = 512;
  double lr = 1e-3;
  double l2 = 1e-4;
  std::size_t epochs = 30;
  std::uint64_t seed = 42;
  std::vector<std::size_t> cutoffs{10, 20};

  void validate() const;
};

struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* help;
};

/// Every key accepted in config files and as a flag, with its default.
inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"dim", "128", "hidden width d"},
      {"batch_size", "512", "samples per optimiser step"},
      {"lr", "0.001", "Adam learning rate"},
      {"l2", "0.0001", "weight of the squared-parameter penalty in the loss"},
      {"epochs", "30", "passes over the training samples"},
      {"seed", "42", "seed for initialisation and shuffling"},
      {"solver", "rk4", "ODE solver: euler, rk4 or dopri5"},
      {"steps", "7", "fixed-step solvers: steps per session timeline"},
      {"rtol", "0.001", "dopri5 relative tolerance"},
      {"atol", "0.0001", "dopri5 absolute tolerance"},
      {"max_steps", "1000", "dopri5 step budget"},
      {"layers", "1", "encoder layers (0 = normalised raw embeddings)"},
      {"encoder", "ggnn", "initial-state encoder: ggnn or mlp"},
      {"aggregation", "both", "encoder neighbour aggregation: both or incoming"},
      {"scale", "12", "softmax scale applied to cosine scores"},
      {"t_align", "true", "filter edges by appearance time during integration"},
      {"gcn_norm", "symmetric", "ODE graph convolution: symmetric or directed"},
      {"k", "10,20", "evaluation cutoffs"},
  };
  return keys;
}

namespace detail {

template <class T>
T parse_unsigned(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  auto d = parse_double(v);
  if (!d) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return *d;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

}  // namespace detail

inline std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (auto part : detail::split(v, ',')) {
    const std::string s(detail::trim(part));
    if (s.empty()) continue;
    out.push_back(detail::parse_unsigned<std::size_t>(key, s));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline void apply_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_real;
  using detail::parse_unsigned;
  ModelConfig& m = c.model;
  if (key == "dim") m.dim = parse_unsigned<std::size_t>(key, value);
  else if (key == "batch_size") c.batch_size = parse_unsigned<std::size_t>(key, value);
  else if (key == "lr") c.lr = parse_real(key, value);
  else if (key == "l2") c.l2 = parse_real(key, value);
  else if (key == "epochs") c.epochs = parse_unsigned<std::size_t>(key, value);
  else if (key == "seed") c.seed = parse_unsigned<std::uint64_t>(key, value);
  else if (key == "solver") m.solver.kind = parse_solver_kind(value);
  else if (key == "steps") m.solver.steps_per_unit = parse_unsigned<std::size_t>(key, value);
  else if (key == "rtol") m.solver.rtol = parse_real(key, value);
  else if (key == "atol") m.solver.atol = parse_real(key, value);
  else if (key == "max_steps") m.solver.max_steps = parse_unsigned<std::size_t>(key, value);
  else if (key == "layers") m.encoder.layers = parse_unsigned<std::size_t>(key, value);
  else if (key == "encoder") {
    if (value == "ggnn") m.encoder.kind = EncoderKind::ggnn;
    else if (value == "mlp") m.encoder.kind = EncoderKind::mlp;
    else throw ConfigError("encoder: expected ggnn or mlp, got '" + value + "'");
  } else if (key == "aggregation") {
    if (value == "both") m.encoder.aggregation = Aggregation::both;
    else if (value == "incoming") m.encoder.aggregation = Aggregation::incoming;
    else throw ConfigError("aggregation: expected both or incoming, got '" + value + "'");
  } else if (key == "scale") m.softmax_scale = parse_real(key, value);
  else if (key == "t_align") m.ode.t_align = detail::parse_bool(key, value);
  else if (key == "gcn_norm") {
    if (value == "symmetric") m.ode.norm = GcnNorm::symmetric;
    else if (value == "directed") m.ode.norm = GcnNorm::directed;
    else throw ConfigError("gcn_norm: expected symmetric or directed, got '" + value + "'");
  } else if (key == "k") c.cutoffs = parse_size_list(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

/// Flat key/value snapshot in config_keys() order; doubles round-trip exactly.
inline std::vector<std::pair<std::string, std::string>> config_values(const TrainConfig& c) {
  const ModelConfig& m = c.model;
  using detail::format_double;
  return {
      {"dim", std::to_string(m.dim)},
      {"batch_size", std::to_string(c.batch_size)},
      {"lr", format_double(c.lr)},
      {"l2", format_double(c.l2)},
      {"epochs", std::to_string(c.epochs)},
      {"seed", std::to_string(c.seed)},
      {"solver", to_string(m.solver.kind)},
      {"steps", std::to_string(m.solver.steps_per_unit)},
      {"rtol", format_double(m.solver.rtol)},
      {"atol", format_double(m.solver.atol)},
      {"max_steps", std::to_string(m.solver.max_steps)},
      {"layers", std::to_string(m.encoder.layers)},
      {"encoder", m.encoder.kind == EncoderKind::ggnn ? "ggnn" : "mlp"},
      {"aggregation", m.encoder.aggregation == Aggregation::both ? "both" : "incoming"},
      {"scale", format_double(m.softmax_scale)},
      {"t_align", m.ode.t_align ? "true" : "false"},
      {"gcn_norm", m.ode.norm == GcnNorm::symmetric ? "symmetric" : "directed"},
      {"k", join_sizes(c.cutoffs)},
  };
}

inline void TrainConfig::validate() const {
  if (model.dim == 0) throw ConfigError("dim must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (lr < 0.0) throw ConfigError("lr must be non-negative");
  if (l2 < 0.0) throw ConfigError("l2 must be non-negative");
  if (!(model.softmax_scale > 0.0)) throw ConfigError("scale must be positive");
  for (std::size_t k : cutoffs)
    if (k == 0) throw ConfigError("cutoffs must be positive");
  model.solver.validate();
}

}  // namespace gngode
