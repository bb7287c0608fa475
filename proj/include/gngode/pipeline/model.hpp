#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gngode/graph/session_graph.hpp"
#include "gngode/model/encoder.hpp"
#include "gngode/model/parameters.hpp"
#include "gngode/model/readout.hpp"
#include "gngode/ode/gng_ode.hpp"
#include "gngode/pipeline/config.hpp"

namespace gngode {

inline constexpr const char* kEmbeddingName = "embedding";

/// Fresh parameters: item embeddings, encoder, ODE gates and readout, all
/// uniform in [-1/sqrt(d), 1/sqrt(d)].
inline ParameterSet init_parameters(std::size_t vocab_size, const ModelConfig& cfg, std::uint64_t seed) {
  if (vocab_size == 0) throw ConfigError("vocabulary is empty");
  if (cfg.dim == 0) throw ConfigError("dim must be positive");
  Rng rng(seed);
  ParameterSet p;
  p[kEmbeddingName] = uniform_array({vocab_size, cfg.dim}, 1.0 / std::sqrt(static_cast<double>(cfg.dim)), rng);
  init_encoder_params(p, cfg.dim, cfg.encoder, rng);
  init_ode_params(p, cfg.dim, rng);
  init_readout_params(p, cfg.dim, rng);
  return p;
}

/// Graph structures for one batch of prefixes.
struct PreparedBatch {
  BatchGraph temporal;
  StaticSessionGraph static_graph;
  std::vector<std::size_t> targets;
};

inline PreparedBatch prepare_batch(std::span<const Sample> samples) {
  if (samples.empty()) throw UsageError("empty batch");
  std::vector<TemporalSessionGraph> temporal;
  std::vector<StaticSessionGraph> statics;
  PreparedBatch b;
  temporal.reserve(samples.size());
  statics.reserve(samples.size());
  for (const auto& s : samples) {
    temporal.push_back(build_temporal_graph(s.prefix));
    statics.push_back(build_static_graph(s.prefix));
    b.targets.push_back(s.target);
  }
  b.temporal = make_batch(temporal);
  b.static_graph = make_static_batch(statics);
  return b;
}

struct ForwardPass {
  VarMap params;
  Var initial_state;
  Var final_state;
  ScoreVector scores;
};

/// Encode -> integrate -> read out -> score, recorded on `tape`.
inline ForwardPass forward(Tape& tape, const ParameterSet& params, const ModelConfig& cfg,
                           const PreparedBatch& batch) {
  ForwardPass fp;
  fp.params = tape.bind(params);
  const Var table = require_var(fp.params, kEmbeddingName);
  const Var x = gather_rows(table, batch.temporal.items);
  const EncoderVars enc = bind_encoder(fp.params, cfg.encoder);
  fp.initial_state = encode_initial(batch.static_graph, x, enc, cfg.encoder);
  const GruCellVars ode = GruCellVars::bind(fp.params, kOdePrefix);
  fp.final_state = solve(fp.initial_state, batch.temporal, ode, x, cfg.solver, cfg.ode);
  const ReadoutVars ro = ReadoutVars::bind(fp.params);
  const Var recent = recent_interest(fp.final_state, batch.temporal.last_nodes);
  const auto longterm =
      attention_longterm(fp.final_state, recent, ro, batch.temporal.node_session, batch.temporal.segment_bounds());
  fp.scores = score_items(hybrid(longterm.preference, recent, ro.W4), table, cfg.softmax_scale);
  return fp;
}

/// Batch-mean loss of `samples` under `params`.
inline Var batch_loss(Tape& tape, const ParameterSet& params, const ModelConfig& cfg, const PreparedBatch& batch,
                      double l2) {
  const ForwardPass fp = forward(tape, params, cfg, batch);
  return compute_loss(fp.scores.probabilities, batch.targets, l2, fp.params);
}

/// Class probabilities for every sample (one row each).
inline Array predict(const ParameterSet& params, const ModelConfig& cfg, std::span<const Sample> samples) {
  Tape tape;
  const auto batch = prepare_batch(samples);
  return forward(tape, params, cfg, batch).scores.probabilities.value();
}

}  // namespace gngode
