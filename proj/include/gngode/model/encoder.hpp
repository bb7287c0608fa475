#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "gngode/graph/session_graph.hpp"
#include "gngode/model/parameters.hpp"
#include "gngode/numeric/tape.hpp"

namespace gngode {

enum class EncoderKind { ggnn, mlp };
enum class Aggregation { both, incoming };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::ggnn;
  std::size_t layers = 1;  // 0 disables the encoder (normalised raw embeddings)
  Aggregation aggregation = Aggregation::both;
};

/// Gates of a GRU cell: r, z from (input, state); candidate from (input, r*state).
/// The update keeps z of the old state: h' = z*h + (1-z)*candidate.
struct GruCellVars {
  Var W_r, W_z, W_h;  // [d x input_width]
  Var U_r, U_z, U_h;  // [d x d]
  Var b_r, b_z, b_h;  // [d]

  static GruCellVars bind(const VarMap& vars, const std::string& prefix) {
    return {require_var(vars, prefix + "W_r"), require_var(vars, prefix + "W_z"), require_var(vars, prefix + "W_h"),
            require_var(vars, prefix + "U_r"), require_var(vars, prefix + "U_z"), require_var(vars, prefix + "U_h"),
            require_var(vars, prefix + "b_r"), require_var(vars, prefix + "b_z"), require_var(vars, prefix + "b_h")};
  }

  static void init(ParameterSet& params, const std::string& prefix, std::size_t dim, std::size_t input_width,
                   Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    for (const char* g : {"W_r", "W_z", "W_h"}) params[prefix + g] = uniform_array({dim, input_width}, bound, rng);
    for (const char* g : {"U_r", "U_z", "U_h"}) params[prefix + g] = uniform_array({dim, dim}, bound, rng);
    for (const char* g : {"b_r", "b_z", "b_h"}) params[prefix + g] = uniform_array({dim}, bound, rng);
  }
};

inline Var gru_cell(Var input, Var h, const GruCellVars& p) {
  const Var r = sigmoid(add_row(matmul_nt(input, p.W_r) + matmul_nt(h, p.U_r), p.b_r));
  const Var z = sigmoid(add_row(matmul_nt(input, p.W_z) + matmul_nt(h, p.U_z), p.b_z));
  const Var cand = tanh(add_row(matmul_nt(input, p.W_h) + matmul_nt(r * h, p.U_h), p.b_h));
  return z * h + affine(z, -1.0, 1.0) * cand;
}

struct EncoderVars {
  GruCellVars cell;
  Var mlp_W1, mlp_b1, mlp_W2, mlp_b2;
};

inline constexpr const char* kEncoderPrefix = "encoder.";

inline void init_encoder_params(ParameterSet& params, std::size_t dim, const EncoderConfig& cfg, Rng& rng) {
  if (cfg.layers == 0) return;
  if (cfg.kind == EncoderKind::ggnn) {
    const std::size_t width = cfg.aggregation == Aggregation::both ? 2 * dim : dim;
    GruCellVars::init(params, kEncoderPrefix, dim, width, rng);
  } else {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    params["encoder.mlp_W1"] = uniform_array({dim, dim}, bound, rng);
    params["encoder.mlp_b1"] = uniform_array({dim}, bound, rng);
    params["encoder.mlp_W2"] = uniform_array({dim, dim}, bound, rng);
    params["encoder.mlp_b2"] = uniform_array({dim}, bound, rng);
  }
}

inline EncoderVars bind_encoder(const VarMap& vars, const EncoderConfig& cfg) {
  EncoderVars e;
  if (cfg.layers == 0) return e;
  if (cfg.kind == EncoderKind::ggnn) {
    e.cell = GruCellVars::bind(vars, kEncoderPrefix);
  } else {
    e.mlp_W1 = require_var(vars, "encoder.mlp_W1");
    e.mlp_b1 = require_var(vars, "encoder.mlp_b1");
    e.mlp_W2 = require_var(vars, "encoder.mlp_W2");
    e.mlp_b2 = require_var(vars, "encoder.mlp_b2");
  }
  return e;
}

/// Adjacency operators of a static graph, shared across layers.
struct StaticAdjacency {
  std::shared_ptr<const SparseMatrix> in;
  std::shared_ptr<const SparseMatrix> out;

  explicit StaticAdjacency(const StaticSessionGraph& g)
      : in(std::make_shared<SparseMatrix>(g.in_weights)), out(std::make_shared<SparseMatrix>(g.out_weights)) {}
};

/// One gated graph layer: weighted neighbour sums over incoming and outgoing
/// edges (concatenated) feed a GRU cell together with each node's own state.
inline Var ggnn_layer(Var h, const StaticAdjacency& adj, const GruCellVars& cell,
                      Aggregation aggregation = Aggregation::both) {
  const Var incoming = spmm(adj.in, h);
  const Var neighbours = aggregation == Aggregation::both ? concat_cols(incoming, spmm(adj.out, h)) : incoming;
  return gru_cell(neighbours, h, cell);
}

inline Var ggnn_layer(Var h, const StaticSessionGraph& g, const GruCellVars& cell,
                      Aggregation aggregation = Aggregation::both) {
  return ggnn_layer(h, StaticAdjacency(g), cell, aggregation);
}

/// Initial latent states: `layers` encoder passes over the node embeddings,
/// then unit-norm rows so every entry starts inside [-1, 1].
inline Var encode_initial(const StaticSessionGraph& g, Var embeddings, const EncoderVars& p,
                          const EncoderConfig& cfg) {
  if (embeddings.rows() != g.num_nodes()) {
    throw ConfigError("encoder: " + std::to_string(embeddings.rows()) + " embedding rows for " +
                      std::to_string(g.num_nodes()) + " nodes");
  }
  Var h = embeddings;
  if (cfg.layers > 0 && cfg.kind == EncoderKind::ggnn) {
    const StaticAdjacency adj(g);
    for (std::size_t l = 0; l < cfg.layers; ++l) h = ggnn_layer(h, adj, p.cell, cfg.aggregation);
  } else if (cfg.layers > 0) {
    h = add_row(matmul_nt(tanh(add_row(matmul_nt(h, p.mlp_W1), p.mlp_b1)), p.mlp_W2), p.mlp_b2);
  }
  return l2_normalize_rows(h);
}

}  // namespace gngode
