#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gngode/model/parameters.hpp"
#include "gngode/numeric/tape.hpp"

namespace gngode {

/// Attention and fusion weights, stored as [out x in] and applied as x * W^T.
struct ReadoutVars {
  Var W1;  // [1 x d]
  Var W2;  // [d x d]
  Var W3;  // [d x d]
  Var b;  // [d]
  Var W4;  // [d x 2d]

  static ReadoutVars bind(const VarMap& vars) {
    return {require_var(vars, "readout.W1"), require_var(vars, "readout.W2"), require_var(vars, "readout.W3"),
            require_var(vars, "readout.b"), require_var(vars, "readout.W4")};
  }
};

inline void init_readout_params(ParameterSet& params, std::size_t dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  params["readout.W1"] = uniform_array({1, dim}, bound, rng);
  params["readout.W2"] = uniform_array({dim, dim}, bound, rng);
  params["readout.W3"] = uniform_array({dim, dim}, bound, rng);
  params["readout.b"] = uniform_array({dim}, bound, rng);
  params["readout.W4"] = uniform_array({dim, 2 * dim}, bound, rng);
}

/// State of each session's last clicked item; one row per session.
inline Var recent_interest(Var h_final, std::vector<std::size_t> last_nodes) {
  return gather_rows(h_final, std::move(last_nodes));
}

struct LongTermInterest {
  Var preference;  // [sessions x d]
  Var weights;  // [nodes x 1], softmax within each session
};

/// Attention pooling of node states:
///   a_i = W1 * sigmoid(W2 h_i + W3 z_r + b),  gamma = softmax(a) per session,
///   z_l = sum_i gamma_i h_i
/// over the distinct nodes of each session. `bounds` holds session row
/// boundaries [offsets..., num_nodes]; node_session maps node -> session.
inline LongTermInterest attention_longterm(Var h_final, Var z_recent, const ReadoutVars& p,
                                           const std::vector<std::size_t>& node_session,
                                           std::vector<std::size_t> bounds) {
  const std::size_t sessions = bounds.size() - 1;
  const Var query = gather_rows(matmul_nt(z_recent, p.W3), node_session);
  const Var hidden = sigmoid(add_row(matmul_nt(h_final, p.W2) + query, p.b));
  const Var scores = matmul_nt(hidden, p.W1);
  const Var gamma = segment_softmax(scores, std::move(bounds));
  const Var pooled = scatter_add_rows(mul_col(gamma, h_final), node_session, sessions);
  return {pooled, gamma};
}

/// W4 [z_l ; z_r]
inline Var hybrid(Var z_long, Var z_recent, Var W4) { return matmul_nt(concat_cols(z_long, z_recent), W4); }

struct ScoreVector {
  Var logits;  // cosine similarities in [-1, 1], [sessions x |V|]
  Var probabilities;  // softmax(scale * logits)
};

inline constexpr double kDefaultSoftmaxScale = 12.0;

/// Cosine between the preference and every item embedding, then a scaled softmax.
inline ScoreVector score_items(Var z_hybrid, Var embedding_table, double scale = kDefaultSoftmaxScale) {
  if (!(scale > 0.0)) throw ConfigError("softmax scale must be positive");
  const Var logits = matmul_nt(l2_normalize_rows(z_hybrid), l2_normalize_rows(embedding_table));
  return {logits, softmax(gngode::scale(logits, scale))};
}

inline constexpr double kLogFloor = 1e-12;

/// Mean over rows of -sum_i [y_i log p_i + (1 - y_i) log(1 - p_i)] with y
/// one-hot at each row's target, plus lambda * sum of squared parameters.
inline Var compute_loss(Var probabilities, std::span<const std::size_t> targets, double lambda,
                        const VarMap& regularised = {}) {
  const std::size_t rows = probabilities.rows(), cols = probabilities.cols();
  if (targets.size() != rows) throw ConfigError("loss: one target per row required");
  if (lambda < 0.0) throw ConfigError("loss: lambda must be non-negative");
  Array onehot({rows, cols});
  Array others({rows, cols}, 1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= cols) throw ConfigError("loss: target index out of range");
    onehot(r, targets[r]) = 1.0;
    others(r, targets[r]) = 0.0;
  }
  Tape& tape = probabilities.tape();
  const Var y = tape.constant(std::move(onehot));
  const Var not_y = tape.constant(std::move(others));
  const Var log_p = log_clamped(probabilities, kLogFloor);
  const Var log_q = log_clamped(affine(probabilities, -1.0, 1.0), kLogFloor);
  Var loss = scale(sum(y * log_p + not_y * log_q), -1.0 / static_cast<double>(rows));
  if (lambda > 0.0) {
    for (const auto& [name, v] : regularised) loss = loss + scale(sum_squares(v), lambda);
  }
  return loss;
}

}  // namespace gngode
