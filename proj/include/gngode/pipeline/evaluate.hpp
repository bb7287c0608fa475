#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gngode/graph/session.hpp"
#include "gngode/pipeline/checkpoint.hpp"
#include "gngode/pipeline/model.hpp"

namespace gngode {

struct EvalReport {
  std::vector<std::size_t> cutoffs;
  std::vector<double> hit_rate;  // HR@K per cutoff
  std::vector<double> mrr;  // MRR@K per cutoff
  std::size_t samples = 0;
  std::size_t skipped = 0;

  double hr_at(std::size_t k) const { return hit_rate.at(slot(k)); }
  double mrr_at(std::size_t k) const { return mrr.at(slot(k)); }

  friend bool operator==(const EvalReport&, const EvalReport&) = default;

 private:
  std::size_t slot(std::size_t k) const {
    auto it = std::find(cutoffs.begin(), cutoffs.end(), k);
    if (it == cutoffs.end()) throw UsageError("cutoff " + std::to_string(k) + " not in report");
    return static_cast<std::size_t>(it - cutoffs.begin());
  }
};

/// 1-based rank of `target`; items scoring higher come first and equal scores
/// are ordered by ascending item index.
inline std::size_t rank_of(std::span<const double> scores, std::size_t target) {
  const double ts = scores[target];
  std::size_t rank = 1;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > ts || (scores[j] == ts && j < target)) ++rank;
  }
  return rank;
}

/// Accumulates HR@K and MRR@K from ranks.
class RankingMetrics {
 public:
  explicit RankingMetrics(std::vector<std::size_t> cutoffs)
      : cutoffs_(std::move(cutoffs)), hits_(cutoffs_.size(), 0.0), rr_(cutoffs_.size(), 0.0) {}

  void add(std::size_t rank) {
    ++count_;
    for (std::size_t i = 0; i < cutoffs_.size(); ++i) {
      if (rank <= cutoffs_[i]) {
        hits_[i] += 1.0;
        rr_[i] += 1.0 / static_cast<double>(rank);
      }
    }
  }

  EvalReport report(std::size_t skipped = 0) const {
    EvalReport r;
    r.cutoffs = cutoffs_;
    r.samples = count_;
    r.skipped = skipped;
    for (std::size_t i = 0; i < cutoffs_.size(); ++i) {
      r.hit_rate.push_back(count_ ? hits_[i] / static_cast<double>(count_) : 0.0);
      r.mrr.push_back(count_ ? rr_[i] / static_cast<double>(count_) : 0.0);
    }
    return r;
  }

 private:
  std::vector<std::size_t> cutoffs_;
  std::vector<double> hits_, rr_;
  std::size_t count_ = 0;
};

/// Prediction samples from raw sessions under `vocab`. A (prefix, target) pair
/// touching an unknown item key is skipped and counted.
inline std::vector<Sample> samples_from_raw(const std::vector<RawSession>& raw, const Vocabulary& vocab,
                                            std::size_t* skipped = nullptr) {
  std::vector<Sample> out;
  std::size_t skip = 0;
  for (const auto& m : map_sessions(raw, vocab)) {
    std::optional<std::size_t> first_unknown;
    for (std::size_t i = 0; i < m.items.size(); ++i) {
      if (!m.items[i] && !first_unknown) first_unknown = i;
    }
    for (std::size_t t = 1; t < m.items.size(); ++t) {
      if (first_unknown && *first_unknown <= t) {
        ++skip;
        continue;
      }
      Sample s;
      s.prefix.id = m.id;
      for (std::size_t i = 0; i < t; ++i) s.prefix.clicks.push_back(Click{*m.items[i], m.times[i]});
      s.target = *m.items[t];
      out.push_back(std::move(s));
    }
  }
  if (skipped) *skipped = skip;
  return out;
}

/// Ranks every sample's target against the full catalogue.
inline EvalReport evaluate(const ParameterSet& params, const ModelConfig& model, const std::vector<Sample>& samples,
                           const std::vector<std::size_t>& cutoffs, std::size_t skipped = 0,
                           std::size_t batch_size = 512) {
  if (cutoffs.empty()) throw UsageError("evaluate: no cutoffs");
  RankingMetrics metrics(cutoffs);
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    const std::size_t end = std::min(samples.size(), begin + batch_size);
    const std::span<const Sample> batch(samples.data() + begin, end - begin);
    const Array probs = predict(params, model, batch);
    for (std::size_t r = 0; r < batch.size(); ++r) metrics.add(rank_of(probs.row(r), batch[r].target));
  }
  return metrics.report(skipped);
}

inline EvalReport evaluate(const Checkpoint& ckpt, const std::vector<Sample>& samples,
                           const std::vector<std::size_t>& cutoffs, std::size_t skipped = 0) {
  return evaluate(ckpt.params, ckpt.config.model, samples, cutoffs, skipped, ckpt.config.batch_size);
}

/// `HR@K=...` / `MRR@K=...` lines followed by sample counts.
inline void write_report(std::ostream& out, const EvalReport& r) {
  for (std::size_t i = 0; i < r.cutoffs.size(); ++i) {
    out << "HR@" << r.cutoffs[i] << '=' << detail::format_double(r.hit_rate[i]) << '\n';
    out << "MRR@" << r.cutoffs[i] << '=' << detail::format_double(r.mrr[i]) << '\n';
  }
  out << "samples=" << r.samples << '\n';
  out << "skipped=" << r.skipped << '\n';
}

}  // namespace gngode
