#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gngode/errors.hpp"
#include "gngode/numeric/adam.hpp"
#include "gngode/pipeline/checkpoint.hpp"
#include "gngode/pipeline/model.hpp"

namespace gngode {

struct TrainOutcome {
  Checkpoint checkpoint;
  std::vector<double> epoch_losses;  // sample-weighted mean loss per epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Mini-batch Adam on the batch-mean loss. Samples are reshuffled every epoch
/// from a generator seeded by config.seed.
inline TrainOutcome train(const TrainConfig& config, const Vocabulary& vocab, const std::vector<Sample>& samples,
                          const EpochCallback& on_epoch = {}) {
  config.validate();
  if (samples.empty()) throw UsageError("train: no training samples");
  for (const auto& s : samples) {
    if (s.target >= vocab.size()) throw ConfigError("train: sample target outside the vocabulary");
    for (const auto& c : s.prefix.clicks)
      if (c.item >= vocab.size()) throw ConfigError("train: sample item outside the vocabulary");
  }

  TrainOutcome out;
  out.checkpoint.vocabulary = vocab;
  out.checkpoint.config = config;
  out.checkpoint.params = init_parameters(vocab.size(), config.model, config.seed);
  ParameterSet& params = out.checkpoint.params;

  AdamState adam;
  const AdamOptions opts{config.lr, 0.9, 0.999, 1e-8};
  Rng shuffle_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<Sample> batch;
      batch.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) batch.push_back(samples[order[i]]);

      Tape tape;
      const auto prepared = prepare_batch(batch);
      const Var loss = batch_loss(tape, params, config.model, prepared, config.l2);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index));
      }
      const GradientMap grads = tape.backward(loss);
      adam_step(params, grads, adam, opts);
      loss_sum += value * static_cast<double>(end - begin);
    }
    const double mean_loss = loss_sum / static_cast<double>(samples.size());
    out.epoch_losses.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch, mean_loss);
  }
  return out;
}

/// `epoch,mean_loss` lines.
inline void write_loss_log(std::ostream& out, const std::vector<double>& losses) {
  for (std::size_t i = 0; i < losses.size(); ++i) out << (i + 1) << ',' << detail::format_double(losses[i]) << '\n';
}

}  // namespace gngode
