#pragma once

#include <cstdint>
#include <vector>

#include "kdpg/corpus.hpp"
#include "kdpg/optimizer.hpp"
#include "kdpg/policy.hpp"

namespace kdpg {

struct MleConfig {
  double learning_rate = 5e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  AdamConfig adam;

  void validate() const;
};

struct TrainResult {
  Policy policy;
  /// Mean per-sequence negative log-likelihood over each epoch's batches.
  std::vector<double> epoch_loss;
};

/// Maximum-likelihood pretraining with Adam on minibatches of the train
/// split, reshuffled each epoch from `config.seed`. Throws
/// kdpg::Error("NonFiniteLoss") if the loss diverges.
TrainResult train_base(const std::vector<TokenSeq>& train, Policy init, const MleConfig& config);

}  // namespace kdpg
