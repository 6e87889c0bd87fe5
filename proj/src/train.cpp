#include "kdpg/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kdpg {

void MleConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
}

TrainResult train_base(const std::vector<TokenSeq>& train, Policy init, const MleConfig& config) {
  config.validate();
  if (train.empty()) throw ConfigError("train split is empty");
  TrainResult result{std::move(init), {}};
  Policy& policy = result.policy;
  if (config.epochs == 0) return result;

  Adam adam(policy.num_params(), config.adam);
  std::vector<double> grad(policy.num_params());
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = substream(config.seed, {0xE90C});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_nll = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const TokenSeq& seq = train[order[i]];
        epoch_nll -= policy.logprob(seq);
        // ascent direction on mean log-likelihood
        policy.accumulate_grad(seq, inv, grad);
      }
      adam.step(policy.params(), grad, config.learning_rate);
    }
    const double loss = epoch_nll / static_cast<double>(train.size());
    if (!std::isfinite(loss)) {
      throw Error("NonFiniteLoss", "epoch " + std::to_string(epoch) + " loss is not finite");
    }
    result.epoch_loss.push_back(loss);
  }
  return result;
}

}  // namespace kdpg
