#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kdpg/rng.hpp"
#include "kdpg/token_seq.hpp"

namespace kdpg {

/// Fixed-window neural model: concatenated embeddings of the last `context`
/// tokens, one tanh hidden layer, softmax output.
struct NeuralShape {
  std::size_t context = 8;
  std::size_t embed = 16;
  std::size_t hidden = 64;
  bool operator==(const NeuralShape&) const = default;
};

/// Named slice of the flat parameter vector (row-major rows x cols).
struct ParamBlock {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  std::size_t offset;
  std::size_t size() const { return rows * cols; }
};

/// Raised by logprob/grad_logprob on sequences that never reached EOS.
class MissingEos : public Error {
 public:
  MissingEos() : Error("MissingEos", "sequence is not terminated by EOS") {}
};

/// Autoregressive policy over token sequences, filling the roles of the
/// base model a, the trained policy and the proposal. Copying a Policy
/// makes an independent deep copy of its parameters.
///
/// BOS is never emitted: its probability is 0 at every position.
class Policy {
 public:
  enum class Arch : std::uint8_t { Neural, Tabular };

  /// Uniform(-s, s) initialization with s = init_scale / sqrt(fan_in); the
  /// embedding lookup has fan-in 1. Biases start at zero.
  static Policy neural(Vocab vocab, NeuralShape shape, std::uint64_t seed, double init_scale = 1.0);
  /// n-gram softmax: one logit row per context of `order - 1` previous
  /// tokens (left-padded with BOS).
  static Policy tabular(Vocab vocab, std::size_t order, std::uint64_t seed, double init_scale = 1.0);

  const Vocab& vocab() const { return vocab_; }
  Arch arch() const { return arch_; }
  const NeuralShape& neural_shape() const { return shape_; }
  std::size_t order() const { return order_; }
  /// Number of previous tokens the next-token distribution depends on.
  std::size_t context_size() const { return arch_ == Arch::Neural ? shape_.context : order_ - 1; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t num_params() const { return params_.size(); }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  /// Next-token distribution after `prefix` (which starts with BOS).
  std::vector<double> next_dist(std::span<const TokenId> prefix) const;
  /// Same, from an explicit context window of exactly context_size() ids.
  std::vector<double> next_dist_window(std::span<const TokenId> window) const;

  /// Natural-log probability of a terminated sequence.
  double logprob(const TokenSeq& seq) const;
  /// Sum of log next-token probabilities over every emitted token; for a
  /// truncated sequence this is the probability of that truncation event.
  double prefix_logprob(const TokenSeq& seq) const;

  /// grad += weight * d prefix_logprob(seq) / d params.
  void accumulate_grad(const TokenSeq& seq, double weight, std::span<double> grad) const;
  /// Gradient of logprob; requires EOS.
  std::vector<double> grad_logprob(const TokenSeq& seq) const;

  /// Ancestral sampling at temperature 1 after BOS and the optional prompt;
  /// stops at EOS or when the sequence holds max_len tokens.
  TokenSeq sample(Rng& rng, std::size_t max_len, std::span<const TokenId> prompt = {}) const;

  /// Same architecture, vocabulary and hyperparameters.
  bool compatible_with(const Policy& other) const;

 private:
  Policy(Vocab vocab, Arch arch);
  void layout();
  void window_at(std::span<const TokenId> ids, std::size_t t, std::span<TokenId> out) const;
  // Fills Scratch::logp with the log next-token distribution for `window`.
  struct Scratch;
  void forward(std::span<const TokenId> window, Scratch& s) const;
  void backward(std::span<const TokenId> window, Scratch& s, TokenId target, double weight,
                std::span<double> grad) const;
  std::size_t table_row(std::span<const TokenId> window) const;

  Vocab vocab_;
  Arch arch_;
  NeuralShape shape_{};
  std::size_t order_ = 0;
  std::vector<double> params_;
  std::vector<ParamBlock> blocks_;
};

}  // namespace kdpg
