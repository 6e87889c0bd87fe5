#include "kdpg/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kdpg {

struct Policy::Scratch {
  std::vector<double> input;   // concatenated embeddings (neural)
  std::vector<double> hidden;  // tanh activations (neural)
  std::vector<double> logp;    // log next-token distribution, -inf at BOS
  std::vector<double> dl;      // backward work buffers
  std::vector<double> dh;
  std::vector<double> du;

  explicit Scratch(const Policy& p) {
    if (p.arch_ == Arch::Neural) {
      input.resize(p.shape_.context * p.shape_.embed);
      hidden.resize(p.shape_.hidden);
      dh.resize(p.shape_.hidden);
      du.resize(input.size());
    }
    logp.resize(p.vocab_.size());
    dl.resize(p.vocab_.size());
  }
};

Policy::Policy(Vocab vocab, Arch arch) : vocab_(std::move(vocab)), arch_(arch) {}

void Policy::layout() {
  blocks_.clear();
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    blocks_.push_back({std::move(name), rows, cols, offset});
    offset += rows * cols;
  };
  const std::size_t v = vocab_.size();
  if (arch_ == Arch::Neural) {
    add("embedding", v, shape_.embed);
    add("hidden.weight", shape_.context * shape_.embed, shape_.hidden);
    add("hidden.bias", 1, shape_.hidden);
    add("output.weight", shape_.hidden, v);
    add("output.bias", 1, v);
  } else {
    std::size_t rows = 1;
    for (std::size_t i = 0; i + 1 < order_; ++i) rows *= v;
    add("logits", rows, v);
  }
  params_.assign(offset, 0.0);
}

Policy Policy::neural(Vocab vocab, NeuralShape shape, std::uint64_t seed, double init_scale) {
  if (shape.context == 0 || shape.embed == 0 || shape.hidden == 0) {
    throw ConfigError("neural shape dimensions must be positive");
  }
  Policy p(std::move(vocab), Arch::Neural);
  p.shape_ = shape;
  p.layout();
  Rng rng = substream(seed, {0x1417});
  auto fill = [&](const ParamBlock& b, double fan_in) {
    const double s = init_scale / std::sqrt(fan_in);
    std::uniform_real_distribution<double> d(-s, s);
    for (std::size_t i = 0; i < b.size(); ++i) p.params_[b.offset + i] = d(rng);
  };
  fill(p.blocks_[0], 1.0);
  fill(p.blocks_[1], static_cast<double>(shape.context * shape.embed));
  fill(p.blocks_[3], static_cast<double>(shape.hidden));
  return p;
}

Policy Policy::tabular(Vocab vocab, std::size_t order, std::uint64_t seed, double init_scale) {
  if (order < 1) throw ConfigError("tabular order must be >= 1");
  Policy p(std::move(vocab), Arch::Tabular);
  p.order_ = order;
  p.layout();
  if (p.params_.size() > (std::size_t{1} << 26)) throw ConfigError("tabular table too large");
  Rng rng = substream(seed, {0x7AB});
  std::uniform_real_distribution<double> d(-init_scale, init_scale);
  for (double& x : p.params_) x = d(rng);
  return p;
}

bool Policy::compatible_with(const Policy& other) const {
  return arch_ == other.arch_ && vocab_ == other.vocab_ && shape_ == other.shape_ &&
         order_ == other.order_ && params_.size() == other.params_.size();
}

void Policy::window_at(std::span<const TokenId> ids, std::size_t t, std::span<TokenId> out) const {
  // Context for predicting ids[t]: the previous k ids, left-padded with BOS.
  const std::size_t k = out.size();
  for (std::size_t j = 0; j < k; ++j) {
    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(k - j);
    out[j] = src >= 0 ? ids[static_cast<std::size_t>(src)] : vocab_.bos();
  }
}

std::size_t Policy::table_row(std::span<const TokenId> window) const {
  std::size_t row = 0;
  for (TokenId id : window) row = row * vocab_.size() + id;
  return row;
}

void Policy::forward(std::span<const TokenId> window, Scratch& s) const {
  const std::size_t v = vocab_.size();
  auto& logits = s.logp;
  if (arch_ == Arch::Neural) {
    const std::size_t d = shape_.embed;
    const std::size_t h = shape_.hidden;
    const double* emb = params_.data() + blocks_[0].offset;
    const double* w1 = params_.data() + blocks_[1].offset;
    const double* b1 = params_.data() + blocks_[2].offset;
    const double* w2 = params_.data() + blocks_[3].offset;
    const double* b2 = params_.data() + blocks_[4].offset;
    for (std::size_t c = 0; c < window.size(); ++c) {
      std::copy_n(emb + static_cast<std::size_t>(window[c]) * d, d, s.input.begin() + c * d);
    }
    std::copy_n(b1, h, s.hidden.begin());
    for (std::size_t i = 0; i < s.input.size(); ++i) {
      const double ui = s.input[i];
      const double* row = w1 + i * h;
      for (std::size_t j = 0; j < h; ++j) s.hidden[j] += ui * row[j];
    }
    for (double& x : s.hidden) x = std::tanh(x);
    std::copy_n(b2, v, logits.begin());
    for (std::size_t j = 0; j < h; ++j) {
      const double hj = s.hidden[j];
      const double* row = w2 + j * v;
      for (std::size_t t = 0; t < v; ++t) logits[t] += hj * row[t];
    }
  } else {
    const double* row = params_.data() + table_row(window) * v;
    std::copy_n(row, v, logits.begin());
  }
  // log-softmax with BOS masked
  logits[vocab_.bos()] = -std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : logits) mx = std::max(mx, x);
  double z = 0.0;
  for (double x : logits) z += std::exp(x - mx);
  const double lse = mx + std::log(z);
  for (double& x : logits) x -= lse;
}

void Policy::backward(std::span<const TokenId> window, Scratch& s, TokenId target, double weight,
                      std::span<double> grad) const {
  const std::size_t v = vocab_.size();
  // d log softmax[target] / d logits = onehot(target) - p
  for (std::size_t t = 0; t < v; ++t) s.dl[t] = -weight * std::exp(s.logp[t]);
  s.dl[target] += weight;

  if (arch_ == Arch::Tabular) {
    double* row = grad.data() + table_row(window) * v;
    for (std::size_t t = 0; t < v; ++t) row[t] += s.dl[t];
    return;
  }
  const std::size_t d = shape_.embed;
  const std::size_t h = shape_.hidden;
  const double* w1 = params_.data() + blocks_[1].offset;
  const double* w2 = params_.data() + blocks_[3].offset;
  double* g_emb = grad.data() + blocks_[0].offset;
  double* g_w1 = grad.data() + blocks_[1].offset;
  double* g_b1 = grad.data() + blocks_[2].offset;
  double* g_w2 = grad.data() + blocks_[3].offset;
  double* g_b2 = grad.data() + blocks_[4].offset;

  for (std::size_t t = 0; t < v; ++t) g_b2[t] += s.dl[t];
  for (std::size_t j = 0; j < h; ++j) {
    const double hj = s.hidden[j];
    const double* row = w2 + j * v;
    double* grow = g_w2 + j * v;
    double acc = 0.0;
    for (std::size_t t = 0; t < v; ++t) {
      grow[t] += hj * s.dl[t];
      acc += row[t] * s.dl[t];
    }
    s.dh[j] = acc * (1.0 - hj * hj);  // through tanh
  }
  for (std::size_t j = 0; j < h; ++j) g_b1[j] += s.dh[j];
  for (std::size_t i = 0; i < s.input.size(); ++i) {
    const double ui = s.input[i];
    const double* row = w1 + i * h;
    double* grow = g_w1 + i * h;
    double acc = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      grow[j] += ui * s.dh[j];
      acc += row[j] * s.dh[j];
    }
    s.du[i] = acc;
  }
  for (std::size_t c = 0; c < window.size(); ++c) {
    double* erow = g_emb + static_cast<std::size_t>(window[c]) * d;
    for (std::size_t k = 0; k < d; ++k) erow[k] += s.du[c * d + k];
  }
}

std::vector<double> Policy::next_dist_window(std::span<const TokenId> window) const {
  if (window.size() != context_size()) throw Error("InvalidContext", "window size mismatch");
  for (TokenId id : window) {
    if (id >= vocab_.size()) throw Error("InvalidContext", "token id out of range");
  }
  Scratch s(*this);
  forward(window, s);
  std::vector<double> p(s.logp.size());
  std::transform(s.logp.begin(), s.logp.end(), p.begin(), [](double x) { return std::exp(x); });
  return p;
}

std::vector<double> Policy::next_dist(std::span<const TokenId> prefix) const {
  std::vector<TokenId> window(context_size());
  window_at(prefix, prefix.size(), window);
  return next_dist_window(window);
}

double Policy::prefix_logprob(const TokenSeq& seq) const {
  Scratch s(*this);
  std::vector<TokenId> window(context_size());
  double total = 0.0;
  for (std::size_t t = 1; t < seq.ids.size(); ++t) {
    window_at(seq.ids, t, window);
    forward(window, s);
    total += s.logp[seq.ids[t]];
  }
  return total;
}

double Policy::logprob(const TokenSeq& seq) const {
  if (!ends_with_eos(vocab_, seq)) throw MissingEos();
  return prefix_logprob(seq);
}

void Policy::accumulate_grad(const TokenSeq& seq, double weight, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw Error("ShapeMismatch", "gradient buffer size");
  if (weight == 0.0) return;
  Scratch s(*this);
  std::vector<TokenId> window(context_size());
  for (std::size_t t = 1; t < seq.ids.size(); ++t) {
    window_at(seq.ids, t, window);
    forward(window, s);
    backward(window, s, seq.ids[t], weight, grad);
  }
}

std::vector<double> Policy::grad_logprob(const TokenSeq& seq) const {
  if (!ends_with_eos(vocab_, seq)) throw MissingEos();
  std::vector<double> grad(params_.size(), 0.0);
  accumulate_grad(seq, 1.0, grad);
  return grad;
}

TokenSeq Policy::sample(Rng& rng, std::size_t max_len, std::span<const TokenId> prompt) const {
  for (TokenId id : prompt) {
    if (id >= vocab_.size() || id == vocab_.bos() || id == vocab_.eos()) {
      throw Error("InvalidPrompt", "prompt must contain body tokens only");
    }
  }
  TokenSeq seq;
  seq.ids.push_back(vocab_.bos());
  seq.ids.insert(seq.ids.end(), prompt.begin(), prompt.end());
  if (seq.ids.size() > max_len) seq.ids.resize(max_len);
  Scratch s(*this);
  std::vector<TokenId> window(context_size());
  while (seq.ids.size() < max_len) {
    window_at(seq.ids, seq.ids.size(), window);
    forward(window, s);
    double u = uniform01(rng);
    // Inverse CDF; if rounding leaves u past the total, the last token with
    // positive probability is taken.
    TokenId next = vocab_.eos();
    for (std::size_t t = 0; t < s.logp.size(); ++t) {
      const double p = std::exp(s.logp[t]);
      if (p <= 0.0) continue;
      next = static_cast<TokenId>(t);
      if (u < p) break;
      u -= p;
    }
    seq.ids.push_back(next);
    if (next == vocab_.eos()) break;
  }
  return seq;
}

}  // namespace kdpg
