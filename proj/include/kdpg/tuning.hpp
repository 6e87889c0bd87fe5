#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kdpg/ebm.hpp"
#include "kdpg/metrics.hpp"
#include "kdpg/optimizer.hpp"

namespace kdpg {

enum class Method { Kldpg, ReinforceB, ReinforceP };

Method method_from_string(std::string_view name);
std::string_view to_string(Method m);

struct TuneConfig {
  Method method = Method::Kldpg;
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t updates = 250;
  std::size_t warmup = 20;
  std::size_t eval_interval = 10;
  std::size_t eval_samples = 1024;
  std::size_t self_bleu_samples = 256;
  std::uint64_t seed = 1;
  std::size_t max_len = kDefaultMaxLen;
  OptimizerKind optimizer = OptimizerKind::Adam;
  AdamConfig adam;
  double clip_norm = 10.0;
  /// Subtract the batch-mean reward in Reinforce (off by default).
  bool reward_baseline = false;
  /// Exact KL by enumeration when the configuration is small enough.
  bool exact = false;

  void validate() const;
  nlohmann::json to_json() const;
};

/// Ascent direction of KL-DPG for one batch drawn from the proposal:
///   mean_i P(x_i)/q(x_i) grad log pi(x_i)
/// The ratio is formed in log space; rejected samples get weight exactly 0.
/// `mean_weight`, when given, receives the mean importance weight.
std::vector<double> kldpg_direction(const Policy& pi, const Policy& q, const Ebm& ebm,
                                    const std::vector<TokenSeq>& batch, double* mean_weight = nullptr);

/// pi <- pi + alpha * kldpg_direction. Throws kdpg::Error("NonFiniteGradient").
void kldpg_step(Policy& pi, const Policy& q, const Ebm& ebm, const std::vector<TokenSeq>& batch,
                double alpha);

using Reward = std::function<double(const TokenSeq&)>;

Reward reward_b(const Ebm& ebm);
Reward reward_p(const Ebm& ebm);

/// Ascent direction of Reinforce for an on-policy batch:
///   mean_i (R(x_i) - baseline) grad log pi(x_i)
/// with baseline = batch mean reward when `use_baseline`, else 0.
std::vector<double> reinforce_direction(const Policy& pi, const Reward& reward,
                                        const std::vector<TokenSeq>& batch, bool use_baseline = false,
                                        double* mean_reward = nullptr);

void reinforce_step(Policy& pi, const Reward& reward, const std::vector<TokenSeq>& batch, double alpha);

struct UpdateLog {
  std::size_t update = 0;
  double learning_rate = 0.0;
  double mean_weight = 0.0;  // pseudoreward (KL-DPG) or reward (Reinforce)
  double grad_norm = 0.0;    // before clipping
  bool clipped = false;
};

struct EvalPoint {
  std::size_t update = 0;
  MetricsRecord metrics;
  std::optional<double> proposal_kl;  // D_KL(p || q) at this evaluation (KL-DPG)
  double z = 0.0;                     // partition estimate in use
  bool swapped = false;
};

struct TuneTrace {
  Method method = Method::Kldpg;
  std::vector<EvalPoint> evals;
  std::vector<UpdateLog> updates;
  std::vector<std::size_t> swap_updates;
  std::size_t clip_events = 0;
  std::optional<std::string> aborted;  // reason, when stopped early

  /// One row per evaluation: method, update, metrics, proposal_kl, z, swap.
  std::string to_csv() const;
  static std::vector<std::string> csv_header();
};

struct TuneResult {
  Policy policy;
  TuneTrace trace;
};

/// Observer called after every evaluation (progress reporting).
using EvalObserver = std::function<void(const EvalPoint&)>;

/// Fine-tunes a copy of the base model of `ebm` with the configured method.
/// Evaluations run at update 0, every eval_interval updates and after the
/// last update. For KL-DPG, the proposal is replaced by the current policy
/// when the paired estimate D_KL(p||pi) beats D_KL(p||q) and every earlier
/// D_KL(p||pi) estimate. NonFiniteGradient stops the run, keeping the
/// partial trace.
TuneResult tune(const Ebm& ebm, const TuneConfig& config, const std::vector<TokenSeq>& test,
                const EvalObserver& observer = {});

}  // namespace kdpg
