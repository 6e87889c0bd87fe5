#include "kdpg/tuning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "kdpg/kl.hpp"

namespace kdpg {

Method method_from_string(std::string_view name) {
  if (name == "kldpg") return Method::Kldpg;
  if (name == "reinforce-b") return Method::ReinforceB;
  if (name == "reinforce-p") return Method::ReinforceP;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Kldpg: return "kldpg";
    case Method::ReinforceB: return "reinforce-b";
    case Method::ReinforceP: return "reinforce-p";
  }
  return "?";
}

void TuneConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (batch_size < 1 || eval_interval < 1 || eval_samples < 2) {
    throw ConfigError("batch size and eval interval must be >= 1, eval samples >= 2");
  }
  if (!(clip_norm > 0.0)) throw ConfigError("clip norm must be > 0");
  if (max_len < 2) throw ConfigError("max_len must be >= 2");
}

nlohmann::json TuneConfig::to_json() const {
  return {{"method", to_string(method)},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"updates", updates},
          {"warmup", warmup},
          {"eval_interval", eval_interval},
          {"eval_samples", eval_samples},
          {"self_bleu_samples", self_bleu_samples},
          {"seed", seed},
          {"max_len", max_len},
          {"optimizer", to_string(optimizer)},
          {"adam", {{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"epsilon", adam.epsilon}}},
          {"clip_norm", clip_norm},
          {"reward_baseline", reward_baseline},
          {"exact", exact}};
}

namespace {

void require_finite(std::span<const double> g) {
  for (double x : g) {
    if (!std::isfinite(x)) throw Error("NonFiniteGradient", "gradient has a non-finite entry");
  }
}

void apply(Policy& pi, std::span<const double> direction, double alpha) {
  require_finite(direction);
  auto params = pi.params();
  for (std::size_t i = 0; i < params.size(); ++i) params[i] += alpha * direction[i];
}

}  // namespace

std::vector<double> kldpg_direction(const Policy& pi, const Policy& q, const Ebm& ebm,
                                    const std::vector<TokenSeq>& batch, double* mean_weight) {
  if (!pi.compatible_with(q)) throw Error("ShapeMismatch", "policy and proposal differ in shape");
  std::vector<double> dir(pi.num_params(), 0.0);
  if (batch.empty()) return dir;
  const double inv = 1.0 / static_cast<double>(batch.size());
  double weight_sum = 0.0;
  for (const auto& x : batch) {
    const double log_p = ebm.log_score(x);
    if (std::isinf(log_p)) continue;  // b(x) = 0 contributes nothing
    const double w = std::exp(log_p - q.logprob(x));
    weight_sum += w;
    pi.accumulate_grad(x, w * inv, dir);
  }
  if (mean_weight) *mean_weight = weight_sum * inv;
  return dir;
}

void kldpg_step(Policy& pi, const Policy& q, const Ebm& ebm, const std::vector<TokenSeq>& batch,
                double alpha) {
  apply(pi, kldpg_direction(pi, q, ebm, batch), alpha);
}

Reward reward_b(const Ebm& ebm) {
  return [&ebm](const TokenSeq& x) { return ebm.accepts(x) ? 1.0 : 0.0; };
}

Reward reward_p(const Ebm& ebm) {
  return [&ebm](const TokenSeq& x) { return ebm.score(x); };
}

std::vector<double> reinforce_direction(const Policy& pi, const Reward& reward,
                                        const std::vector<TokenSeq>& batch, bool use_baseline,
                                        double* mean_reward) {
  std::vector<double> dir(pi.num_params(), 0.0);
  if (batch.empty()) return dir;
  std::vector<double> r(batch.size());
  std::transform(batch.begin(), batch.end(), r.begin(), reward);
  double mean = 0.0;
  for (double v : r) mean += v;
  mean /= static_cast<double>(batch.size());
  if (mean_reward) *mean_reward = mean;
  const double baseline = use_baseline ? mean : 0.0;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    pi.accumulate_grad(batch[i], (r[i] - baseline) * inv, dir);
  }
  return dir;
}

void reinforce_step(Policy& pi, const Reward& reward, const std::vector<TokenSeq>& batch, double alpha) {
  apply(pi, reinforce_direction(pi, reward, batch), alpha);
}

std::vector<std::string> TuneTrace::csv_header() {
  std::vector<std::string> h = {"method", "update"};
  for (auto& c : MetricsRecord::csv_header()) h.push_back(c);
  h.insert(h.end(), {"proposal_kl", "z", "swap"});
  return h;
}

std::string TuneTrace::to_csv() const {
  auto join = [](const std::vector<std::string>& cols) {
    std::string line;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) line += ',';
      line += cols[i];
    }
    return line + "\n";
  };
  std::string out = join(csv_header());
  char buf[40];
  for (const auto& e : evals) {
    std::vector<std::string> row = {std::string(to_string(method)), std::to_string(e.update)};
    for (auto& c : e.metrics.csv_row()) row.push_back(c);
    if (e.proposal_kl) {
      std::snprintf(buf, sizeof buf, "%.10g", *e.proposal_kl);
      row.push_back(buf);
    } else {
      row.push_back("");
    }
    std::snprintf(buf, sizeof buf, "%.10g", e.z);
    row.push_back(buf);
    row.push_back(e.swapped ? "1" : "0");
    out += join(row);
  }
  return out;
}

namespace {

// Running mean of importance weights P(x)/q(x) over evaluation batches
// drawn from one fixed proposal.
struct ZPool {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t n = 0;

  void add(const Ebm& ebm, const Policy& q, const std::vector<TokenSeq>& xs) {
    for (const auto& x : xs) {
      const double ls = ebm.log_score(x);
      const double w = std::isinf(ls) ? 0.0 : std::exp(ls - q.logprob(x));
      sum += w;
      sum_sq += w * w;
    }
    n += xs.size();
  }
  PartitionEstimate estimate() const {
    const double m = sum / static_cast<double>(n);
    const double var = n > 1 ? std::max(0.0, (sum_sq - n * m * m) / (n - 1.0)) : 0.0;
    return {m, PartitionEstimate::Mode::MonteCarlo, n, std::sqrt(var / static_cast<double>(n))};
  }
};

}  // namespace

TuneResult tune(const Ebm& ebm, const TuneConfig& config, const std::vector<TokenSeq>& test,
                const EvalObserver& observer) {
  config.validate();
  const Policy& a = ebm.base();
  TuneResult result{a, {}};
  Policy& pi = result.policy;
  TuneTrace& trace = result.trace;
  trace.method = config.method;
  Policy q = a;

  const bool exact = config.exact && enumeration_feasible(a.vocab().size(), config.max_len);
  std::optional<ExactDistribution> p_exact;
  if (exact) p_exact = exact_p(ebm, config.max_len);

  ZPool pool;
  double best_kl = std::numeric_limits<double>::infinity();
  const Reward reward = config.method == Method::ReinforceP ? reward_p(ebm) : reward_b(ebm);

  auto evaluate_at = [&](std::size_t update) {
    EvalPoint point;
    point.update = update;
    const std::uint64_t eval_seed = derive_seed(config.seed, 0x5EED0000ull + update);
    const Policy& proposal = config.method == Method::Kldpg ? q : a;
    double kl_pi = 0.0;
    double kl_q = 0.0;
    if (exact) {
      kl_pi = exact_forward_kl(*p_exact, pi);
      kl_q = exact_forward_kl(*p_exact, proposal);
      point.z = p_exact->z;
    } else {
      const SampleSet qs = draw_samples(proposal, config.eval_samples, derive_seed(eval_seed, 7),
                                        config.max_len, "proposal");
      pool.add(ebm, proposal, qs.samples);
      const PartitionEstimate z = pool.estimate();
      point.z = z.value;
      if (z.value > 0.0) {
        kl_pi = is_forward_kl(ebm, z, pi, proposal, qs.samples).value;
        kl_q = is_forward_kl(ebm, z, proposal, proposal, qs.samples).value;
      } else {
        kl_pi = kl_q = std::numeric_limits<double>::quiet_NaN();
      }
    }
    if (config.method == Method::Kldpg) {
      if (kl_pi < kl_q && kl_pi < best_kl) {
        q = pi;
        point.swapped = true;
        trace.swap_updates.push_back(update);
        pool = ZPool{};
        kl_q = kl_pi;
      }
      point.proposal_kl = kl_q;
    }
    if (!std::isnan(kl_pi)) best_kl = std::min(best_kl, kl_pi);

    EvalOptions opts;
    opts.n_samples = config.eval_samples;
    opts.max_len = config.max_len;
    opts.self_bleu_samples = config.self_bleu_samples;
    if (!std::isnan(kl_pi)) opts.forward_kl = kl_pi;
    point.metrics = evaluate(pi, ebm, test, opts, eval_seed);
    if (std::isnan(kl_pi)) point.metrics.failures["forward_kl"] = "DegenerateZ: no accepted proposal sample yet";
    trace.evals.push_back(std::move(point));
    if (observer) observer(trace.evals.back());
  };

  evaluate_at(0);
  Optimizer opt(config.optimizer, pi.num_params(), config.adam);
  std::vector<TokenSeq> batch(config.batch_size);
  for (std::size_t u = 1; u <= config.updates; ++u) {
    UpdateLog log;
    log.update = u;
    log.learning_rate = config.warmup > 0
                            ? config.learning_rate * std::min(1.0, static_cast<double>(u) /
                                                                       static_cast<double>(config.warmup))
                            : config.learning_rate;
    const Policy& sampler = config.method == Method::Kldpg ? q : pi;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Rng rng = substream(config.seed, {u, i});
      batch[i] = sampler.sample(rng, config.max_len);
    }
    std::vector<double> dir =
        config.method == Method::Kldpg
            ? kldpg_direction(pi, q, ebm, batch, &log.mean_weight)
            : reinforce_direction(pi, reward, batch, config.reward_baseline, &log.mean_weight);
    try {
      require_finite(dir);
    } catch (const Error& e) {
      trace.aborted = std::string(e.what()) + " at update " + std::to_string(u);
      break;
    }
    log.grad_norm = l2_norm(dir);
    if (log.grad_norm > config.clip_norm) {
      const double s = config.clip_norm / log.grad_norm;
      for (double& g : dir) g *= s;
      log.clipped = true;
      ++trace.clip_events;
    }
    opt.step(pi.params(), dir, log.learning_rate);
    trace.updates.push_back(log);
    if (u % config.eval_interval == 0 || u == config.updates) evaluate_at(u);
  }
  return result;
}

}  // namespace kdpg
