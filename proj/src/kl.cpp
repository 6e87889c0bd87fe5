#include "kdpg/kl.hpp"
#include <algorithm>

#include <cmath>

namespace kdpg {

namespace {

KlEstimate mean_and_error(double sum, double sum_sq, std::size_t count) {
  const double n = static_cast<double>(count);
  const double mean = sum / n;
  double se = 0.0;
  if (count > 1) se = std::sqrt(std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) / n);
  return {mean, se, count};
}

std::vector<TokenSeq> draw(const Policy& policy, std::size_t n, Rng& rng, std::size_t max_len) {
  if (n < 1) throw ConfigError("sample count must be >= 1");
  std::vector<TokenSeq> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(policy.sample(rng, max_len));
  return out;
}

}  // namespace

KlEstimate is_forward_kl(const Ebm& ebm, const PartitionEstimate& z, const Policy& policy,
                         const Policy& proposal, const std::vector<TokenSeq>& proposal_samples) {
  if (!(z.value > 0.0)) throw Error("DegenerateZ", "partition estimate is zero");
  if (proposal_samples.empty()) throw ConfigError("forward KL needs at least one sample");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& x : proposal_samples) {
    const double log_p = ebm.log_score(x);
    if (std::isinf(log_p)) continue;
    const double term = std::exp(log_p - proposal.logprob(x)) * (log_p - policy.logprob(x));
    sum += term;
    sum_sq += term * term;
  }
  KlEstimate est = mean_and_error(sum, sum_sq, proposal_samples.size());
  est.value = est.value / z.value - std::log(z.value);
  est.std_error /= z.value;
  return est;
}

KlEstimate is_forward_kl(const Ebm& ebm, const PartitionEstimate& z, const Policy& policy,
                         const Policy& proposal, std::size_t n, Rng& rng, std::size_t max_len) {
  return is_forward_kl(ebm, z, policy, proposal, draw(proposal, n, rng, max_len));
}

double exact_forward_kl(const ExactDistribution& p, const Policy& policy) {
  double kl = 0.0;
  for (const auto& [x, px] : p.entries) {
    if (px > 0.0) kl += px * (std::log(px) - policy.logprob(x));
  }
  return kl;
}

KlEstimate reverse_kl(const Policy& policy, const Policy& base, const std::vector<TokenSeq>& samples) {
  if (samples.empty()) throw ConfigError("reverse KL needs at least one sample");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& x : samples) {
    const double d = policy.prefix_logprob(x) - base.prefix_logprob(x);
    sum += d;
    sum_sq += d * d;
  }
  return mean_and_error(sum, sum_sq, samples.size());
}

KlEstimate reverse_kl(const Policy& policy, const Policy& base, std::size_t n, Rng& rng,
                      std::size_t max_len) {
  return reverse_kl(policy, base, draw(policy, n, rng, max_len));
}

double exact_reverse_kl(const Policy& policy, const Policy& base, std::size_t max_len) {
  double kl = 0.0;
  enumerate_outcomes(policy, max_len, [&](const TokenSeq& x, double lp, bool) {
    kl += std::exp(lp) * (lp - base.prefix_logprob(x));
  });
  return kl;
}

}  // namespace kdpg
