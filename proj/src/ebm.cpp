#include "kdpg/ebm.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "kdpg/compile.hpp"

namespace kdpg {

Scorer compile_scorer(const Vocab& vocab) {
  return [vocab](const TokenSeq& seq) { return compile_check(vocab, seq).ok; };
}

bool Ebm::accepts(const TokenSeq& seq) const {
  return ends_with_eos(vocab(), seq) && scorer_(seq);
}

double Ebm::log_score(const TokenSeq& seq) const {
  if (!accepts(seq)) return -std::numeric_limits<double>::infinity();
  return base_->logprob(seq);
}

double Ebm::score(const TokenSeq& seq) const {
  const double l = log_score(seq);
  return std::isinf(l) ? 0.0 : std::exp(l);
}

double enumeration_size(std::size_t vocab_size, std::size_t max_len) {
  double total = 0.0;
  double term = 1.0;
  for (std::size_t l = 1; l <= max_len; ++l) {
    term *= static_cast<double>(vocab_size);
    total += term;
  }
  return total;
}

bool enumeration_feasible(std::size_t vocab_size, std::size_t max_len) {
  return enumeration_size(vocab_size, max_len) <= kEnumerationBudget;
}

namespace {

void dfs(const Policy& policy, std::size_t max_len, TokenSeq& prefix, double logprob,
         const std::function<void(const TokenSeq&, double, bool)>& visit) {
  if (prefix.size() == max_len) {
    visit(prefix, logprob, false);
    return;
  }
  const auto dist = policy.next_dist(prefix.ids);
  const TokenId eos = policy.vocab().eos();
  for (std::size_t t = 0; t < dist.size(); ++t) {
    if (dist[t] <= 0.0) continue;
    const double lp = logprob + std::log(dist[t]);
    prefix.ids.push_back(static_cast<TokenId>(t));
    if (t == eos) {
      visit(prefix, lp, true);
    } else {
      dfs(policy, max_len, prefix, lp, visit);
    }
    prefix.ids.pop_back();
  }
}

}  // namespace

void enumerate_outcomes(const Policy& policy, std::size_t max_len,
                        const std::function<void(const TokenSeq&, double, bool)>& visit) {
  if (!enumeration_feasible(policy.vocab().size(), max_len)) {
    throw Error("BudgetExceeded", "enumerating |V|=" + std::to_string(policy.vocab().size()) +
                                      " to length " + std::to_string(max_len) + " exceeds 1e7 states");
  }
  if (max_len < 2) throw ConfigError("max_len must be >= 2");
  TokenSeq prefix;
  prefix.ids.push_back(policy.vocab().bos());
  dfs(policy, max_len, prefix, 0.0, visit);
}

PartitionEstimate exact_z(const Ebm& ebm, std::size_t max_len) {
  double z = 0.0;
  enumerate_outcomes(ebm.base(), max_len, [&](const TokenSeq& seq, double lp, bool terminated) {
    if (terminated && ebm.accepts(seq)) z += std::exp(lp);
  });
  return {z, PartitionEstimate::Mode::Exact, 0, 0.0};
}

PartitionEstimate estimate_z(const Ebm& ebm, const Policy& proposal,
                             const std::vector<TokenSeq>& samples) {
  if (samples.empty()) throw ConfigError("estimate_z needs at least one sample");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& x : samples) {
    const double ls = ebm.log_score(x);
    const double w = std::isinf(ls) ? 0.0 : std::exp(ls - proposal.logprob(x));
    sum += w;
    sum_sq += w * w;
  }
  const double n = static_cast<double>(samples.size());
  const double mean = sum / n;
  double se = 0.0;
  if (samples.size() > 1) {
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    se = std::sqrt(var / n);
  }
  return {mean, PartitionEstimate::Mode::MonteCarlo, samples.size(), se};
}

PartitionEstimate estimate_z(const Ebm& ebm, const Policy& proposal, std::size_t n, Rng& rng,
                             std::size_t max_len) {
  if (n < 1) throw ConfigError("estimate_z needs n >= 1");
  std::vector<TokenSeq> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) samples.push_back(proposal.sample(rng, max_len));
  return estimate_z(ebm, proposal, samples);
}

double ExactDistribution::total() const {
  double s = 0.0;
  for (const auto& [seq, p] : entries) s += p;
  return s;
}

double ExactDistribution::prob(const TokenSeq& seq) const {
  for (const auto& [x, p] : entries) {
    if (x == seq) return p;
  }
  return 0.0;
}

ExactDistribution exact_p(const Ebm& ebm, std::size_t max_len) {
  ExactDistribution out;
  std::vector<double> logs;
  enumerate_outcomes(ebm.base(), max_len, [&](const TokenSeq& seq, double lp, bool terminated) {
    if (terminated && ebm.accepts(seq)) {
      out.entries.emplace_back(seq, 0.0);
      logs.push_back(lp);
      out.z += std::exp(lp);
    }
  });
  if (out.z <= 0.0) throw Error("DegenerateZ", "no compilable sequence has positive probability");
  const double log_z = std::log(out.z);
  for (std::size_t i = 0; i < logs.size(); ++i) out.entries[i].second = std::exp(logs[i] - log_z);
  return out;
}

std::string exact_p_csv(const Vocab& vocab, const ExactDistribution& p) {
  std::string out = "sequence,probability\n";
  char buf[64];
  for (const auto& [seq, prob] : p.entries) {
    std::snprintf(buf, sizeof buf, "%.17g", prob);
    out += "\"" + detokenize(vocab, seq) + "\"," + buf + "\n";
  }
  return out;
}

TokenSeq filter_sample(const Ebm& ebm, Rng& rng, std::size_t budget, std::size_t max_len) {
  if (budget < 1) throw ConfigError("filter_sample budget must be >= 1");
  for (std::size_t i = 0; i < budget; ++i) {
    TokenSeq x = ebm.base().sample(rng, max_len);
    if (ebm.accepts(x)) return x;
  }
  throw Error("BudgetExhausted", "no accepted sample in " + std::to_string(budget) + " draws");
}

Policy materialize_tabular(const Vocab& vocab, const ExactDistribution& p, std::size_t max_len,
                           double floor_logit) {
  Policy policy = Policy::tabular(vocab, max_len, 0, 0.0);
  const std::size_t v = vocab.size();
  const std::size_t k = policy.context_size();
  // Mass of each (prefix, next token) edge of the support trie.
  std::map<std::vector<TokenId>, std::vector<double>> edges;
  for (const auto& [seq, prob] : p.entries) {
    std::vector<TokenId> prefix{seq.ids.front()};
    for (std::size_t t = 1; t < seq.ids.size(); ++t) {
      auto& row = edges.try_emplace(prefix, v, 0.0).first->second;
      row[seq.ids[t]] += prob;
      prefix.push_back(seq.ids[t]);
    }
  }
  auto params = policy.params();
  for (const auto& [prefix, mass] : edges) {
    std::size_t row = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src =
          static_cast<std::ptrdiff_t>(prefix.size()) - static_cast<std::ptrdiff_t>(k - j);
      row = row * v + (src >= 0 ? prefix[static_cast<std::size_t>(src)] : vocab.bos());
    }
    for (std::size_t t = 0; t < v; ++t) {
      params[row * v + t] = mass[t] > 0.0 ? std::log(mass[t]) : floor_logit;
    }
  }
  return policy;
}

}  // namespace kdpg
