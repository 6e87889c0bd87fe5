#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "kdpg/policy.hpp"

namespace kdpg {

/// b(x) in {0, 1}.
using Scorer = std::function<bool(const TokenSeq&)>;

/// b(x) = 1 iff the MiniLang parser accepts the sequence.
Scorer compile_scorer(const Vocab& vocab);

/// The product-of-experts score P(x) = a(x) b(x). Holds non-owning
/// references; the base policy must outlive the Ebm and is never modified
/// through it.
class Ebm {
 public:
  Ebm(const Policy& base, Scorer scorer) : base_(&base), scorer_(std::move(scorer)) {}

  const Policy& base() const { return *base_; }
  const Vocab& vocab() const { return base_->vocab(); }

  /// b(x); truncated sequences are always rejected.
  bool accepts(const TokenSeq& seq) const;
  /// log P(x), or -infinity when b(x) = 0.
  double log_score(const TokenSeq& seq) const;
  /// P(x); exactly 0 when b(x) = 0.
  double score(const TokenSeq& seq) const;

 private:
  const Policy* base_;
  Scorer scorer_;
};

struct PartitionEstimate {
  enum class Mode { Exact, MonteCarlo };

  double value = 0.0;
  Mode mode = Mode::Exact;
  std::size_t samples = 0;
  double std_error = 0.0;
};

inline constexpr double kEnumerationBudget = 1e7;

/// sum_{l=1..max_len} |V|^l; enumeration is allowed when this is <= 1e7.
double enumeration_size(std::size_t vocab_size, std::size_t max_len);
bool enumeration_feasible(std::size_t vocab_size, std::size_t max_len);

/// Visits every outcome of ancestral sampling with the given max_len, in
/// lexicographic id order: each EOS-terminated sequence and each truncated
/// sequence of length max_len, with its log-probability. Outcomes of zero
/// probability (BOS continuations) are skipped. Throws
/// kdpg::Error("BudgetExceeded") when enumeration is not feasible.
void enumerate_outcomes(const Policy& policy, std::size_t max_len,
                        const std::function<void(const TokenSeq&, double logprob, bool terminated)>& visit);

/// Z = sum_x P(x) over terminated sequences of length <= max_len.
PartitionEstimate exact_z(const Ebm& ebm, std::size_t max_len);

/// Importance-sampled Z: mean over x ~ proposal of P(x) / proposal(x),
/// with the standard error of that mean.
PartitionEstimate estimate_z(const Ebm& ebm, const Policy& proposal, std::size_t n, Rng& rng,
                             std::size_t max_len);

/// Same estimate from an already drawn proposal batch.
PartitionEstimate estimate_z(const Ebm& ebm, const Policy& proposal,
                             const std::vector<TokenSeq>& samples);

/// p(x) = P(x) / Z over its support, in enumeration order.
struct ExactDistribution {
  std::vector<std::pair<TokenSeq, double>> entries;
  double z = 0.0;

  double total() const;
  /// Probability of `seq`, 0 when outside the support.
  double prob(const TokenSeq& seq) const;
};

ExactDistribution exact_p(const Ebm& ebm, std::size_t max_len);

/// "sequence,probability" CSV with %.17g probabilities.
std::string exact_p_csv(const Vocab& vocab, const ExactDistribution& p);

/// Rejection sampling: draws from the base policy until b(x) = 1. Throws
/// kdpg::Error("BudgetExhausted") after `budget` rejected draws.
TokenSeq filter_sample(const Ebm& ebm, Rng& rng, std::size_t budget, std::size_t max_len);

/// A full-history tabular policy (order = max_len) whose terminated-sequence
/// distribution equals `p` up to e^floor_logit leakage per step.
Policy materialize_tabular(const Vocab& vocab, const ExactDistribution& p, std::size_t max_len,
                           double floor_logit = -60.0);

}  // namespace kdpg
