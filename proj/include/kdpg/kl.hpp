#pragma once

#include <cstddef>
#include <vector>

#include "kdpg/ebm.hpp"

namespace kdpg {

struct KlEstimate {
  double value = 0.0;
  double std_error = 0.0;  // 0 in exact mode
  std::size_t samples = 0;
};

/// Importance-sampled D_KL(p || policy) from proposal samples:
///   (1/Z) mean_{x~q}[ P(x)/q(x) (log P(x) - log policy(x)) ] - log Z
/// Terms with P(x) = 0 contribute exactly 0. Throws
/// kdpg::Error("DegenerateZ") when z.value <= 0.
KlEstimate is_forward_kl(const Ebm& ebm, const PartitionEstimate& z, const Policy& policy,
                         const Policy& proposal, const std::vector<TokenSeq>& proposal_samples);

KlEstimate is_forward_kl(const Ebm& ebm, const PartitionEstimate& z, const Policy& policy,
                         const Policy& proposal, std::size_t n, Rng& rng, std::size_t max_len);

/// D_KL(p || policy) by enumeration of p.
double exact_forward_kl(const ExactDistribution& p, const Policy& policy);

/// Monte-Carlo D_KL(policy || base) from samples of `policy`, truncated
/// outcomes included via their prefix probability.
KlEstimate reverse_kl(const Policy& policy, const Policy& base, const std::vector<TokenSeq>& samples);

KlEstimate reverse_kl(const Policy& policy, const Policy& base, std::size_t n, Rng& rng,
                      std::size_t max_len);

/// D_KL(policy || base) summed over every outcome of length <= max_len.
double exact_reverse_kl(const Policy& policy, const Policy& base, std::size_t max_len);

}  // namespace kdpg
