#pragma once

#include <cstdlib>
#include <random>

#include "kdpg/policy.hpp"
#include "oracles.hpp"

// Raw bigram table of a tabular order-2 policy, for the reference enumerator.
inline oracle::Bigram as_bigram(const kdpg::Policy& p) {
  oracle::Bigram b;
  for (const auto& s : p.vocab().surfaces()) b.surfaces.push_back(s);
  b.bos = p.vocab().bos();
  b.eos = p.vocab().eos();
  b.logits.assign(p.params().begin(), p.params().end());
  return b;
}

inline kdpg::TokenSeq as_seq(const oracle::Outcome& o) {
  kdpg::TokenSeq s;
  for (std::size_t id : o.ids) s.ids.push_back(static_cast<kdpg::TokenId>(id));
  return s;
}

// Random TokenSeq ending in EOS with a body of 0..max_body tokens.
inline kdpg::TokenSeq random_seq(std::mt19937_64& rng, const kdpg::Vocab& v, std::size_t max_body) {
  const auto ids = v.body_ids();
  std::uniform_int_distribution<std::size_t> len(0, max_body);
  std::uniform_int_distribution<std::size_t> tok(0, ids.size() - 1);
  std::vector<kdpg::TokenId> body(len(rng));
  for (auto& t : body) t = ids[tok(rng)];
  return kdpg::make_seq(v, body);
}
