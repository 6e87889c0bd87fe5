#pragma once

#include <cstdint>

#include "kdpg/policy.hpp"

namespace kdpg {

/// The small exactly-enumerable configuration: the vocabulary
/// {x, 1, =, ;, <s>, </s>}, L_max = 6, and a tabular bigram base model
/// briefly MLE-trained on {"x = x ;", "x = 1 ;"} from a seeded random start.
struct TinySetup {
  Vocab vocab;
  Policy base;
  std::size_t max_len = 6;
};

TinySetup tiny_setup(std::uint64_t seed = 1);

}  // namespace kdpg
