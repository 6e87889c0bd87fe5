#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "kdpg/token_seq.hpp"

namespace kdpg {

/// Toy style rules, applied best-effort to any token stream:
///   S1  parentheses around a lone NUM or IDENT, e.g. "( 1 )"
///   S2  an opening parenthesis that nests deeper than 3
///   S3  an identifier assigned again after its first assignment
enum class LintRule { S1, S2, S3 };

std::string_view to_string(LintRule rule);

struct LintViolation {
  LintRule rule;
  std::size_t position;  // index into TokenSeq::ids
  bool operator==(const LintViolation&) const = default;
};

struct LintReport {
  std::vector<LintViolation> violations;
  std::size_t tokens_scanned = 0;  // body tokens

  /// violations per body token; 0 for an empty body
  double per_token_rate() const;
};

LintReport lint(const Vocab& vocab, const TokenSeq& seq);

}  // namespace kdpg
