#include "kdpg/lint.hpp"

#include <algorithm>
#include <set>

namespace kdpg {

std::string_view to_string(LintRule rule) {
  switch (rule) {
    case LintRule::S1: return "S1";
    case LintRule::S2: return "S2";
    case LintRule::S3: return "S3";
  }
  return "?";
}

double LintReport::per_token_rate() const {
  if (tokens_scanned == 0) return 0.0;
  return static_cast<double>(violations.size()) / static_cast<double>(tokens_scanned);
}

LintReport lint(const Vocab& vocab, const TokenSeq& seq) {
  LintReport report;
  auto ids = body(vocab, seq);
  report.tokens_scanned = ids.size();
  // Positions are reported relative to the full sequence (BOS at 0).
  const std::size_t offset = (!seq.ids.empty() && seq.ids.front() == vocab.bos()) ? 1 : 0;
  auto kind = [&](std::size_t i) { return vocab.kind(ids[i]); };

  int depth = 0;
  std::set<TokenId> assigned;
  bool statement_start = true;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const TokenKind k = kind(i);
    if (k == TokenKind::LParen) {
      if (i + 2 < ids.size() && kind(i + 2) == TokenKind::RParen &&
          (kind(i + 1) == TokenKind::Num || kind(i + 1) == TokenKind::Ident)) {
        report.violations.push_back({LintRule::S1, i + offset});
      }
      if (++depth > 3) report.violations.push_back({LintRule::S2, i + offset});
    } else if (k == TokenKind::RParen) {
      depth = std::max(0, depth - 1);
    } else if (statement_start && k == TokenKind::Ident && i + 1 < ids.size() &&
               kind(i + 1) == TokenKind::Assign) {
      if (!assigned.insert(ids[i]).second) report.violations.push_back({LintRule::S3, i + offset});
    }
    statement_start = (k == TokenKind::Semi);
  }
  std::sort(report.violations.begin(), report.violations.end(),
            [](const LintViolation& a, const LintViolation& b) {
              return a.position != b.position ? a.position < b.position : a.rule < b.rule;
            });
  return report;
}

}  // namespace kdpg
