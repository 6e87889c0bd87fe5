#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kdpg/vocab.hpp"

namespace kdpg {

inline constexpr std::size_t kDefaultMaxLen = 24;

/// A sampled or parsed program: BOS, body tokens, and (when terminated) EOS.
/// Lengths count BOS and EOS.
struct TokenSeq {
  std::vector<TokenId> ids;

  std::size_t size() const noexcept { return ids.size(); }
  bool operator==(const TokenSeq&) const = default;
  auto operator<=>(const TokenSeq&) const = default;
};

/// Body tokens only (BOS and a trailing EOS stripped).
std::span<const TokenId> body(const Vocab& vocab, const TokenSeq& seq);

bool ends_with_eos(const Vocab& vocab, const TokenSeq& seq);

/// Structural validity: leading BOS only at 0, EOS at most once and last,
/// every id in range, size <= max_len.
bool is_valid(const Vocab& vocab, const TokenSeq& seq, std::size_t max_len = kDefaultMaxLen);

/// Raised by tokenize; `position` is the 0-based index among the surface
/// tokens of the input text.
class UnknownToken : public Error {
 public:
  UnknownToken(std::string surface, std::size_t position);
  const std::string& surface() const noexcept { return surface_; }
  std::size_t position() const noexcept { return position_; }

 private:
  std::string surface_;
  std::size_t position_;
};

/// Whitespace-separated surfaces to [BOS, ..., EOS].
TokenSeq tokenize(const Vocab& vocab, std::string_view text);

/// Body surfaces joined by single spaces.
std::string detokenize(const Vocab& vocab, const TokenSeq& seq);

/// Body ids to a terminated sequence.
TokenSeq make_seq(const Vocab& vocab, std::span<const TokenId> body_ids);

}  // namespace kdpg
