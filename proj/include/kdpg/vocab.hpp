#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kdpg/error.hpp"

namespace kdpg {

using TokenId = std::uint16_t;

/// Syntactic class of a surface token. The parser, linter and corpus
/// generator only ever look at kinds, so sub-vocabularies work unchanged.
enum class TokenKind : std::uint8_t {
  Ident,
  Num,
  AddOp,   // + -
  MulOp,   // * /
  Assign,  // =
  Semi,    // ;
  LParen,
  RParen,
  Bos,
  Eos,
};

/// Ordered, duplicate-free token inventory with distinguished BOS/EOS.
class Vocab {
 public:
  static constexpr std::string_view kBosSurface = "<s>";
  static constexpr std::string_view kEosSurface = "</s>";

  /// Builds a vocabulary from surface strings. BOS and EOS are appended
  /// (ids size and size+1) unless already present.
  explicit Vocab(std::vector<std::string> surfaces);

  /// The 16-token MiniLang inventory: x y z 0 1 2 + - * / = ; ( ) BOS EOS.
  static Vocab minilang();

  std::size_t size() const noexcept { return surfaces_.size(); }
  TokenId bos() const noexcept { return bos_; }
  TokenId eos() const noexcept { return eos_; }

  const std::string& surface(TokenId id) const { return surfaces_.at(id); }
  TokenKind kind(TokenId id) const { return kinds_.at(id); }
  std::optional<TokenId> find(std::string_view surface) const;
  /// Like find, but throws when absent.
  TokenId id(std::string_view surface) const;

  /// Ids of every token other than BOS and EOS, ascending.
  std::vector<TokenId> body_ids() const;
  std::span<const std::string> surfaces() const { return surfaces_; }

  bool operator==(const Vocab& other) const { return surfaces_ == other.surfaces_; }

 private:
  std::vector<std::string> surfaces_;
  std::vector<TokenKind> kinds_;
  TokenId bos_ = 0;
  TokenId eos_ = 0;
};

/// Classifies a surface string; throws kdpg::Error for strings that are not
/// MiniLang lexemes.
TokenKind classify_surface(std::string_view surface);

}  // namespace kdpg
