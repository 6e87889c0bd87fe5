#include "kdpg/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace kdpg {

TokenKind classify_surface(std::string_view s) {
  if (s == Vocab::kBosSurface) return TokenKind::Bos;
  if (s == Vocab::kEosSurface) return TokenKind::Eos;
  if (s == "+" || s == "-") return TokenKind::AddOp;
  if (s == "*" || s == "/") return TokenKind::MulOp;
  if (s == "=") return TokenKind::Assign;
  if (s == ";") return TokenKind::Semi;
  if (s == "(") return TokenKind::LParen;
  if (s == ")") return TokenKind::RParen;
  auto all = [&](auto pred) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [&](char c) {
      return pred(static_cast<unsigned char>(c));
    });
  };
  if (all([](unsigned char c) { return std::islower(c) != 0; })) return TokenKind::Ident;
  if (all([](unsigned char c) { return std::isdigit(c) != 0; })) return TokenKind::Num;
  throw Error("InvalidVocab", "not a MiniLang lexeme: '" + std::string(s) + "'");
}

Vocab::Vocab(std::vector<std::string> surfaces) : surfaces_(std::move(surfaces)) {
  auto has = [&](std::string_view s) {
    return std::find(surfaces_.begin(), surfaces_.end(), s) != surfaces_.end();
  };
  if (!has(kBosSurface)) surfaces_.emplace_back(kBosSurface);
  if (!has(kEosSurface)) surfaces_.emplace_back(kEosSurface);

  std::unordered_set<std::string> seen;
  for (const auto& s : surfaces_) {
    if (s.empty()) throw Error("InvalidVocab", "empty token surface");
    if (!seen.insert(s).second) throw Error("InvalidVocab", "duplicate token '" + s + "'");
  }
  if (surfaces_.size() > 0xFFFF) throw Error("InvalidVocab", "too many tokens");

  kinds_.reserve(surfaces_.size());
  for (std::size_t i = 0; i < surfaces_.size(); ++i) {
    kinds_.push_back(classify_surface(surfaces_[i]));
    if (kinds_.back() == TokenKind::Bos) bos_ = static_cast<TokenId>(i);
    if (kinds_.back() == TokenKind::Eos) eos_ = static_cast<TokenId>(i);
  }
}

Vocab Vocab::minilang() {
  return Vocab({"x", "y", "z", "0", "1", "2", "+", "-", "*", "/", "=", ";", "(", ")",
                std::string(kBosSurface), std::string(kEosSurface)});
}

std::optional<TokenId> Vocab::find(std::string_view surface) const {
  auto it = std::find(surfaces_.begin(), surfaces_.end(), surface);
  if (it == surfaces_.end()) return std::nullopt;
  return static_cast<TokenId>(it - surfaces_.begin());
}

TokenId Vocab::id(std::string_view surface) const {
  if (auto found = find(surface)) return *found;
  throw Error("UnknownToken", "'" + std::string(surface) + "' is not in the vocabulary");
}

std::vector<TokenId> Vocab::body_ids() const {
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < surfaces_.size(); ++i) {
    if (i != bos_ && i != eos_) out.push_back(static_cast<TokenId>(i));
  }
  return out;
}

}  // namespace kdpg
