#include "kdpg/token_seq.hpp"

#include <sstream>

namespace kdpg {

std::span<const TokenId> body(const Vocab& vocab, const TokenSeq& seq) {
  std::span<const TokenId> ids(seq.ids);
  if (!ids.empty() && ids.front() == vocab.bos()) ids = ids.subspan(1);
  if (!ids.empty() && ids.back() == vocab.eos()) ids = ids.first(ids.size() - 1);
  return ids;
}

bool ends_with_eos(const Vocab& vocab, const TokenSeq& seq) {
  return seq.ids.size() >= 2 && seq.ids.back() == vocab.eos();
}

bool is_valid(const Vocab& vocab, const TokenSeq& seq, std::size_t max_len) {
  const auto& ids = seq.ids;
  if (ids.empty() || ids.size() > max_len || ids.front() != vocab.bos()) return false;
  for (std::size_t i = 1; i < ids.size(); ++i) {
    if (ids[i] >= vocab.size() || ids[i] == vocab.bos()) return false;
    if (ids[i] == vocab.eos() && i + 1 != ids.size()) return false;
  }
  return true;
}

UnknownToken::UnknownToken(std::string surface, std::size_t position)
    : Error("UnknownToken", "'" + surface + "' at position " + std::to_string(position)),
      surface_(std::move(surface)),
      position_(position) {}

TokenSeq tokenize(const Vocab& vocab, std::string_view text) {
  TokenSeq seq;
  seq.ids.push_back(vocab.bos());
  std::istringstream in{std::string(text)};
  std::string word;
  for (std::size_t pos = 0; in >> word; ++pos) {
    auto id = vocab.find(word);
    if (!id || *id == vocab.bos() || *id == vocab.eos()) throw UnknownToken(word, pos);
    seq.ids.push_back(*id);
  }
  seq.ids.push_back(vocab.eos());
  return seq;
}

std::string detokenize(const Vocab& vocab, const TokenSeq& seq) {
  std::string out;
  for (TokenId id : body(vocab, seq)) {
    if (!out.empty()) out += ' ';
    out += vocab.surface(id);
  }
  return out;
}

TokenSeq make_seq(const Vocab& vocab, std::span<const TokenId> body_ids) {
  TokenSeq seq;
  seq.ids.reserve(body_ids.size() + 2);
  seq.ids.push_back(vocab.bos());
  seq.ids.insert(seq.ids.end(), body_ids.begin(), body_ids.end());
  seq.ids.push_back(vocab.eos());
  return seq;
}

}  // namespace kdpg
