#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "kdpg/token_seq.hpp"

namespace kdpg {

/// Category of the leftmost syntax error. See GRAMMAR.md for the exact
/// decision table.
enum class ErrorKind : std::uint8_t {
  Empty,
  UnexpectedToken,
  UnbalancedParen,
  MissingSemicolon,
  Truncated,
};

inline constexpr std::array<ErrorKind, 5> kAllErrorKinds = {
    ErrorKind::Empty, ErrorKind::UnexpectedToken, ErrorKind::UnbalancedParen,
    ErrorKind::MissingSemicolon, ErrorKind::Truncated};

std::string_view to_string(ErrorKind kind);
std::optional<ErrorKind> error_kind_from_string(std::string_view name);

/// Outcome of b(x). `error_position` indexes into TokenSeq::ids (BOS is 0).
struct CompileResult {
  bool ok = true;
  std::optional<ErrorKind> error_kind;
  std::optional<std::size_t> error_position;

  static CompileResult success() { return {}; }
  static CompileResult failure(ErrorKind kind, std::size_t position) {
    return {false, kind, position};
  }
  bool operator==(const CompileResult&) const = default;
};

/// b(x): leftmost-error recursive-descent check against the MiniLang grammar
///
///   program := stmt+
///   stmt    := IDENT '=' expr ';'
///   expr    := term (('+'|'-') term)*
///   term    := factor (('*'|'/') factor)*
///   factor  := NUM | IDENT | '(' expr ')'
///
/// A sequence without EOS is Truncated.
CompileResult compile_check(const Vocab& vocab, const TokenSeq& seq);

enum class NodeKind : std::uint8_t { Program, Assign, BinOp, Num, Var };

struct AstNode {
  NodeKind kind;
  TokenId token;  // operator, literal or identifier; BOS for Program/Assign
  std::vector<std::uint32_t> children;
};

/// Flat tree; nodes[0] is the Program root.
struct Ast {
  std::vector<AstNode> nodes;

  const AstNode& root() const { return nodes.front(); }
};

class ParseError : public Error {
 public:
  explicit ParseError(CompileResult result);
  const CompileResult& result() const noexcept { return result_; }

 private:
  CompileResult result_;
};

/// Builds the AST of a compilable sequence. Parentheses are grouping only.
Ast parse(const Vocab& vocab, const TokenSeq& seq);

inline std::size_t ast_node_count(const Ast& ast) { return ast.nodes.size(); }

}  // namespace kdpg
