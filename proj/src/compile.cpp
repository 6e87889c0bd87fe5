#include "kdpg/compile.hpp"

#include <span>

namespace kdpg {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Empty: return "Empty";
    case ErrorKind::UnexpectedToken: return "UnexpectedToken";
    case ErrorKind::UnbalancedParen: return "UnbalancedParen";
    case ErrorKind::MissingSemicolon: return "MissingSemicolon";
    case ErrorKind::Truncated: return "Truncated";
  }
  return "?";
}

std::optional<ErrorKind> error_kind_from_string(std::string_view name) {
  for (ErrorKind k : kAllErrorKinds) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

namespace {

struct Failure {
  CompileResult result;
};

// Recursive descent over the body. Throws Failure on the first error; when
// `ast` is null, no tree is built.
class Parser {
 public:
  Parser(const Vocab& vocab, std::span<const TokenId> ids, Ast* ast)
      : vocab_(vocab), ids_(ids), ast_(ast) {}

  void program() {
    pos_ = 1;
    std::uint32_t root = add(NodeKind::Program, vocab_.bos());
    if (kind() == TokenKind::Eos) fail(ErrorKind::Empty);
    while (kind() != TokenKind::Eos) {
      std::uint32_t s = statement();
      link(root, s);
    }
  }

 private:
  TokenKind kind() const { return vocab_.kind(ids_[pos_]); }

  [[noreturn]] void fail(ErrorKind k) const {
    throw Failure{CompileResult::failure(k, pos_)};
  }

  std::uint32_t add(NodeKind k, TokenId token) {
    if (!ast_) return 0;
    ast_->nodes.push_back(AstNode{k, token, {}});
    return static_cast<std::uint32_t>(ast_->nodes.size() - 1);
  }

  void link(std::uint32_t parent, std::uint32_t child) {
    if (ast_) ast_->nodes[parent].children.push_back(child);
  }

  std::uint32_t statement() {
    if (kind() != TokenKind::Ident) fail(ErrorKind::UnexpectedToken);
    std::uint32_t assign = add(NodeKind::Assign, vocab_.bos());
    link(assign, add(NodeKind::Var, ids_[pos_]));
    ++pos_;
    if (kind() != TokenKind::Assign) fail(ErrorKind::UnexpectedToken);
    ++pos_;
    link(assign, expr());
    switch (kind()) {
      case TokenKind::Semi: break;
      case TokenKind::Eos:
      case TokenKind::Ident: fail(ErrorKind::MissingSemicolon);
      case TokenKind::RParen: fail(ErrorKind::UnbalancedParen);
      default: fail(ErrorKind::UnexpectedToken);
    }
    ++pos_;
    return assign;
  }

  std::uint32_t expr() {
    std::uint32_t lhs = term();
    while (kind() == TokenKind::AddOp) {
      lhs = binop(lhs, &Parser::term);
    }
    return lhs;
  }

  std::uint32_t term() {
    std::uint32_t lhs = factor();
    while (kind() == TokenKind::MulOp) {
      lhs = binop(lhs, &Parser::factor);
    }
    return lhs;
  }

  std::uint32_t binop(std::uint32_t lhs, std::uint32_t (Parser::*operand)()) {
    // Operator node is created before its right operand so node ids follow
    // pre-order for the operator itself.
    std::uint32_t op = add(NodeKind::BinOp, ids_[pos_]);
    ++pos_;
    std::uint32_t rhs = (this->*operand)();
    link(op, lhs);
    link(op, rhs);
    return op;
  }

  std::uint32_t factor() {
    switch (kind()) {
      case TokenKind::Num: return add(NodeKind::Num, ids_[pos_++]);
      case TokenKind::Ident: return add(NodeKind::Var, ids_[pos_++]);
      case TokenKind::LParen: {
        ++pos_;
        std::uint32_t inner = expr();
        if (kind() == TokenKind::RParen) {
          ++pos_;
          return inner;
        }
        if (kind() == TokenKind::Semi || kind() == TokenKind::Eos) fail(ErrorKind::UnbalancedParen);
        fail(ErrorKind::UnexpectedToken);
      }
      default: fail(ErrorKind::UnexpectedToken);
    }
  }

  const Vocab& vocab_;
  std::span<const TokenId> ids_;
  Ast* ast_;
  std::size_t pos_ = 0;
};

CompileResult run(const Vocab& vocab, const TokenSeq& seq, Ast* ast) {
  if (!ends_with_eos(vocab, seq)) return CompileResult::failure(ErrorKind::Truncated, seq.size());
  try {
    Parser(vocab, seq.ids, ast).program();
  } catch (const Failure& f) {
    return f.result;
  }
  return CompileResult::success();
}

std::string describe(const CompileResult& r) {
  if (r.ok) return "ok";
  return std::string(to_string(*r.error_kind)) + " at " + std::to_string(*r.error_position);
}

}  // namespace

CompileResult compile_check(const Vocab& vocab, const TokenSeq& seq) {
  return run(vocab, seq, nullptr);
}

ParseError::ParseError(CompileResult result) : Error("ParseError", describe(result)), result_(result) {}

Ast parse(const Vocab& vocab, const TokenSeq& seq) {
  Ast ast;
  CompileResult r = run(vocab, seq, &ast);
  if (!r.ok) throw ParseError(r);
  return ast;
}

}  // namespace kdpg
