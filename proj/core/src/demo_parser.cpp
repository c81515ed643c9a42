#include "heloc/demo_parser.hpp"

#include <cctype>
#include <memory>
#include <string>
#include <vector>

#include "heloc/error.hpp"

namespace heloc {
namespace {

enum class Tok { ident, integer, kw_fn, kw_if, kw_else, kw_while, kw_return, punct, end };

struct Token {
  Tok kind = Tok::end;
  std::string_view lexeme;
  std::size_t offset = 0;
  int line = 1;
  int column = 1;
};

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  int line = 1;
  std::size_t line_start = 0;
  auto column = [&](std::size_t pos) { return static_cast<int>(pos - line_start) + 1; };
  while (i < src.size()) {
    const char c = src[i];
    if (c == '\n') {
      ++i;
      ++line;
      line_start = i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    Token t;
    t.offset = i;
    t.line = line;
    t.column = column(i);
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.lexeme = src.substr(i, j - i);
      if (t.lexeme == "fn")
        t.kind = Tok::kw_fn;
      else if (t.lexeme == "if")
        t.kind = Tok::kw_if;
      else if (t.lexeme == "else")
        t.kind = Tok::kw_else;
      else if (t.lexeme == "while")
        t.kind = Tok::kw_while;
      else if (t.lexeme == "return")
        t.kind = Tok::kw_return;
      else
        t.kind = Tok::ident;
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j < src.size() && (std::isalpha(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        throw SyntaxError("malformed integer literal", line, column(i));
      t.kind = Tok::integer;
      t.lexeme = src.substr(i, j - i);
      i = j;
    } else if (c == '=' && i + 1 < src.size() && src[i + 1] == '=') {
      t.kind = Tok::punct;
      t.lexeme = src.substr(i, 2);
      i += 2;
    } else if (std::string_view("(){},;=+-*<").find(c) != std::string_view::npos) {
      t.kind = Tok::punct;
      t.lexeme = src.substr(i, 1);
      ++i;
    } else {
      throw SyntaxError(std::string("unexpected character '") + c + "'", line, column(i));
    }
    out.push_back(t);
  }
  Token end;
  end.offset = src.size();
  end.line = line;
  end.column = column(src.size());
  out.push_back(end);
  return out;
}

struct ParseNode {
  std::string_view type;
  std::size_t first = 0;  // token range [first, last]
  std::size_t last = 0;
  std::vector<std::unique_ptr<ParseNode>> children;
};

class Parser {
 public:
  Parser(std::string_view src, const TreeCaps& caps) : src_(src), caps_(caps), toks_(tokenize(src)) {}

  std::unique_ptr<ParseNode> program() {
    auto unit = open(node_type::kCompilationUnit, 0);
    if (peek().kind != Tok::kw_fn) fail("expected 'fn' to start a function declaration");
    while (peek().kind == Tok::kw_fn) unit->children.push_back(function(1));
    if (peek().kind != Tok::end) fail("expected 'fn' or end of input");
    unit->last = pos_ - 1;
    return unit;
  }

  std::string_view source() const { return src_; }
  const Token& token(std::size_t i) const { return toks_[i]; }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }

  [[noreturn]] void fail(const std::string& message) const {
    const Token& t = peek();
    const std::string found = t.kind == Tok::end ? "end of input" : "'" + std::string(t.lexeme) + "'";
    throw SyntaxError(message + ", found " + found, t.line, t.column);
  }

  bool at(std::string_view punct) const {
    return peek().kind == Tok::punct && peek().lexeme == punct;
  }

  void expect(std::string_view punct) {
    if (!at(punct)) fail("expected '" + std::string(punct) + "'");
    ++pos_;
  }

  std::unique_ptr<ParseNode> open(std::string_view type, std::size_t level) {
    if (level > caps_.max_depth) throw CapError("max_depth", caps_.max_depth, level);
    if (++count_ > caps_.max_nodes) throw CapError("max_nodes", caps_.max_nodes, count_);
    auto node = std::make_unique<ParseNode>();
    node->type = type;
    node->first = pos_;
    return node;
  }

  std::unique_ptr<ParseNode> close(std::unique_ptr<ParseNode> node) {
    node->last = pos_ - 1;
    return node;
  }

  std::unique_ptr<ParseNode> function(std::size_t level) {
    auto fn = open(node_type::kFunctionDecl, level);
    ++pos_;  // fn
    if (peek().kind != Tok::ident) fail("expected function name");
    ++pos_;
    expect("(");
    if (!at(")")) {
      for (;;) {
        if (peek().kind != Tok::ident) fail("expected parameter name");
        auto param = open(node_type::kParam, level + 1);
        ++pos_;
        fn->children.push_back(close(std::move(param)));
        if (!at(",")) break;
        ++pos_;
      }
    }
    expect(")");
    fn->children.push_back(block(level + 1));
    return close(std::move(fn));
  }

  std::unique_ptr<ParseNode> block(std::size_t level) {
    if (!at("{")) fail("expected '{'");
    auto blk = open(node_type::kBlock, level);
    ++pos_;
    while (!at("}")) {
      if (peek().kind == Tok::end) fail("expected '}'");
      blk->children.push_back(statement(level + 1));
    }
    ++pos_;
    return close(std::move(blk));
  }

  std::unique_ptr<ParseNode> statement(std::size_t level) {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::kw_if: {
        auto node = open(node_type::kIf, level);
        ++pos_;
        expect("(");
        node->children.push_back(expression(level + 1));
        expect(")");
        node->children.push_back(block(level + 1));
        if (peek().kind == Tok::kw_else) {
          ++pos_;
          node->children.push_back(block(level + 1));
        }
        return close(std::move(node));
      }
      case Tok::kw_while: {
        auto node = open(node_type::kWhile, level);
        ++pos_;
        expect("(");
        node->children.push_back(expression(level + 1));
        expect(")");
        node->children.push_back(block(level + 1));
        return close(std::move(node));
      }
      case Tok::kw_return: {
        auto node = open(node_type::kReturn, level);
        ++pos_;
        if (!at(";")) node->children.push_back(expression(level + 1));
        expect(";");
        return close(std::move(node));
      }
      case Tok::ident: {
        if (peek(1).kind == Tok::punct && peek(1).lexeme == "=") {
          auto node = open(node_type::kAssign, level);
          auto target = open(node_type::kIdentifier, level + 1);
          ++pos_;
          node->children.push_back(close(std::move(target)));
          ++pos_;  // =
          node->children.push_back(expression(level + 1));
          expect(";");
          return close(std::move(node));
        }
        if (peek(1).kind == Tok::punct && peek(1).lexeme == "(") {
          auto node = call(level);
          expect(";");
          return node;
        }
        ++pos_;
        fail("expected '=' or '(' after identifier");
      }
      default:
        fail("expected a statement");
    }
  }

  std::unique_ptr<ParseNode> call(std::size_t level) {
    auto node = open(node_type::kCall, level);
    pos_ += 2;  // name (
    if (!at(")")) {
      for (;;) {
        node->children.push_back(expression(level + 1));
        if (!at(",")) break;
        ++pos_;
      }
    }
    expect(")");
    return close(std::move(node));
  }

  // Operators are left-associative and wrap already-parsed operands, so the
  // operand levels passed here are provisional; AstGraph::from_nodes checks
  // the final depth.
  std::unique_ptr<ParseNode> expression(std::size_t level) {
    auto lhs = sum(level);
    if (at("<") || at("==")) {
      ++pos_;
      auto rhs = sum(level);
      return binary(std::move(lhs), std::move(rhs), level);
    }
    return lhs;
  }

  std::unique_ptr<ParseNode> sum(std::size_t level) {
    auto lhs = product(level);
    while (at("+") || at("-")) {
      ++pos_;
      auto rhs = product(level);
      lhs = binary(std::move(lhs), std::move(rhs), level);
    }
    return lhs;
  }

  std::unique_ptr<ParseNode> product(std::size_t level) {
    auto lhs = primary(level);
    while (at("*")) {
      ++pos_;
      auto rhs = primary(level);
      lhs = binary(std::move(lhs), std::move(rhs), level);
    }
    return lhs;
  }

  std::unique_ptr<ParseNode> binary(std::unique_ptr<ParseNode> lhs, std::unique_ptr<ParseNode> rhs,
                                    std::size_t level) {
    if (level > caps_.max_depth) throw CapError("max_depth", caps_.max_depth, level);
    if (++count_ > caps_.max_nodes) throw CapError("max_nodes", caps_.max_nodes, count_);
    auto node = std::make_unique<ParseNode>();
    node->type = node_type::kBinaryOp;
    node->first = lhs->first;
    node->last = rhs->last;
    node->children.push_back(std::move(lhs));
    node->children.push_back(std::move(rhs));
    return node;
  }

  std::unique_ptr<ParseNode> primary(std::size_t level) {
    const Token& t = peek();
    if (t.kind == Tok::integer) {
      auto node = open(node_type::kIntLiteral, level);
      ++pos_;
      return close(std::move(node));
    }
    if (t.kind == Tok::ident) {
      if (peek(1).kind == Tok::punct && peek(1).lexeme == "(") return call(level);
      auto node = open(node_type::kIdentifier, level);
      ++pos_;
      return close(std::move(node));
    }
    if (at("(")) {
      if (++paren_depth_ > kMaxParenDepth) fail("parentheses nested too deeply");
      ++pos_;
      auto inner = expression(level);
      expect(")");
      --paren_depth_;
      return inner;
    }
    fail("expected an expression");
  }

  std::string_view src_;
  const TreeCaps& caps_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::size_t count_ = 0;
  std::size_t paren_depth_ = 0;
  static constexpr std::size_t kMaxParenDepth = 256;
};

}  // namespace

AstGraph parse_demo_source(std::string_view source, const TreeCaps& caps) {
  Parser parser(source, caps);
  const auto root = parser.program();

  std::vector<AstNode> nodes;
  // Preorder flattening with an explicit stack of (node, parent id).
  std::vector<std::pair<const ParseNode*, std::optional<NodeId>>> stack{{root.get(), std::nullopt}};
  while (!stack.empty()) {
    const auto [pn, parent] = stack.back();
    stack.pop_back();
    const NodeId id = nodes.size();
    const Token& first = parser.token(pn->first);
    const Token& last = parser.token(pn->last);
    AstNode node;
    node.id = id;
    node.type = std::string(pn->type);
    node.text = std::string(
        source.substr(first.offset, last.offset + last.lexeme.size() - first.offset));
    node.start_line = first.line;
    node.end_line = last.line;
    node.parent = parent;
    if (parent) nodes[*parent].children.push_back(id);
    nodes.push_back(std::move(node));
    for (auto it = pn->children.rbegin(); it != pn->children.rend(); ++it)
      stack.emplace_back(it->get(), id);
  }
  return AstGraph::from_nodes(std::move(nodes), caps);
}

}  // namespace heloc
