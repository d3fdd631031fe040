#include "rulechain/logic.hpp"

#include <algorithm>
#include <cstdint>
#include <cctype>
#include <optional>
#include <utility>

namespace rulechain::logic {

Expr::Expr(NodeKind kind, std::string name, bool value,
           std::vector<Expr> children)
    : kind_(kind),
      name_(std::move(name)),
      value_(value),
      children_(std::move(children)) {}

Expr Expr::variable(std::string name) {
  if (name.empty()) throw std::invalid_argument("empty variable name");
  return Expr(NodeKind::kVariable, std::move(name), false, {});
}

Expr Expr::literal(bool value) {
  return Expr(NodeKind::kLiteral, {}, value, {});
}

Expr Expr::negation(Expr operand) {
  std::vector<Expr> children;
  children.push_back(std::move(operand));
  return Expr(NodeKind::kNot, {}, false, std::move(children));
}

Expr Expr::conjunction(std::vector<Expr> operands) {
  if (operands.size() < 2)
    throw std::invalid_argument("conjunction needs at least two operands");
  return Expr(NodeKind::kAnd, {}, false, std::move(operands));
}

Expr Expr::disjunction(std::vector<Expr> operands) {
  if (operands.size() < 2)
    throw std::invalid_argument("disjunction needs at least two operands");
  return Expr(NodeKind::kOr, {}, false, std::move(operands));
}

bool operator==(const Expr& a, const Expr& b) {
  return a.kind_ == b.kind_ && a.name_ == b.name_ && a.value_ == b.value_ &&
         a.children_ == b.children_;
}

namespace {

void collect_variables(const Expr& e, std::set<std::string>& out) {
  if (e.kind() == NodeKind::kVariable) {
    out.insert(e.name());
    return;
  }
  for (const auto& c : e.children()) collect_variables(c, out);
}

}  // namespace

std::set<std::string> Expr::variables() const {
  std::set<std::string> out;
  collect_variables(*this, out);
  return out;
}

std::size_t Expr::depth() const {
  std::size_t d = 0;
  for (const auto& c : children_) d = std::max(d, c.depth());
  return d + 1;
}

SyntaxError::SyntaxError(const std::string& what, std::size_t token_index,
                         std::size_t offset)
    : std::runtime_error(what + " at token " + std::to_string(token_index) +
                         " (offset " + std::to_string(offset) + ")"),
      token_index_(token_index),
      offset_(offset) {}

MissingVariable::MissingVariable(std::string variable)
    : std::runtime_error("no value assigned to variable '" + variable + "'"),
      variable_(std::move(variable)) {}

TooManyVariables::TooManyVariables(std::size_t count, std::size_t limit)
    : std::runtime_error("truth table over " + std::to_string(count) +
                         " variables exceeds the limit of " +
                         std::to_string(limit)) {}

// ---------------------------------------------------------------------------
// Parsing

namespace {

enum class TokenKind { kIdent, kAnd, kOr, kNot, kTrue, kFalse, kLParen, kRParen, kEnd };

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t offset;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::vector<Token> tokenize(std::string_view text, const ParseOptions& options) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '(' || c == ')') {
      tokens.push_back({c == '(' ? TokenKind::kLParen : TokenKind::kRParen,
                        std::string(1, c), i});
      ++i;
      continue;
    }
    if (!is_ident_char(c)) {
      throw SyntaxError("unknown token '" + std::string(1, c) + "'",
                        tokens.size() + 1, i);
    }
    std::size_t j = i;
    while (j < text.size() && is_ident_char(text[j])) ++j;
    const std::string word(text.substr(i, j - i));
    const std::string key = lower(word);
    TokenKind kind;
    if (key == "and") {
      kind = TokenKind::kAnd;
    } else if (key == "or") {
      kind = TokenKind::kOr;
    } else if (key == "not") {
      kind = TokenKind::kNot;
    } else if (key == "true") {
      kind = TokenKind::kTrue;
    } else if (key == "false") {
      kind = TokenKind::kFalse;
    } else {
      const bool single_upper =
          word.size() == 1 && std::isupper(static_cast<unsigned char>(word[0]));
      const bool identifier =
          options.allow_identifiers &&
          std::isalpha(static_cast<unsigned char>(word[0]));
      if (!single_upper && !identifier) {
        throw SyntaxError("unknown token '" + word + "'", tokens.size() + 1, i);
      }
      kind = TokenKind::kIdent;
    }
    tokens.push_back({kind, word, i});
    i = j;
  }
  tokens.push_back({TokenKind::kEnd, "", text.size()});
  return tokens;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  Expr parse_all() {
    if (peek().kind == TokenKind::kEnd) fail("empty expression");
    Expr e = parse_or();
    if (peek().kind != TokenKind::kEnd) {
      fail(peek().kind == TokenKind::kRParen ? "unbalanced ')'"
                                             : "unexpected '" + peek().text + "'");
    }
    return e;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }

  [[noreturn]] void fail(const std::string& what) const {
    throw SyntaxError(what, pos_ + 1, peek().offset);
  }

  Expr parse_or() {
    std::vector<Expr> operands;
    operands.push_back(parse_and());
    while (peek().kind == TokenKind::kOr) {
      ++pos_;
      operands.push_back(parse_and());
    }
    if (operands.size() == 1) return std::move(operands.front());
    return Expr::disjunction(std::move(operands));
  }

  Expr parse_and() {
    std::vector<Expr> operands;
    operands.push_back(parse_unary());
    while (peek().kind == TokenKind::kAnd) {
      ++pos_;
      operands.push_back(parse_unary());
    }
    if (operands.size() == 1) return std::move(operands.front());
    return Expr::conjunction(std::move(operands));
  }

  Expr parse_unary() {
    if (peek().kind == TokenKind::kNot) {
      ++pos_;
      return Expr::negation(parse_unary());
    }
    return parse_atom();
  }

  Expr parse_atom() {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::kIdent:
        ++pos_;
        return Expr::variable(t.text);
      case TokenKind::kTrue:
        ++pos_;
        return Expr::literal(true);
      case TokenKind::kFalse:
        ++pos_;
        return Expr::literal(false);
      case TokenKind::kLParen: {
        ++pos_;
        if (peek().kind == TokenKind::kRParen) fail("empty parentheses");
        Expr inner = parse_or();
        if (peek().kind != TokenKind::kRParen) {
          fail(peek().kind == TokenKind::kEnd ? "unbalanced '('"
                                              : "expected ')' before '" + peek().text + "'");
        }
        ++pos_;
        return inner;
      }
      case TokenKind::kEnd:
        fail("dangling operator: expected an operand at end of input");
      case TokenKind::kRParen:
        fail("unexpected ')'");
      default:
        fail("dangling operator: expected an operand before '" + t.text + "'");
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text, const ParseOptions& options) {
  return Parser(tokenize(text, options)).parse_all();
}

// ---------------------------------------------------------------------------
// Rendering and evaluation

namespace {

void render_into(const Expr& e, const Assignment* values, std::string& out) {
  switch (e.kind()) {
    case NodeKind::kVariable:
      if (values != nullptr) {
        auto it = values->find(e.name());
        if (it == values->end()) throw MissingVariable(e.name());
        out += it->second ? "true" : "false";
      } else {
        out += e.name();
      }
      return;
    case NodeKind::kLiteral:
      out += e.literal_value() ? "true" : "false";
      return;
    case NodeKind::kNot:
      out += "(not ";
      render_into(e.children().front(), values, out);
      out += ')';
      return;
    case NodeKind::kAnd:
    case NodeKind::kOr: {
      const char* op = e.kind() == NodeKind::kAnd ? " and " : " or ";
      out += '(';
      bool first = true;
      for (const auto& c : e.children()) {
        if (!first) out += op;
        first = false;
        render_into(c, values, out);
      }
      out += ')';
      return;
    }
  }
}

bool eval_node(const Expr& e, const Assignment& a) {
  switch (e.kind()) {
    case NodeKind::kVariable:
      return a.at(e.name());
    case NodeKind::kLiteral:
      return e.literal_value();
    case NodeKind::kNot:
      return !eval_node(e.children().front(), a);
    case NodeKind::kAnd: {
      bool v = true;
      for (const auto& c : e.children()) v = eval_node(c, a) && v;
      return v;
    }
    case NodeKind::kOr: {
      bool v = false;
      for (const auto& c : e.children()) v = eval_node(c, a) || v;
      return v;
    }
  }
  return false;
}

void require_total(const Expr& expr, const Assignment& a) {
  for (const auto& v : expr.variables()) {
    if (!a.contains(v)) throw MissingVariable(v);
  }
}

}  // namespace

std::string render(const Expr& expr) {
  std::string out;
  render_into(expr, nullptr, out);
  return out;
}

bool evaluate(const Expr& expr, const Assignment& assignment) {
  require_total(expr, assignment);
  return eval_node(expr, assignment);
}

std::string substitute(const Expr& expr, const Assignment& assignment) {
  require_total(expr, assignment);
  std::string out;
  render_into(expr, &assignment, out);
  return out;
}

Expr fold(const Expr& expr, const Assignment& assignment) {
  switch (expr.kind()) {
    case NodeKind::kVariable: {
      auto it = assignment.find(expr.name());
      return it == assignment.end() ? expr : Expr::literal(it->second);
    }
    case NodeKind::kLiteral:
      return expr;
    case NodeKind::kNot: {
      Expr inner = fold(expr.children().front(), assignment);
      if (inner.kind() == NodeKind::kLiteral) return Expr::literal(!inner.literal_value());
      return Expr::negation(std::move(inner));
    }
    case NodeKind::kAnd:
    case NodeKind::kOr: {
      const bool is_and = expr.kind() == NodeKind::kAnd;
      std::vector<Expr> rest;
      for (const auto& c : expr.children()) {
        Expr f = fold(c, assignment);
        if (f.kind() == NodeKind::kLiteral) {
          // Absorbing element decides the node; identity element drops out.
          if (f.literal_value() != is_and) return Expr::literal(!is_and);
          continue;
        }
        rest.push_back(std::move(f));
      }
      if (rest.empty()) return Expr::literal(is_and);
      if (rest.size() == 1) return std::move(rest.front());
      return is_and ? Expr::conjunction(std::move(rest))
                    : Expr::disjunction(std::move(rest));
    }
  }
  return expr;
}

namespace {

// Column of truth values, one bit per row of the table.
using Column = std::vector<std::uint64_t>;

Column eval_columns(const Expr& e, const std::map<std::string, Column>& inputs,
                    std::size_t words, std::uint64_t tail_mask) {
  switch (e.kind()) {
    case NodeKind::kVariable:
      return inputs.at(e.name());
    case NodeKind::kLiteral: {
      Column c(words, e.literal_value() ? ~std::uint64_t{0} : 0);
      if (!c.empty()) c.back() &= tail_mask;
      return c;
    }
    case NodeKind::kNot: {
      Column c = eval_columns(e.children().front(), inputs, words, tail_mask);
      for (auto& w : c) w = ~w;
      if (!c.empty()) c.back() &= tail_mask;
      return c;
    }
    case NodeKind::kAnd:
    case NodeKind::kOr: {
      const bool is_and = e.kind() == NodeKind::kAnd;
      Column acc = eval_columns(e.children().front(), inputs, words, tail_mask);
      for (std::size_t i = 1; i < e.children().size(); ++i) {
        const Column c = eval_columns(e.children()[i], inputs, words, tail_mask);
        for (std::size_t w = 0; w < words; ++w) {
          acc[w] = is_and ? (acc[w] & c[w]) : (acc[w] | c[w]);
        }
      }
      return acc;
    }
  }
  return {};
}

}  // namespace

std::vector<TruthRow> truth_table(const Expr& expr) {
  const auto vars = expr.variables();
  if (vars.size() > kMaxTruthTableVariables) {
    throw TooManyVariables(vars.size(), kMaxTruthTableVariables);
  }
  const std::vector<std::string> names(vars.begin(), vars.end());
  const std::size_t n = names.size();
  const std::size_t rows = std::size_t{1} << n;
  const std::size_t words = (rows + 63) / 64;
  const std::uint64_t tail_mask =
      rows % 64 == 0 ? ~std::uint64_t{0} : ((std::uint64_t{1} << (rows % 64)) - 1);

  // Row r assigns variable i the bit (n - 1 - i) of r.
  std::map<std::string, Column> inputs;
  for (std::size_t i = 0; i < n; ++i) {
    Column c(words, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      if ((r >> (n - 1 - i)) & 1U) c[r / 64] |= std::uint64_t{1} << (r % 64);
    }
    inputs.emplace(names[i], std::move(c));
  }
  const Column result = eval_columns(expr, inputs, words, tail_mask);

  std::vector<TruthRow> table;
  table.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    Assignment a;
    for (std::size_t i = 0; i < n; ++i) a[names[i]] = ((r >> (n - 1 - i)) & 1U) != 0;
    table.push_back({std::move(a), ((result[r / 64] >> (r % 64)) & 1U) != 0});
  }
  return table;
}

}  // namespace rulechain::logic
