#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rulechain::logic {

enum class NodeKind { kVariable, kLiteral, kNot, kAnd, kOr };

/// Propositional expression over rule-element variables.
///
/// Nodes are immutable values. `and`/`or` nodes hold two or more operands,
/// `not` holds one, variables and literals hold none. Chains of the same
/// operator written without parentheses are flattened into one n-ary node;
/// an explicitly parenthesized operand is kept as its own node.
class Expr {
 public:
  static Expr variable(std::string name);
  static Expr literal(bool value);
  static Expr negation(Expr operand);
  static Expr conjunction(std::vector<Expr> operands);
  static Expr disjunction(std::vector<Expr> operands);

  NodeKind kind() const { return kind_; }
  const std::vector<Expr>& children() const { return children_; }
  const std::string& name() const { return name_; }
  bool literal_value() const { return value_; }

  std::set<std::string> variables() const;
  std::size_t depth() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  Expr(NodeKind kind, std::string name, bool value, std::vector<Expr> children);

  NodeKind kind_;
  std::string name_;
  bool value_ = false;
  std::vector<Expr> children_;
};

using Assignment = std::map<std::string, bool>;

struct ParseOptions {
  // Single uppercase letters only unless set; keywords always win.
  bool allow_identifiers = false;
};

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(const std::string& what, std::size_t token_index,
              std::size_t offset);
  /// 1-based index of the offending token (token count + 1 at end of input).
  std::size_t token_index() const { return token_index_; }
  /// Character offset into the source text.
  std::size_t offset() const { return offset_; }

 private:
  std::size_t token_index_;
  std::size_t offset_;
};

class MissingVariable : public std::runtime_error {
 public:
  explicit MissingVariable(std::string variable);
  const std::string& variable() const { return variable_; }

 private:
  std::string variable_;
};

class TooManyVariables : public std::runtime_error {
 public:
  TooManyVariables(std::size_t count, std::size_t limit);
};

/// Grammar (case-insensitive keywords, whitespace ignored):
///   expr    := and_expr { "or" and_expr }
///   and_expr:= unary { "and" unary }
///   unary   := "not" unary | atom
///   atom    := VARIABLE | "true" | "false" | "(" expr ")"
Expr parse(std::string_view text, const ParseOptions& options = {});

/// Canonical form: every non-leaf node is parenthesized.
std::string render(const Expr& expr);

bool evaluate(const Expr& expr, const Assignment& assignment);

/// Canonical rendering with each variable replaced by `true`/`false`.
std::string substitute(const Expr& expr, const Assignment& assignment);

/// Replaces variables with literals and folds the result to a single literal
/// where possible. Variables absent from `assignment` stay in place.
Expr fold(const Expr& expr, const Assignment& assignment);

struct TruthRow {
  Assignment assignment;
  bool value;
};

inline constexpr std::size_t kMaxTruthTableVariables = 16;

/// All 2^n rows. Variables are ordered lexicographically; the first variable
/// is the most significant bit, `false` before `true`.
std::vector<TruthRow> truth_table(const Expr& expr);

}  // namespace rulechain::logic
