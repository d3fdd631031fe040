#include <random>

#include "doctest.h"
#include "rulechain/logic.hpp"
#include "support/generators.hpp"

using namespace rulechain::logic;
using rulechain::testing::letters;
using rulechain::testing::random_assignment;
using rulechain::testing::random_expr;

TEST_SUITE("logic") {

TEST_CASE("parse builds the expected trees") {
  CHECK(parse("A and B") == Expr::conjunction({Expr::variable("A"), Expr::variable("B")}));
  CHECK(parse("A or (B and C)") ==
        Expr::disjunction({Expr::variable("A"),
                           Expr::conjunction({Expr::variable("B"), Expr::variable("C")})}));
  CHECK(parse("A") == Expr::variable("A"));
  CHECK(parse("  A   AND\tB ") == parse("A and B"));
  CHECK_THROWS_AS(parse("A and b"), SyntaxError);
}

TEST_CASE("precedence and flattening") {
  CHECK(render(parse("A or B and C")) == "(A or (B and C))");
  CHECK(render(parse("not A and B")) == "((not A) and B)");
  CHECK(render(parse("A and B and C")) == "(A and B and C)");
  CHECK(parse("A and B and C").children().size() == 3);
  CHECK(render(parse("A AND (B Or NOT C)")) == "(A and (B or (not C)))");
  CHECK(render(parse("not not A")) == "(not (not A))");
  CHECK(parse("true or false").kind() == NodeKind::kOr);
}

TEST_CASE("syntax errors carry the token position") {
  try {
    parse("A and or B");
    FAIL("expected a syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.token_index() == 3);
  }
  CHECK_THROWS_AS(parse(""), SyntaxError);
  CHECK_THROWS_AS(parse("(A and B"), SyntaxError);
  CHECK_THROWS_AS(parse("A and B)"), SyntaxError);
  CHECK_THROWS_AS(parse("A and"), SyntaxError);
  CHECK_THROWS_AS(parse("A $ B"), SyntaxError);
  CHECK_THROWS_AS(parse("A B"), SyntaxError);
  CHECK_THROWS_AS(parse("Diversity and B"), SyntaxError);
  CHECK(parse("Diversity and B", {.allow_identifiers = true}).variables() ==
        std::set<std::string>{"B", "Diversity"});
}

TEST_CASE("evaluate") {
  CHECK_FALSE(evaluate(parse("A and B"), {{"A", true}, {"B", false}}));
  CHECK(evaluate(parse("A or (B and C)"), {{"A", false}, {"B", true}, {"C", true}}));
  try {
    evaluate(parse("A and B"), {{"A", true}});
    FAIL("expected a missing-variable error");
  } catch (const MissingVariable& e) {
    CHECK(e.variable() == "B");
  }
  CHECK(evaluate(parse("true and not false"), {}));
}

TEST_CASE("substitute") {
  CHECK(substitute(parse("A and B"), {{"A", true}, {"B", true}}) == "(true and true)");
  CHECK(substitute(parse("A or (B and C)"), {{"A", false}, {"B", true}, {"C", false}}) ==
        "(false or (true and false))");
  CHECK(substitute(parse("not A"), {{"A", false}}) == "(not false)");
  CHECK_THROWS_AS(substitute(parse("A and B"), {{"A", true}}), MissingVariable);
}

TEST_CASE("truth tables") {
  auto count_true = [](const std::vector<TruthRow>& rows) {
    return std::count_if(rows.begin(), rows.end(), [](const TruthRow& r) { return r.value; });
  };
  const auto and_rows = truth_table(parse("A and B"));
  CHECK(and_rows.size() == 4);
  CHECK(count_true(and_rows) == 1);
  const auto pj = truth_table(parse("A or (B and C)"));
  CHECK(pj.size() == 8);
  CHECK(count_true(pj) == 5);
  const auto taut = truth_table(parse("A or not A"));
  CHECK(count_true(taut) == 2);
  // first variable is the most significant bit
  CHECK(pj[1].assignment == Assignment{{"A", false}, {"B", false}, {"C", true}});
  std::string many = "A";
  for (char c = 'B'; c <= 'Q'; ++c) many += std::string(" and ") + c;
  CHECK_THROWS_AS(truth_table(parse(many)), TooManyVariables);
}

TEST_CASE("fold") {
  CHECK(fold(parse("A and B"), {{"A", false}}) == Expr::literal(false));
  CHECK(fold(parse("A or B"), {{"A", false}}) == Expr::variable("B"));
  CHECK(fold(parse(substitute(parse("A or (B and C)"), {{"A", false}, {"B", true}, {"C", true}})), {}) ==
        Expr::literal(true));
}

TEST_CASE("properties over random expressions") {
  std::mt19937_64 rng(20240611);
  const auto vars = letters(6);
  for (int i = 0; i < 300; ++i) {
    const Expr e = random_expr(rng, vars, 4);
    CHECK(parse(render(e)) == e);
    const auto rows = truth_table(e);
    for (const auto& row : rows) {
      REQUIRE(evaluate(e, row.assignment) == row.value);
      const Expr folded = fold(parse(substitute(e, row.assignment)), {});
      REQUIRE(folded.kind() == NodeKind::kLiteral);
      REQUIRE(folded.literal_value() == row.value);
    }
  }
}

TEST_CASE("De Morgan") {
  const Expr lhs = parse("not (A and B)");
  const Expr rhs = parse("(not A) or (not B)");
  for (const auto& row : truth_table(lhs)) CHECK(evaluate(lhs, row.assignment) == evaluate(rhs, row.assignment));
}

TEST_CASE("structure queries") {
  const Expr e = parse("A or (B and not C)");
  CHECK(e.variables() == std::set<std::string>{"A", "B", "C"});
  CHECK(e.depth() == 4);
  CHECK_THROWS(Expr::conjunction({Expr::variable("A")}));
}

}
