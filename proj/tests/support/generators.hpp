#pragma once

#include <random>
#include <string>
#include <vector>

#include "rulechain/logic.hpp"
#include "rulechain/trace.hpp"

namespace rulechain::testing {

inline std::vector<std::string> letters(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('A' + i)));
  return out;
}

// Random AST with at most `depth` levels of operators over `vars`.
inline logic::Expr random_expr(std::mt19937_64& rng, const std::vector<std::string>& vars,
                               int depth) {
  std::uniform_int_distribution<int> pick(0, 9);
  auto var = [&] {
    return logic::Expr::variable(vars[std::uniform_int_distribution<std::size_t>(0, vars.size() - 1)(rng)]);
  };
  if (depth <= 1) return var();
  const int roll = pick(rng);
  if (roll < 2) return var();
  if (roll < 4) return logic::Expr::negation(random_expr(rng, vars, depth - 1));
  const int arity = std::uniform_int_distribution<int>(2, 3)(rng);
  std::vector<logic::Expr> ops;
  for (int i = 0; i < arity; ++i) ops.push_back(random_expr(rng, vars, depth - 1));
  return roll < 7 ? logic::Expr::conjunction(std::move(ops)) : logic::Expr::disjunction(std::move(ops));
}

inline logic::Assignment random_assignment(std::mt19937_64& rng, const std::set<std::string>& vars) {
  logic::Assignment a;
  for (const auto& v : vars) a[v] = (rng() & 1U) != 0;
  return a;
}

// A complete trace whose final answer matches its own logic.
inline trace::ReasoningTrace random_faithful_trace(std::mt19937_64& rng) {
  const auto vars = letters(std::uniform_int_distribution<std::size_t>(1, 6)(rng));
  logic::Expr e = random_expr(rng, vars, 4);
  trace::ReasoningTrace t;
  for (const auto& v : e.variables()) {
    t.elements.push_back({v, "condition " + v + " of the rule holds"});
  }
  t.expression_text = logic::render(e);
  t.expression = e;
  const auto a = random_assignment(rng, e.variables());
  for (const auto& [v, value] : a) {
    t.qa.push_back({v, "Is condition " + v + " met?", "The facts settle condition " + v + ".", value});
  }
  t.recomposition_text = logic::substitute(e, a);
  t.model_final = logic::evaluate(e, a);
  t.resolution_text = t.recomposition_text + " is " + (*t.model_final ? "true" : "false");
  return t;
}

}  // namespace rulechain::testing
