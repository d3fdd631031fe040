#include <random>

#include "doctest.h"
#include "rulechain/prompt.hpp"
#include "rulechain/trace.hpp"
#include "support/generators.hpp"

using namespace rulechain;
using namespace rulechain::trace;

namespace {

const char* kWellFormed =
    "Rule decomposition:\n"
    "A. complete diversity between plaintiffs and defendants\n"
    "B. the amount-in-controversy is greater than $75k\n"
    "Logical expression: A and B\n"
    "Question answering:\n"
    "Question (A): Is there complete diversity?\n"
    "Rationale: The parties are from different states.\n"
    "Answer: true\n"
    "Question (B): Is the amount greater than $75k?\n"
    "Rationale: The claim is for $90,000.\n"
    "Answer: true\n"
    "Recomposition: (true and true)\n"
    "Final answer: true\n";

ReasoningTrace strip_raw(ReasoningTrace t) {
  t.raw.clear();
  return t;
}

}  // namespace

TEST_SUITE("trace") {

TEST_CASE("well-formed trace parses completely") {
  const auto t = parse_trace(kWellFormed);
  REQUIRE(t.elements.size() == 2);
  CHECK(t.elements[0] == Element{"A", "complete diversity between plaintiffs and defendants"});
  CHECK(t.expression_text == "A and B");
  REQUIRE(t.expression);
  CHECK(t.qa.size() == 2);
  CHECK(t.qa[1].answer);
  CHECK(t.recomposition_text == "(true and true)");
  CHECK(t.model_final == true);
  CHECK(t.complete());
  CHECK(t.raw == kWellFormed);
}

TEST_CASE("missing recomposition is a parse failure naming the section") {
  std::string text = kWellFormed;
  text.erase(text.find("Recomposition:"), std::string("Recomposition: (true and true)\n").size());
  try {
    parse_trace(text);
    FAIL("expected ParseFailure");
  } catch (const ParseFailure& e) {
    CHECK(e.section() == Section::kRecomposition);
  }
}

TEST_CASE("partial question answering parses but is incomplete") {
  const std::string text =
      "Rule decomposition:\nA. domiciled\nB. contacts\nC. nexus\n"
      "Logical expression: A or (B and C)\n"
      "Question answering:\nQuestion (A): Domiciled?\nAnswer: false\n"
      "Question (B): Contacts?\nAnswer: true\n"
      "Recomposition: (false or (true and C))\nFinal answer: true\n";
  const auto t = parse_trace(text);
  CHECK_FALSE(t.complete());
  CHECK(t.missing_variables() == std::vector<std::string>{"C"});
  CHECK(verify(t).error_class == ErrorClass::kIncompleteDecomposition);
}

TEST_CASE("structural parse errors") {
  CHECK_THROWS_AS(parse_trace("Rule decomposition:\nA. x\nA. y\nLogical expression: A\n"
                              "Question answering:\nQuestion (A): q\nAnswer: true\n"
                              "Recomposition: (true)\nFinal answer: true\n"),
                  ParseFailure);
  CHECK_THROWS_AS(parse_trace("Rule decomposition:\nA. x\nLogical expression: A and B\n"
                              "Question answering:\nQuestion (A): q\nAnswer: true\n"
                              "Recomposition: x\nFinal answer: true\n"),
                  ParseFailure);
  try {
    parse_trace("Rule decomposition:\nA. x\nLogical expression: A and and\n"
                "Question answering:\nQuestion (A): q\nAnswer: true\n"
                "Recomposition: x\nFinal answer: true\n");
    FAIL("expected ParseFailure");
  } catch (const ParseFailure& e) {
    CHECK(e.section() == Section::kExpression);
  }
  CHECK_THROWS_AS(parse_trace("no structure at all"), ParseFailure);
}

TEST_CASE("markdown and step prefixes are tolerated") {
  std::string text =
      "**Step 2: Rule decomposition:**\n- A. diversity\n- B. amount\n"
      "Step 3: Logical expression: `A and B`\n"
      "Step 4: Question answering:\nQuestion (A): d?\nAnswer: **false**\n"
      "Question (B): a?\nAnswer: true\n"
      "Step 5: Recomposition: (false and true)\n"
      "Step 6: Resolution: false\n**Final answer: false**\n";
  const auto t = parse_trace(text);
  CHECK(t.elements.size() == 2);
  CHECK(t.model_final == false);
  CHECK(verify(t).error_class == ErrorClass::kNone);
}

TEST_CASE("extract_answer") {
  CHECK(extract_answer("...Final answer: true", AnswerFormat::kTrueFalse) == true);
  CHECK(extract_answer("The answer is no.", AnswerFormat::kYesNo) == false);
  CHECK_FALSE(extract_answer("It could be either.", AnswerFormat::kYesNo).has_value());
  CHECK_FALSE(extract_answer("Final answer: true or false", AnswerFormat::kTrueFalse).has_value());
  CHECK(extract_answer("Yes", AnswerFormat::kYesNo) == true);
  CHECK(extract_answer("Earlier I said no.\nFinal answer: yes", AnswerFormat::kYesNo) == true);
  CHECK_FALSE(extract_answer("", AnswerFormat::kTrueFalse).has_value());
}

TEST_CASE("verify classifications") {
  auto make = [](const std::string& expr, logic::Assignment a, std::optional<bool> final) {
    ReasoningTrace t;
    t.expression_text = expr;
    t.expression = logic::parse(expr);
    for (const auto& v : t.expression->variables()) t.elements.push_back({v, "element " + v});
    for (const auto& [v, val] : a) t.qa.push_back({v, "q", "", val});
    t.model_final = final;
    return t;
  };
  const auto logic_error = verify(make("A or (B and C)", {{"A", true}, {"B", true}, {"C", false}}, false));
  CHECK(logic_error.error_class == ErrorClass::kLogicError);
  CHECK(logic_error.independent_answer == true);
  CHECK_FALSE(logic_error.faithful);

  const auto ok = verify(make("A and B", {{"A", true}, {"B", true}}, true));
  CHECK(ok.error_class == ErrorClass::kNone);
  CHECK(ok.faithful);

  CHECK(verify(make("A or (B and C)", {{"A", false}, {"B", true}}, true)).error_class ==
        ErrorClass::kIncompleteDecomposition);
  CHECK(verify(make("A and B", {{"A", true}, {"B", true}}, std::nullopt)).error_class ==
        ErrorClass::kAmbiguousAnswer);

  const auto elem = verify(make("A and B", {{"A", true}, {"B", true}}, true), {{"A", false}});
  CHECK(elem.error_class == ErrorClass::kElementError);
  CHECK(elem.element_errors == std::vector<std::string>{"A"});
}

TEST_CASE("recomposition mismatch is a warning only") {
  std::string text = kWellFormed;
  text.replace(text.find("(true and true)"), 15, "(true and false)");
  const auto v = verify(parse_trace(text));
  CHECK(v.error_class == ErrorClass::kNone);
  CHECK(v.warnings.size() == 1);
}

TEST_CASE("verdict json round trip") {
  const auto v = verify(parse_trace(kWellFormed), {{"A", false}});
  CHECK(Verdict::from_json(v.to_json()) == v);
  CHECK(error_class_from_string("LogicError") == ErrorClass::kLogicError);
}

TEST_CASE("render and parse are inverse on generated traces") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 200; ++i) {
    auto t = testing::random_faithful_trace(rng);
    const std::string text = render_trace(t);
    CHECK(strip_raw(parse_trace(text)) == t);
    CHECK(verify(t).error_class == ErrorClass::kNone);
    CHECK(verify(t).independent_answer ==
          [&] {
            for (const auto& row : logic::truth_table(*t.expression)) {
              if (row.assignment == t.assignment()) return row.value;
            }
            return !*t.model_final;
          }());
  }
}

TEST_CASE("render and parse are inverse on the demonstration library") {
  for (const auto& d : prompt::DemoLibrary::builtin().all()) {
    const auto t = parse_trace(d.solution(prompt::Method::kChainOfLogic));
    CHECK(strip_raw(parse_trace(render_trace(t))) == strip_raw(t));
  }
}

TEST_CASE("lenient recovery of header-less output") {
  const auto t = parse_trace(
      "The rule is A and B where A is diversity and B is the amount.\n"
      "A and B\nA is true. B is false.\nSo the result is false.");
  CHECK(t.recovered);
  CHECK(t.model_final == false);
  ParseOptions strict;
  strict.lenient = false;
  CHECK_THROWS_AS(parse_trace("A and B\nso false", strict), ParseFailure);
}

}
