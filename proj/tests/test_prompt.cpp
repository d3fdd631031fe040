#include "doctest.h"
#include "rulechain/prompt.hpp"
#include "support/fixtures.hpp"

using namespace rulechain;
using namespace rulechain::prompt;
using rulechain::testing::worked_sample;
using rulechain::testing::single_removed_section;

namespace {

const Demonstration& dj_demo() { return DemoLibrary::builtin().get("dj1_james_lucas"); }

}  // namespace

TEST_SUITE("prompt") {

TEST_CASE("structured input") {
  const Sample dj1 = worked_sample("dj1-worked");
  const std::string block = format_structured_input(dj1);
  CHECK(block.starts_with(
      "Rule: Diversity jurisdiction exists when there is (1) complete diversity"));
  CHECK(block.find("\nFacts: James is from Arizona.") != std::string::npos);
  CHECK(block.ends_with("\nIssue: Is there diversity jurisdiction?"));

  Sample multi = dj1;
  multi.facts = "First paragraph.\n\nSecond paragraph.";
  const std::string mb = format_structured_input(multi);
  CHECK(mb.find("Facts: First paragraph.\n\nSecond paragraph.\nIssue:") != std::string::npos);

  CHECK(format_structured_input(dj1, false) == dj1.rule_text + "\n" + dj1.facts + "\n" + dj1.issue);
}

TEST_CASE("placeholders are expanded once") {
  Sample s{"x", "rule with {facts} inside", "the facts", "issue?", std::nullopt, RuleFamily::other("t")};
  CHECK(expand("{rule}|{facts}|{unknown}", s) == "rule with {facts} inside|the facts|{unknown}");
}

TEST_CASE("zero-shot prompts") {
  const Sample pj = worked_sample("pj-worked");
  const auto lr = build_prompt(MethodConfig::make(Method::kZeroShotLR), std::nullopt, pj);
  CHECK(lr.find("\nApproach: Issue, rule, application, conclusion\n") != std::string::npos);
  CHECK(lr.ends_with("Answer:"));
  const auto ls = build_prompt(MethodConfig::make(Method::kZeroShotLS), std::nullopt, pj);
  CHECK(ls.starts_with("Legal syllogism"));
  CHECK_THROWS_AS(build_prompt(MethodConfig::make(Method::kZeroShot), dj_demo(), pj), ConfigError);
}

TEST_CASE("one-shot prompts need a demonstration of a different rule") {
  const Sample pj = worked_sample("pj-worked");
  const Sample dj3 = worked_sample("dj3-worked");
  CHECK_THROWS_AS(build_prompt(MethodConfig::make(Method::kStandard), std::nullopt, pj), ConfigError);
  CHECK_THROWS_AS(build_prompt(MethodConfig::make(Method::kChainOfLogic), dj_demo(), dj3), ConfigError);
  CHECK_NOTHROW(build_prompt(MethodConfig::make(Method::kChainOfLogic),
                             DemoLibrary::builtin().get("contract_formation"), dj3));
}

TEST_CASE("chain of logic prompt layout") {
  const Sample pj = worked_sample("pj-worked");
  const auto p = build_prompt(MethodConfig::make(Method::kChainOfLogic), dj_demo(), pj);
  CHECK(p.starts_with("Rule: Diversity jurisdiction"));
  CHECK(p.find("Logical expression: A and B") != std::string::npos);
  CHECK(p.ends_with(format_structured_input(pj) + "\nAnswer:"));
  CHECK(p == build_prompt(MethodConfig::make(Method::kChainOfLogic), dj_demo(), pj));
}

TEST_CASE("baseline prompts embed the method's worked solution") {
  const Sample pj = worked_sample("pj-worked");
  for (Method m : {Method::kStandard, Method::kChainOfThought, Method::kSelfAsk}) {
    const auto p = build_prompt(MethodConfig::make(m), dj_demo(), pj);
    CHECK(p.find(dj_demo().solution(m)) != std::string::npos);
  }
}

TEST_CASE("each ablation removes one contiguous section") {
  const Sample pj = worked_sample("pj-worked");
  const auto full = build_prompt(MethodConfig::make(Method::kChainOfLogic), dj_demo(), pj);
  // The removed run is reported after the longest common prefix, so the
  // recomposition marker loses the "Re" it shares with "Resolution:".
  const char* markers[] = {"", "", "Rule decomposition:", "Logical expression:", "Question answering:",
                           "composition:", "Resolution:"};
  for (int k = 2; k <= 6; ++k) {
    CAPTURE(k);
    const auto ablated = build_prompt(MethodConfig::make(Method::kChainOfLogic, k), dj_demo(), pj);
    const auto removed = single_removed_section(full, ablated);
    REQUIRE(removed);
    CHECK(removed->find(markers[k]) != std::string::npos);
  }
  const auto unstructured = build_prompt(MethodConfig::make(Method::kChainOfLogic, 1), dj_demo(), pj);
  CHECK(unstructured.find("Rule: ") == std::string::npos);
  CHECK(unstructured.find("Logical expression: A and B") != std::string::npos);
}

TEST_CASE("method config validation") {
  CHECK_THROWS_AS(MethodConfig::make(Method::kStandard, 3), ConfigError);
  CHECK_THROWS_AS(MethodConfig::make(Method::kChainOfLogic, 7), ConfigError);
  CHECK(MethodConfig::make(Method::kChainOfLogic).answer_format == trace::AnswerFormat::kTrueFalse);
  CHECK(MethodConfig::make(Method::kSelfAsk).answer_format == trace::AnswerFormat::kYesNo);
  MethodConfig bad = MethodConfig::make(Method::kChainOfLogic);
  bad.answer_format = trace::AnswerFormat::kYesNo;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  for (Method m : kAllMethods) CHECK(method_from_string(to_string(m)) == m);
}

TEST_CASE("follow-up prompts") {
  CHECK(build_followup() == "Therefore the answer (true or false) is");
  CHECK(build_followup(trace::AnswerFormat::kYesNo) == "Therefore the answer (yes or no) is");
  CHECK(build_followup() == build_followup());
}

TEST_CASE("shipped demonstrations are faithful and match gold") {
  REQUIRE(DemoLibrary::builtin().all().size() >= 2);
  for (const auto& d : DemoLibrary::builtin().all()) {
    CAPTURE(d.id);
    const auto t = trace::parse_trace(d.solution(Method::kChainOfLogic));
    const auto v = trace::verify(t);
    CHECK(v.error_class == trace::ErrorClass::kNone);
    CHECK(v.faithful);
    CHECK(t.model_final == d.sample.gold);
    for (Method m : {Method::kStandard, Method::kChainOfThought, Method::kSelfAsk}) {
      CHECK(trace::extract_answer(d.solution(m), trace::AnswerFormat::kYesNo) == d.sample.gold);
    }
  }
}

TEST_CASE("demonstration json round trip") {
  const auto& d = dj_demo();
  const auto back = Demonstration::from_json(d.to_json());
  CHECK(back.sample == d.sample);
  CHECK(back.solutions == d.solutions);
}

}
