// Thin bindings: structured values cross the boundary as JSON text and the
// Python package turns them into dicts and lists.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rulechain/datasets.hpp"
#include "rulechain/dj.hpp"
#include "rulechain/harness.hpp"
#include "rulechain/logic.hpp"
#include "rulechain/prompt.hpp"
#include "rulechain/trace.hpp"

namespace py = pybind11;
using namespace rulechain;
using nlohmann::json;

namespace {

const logic::ParseOptions kLoose{.allow_identifiers = true};

logic::Assignment to_assignment(const std::map<std::string, bool>& values) {
  return {values.begin(), values.end()};
}

Sample sample_from_json(const json& j) {
  Sample s;
  s.id = j.value("id", "0");
  s.rule_text = j.at("rule").get<std::string>();
  s.facts = j.at("facts").get<std::string>();
  s.issue = j.at("issue").get<std::string>();
  if (j.contains("answer") && !j.at("answer").is_null()) {
    const auto& a = j.at("answer");
    s.gold = a.is_boolean() ? a.get<bool>() : datasets::parse_label(a.get<std::string>());
  }
  s.family = RuleFamily::parse(j.value("rule_family", "Other:python"));
  s.validate();
  return s;
}

std::string build_prompt(const std::string& method, const std::string& sample_json,
                         const std::string& demo_id, std::optional<int> ablate) {
  const auto cfg = prompt::MethodConfig::make(prompt::method_from_string(method), ablate);
  const Sample test = sample_from_json(json::parse(sample_json));
  std::optional<prompt::Demonstration> demo;
  if (!prompt::is_zero_shot(cfg.method)) {
    const auto& lib = prompt::DemoLibrary::builtin();
    if (demo_id != "auto") {
      demo = lib.get(demo_id);
    } else {
      for (const auto& d : lib.all()) {
        if (d.solutions.contains(cfg.method) && !d.sample.family.same_rule(test.family)) {
          demo = d;
          break;
        }
      }
      if (!demo) throw ConfigError("no demonstration of a different rule is available");
    }
  }
  return prompt::build_prompt(cfg, demo, test);
}

std::string verify_trace(const std::string& text) {
  try {
    const auto t = trace::parse_trace(text);
    return json{{"verdict", trace::verify(t).to_json()}, {"trace", t.to_json()}}.dump();
  } catch (const trace::ParseFailure& e) {
    return json{{"verdict", trace::parse_failure_verdict(e).to_json()}, {"trace", nullptr}}.dump();
  }
}

std::string generate_dj(int level, std::size_t n, std::uint64_t seed, const std::string& policy) {
  const auto p = dj::aic_policy_from_string(policy);
  json out = json::array();
  for (const auto& g : dj::generate(level, n, seed, p)) {
    auto rec = datasets::to_record(g.sample);
    rec["fact_pattern"] = g.facts.to_json();
    rec["verdict"] = g.verdict.to_json();
    out.push_back(std::move(rec));
  }
  return out.dump();
}

std::string run_eval(const std::string& config_json, const std::string& base_dir) {
  const auto cfg = harness::RunConfig::from_json(json::parse(config_json), base_dir);
  return harness::run_eval(cfg, {[](const std::string&) {}}).to_json().dump();
}

}  // namespace

PYBIND11_MODULE(_rulechain, m) {
  m.doc() = "Rule-reasoning harness core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<logic::SyntaxError>(m, "ExpressionSyntaxError", PyExc_ValueError);
  py::register_exception<logic::MissingVariable>(m, "MissingVariable", PyExc_KeyError);
  py::register_exception<trace::ParseFailure>(m, "TraceParseError", PyExc_ValueError);

  m.def("normalize_expression",
        [](const std::string& text) { return logic::render(logic::parse(text, kLoose)); });
  m.def("expression_variables", [](const std::string& text) {
    const auto vars = logic::parse(text, kLoose).variables();
    return std::vector<std::string>(vars.begin(), vars.end());
  });
  m.def("evaluate", [](const std::string& text, const std::map<std::string, bool>& values) {
    return logic::evaluate(logic::parse(text, kLoose), to_assignment(values));
  });
  m.def("substitute", [](const std::string& text, const std::map<std::string, bool>& values) {
    return logic::substitute(logic::parse(text, kLoose), to_assignment(values));
  });
  m.def("truth_table", [](const std::string& text) {
    std::vector<std::pair<std::map<std::string, bool>, bool>> rows;
    for (const auto& r : logic::truth_table(logic::parse(text, kLoose))) {
      rows.emplace_back(std::map<std::string, bool>(r.assignment.begin(), r.assignment.end()), r.value);
    }
    return rows;
  });

  m.def("parse_trace_json", [](const std::string& text) { return trace::parse_trace(text).to_json().dump(); });
  m.def("verify_trace_json", &verify_trace);
  m.def("extract_answer", [](const std::string& text, const std::string& format) {
    return trace::extract_answer(text, format == "yes_no" ? trace::AnswerFormat::kYesNo
                                                          : trace::AnswerFormat::kTrueFalse);
  });

  m.def("build_prompt_json", &build_prompt, py::arg("method"), py::arg("sample_json"),
        py::arg("demo") = "auto", py::arg("ablate") = py::none());

  m.def("dj_oracle_json", [](const std::string& facts, const std::string& policy) {
    return dj::oracle(dj::parse_facts(facts), dj::aic_policy_from_string(policy)).to_json().dump();
  });
  m.def("generate_dj_json", &generate_dj);

  m.def("macro_average", [](const std::map<std::string, double>& per_rule) {
    return harness::macro_average(per_rule);
  });
  m.def("run_eval_json", &run_eval);
}
