// Acceptance checks, one line per criterion. With an argument, runs only
// that criterion (1-8); the exit status is nonzero if any selected check fails.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "rulechain/dj.hpp"
#include "rulechain/harness.hpp"
#include "rulechain/logic.hpp"
#include "rulechain/prompt.hpp"
#include "rulechain/trace.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"
#include "support/scripted.hpp"

namespace fs = std::filesystem;
using namespace rulechain;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fixed(double v, int digits) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v;
  return o.str();
}

harness::RunOptions quiet() {
  return {[](const std::string&) {}};
}

Outcome logic_oracle() {
  Timer timer;
  std::mt19937_64 rng(20240101);
  std::size_t mismatches = 0;
  std::size_t roundtrip_failures = 0;
  std::size_t assignments = 0;
  constexpr int kExpressions = 1000;
  for (int i = 0; i < kExpressions; ++i) {
    const auto vars = testing::letters(std::uniform_int_distribution<std::size_t>(1, 6)(rng));
    const auto e = testing::random_expr(rng, vars, 4);
    for (const auto& row : logic::truth_table(e)) {
      ++assignments;
      if (logic::evaluate(e, row.assignment) != row.value) ++mismatches;
    }
    if (logic::parse(logic::render(e)) != e) ++roundtrip_failures;
  }
  const double secs = timer.seconds();
  Outcome o;
  o.pass = mismatches == 0 && roundtrip_failures == 0 && secs < 5.0;
  o.detail = std::to_string(kExpressions) + " expressions, " + std::to_string(assignments) +
             " assignments, " + std::to_string(mismatches) + " mismatches, " +
             std::to_string(roundtrip_failures) + " round-trip failures, " + fixed(secs, 2) + " s";
  return o;
}

Outcome table_arithmetic() {
  Timer timer;
  std::ifstream in(testing::source_dir() / "data/fixtures/model_tables.json");
  const auto tables = nlohmann::json::parse(in);
  const auto rules = tables.at("rules").get<std::vector<std::string>>();
  std::size_t cells = 0;
  std::vector<std::string> misses;
  for (const auto& [model, methods] : tables.at("models").items()) {
    for (const auto& [method, row] : methods.items()) {
      std::map<std::string, double> per_rule;
      const auto values = row.at("per_rule").get<std::vector<double>>();
      for (std::size_t i = 0; i < rules.size(); ++i) per_rule[rules[i]] = values.at(i) / 100.0;
      const double got = harness::macro_average(per_rule) * 100.0;
      const double want = row.at("macro_average").get<double>();
      ++cells;
      if (std::abs(got - want) > 0.05 + 1e-9) {
        misses.push_back(model + "/" + method + " mean " + fixed(got, 3) + " vs " + fixed(want, 1));
      }
    }
  }
  const double secs = timer.seconds();
  Outcome o;
  o.pass = misses.empty() && cells == 28 && secs < 1.0;
  o.detail = std::to_string(cells - misses.size()) + "/" + std::to_string(cells) + " cells within 0.05";
  for (const auto& m : misses) o.detail += "; " + m;
  return o;
}

Outcome dj_fixtures() {
  auto verdict = [](const std::string& id) {
    return dj::oracle(dj::parse_facts(testing::worked_sample(id).facts));
  };
  const auto v1 = verdict("dj1-worked");
  const auto v3 = verdict("dj3-worked");
  const auto v6 = verdict("dj6-worked");
  std::vector<std::string> problems;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  expect(!v1.complete_diversity && !v1.aic_satisfied && !v1.answer, "DJ1 verdict");
  expect(v3.complete_diversity && !v3.aic_satisfied && !v3.answer, "DJ3 verdict");
  expect(v6.complete_diversity && v6.aic_satisfied && v6.answer, "DJ6 verdict");
  std::set<std::int64_t> t3;
  for (const auto& [pair, total] : v3.per_pair_totals) t3.insert(total);
  std::set<std::int64_t> t6;
  for (const auto& [pair, total] : v6.per_pair_totals) t6.insert(total);
  expect(t3 == std::set<std::int64_t>{44'000}, "DJ3 totals");
  expect(t6 == std::set<std::int64_t>{113'000, 102'000}, "DJ6 totals");
  dj::FactPattern edge{{{"P", "Ohio"}}, {{"D", "Utah"}}, {{{"P"}, "D", "negligence", 75'000}}};
  expect(!dj::oracle(edge).aic_satisfied, "$75,000 boundary");

  Outcome o;
  o.pass = problems.empty();
  o.detail = o.pass ? "DJ1 (F,F->F), DJ3 (T,F->F) totals {44000}, DJ6 (T,T->T) totals {102000,113000}, "
                      "boundary 75000 -> AiC false"
                    : "failed:";
  for (const auto& p : problems) o.detail += " " + p;
  return o;
}

Outcome generator_roundtrip() {
  std::size_t samples = 0;
  std::size_t mismatched = 0;
  bool deterministic = true;
  double worst_share = 1.0;
  for (int level = 1; level <= 6; ++level) {
    const auto a = dj::generate(level, 100, 2024);
    const auto b = dj::generate(level, 100, 2024);
    std::size_t positives = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ++samples;
      if (dj::parse_facts(a[i].sample.facts) != a[i].facts) ++mismatched;
      if (a[i].sample != b[i].sample || a[i].facts != b[i].facts) deterministic = false;
      if (a[i].verdict.answer) ++positives;
    }
    const double share = static_cast<double>(std::min(positives, a.size() - positives)) / a.size();
    worst_share = std::min(worst_share, share);
  }
  Outcome o;
  o.pass = samples == 600 && mismatched == 0 && deterministic && worst_share >= 0.4;
  o.detail = std::to_string(samples) + " samples, " + std::to_string(mismatched) +
             " re-parse mismatches, minority class share >= " + fixed(worst_share, 2) +
             (deterministic ? ", deterministic" : ", NOT deterministic");
  return o;
}

Outcome verifier_detection() {
  Timer timer;
  std::mt19937_64 rng(77);
  constexpr int kTraces = 500;
  int clean_none = 0;
  int flipped_logic = 0;
  int deleted_incomplete = 0;
  for (int i = 0; i < kTraces; ++i) {
    const auto t = testing::random_faithful_trace(rng);
    if (trace::verify(t).error_class == trace::ErrorClass::kNone) ++clean_none;

    auto flipped = t;
    flipped.model_final = !*t.model_final;
    if (trace::verify(flipped).error_class == trace::ErrorClass::kLogicError) ++flipped_logic;

    auto deleted = t;
    deleted.qa.erase(deleted.qa.begin() +
                     std::uniform_int_distribution<std::size_t>(0, t.qa.size() - 1)(rng));
    if (trace::verify(deleted).error_class == trace::ErrorClass::kIncompleteDecomposition) {
      ++deleted_incomplete;
    }
  }
  const double secs = timer.seconds();
  Outcome o;
  o.pass = clean_none == kTraces && flipped_logic == kTraces && deleted_incomplete == kTraces && secs < 5.0;
  o.detail = "None " + std::to_string(clean_none) + "/500, LogicError " + std::to_string(flipped_logic) +
             "/500, IncompleteDecomposition " + std::to_string(deleted_incomplete) + "/500, " +
             fixed(secs, 2) + " s";
  return o;
}

Outcome hermetic_end_to_end() {
  const fs::path cache = fs::temp_directory_path() / "rulechain_acceptance_cache";
  fs::remove_all(cache);
  harness::RunConfig cfg;
  cfg.method = prompt::MethodConfig::make(prompt::Method::kChainOfLogic);
  cfg.tasks.push_back(harness::TaskSpec::parse("dj:1:50:6"));
  cfg.cache_dir = cache;

  auto good = testing::dj_trace_backend();
  const auto first = harness::run_eval(cfg, *good, quiet());
  const auto second = harness::run_eval(cfg, *good, quiet());

  std::set<std::string> flip;
  const auto samples = harness::load_task(cfg.tasks.front());
  for (std::size_t i = 0; i < 5; ++i) flip.insert(samples[i].sample.facts);
  auto injected_backend = testing::dj_trace_backend(flip);
  auto uncached = cfg;
  uncached.cache_dir.reset();
  const auto injected = harness::run_eval(uncached, *injected_backend, quiet());

  const double acc1 = first.macro_average.value_or(-1);
  const std::size_t calls2 = second.run_info.at("backend_calls").get<std::size_t>();
  const double acc3 = injected.macro_average.value_or(-1);
  const bool hist_ok =
      injected.error_histogram == std::map<std::string, std::size_t>{{"LogicError", 5}};
  Outcome o;
  o.pass = std::abs(acc1 - 1.0) < 1e-12 && calls2 == 0 && std::abs(acc3 - 0.9) < 1e-12 && hist_ok &&
           first.records.size() == 50;
  o.detail = "accuracy " + fixed(acc1, 3) + ", cached rerun backend calls " + std::to_string(calls2) +
             ", with 5 injected errors " + fixed(acc3, 3) + " histogram " +
             nlohmann::json(injected.error_histogram).dump();
  return o;
}

Outcome ablation_structure() {
  const auto& demo = prompt::DemoLibrary::builtin().get("contract_formation");
  const Sample test = testing::worked_sample("dj3-worked");
  const auto full = prompt::build_prompt(prompt::MethodConfig::make(prompt::Method::kChainOfLogic), demo, test);
  std::vector<std::string> problems;
  for (int k = 1; k <= 6; ++k) {
    const auto ablated =
        prompt::build_prompt(prompt::MethodConfig::make(prompt::Method::kChainOfLogic, k), demo, test);
    if (k == 1) {
      // Structured input is the field labels; removing it takes each label
      // out of both input blocks and leaves everything else in place.
      std::string stripped;
      std::istringstream lines(full);
      std::string line;
      int removed = 0;
      while (std::getline(lines, line)) {
        for (const char* label : {"Rule: ", "Facts: ", "Issue: "}) {
          if (line.rfind(label, 0) == 0) {
            line.erase(0, std::string(label).size());
            ++removed;
            break;
          }
        }
        stripped += line + "\n";
      }
      if (!full.empty() && full.back() != '\n') stripped.pop_back();
      if (stripped != ablated || removed != 6) problems.push_back("step 1 label removal");
      continue;
    }
    if (!testing::single_removed_section(full, ablated)) {
      problems.push_back("step " + std::to_string(k) + " not one contiguous removal");
    }
  }

  harness::RunConfig cfg;
  cfg.method = prompt::MethodConfig::make(prompt::Method::kChainOfLogic);
  cfg.tasks.push_back(harness::TaskSpec::parse("dj:2:10:5"));
  backend::ScriptedBackend same;
  const std::string text = testing::dj_trace_text(dj::DjVerdict{false, true, false, {}});
  same.set_fallback([&](const backend::GenerationRequest&) -> std::optional<std::string> { return text; });
  std::string deltas;
  for (int k = 1; k <= 6; ++k) {
    const auto r = harness::run_ablation(cfg, k, same, quiet());
    if (r.delta != 0.0) problems.push_back("step " + std::to_string(k) + " delta " + fixed(r.delta, 1));
    deltas += (k > 1 ? "," : "") + fixed(r.delta, 1);
  }
  Outcome o;
  o.pass = problems.empty();
  o.detail = "steps 2-6 single contiguous removals, step 1 removes the 6 input labels; deltas [" + deltas + "]";
  for (const auto& p : problems) o.detail += "; " + p;
  return o;
}

Outcome demonstration_integrity() {
  std::size_t checked = 0;
  std::vector<std::string> problems;
  for (const auto& demo : prompt::DemoLibrary::builtin().all()) {
    if (!demo.solutions.contains(prompt::Method::kChainOfLogic)) continue;
    ++checked;
    try {
      const auto t = trace::parse_trace(demo.solution(prompt::Method::kChainOfLogic));
      const auto v = trace::verify(t);
      if (!v.faithful || v.error_class != trace::ErrorClass::kNone) {
        problems.push_back(demo.id + " verdict " + std::string(trace::to_string(v.error_class)));
      }
      if (t.model_final != demo.sample.gold) problems.push_back(demo.id + " disagrees with gold");
    } catch (const trace::ParseFailure& e) {
      problems.push_back(demo.id + " does not parse: " + e.what());
    }
  }
  Outcome o;
  o.pass = problems.empty() && checked > 0;
  o.detail = std::to_string(checked) + " demonstrations parse, verify faithful and match gold";
  if (!problems.empty()) o.detail = "failed:";
  for (const auto& p : problems) o.detail += " " + p;
  return o;
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"logic engine agrees with truth tables", logic_oracle},
      {"macro averages reproduce the reference table", table_arithmetic},
      {"diversity oracle on worked fact patterns", dj_fixtures},
      {"generator round trip, balance, determinism", generator_roundtrip},
      {"verifier detection suite", verifier_detection},
      {"hermetic end-to-end run", hermetic_end_to_end},
      {"ablation prompt structure and zero delta", ablation_structure},
      {"demonstration integrity", demonstration_integrity},
  };
  std::vector<int> selected;
  if (argc > 1) {
    const int k = std::atoi(argv[1]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::cerr << "usage: " << argv[0] << " [1-" << criteria.size() << "]\n";
      return 2;
    }
    selected.push_back(k);
  } else {
    for (int k = 1; k <= static_cast<int>(criteria.size()); ++k) selected.push_back(k);
  }

  int failures = 0;
  for (int k : selected) {
    Outcome o;
    try {
      o = criteria[k - 1].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << criteria[k - 1].name << " ("
              << o.detail << ")\n";
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
