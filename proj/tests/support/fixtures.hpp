#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "rulechain/datasets.hpp"
#include "rulechain/dj.hpp"
#include "rulechain/trace.hpp"

#ifndef RULECHAIN_SOURCE_DIR
#error "RULECHAIN_SOURCE_DIR must point at the repository root"
#endif

namespace rulechain::testing {

inline std::filesystem::path source_dir() { return RULECHAIN_SOURCE_DIR; }

inline std::vector<Sample> worked_samples() {
  datasets::LoadOptions opts;
  opts.require_gold = false;
  return datasets::load_samples(source_dir() / "data/fixtures/worked_examples.jsonl", opts);
}

inline Sample worked_sample(const std::string& id) {
  for (auto& s : worked_samples()) {
    if (s.id == id) return s;
  }
  throw std::out_of_range("no worked sample " + id);
}

// If `ablated` equals `full` with exactly one contiguous run of characters
// removed, returns that run.
inline std::optional<std::string> single_removed_section(const std::string& full,
                                                         const std::string& ablated) {
  if (ablated.size() >= full.size()) return std::nullopt;
  std::size_t p = 0;
  while (p < ablated.size() && full[p] == ablated[p]) ++p;
  const std::string tail = ablated.substr(p);
  if (full.size() - p < tail.size() || full.compare(full.size() - tail.size(), tail.size(), tail) != 0) {
    return std::nullopt;
  }
  return full.substr(p, full.size() - ablated.size());
}

// Correct chain-of-logic output for a diversity sample, in the trace grammar.
inline std::string dj_trace_text(const dj::DjVerdict& v, bool flip_final = false) {
  auto tf = [](bool b) { return b ? std::string("true") : std::string("false"); };
  const bool answer = v.complete_diversity && v.aic_satisfied;
  const std::string recomposition = "(" + tf(v.complete_diversity) + " and " + tf(v.aic_satisfied) + ")";
  return "Rule decomposition:\n"
         "A. complete diversity between plaintiffs and defendants\n"
         "B. the amount-in-controversy (AiC) is greater than $75k\n"
         "Logical expression: A and B\n"
         "Question answering:\n"
         "Question (A): Is there complete diversity between plaintiffs and defendants?\n"
         "Rationale: Compare each plaintiff's state with each defendant's state.\n"
         "Answer: " + tf(v.complete_diversity) + "\n"
         "Question (B): Is the amount-in-controversy greater than $75k?\n"
         "Rationale: Add up the claims between each plaintiff and defendant.\n"
         "Answer: " + tf(v.aic_satisfied) + "\n"
         "Recomposition: " + recomposition + "\n"
         "Resolution: " + recomposition + " is " + tf(answer) + "\n"
         "Final answer: " + tf(flip_final ? !answer : answer) + "\n";
}

// The facts line of the test block at the end of a prompt, labeled or not.
inline std::string test_facts(const std::string& prompt) {
  const auto block_start = prompt.rfind("\n\n");
  const std::string block = block_start == std::string::npos ? prompt : prompt.substr(block_start + 2);
  if (const auto at = block.find("Facts: "); at != std::string::npos) {
    return block.substr(at + 7, block.find('\n', at) - at - 7);
  }
  const auto first = block.find('\n');
  return block.substr(first + 1, block.find('\n', first + 1) - first - 1);
}

}  // namespace rulechain::testing
