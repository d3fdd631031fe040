#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rulechain/logic.hpp"

namespace rulechain::trace {

enum class AnswerFormat { kYesNo, kTrueFalse };

std::string_view to_string(AnswerFormat format);

/// Sections of a serialized chain-of-logic trace, in output order. The
/// structured input (step 1) belongs to the prompt, not to model output.
enum class Section {
  kDecomposition,   // step 2
  kExpression,      // step 3
  kQuestions,       // step 4
  kRecomposition,   // step 5
  kResolution,      // step 6
  kFinalAnswer,
};

std::string_view to_string(Section section);

/// Section produced by reasoning step 2..6; nullopt for step 1.
std::optional<Section> section_for_step(int step);

struct Element {
  std::string variable;
  std::string text;
  friend bool operator==(const Element&, const Element&) = default;
};

struct QaEntry {
  std::string variable;
  std::string question;
  std::string rationale;
  bool answer = false;
  friend bool operator==(const QaEntry&, const QaEntry&) = default;
};

struct ReasoningTrace {
  std::vector<Element> elements;
  std::string expression_text;
  std::optional<logic::Expr> expression;
  std::vector<QaEntry> qa;
  std::string recomposition_text;
  std::string resolution_text;
  /// Absent when the final-answer line holds no unambiguous true/false.
  std::optional<bool> model_final;
  std::string raw;
  /// Set when the trace was recovered from header-less text.
  bool recovered = false;

  logic::Assignment assignment() const;
  /// True iff the QA answers cover every variable of the expression.
  bool complete() const;
  std::vector<std::string> missing_variables() const;

  nlohmann::json to_json() const;

  friend bool operator==(const ReasoningTrace&, const ReasoningTrace&) = default;
};

class ParseFailure : public std::runtime_error {
 public:
  ParseFailure(Section section, const std::string& detail);
  Section section() const { return section_; }

 private:
  Section section_;
};

inline const std::set<Section> kDefaultRequired = {
    Section::kDecomposition, Section::kExpression, Section::kQuestions,
    Section::kRecomposition, Section::kFinalAnswer};

struct ParseOptions {
  std::set<Section> required = kDefaultRequired;
  /// Attempt a best-effort parse when no section header is present at all.
  bool lenient = true;
};

/// Parses model output written in the trace grammar (see docs/grammar.md).
/// Parsing stops at the first `Final answer:` line.
ReasoningTrace parse_trace(std::string_view text, const ParseOptions& options = {});

/// Serializes a trace in the grammar, skipping any section in `omit`.
std::string render_trace(const ReasoningTrace& trace, const std::set<Section>& omit = {});

/// Finds the answer token in the final-answer region of `text`: the text
/// after the last "final answer", else after the last "answer", else the last
/// non-empty line (then the first one). Absent when the region holds no
/// token or tokens of both polarities.
std::optional<bool> extract_answer(std::string_view text, AnswerFormat format);

enum class ErrorClass {
  kNone,
  kParseFailure,
  kIncompleteDecomposition,
  kLogicError,
  kElementError,
  kAmbiguousAnswer,
};

std::string_view to_string(ErrorClass error);
ErrorClass error_class_from_string(std::string_view name);

struct Verdict {
  std::optional<bool> independent_answer;
  bool faithful = false;
  ErrorClass error_class = ErrorClass::kNone;
  /// Variables whose sub-answers disagree with element-level gold.
  std::vector<std::string> element_errors;
  std::optional<bool> correct;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static Verdict from_json(const nlohmann::json& j);

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

Verdict verify(const ReasoningTrace& trace);

/// As above, additionally checking sub-answers against per-element gold
/// keyed by the trace's own variables.
Verdict verify(const ReasoningTrace& trace, const logic::Assignment& element_gold);

Verdict parse_failure_verdict(const ParseFailure& failure);

}  // namespace rulechain::trace
