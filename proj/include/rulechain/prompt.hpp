#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rulechain/sample.hpp"
#include "rulechain/trace.hpp"

namespace rulechain::prompt {

enum class Method {
  kZeroShot,
  kZeroShotLR,
  kZeroShotLS,
  kStandard,
  kChainOfThought,
  kSelfAsk,
  kChainOfLogic,
};

inline constexpr Method kAllMethods[] = {
    Method::kZeroShot,       Method::kZeroShotLR, Method::kZeroShotLS,  Method::kStandard,
    Method::kChainOfThought, Method::kSelfAsk,    Method::kChainOfLogic};

/// Identifier used in configs and file names, e.g. "chain_of_logic".
std::string_view to_string(Method method);
/// Human-readable row label, e.g. "Chain of Logic".
std::string_view display_name(Method method);
Method method_from_string(std::string_view name);

bool is_zero_shot(Method method);

struct MethodConfig {
  Method method = Method::kChainOfLogic;
  /// Reasoning step (1-6) removed from a chain-of-logic prompt.
  std::optional<int> ablate;
  trace::AnswerFormat answer_format = trace::AnswerFormat::kTrueFalse;

  /// Picks the answer format that goes with `method` and validates.
  static MethodConfig make(Method method, std::optional<int> ablate = std::nullopt);

  /// Throws ConfigError when the ablation or answer format is inconsistent.
  void validate() const;

  friend bool operator==(const MethodConfig&, const MethodConfig&) = default;
};

/// A worked example of a different rule, with a solution for every one-shot
/// method. The chain-of-logic solution is written in the trace grammar.
struct Demonstration {
  std::string id;
  Sample sample;
  std::map<Method, std::string> solutions;

  const std::string& solution(Method method) const;

  static Demonstration from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

class DemoLibrary {
 public:
  /// Demonstrations compiled in from data/demos.
  static const DemoLibrary& builtin();

  void add(Demonstration demo);
  void load_file(const std::filesystem::path& path);

  /// Looks up by id; throws ConfigError when absent.
  const Demonstration& get(const std::string& id) const;
  const std::vector<Demonstration>& all() const { return demos_; }

 private:
  std::vector<Demonstration> demos_;
};

/// Plain-text templates with {rule}, {facts} and {issue} placeholders.
struct TemplateSet {
  std::string input;
  std::string input_unstructured;
  std::string zero_shot;
  std::string zero_shot_lr;
  std::string zero_shot_ls;

  static const TemplateSet& builtin();
  /// Reads <dir>/<name>.txt for every template.
  static TemplateSet load_dir(const std::filesystem::path& dir);
};

/// Substitutes the placeholders in one pass; inserted text is not rescanned.
std::string expand(std::string_view tmpl, const Sample& sample);

/// "Rule:", "Facts:" and "Issue:" blocks in order, texts verbatim. With
/// `structured` false the three texts are joined without labels.
std::string format_structured_input(const Sample& sample, bool structured = true,
                                    const TemplateSet& templates = TemplateSet::builtin());

inline constexpr std::string_view kAnswerCue = "Answer:";

/// Assembles the full prompt: demonstration block (one-shot methods), then
/// the test inputs, then the answer cue. Throws ConfigError for a missing or
/// unexpected demonstration, a demonstration of the same rule as the test,
/// or an invalid ablation.
std::string build_prompt(const MethodConfig& config, const std::optional<Demonstration>& demo,
                         const Sample& test,
                         const TemplateSet& templates = TemplateSet::builtin());

/// Second prompt used when the answer cannot be extracted.
std::string build_followup(trace::AnswerFormat format = trace::AnswerFormat::kTrueFalse);

}  // namespace rulechain::prompt
