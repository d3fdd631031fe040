#pragma once

#include <compare>
#include <optional>
#include <stdexcept>
#include <string>

namespace rulechain {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Which compositional rule a sample applies. Diversity jurisdiction carries
/// its complexity level (1-6); `Other` carries a free-form name.
struct RuleFamily {
  enum class Kind { kPersonalJurisdiction, kDiversityJurisdiction, kJCrewBlocker, kOther };

  Kind kind = Kind::kOther;
  int dj_level = 0;
  std::string other_name;

  static RuleFamily personal_jurisdiction() { return {Kind::kPersonalJurisdiction, 0, {}}; }
  static RuleFamily diversity_jurisdiction(int level);
  static RuleFamily jcrew_blocker() { return {Kind::kJCrewBlocker, 0, {}}; }
  static RuleFamily other(std::string name);

  /// "PersonalJurisdiction", "DiversityJurisdiction:3", "JCrewBlocker",
  /// "Other:<name>". Also accepts the short forms "pj", "dj3", "jcrew".
  static RuleFamily parse(const std::string& text);
  std::string to_string() const;

  /// Key used for per-rule aggregation; all diversity levels share one rule.
  std::string rule_key() const;

  /// True when both samples apply the same underlying rule.
  bool same_rule(const RuleFamily& other) const { return rule_key() == other.rule_key(); }

  friend bool operator==(const RuleFamily&, const RuleFamily&) = default;
};

/// One task instance: a rule, a fact pattern and the question to answer.
struct Sample {
  std::string id;
  std::string rule_text;
  std::string facts;
  std::string issue;
  std::optional<bool> gold;
  RuleFamily family;

  /// Throws ConfigError when rule, facts or issue is empty.
  void validate() const;

  friend bool operator==(const Sample&, const Sample&) = default;
};

}  // namespace rulechain
