#include "rulechain/sample.hpp"

#include "text_util.hpp"

namespace rulechain {

RuleFamily RuleFamily::diversity_jurisdiction(int level) {
  if (level < 1 || level > 6) {
    throw ConfigError("diversity jurisdiction level must be in 1..6, got " +
                      std::to_string(level));
  }
  return {Kind::kDiversityJurisdiction, level, {}};
}

RuleFamily RuleFamily::other(std::string name) {
  if (name.empty()) throw ConfigError("rule family name must not be empty");
  return {Kind::kOther, 0, std::move(name)};
}

RuleFamily RuleFamily::parse(const std::string& text) {
  const std::string t = text::trim(text);
  const std::string key = text::to_lower(t);
  if (key == "personaljurisdiction" || key == "pj" || key == "personal_jurisdiction") {
    return personal_jurisdiction();
  }
  if (key == "jcrewblocker" || key == "jcrew" || key == "jcrew_blocker") {
    return jcrew_blocker();
  }
  auto level_from = [&](std::string_view digits) {
    if (digits.size() != 1 || digits[0] < '1' || digits[0] > '6') {
      throw ConfigError("invalid diversity jurisdiction level in '" + t + "'");
    }
    return diversity_jurisdiction(digits[0] - '0');
  };
  if (key.starts_with("diversityjurisdiction:")) {
    return level_from(std::string_view(key).substr(22));
  }
  if (key.starts_with("dj") && key.size() == 3) return level_from(std::string_view(key).substr(2));
  if (key.starts_with("other:")) return other(t.substr(6));
  throw ConfigError("unknown rule family '" + t + "'");
}

std::string RuleFamily::to_string() const {
  switch (kind) {
    case Kind::kPersonalJurisdiction:
      return "PersonalJurisdiction";
    case Kind::kDiversityJurisdiction:
      return "DiversityJurisdiction:" + std::to_string(dj_level);
    case Kind::kJCrewBlocker:
      return "JCrewBlocker";
    case Kind::kOther:
      return "Other:" + other_name;
  }
  return {};
}

std::string RuleFamily::rule_key() const {
  if (kind == Kind::kDiversityJurisdiction) return "DiversityJurisdiction";
  return to_string();
}

void Sample::validate() const {
  if (text::trim(rule_text).empty()) throw ConfigError("sample '" + id + "': empty rule");
  if (text::trim(facts).empty()) throw ConfigError("sample '" + id + "': empty facts");
  if (text::trim(issue).empty()) throw ConfigError("sample '" + id + "': empty issue");
}

}  // namespace rulechain
