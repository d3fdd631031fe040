#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rulechain/sample.hpp"

namespace rulechain::datasets {

enum class FileFormat { kJsonl, kTsv };

/// ".tsv" maps to kTsv, everything else to kJsonl.
FileFormat format_from_path(const std::filesystem::path& path);
FileFormat format_from_string(const std::string& name);

/// Names of the fields/columns that hold each part of a sample.
struct FieldMapping {
  std::string id = "id";
  std::string rule = "rule";
  std::string facts = "facts";
  std::string issue = "issue";
  std::string answer = "answer";
  std::string family = "rule_family";

  /// Missing keys keep their defaults.
  static FieldMapping from_json(const nlohmann::json& j);
};

struct LoadOptions {
  FileFormat format = FileFormat::kJsonl;
  FieldMapping mapping;
  /// Used when the rule / issue field is absent (LegalBench files carry only
  /// the fact pattern and the label).
  std::optional<std::string> default_rule;
  std::optional<std::string> default_issue;
  /// Family for records without a family field; otherwise Other:<file stem>.
  std::optional<RuleFamily> family;
  bool require_gold = true;
};

class DataError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// "yes"/"true"/"1" -> true, "no"/"false"/"0" -> false (case-insensitive).
std::optional<bool> parse_label(const std::string& text);

std::vector<Sample> load_samples(const std::filesystem::path& path, const LoadOptions& options);

/// Canonical JSONL record: {id, rule, facts, issue, answer, rule_family}.
nlohmann::json to_record(const Sample& sample);
void write_jsonl(const std::filesystem::path& path, const std::vector<Sample>& samples);

}  // namespace rulechain::datasets
