#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rulechain/backend.hpp"
#include "rulechain/datasets.hpp"
#include "rulechain/dj.hpp"
#include "rulechain/prompt.hpp"
#include "rulechain/trace.hpp"

namespace rulechain::harness {

/// One task: a sample file, or a synthetic diversity-jurisdiction set.
struct TaskSpec {
  std::string name;
  std::optional<std::filesystem::path> path;
  datasets::LoadOptions load;

  // Generator form, used when `path` is empty.
  int dj_level = 0;
  std::size_t dj_n = 0;
  std::uint64_t dj_seed = 0;
  dj::AicPolicy aic_policy = dj::AicPolicy::kEveryPairExceeds;

  bool generated() const { return !path.has_value(); }

  /// A string is a file path, or "dj:<level>:<n>:<seed>" for generated
  /// samples. Objects follow the schema in docs/config.md. Relative paths
  /// resolve against `base_dir`.
  static TaskSpec from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static TaskSpec parse(const std::string& text, const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
};

/// A loaded sample plus whatever structure its task could supply.
struct TaskSample {
  Sample sample;
  std::optional<dj::FactPattern> facts;
  std::optional<dj::DjVerdict> oracle;
};

/// Loads (or generates) the samples of a task. Diversity facts that parse
/// back into a fact pattern carry oracle verdicts for element-level checks.
std::vector<TaskSample> load_task(const TaskSpec& spec);

struct RunConfig {
  prompt::MethodConfig method;
  /// "scripted", "openai" or "offline".
  std::string backend = "scripted";
  /// Response table for the scripted backend (see ScriptedBackend::from_json).
  std::optional<std::filesystem::path> script;
  std::string model = "scripted-model";
  std::vector<TaskSpec> tasks;
  /// Demonstration id, or "auto" to pick a built-in demonstration whose rule
  /// differs from each task.
  std::string demo = "auto";
  std::optional<std::filesystem::path> demo_file;
  std::optional<std::filesystem::path> templates_dir;
  std::optional<std::size_t> limit;
  std::uint64_t seed = 0;
  bool shuffle = false;
  std::optional<std::filesystem::path> cache_dir;
  bool replay = false;
  std::optional<std::filesystem::path> out_dir;
  int jobs = 1;
  double temperature = 0.0;
  int max_tokens = 1024;

  /// Throws ConfigError for inconsistent settings.
  void validate() const;

  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// Builds the backend named by the config. In replay mode this is an
/// offline stand-in that carries the live backend's id, so cache keys match.
std::unique_ptr<backend::Backend> make_backend(const RunConfig& config);

struct SampleRecord {
  std::string task;
  std::string id;
  std::string prompt_digest;
  std::string raw_output;
  std::optional<std::string> followup_output;
  std::optional<bool> model_answer;
  std::optional<bool> gold;
  trace::Verdict verdict;
  /// Parsed chain-of-logic trace, as exported by ReasoningTrace::to_json.
  nlohmann::json trace;
  std::optional<bool> correct;
  bool skipped = false;
  std::string skip_reason;

  nlohmann::json to_json() const;
  static SampleRecord from_json(const nlohmann::json& j);
  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct TaskResult {
  std::string name;
  std::string rule;  // RuleFamily::rule_key of the task's samples
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  std::size_t skipped = 0;
  std::size_t unlabeled = 0;
  /// correct / (correct + incorrect); absent when nothing was scored.
  std::optional<double> accuracy;

  nlohmann::json to_json() const;
  static TaskResult from_json(const nlohmann::json& j);
  friend bool operator==(const TaskResult&, const TaskResult&) = default;
};

struct AblationInfo {
  int step = 0;
  double full_accuracy = 0.0;
  double ablated_accuracy = 0.0;
  /// ablated - full, in percentage points.
  double delta = 0.0;

  friend bool operator==(const AblationInfo&, const AblationInfo&) = default;
};

/// Accuracies are fractions in [0, 1]; rendering converts to percent.
struct EvalReport {
  std::string method;  // prompt::to_string id
  std::optional<int> ablate;
  std::string model;
  std::string backend;
  std::vector<SampleRecord> records;
  std::vector<TaskResult> tasks;
  std::map<std::string, double> per_rule;
  std::optional<double> macro_average;
  std::map<std::string, std::size_t> error_histogram;
  std::optional<AblationInfo> ablation;
  /// Timestamps, timings and cache statistics; the only field that differs
  /// between two runs of the same config.
  nlohmann::json run_info = nlohmann::json::object();

  std::size_t skipped() const;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Unweighted mean. Throws std::invalid_argument on empty input.
double macro_average(const std::map<std::string, double>& per_rule);

/// Fills tasks, per_rule, macro_average and error_histogram from records.
void aggregate(EvalReport& report);

struct RunOptions {
  /// Receives one line per non-fatal problem (cache I/O, skipped samples).
  std::function<void(const std::string&)> log;
};

/// Evaluates every sample of every task. Config and data errors throw
/// before any backend call; per-sample backend errors become skipped records.
EvalReport run_eval(const RunConfig& config, backend::Backend& backend,
                    const RunOptions& options = {});
/// As above with the backend from make_backend(config).
EvalReport run_eval(const RunConfig& config, const RunOptions& options = {});

struct AblationResult {
  EvalReport full;
  EvalReport ablated;
  double delta = 0.0;
};

/// Runs `base` with and without reasoning step `step` on the same samples.
AblationResult run_ablation(const RunConfig& base, int step, backend::Backend& backend,
                            const RunOptions& options = {});
AblationResult run_ablation(const RunConfig& base, int step, const RunOptions& options = {});

enum class ReportFormat { kJson, kCsv, kText };
ReportFormat report_format_from_string(const std::string& name);

/// Percent with one decimal, e.g. 0.87 -> "87.0".
std::string format_percent(double fraction);

std::string render_report(const EvalReport& report, ReportFormat format);

/// Methods x models table of macro averages. An Average column is added
/// when there is more than one model.
std::string render_merged_table(const std::vector<EvalReport>& reports);

/// Writes report.json, report.csv and report.txt under `dir` atomically.
void write_report(const EvalReport& report, const std::filesystem::path& dir);
EvalReport read_report(const std::filesystem::path& path);

/// Per-element gold for a diversity trace: maps the trace's own variables to
/// the oracle's complete-diversity and amount-in-controversy findings by
/// element wording. Empty when the elements cannot all be identified.
logic::Assignment dj_element_gold(const trace::ReasoningTrace& trace, const dj::DjVerdict& oracle);

}  // namespace rulechain::harness
