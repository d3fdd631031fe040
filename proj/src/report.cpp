#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "rulechain/harness.hpp"
#include "text_util.hpp"

namespace rulechain::harness {

namespace fs = std::filesystem;

namespace {

nlohmann::json opt_json(const std::optional<bool>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json();
}

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json();
}

std::optional<bool> opt_bool(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<bool>();
}

std::optional<double> opt_double(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

nlohmann::json SampleRecord::to_json() const {
  nlohmann::json j;
  j["task"] = task;
  j["id"] = id;
  j["prompt_digest"] = prompt_digest;
  j["raw_output"] = raw_output;
  j["followup_output"] = followup_output ? nlohmann::json(*followup_output) : nlohmann::json();
  j["model_answer"] = opt_json(model_answer);
  j["gold"] = opt_json(gold);
  j["verdict"] = verdict.to_json();
  j["trace"] = trace;
  j["correct"] = opt_json(correct);
  j["skipped"] = skipped;
  j["skip_reason"] = skip_reason;
  return j;
}

SampleRecord SampleRecord::from_json(const nlohmann::json& j) {
  SampleRecord r;
  r.task = j.at("task").get<std::string>();
  r.id = j.at("id").get<std::string>();
  r.prompt_digest = j.at("prompt_digest").get<std::string>();
  r.raw_output = j.at("raw_output").get<std::string>();
  if (j.contains("followup_output") && !j.at("followup_output").is_null()) {
    r.followup_output = j.at("followup_output").get<std::string>();
  }
  r.model_answer = opt_bool(j, "model_answer");
  r.gold = opt_bool(j, "gold");
  r.verdict = trace::Verdict::from_json(j.at("verdict"));
  r.trace = j.value("trace", nlohmann::json());
  r.correct = opt_bool(j, "correct");
  r.skipped = j.value("skipped", false);
  r.skip_reason = j.value("skip_reason", std::string());
  return r;
}

nlohmann::json TaskResult::to_json() const {
  return {{"name", name},
          {"rule", rule},
          {"total", total},
          {"correct", correct},
          {"incorrect", incorrect},
          {"skipped", skipped},
          {"unlabeled", unlabeled},
          {"accuracy", opt_json(accuracy)}};
}

TaskResult TaskResult::from_json(const nlohmann::json& j) {
  TaskResult t;
  t.name = j.at("name").get<std::string>();
  t.rule = j.value("rule", std::string());
  t.total = j.at("total").get<std::size_t>();
  t.correct = j.at("correct").get<std::size_t>();
  t.incorrect = j.at("incorrect").get<std::size_t>();
  t.skipped = j.at("skipped").get<std::size_t>();
  t.unlabeled = j.value("unlabeled", std::size_t{0});
  t.accuracy = opt_double(j, "accuracy");
  return t;
}

std::size_t EvalReport::skipped() const {
  std::size_t n = 0;
  for (const auto& t : tasks) n += t.skipped;
  return n;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["method"] = method;
  j["ablate"] = ablate ? nlohmann::json(*ablate) : nlohmann::json();
  j["model"] = model;
  j["backend"] = backend;
  j["tasks"] = nlohmann::json::array();
  for (const auto& t : tasks) j["tasks"].push_back(t.to_json());
  j["per_rule"] = per_rule;
  j["macro_average"] = opt_json(macro_average);
  j["error_histogram"] = error_histogram;
  if (ablation) {
    j["ablation"] = {{"step", ablation->step},
                     {"full_accuracy", ablation->full_accuracy},
                     {"ablated_accuracy", ablation->ablated_accuracy},
                     {"delta", ablation->delta}};
  } else {
    j["ablation"] = nullptr;
  }
  j["records"] = nlohmann::json::array();
  for (const auto& r : records) j["records"].push_back(r.to_json());
  j["run_info"] = run_info;
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.method = j.at("method").get<std::string>();
    if (j.contains("ablate") && !j.at("ablate").is_null()) r.ablate = j.at("ablate").get<int>();
    r.model = j.at("model").get<std::string>();
    r.backend = j.value("backend", std::string());
    for (const auto& t : j.at("tasks")) r.tasks.push_back(TaskResult::from_json(t));
    r.per_rule = j.at("per_rule").get<std::map<std::string, double>>();
    r.macro_average = opt_double(j, "macro_average");
    r.error_histogram = j.value("error_histogram", std::map<std::string, std::size_t>{});
    if (j.contains("ablation") && !j.at("ablation").is_null()) {
      const auto& a = j.at("ablation");
      r.ablation = AblationInfo{a.at("step").get<int>(), a.at("full_accuracy").get<double>(),
                                a.at("ablated_accuracy").get<double>(), a.at("delta").get<double>()};
    }
    for (const auto& rec : j.value("records", nlohmann::json::array())) {
      r.records.push_back(SampleRecord::from_json(rec));
    }
    r.run_info = j.value("run_info", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return r;
}

double macro_average(const std::map<std::string, double>& per_rule) {
  if (per_rule.empty()) throw std::invalid_argument("macro average of no rules");
  double sum = 0.0;
  for (const auto& [_, acc] : per_rule) sum += acc;
  return sum / static_cast<double>(per_rule.size());
}

void aggregate(EvalReport& report) {
  std::vector<TaskResult> tasks;
  auto find_task = [&](const std::string& name) -> TaskResult& {
    for (auto& t : tasks) {
      if (t.name == name) return t;
    }
    TaskResult t;
    t.name = name;
    tasks.push_back(std::move(t));
    return tasks.back();
  };
  for (const auto& t : report.tasks) {
    TaskResult fresh;
    fresh.name = t.name;
    fresh.rule = t.rule;
    tasks.push_back(std::move(fresh));
  }

  report.error_histogram.clear();
  for (const auto& r : report.records) {
    TaskResult& t = find_task(r.task);
    ++t.total;
    if (r.skipped) {
      ++t.skipped;
      continue;
    }
    if (r.verdict.error_class != trace::ErrorClass::kNone) {
      ++report.error_histogram[std::string(trace::to_string(r.verdict.error_class))];
    }
    if (!r.correct) {
      ++t.unlabeled;
    } else if (*r.correct) {
      ++t.correct;
    } else {
      ++t.incorrect;
    }
  }

  std::map<std::string, std::pair<double, int>> sums;
  for (auto& t : tasks) {
    const std::size_t scored = t.correct + t.incorrect;
    t.accuracy = scored == 0 ? std::nullopt
                             : std::optional<double>(static_cast<double>(t.correct) /
                                                     static_cast<double>(scored));
    if (t.accuracy) {
      auto& [sum, count] = sums[t.rule.empty() ? t.name : t.rule];
      sum += *t.accuracy;
      ++count;
    }
  }
  report.tasks = std::move(tasks);
  report.per_rule.clear();
  for (const auto& [rule, sc] : sums) report.per_rule[rule] = sc.first / sc.second;
  report.macro_average = report.per_rule.empty()
                             ? std::nullopt
                             : std::optional<double>(macro_average(report.per_rule));
}

// ---------------------------------------------------------------------------
// Rendering

ReportFormat report_format_from_string(const std::string& name) {
  const std::string key = text::to_lower(name);
  if (key == "json") return ReportFormat::kJson;
  if (key == "csv") return ReportFormat::kCsv;
  if (key == "text" || key == "table" || key == "txt") return ReportFormat::kText;
  throw ConfigError("unknown report format '" + name + "'");
}

std::string format_percent(double fraction) {
  std::ostringstream out;
  // The small nudge keeps values like 0.8705 from rounding down through
  // binary representation error.
  out << std::fixed << std::setprecision(1) << std::round(fraction * 1000.0 + 1e-9) / 10.0;
  return out.str();
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  return "\"" + text::replace_all(s, "\"", "\"\"") + "\"";
}

std::string method_label(const EvalReport& r) {
  std::string label;
  try {
    label = std::string(prompt::display_name(prompt::method_from_string(r.method)));
  } catch (const ConfigError&) {
    label = r.method;
  }
  if (r.ablate) label += " (without step " + std::to_string(*r.ablate) + ")";
  return label;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string render_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "row,name,rule,total,correct,incorrect,skipped,unlabeled,accuracy\n";
  for (const auto& t : report.tasks) {
    out << "task," << csv_field(t.name) << ',' << csv_field(t.rule) << ',' << t.total << ','
        << t.correct << ',' << t.incorrect << ',' << t.skipped << ',' << t.unlabeled << ','
        << (t.accuracy ? format_percent(*t.accuracy) : "") << '\n';
  }
  for (const auto& [rule, acc] : report.per_rule) {
    out << "rule," << csv_field(rule) << ",,,,,,," << format_percent(acc) << '\n';
  }
  out << "macro_average,,,,,,,," << (report.macro_average ? format_percent(*report.macro_average) : "")
      << '\n';
  return out.str();
}

std::string render_text(const EvalReport& report) {
  std::ostringstream out;
  out << "Method: " << method_label(report) << "\nModel: " << report.model
      << "\nBackend: " << report.backend << "\n\n";
  std::size_t name_w = 4;
  std::size_t rule_w = 4;
  for (const auto& t : report.tasks) {
    name_w = std::max(name_w, t.name.size());
    rule_w = std::max(rule_w, t.rule.size());
  }
  out << pad("Task", name_w) << "  " << pad("Rule", rule_w)
      << "  Total  Correct  Incorrect  Skipped  Accuracy\n";
  for (const auto& t : report.tasks) {
    out << pad(t.name, name_w) << "  " << pad(t.rule, rule_w) << "  "
        << pad_left(std::to_string(t.total), 5) << "  " << pad_left(std::to_string(t.correct), 7)
        << "  " << pad_left(std::to_string(t.incorrect), 9) << "  "
        << pad_left(std::to_string(t.skipped), 7) << "  "
        << pad_left(t.accuracy ? format_percent(*t.accuracy) : "-", 8) << '\n';
  }
  out << "\nPer rule:\n";
  for (const auto& [rule, acc] : report.per_rule) {
    out << "  " << pad(rule, rule_w) << "  " << format_percent(acc) << '\n';
  }
  out << "Macro average: " << (report.macro_average ? format_percent(*report.macro_average) : "-")
      << '\n';
  if (!report.error_histogram.empty()) {
    out << "Errors:";
    for (const auto& [cls, n] : report.error_histogram) out << ' ' << cls << '=' << n;
    out << '\n';
  }
  if (report.ablation) {
    std::ostringstream delta;
    delta << std::showpos << std::fixed << std::setprecision(1) << report.ablation->delta;
    out << "Ablation: step " << report.ablation->step << ", full "
        << format_percent(report.ablation->full_accuracy) << ", ablated "
        << format_percent(report.ablation->ablated_accuracy) << ", delta " << delta.str()
        << " points\n";
  }
  return out.str();
}

}  // namespace

std::string render_report(const EvalReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson:
      return report.to_json().dump(2) + "\n";
    case ReportFormat::kCsv:
      return render_csv(report);
    case ReportFormat::kText:
      return render_text(report);
  }
  return {};
}

std::string render_merged_table(const std::vector<EvalReport>& reports) {
  std::vector<std::string> rows;
  std::vector<std::string> models;
  std::map<std::pair<std::string, std::string>, double> cells;
  // Rows follow the canonical method order, ablations after their method.
  std::vector<std::pair<std::pair<int, int>, std::string>> row_keys;
  for (const auto& r : reports) {
    const std::string label = method_label(r);
    int order = static_cast<int>(std::size(prompt::kAllMethods));
    for (std::size_t i = 0; i < std::size(prompt::kAllMethods); ++i) {
      if (prompt::to_string(prompt::kAllMethods[i]) == r.method) order = static_cast<int>(i);
    }
    const std::pair<int, int> key{order, r.ablate.value_or(0)};
    if (std::none_of(row_keys.begin(), row_keys.end(),
                     [&](const auto& rk) { return rk.second == label; })) {
      row_keys.emplace_back(key, label);
    }
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    if (r.macro_average) cells[{label, r.model}] = *r.macro_average;
  }
  std::stable_sort(row_keys.begin(), row_keys.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& rk : row_keys) rows.push_back(rk.second);

  const bool average = models.size() > 1;
  std::size_t label_w = 6;
  for (const auto& r : rows) label_w = std::max(label_w, r.size());
  std::vector<std::size_t> widths;
  for (const auto& m : models) widths.push_back(std::max<std::size_t>(m.size(), 5));

  std::ostringstream out;
  out << pad("Method", label_w);
  for (std::size_t i = 0; i < models.size(); ++i) out << "  " << pad_left(models[i], widths[i]);
  if (average) out << "  Average";
  out << '\n';
  for (const auto& row : rows) {
    out << pad(row, label_w);
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < models.size(); ++i) {
      auto it = cells.find({row, models[i]});
      if (it != cells.end()) {
        sum += it->second;
        ++n;
      }
      out << "  " << pad_left(it != cells.end() ? format_percent(it->second) : "-", widths[i]);
    }
    if (average) out << "  " << pad_left(n ? format_percent(sum / n) : "-", 7);
    out << '\n';
  }
  return out.str();
}

namespace {

void write_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

void write_report(const EvalReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  write_atomically(dir / "report.json", render_report(report, ReportFormat::kJson));
  write_atomically(dir / "report.csv", render_report(report, ReportFormat::kCsv));
  write_atomically(dir / "report.txt", render_report(report, ReportFormat::kText));
}

EvalReport read_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open report " + path.string());
  try {
    return EvalReport::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("report " + path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace rulechain::harness
