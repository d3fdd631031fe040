#include "rulechain/datasets.hpp"

#include <fstream>
#include <map>

#include "text_util.hpp"

namespace rulechain::datasets {

FileFormat format_from_path(const std::filesystem::path& path) {
  return text::to_lower(path.extension().string()) == ".tsv" ? FileFormat::kTsv
                                                             : FileFormat::kJsonl;
}

FileFormat format_from_string(const std::string& name) {
  const std::string key = text::to_lower(name);
  if (key == "jsonl") return FileFormat::kJsonl;
  if (key == "tsv") return FileFormat::kTsv;
  throw ConfigError("unknown sample file format '" + name + "'");
}

FieldMapping FieldMapping::from_json(const nlohmann::json& j) {
  FieldMapping m;
  m.id = j.value("id", m.id);
  m.rule = j.value("rule", m.rule);
  m.facts = j.value("facts", m.facts);
  m.issue = j.value("issue", m.issue);
  m.answer = j.value("answer", m.answer);
  m.family = j.value("rule_family", m.family);
  return m;
}

std::optional<bool> parse_label(const std::string& label) {
  const std::string key = text::to_lower(text::trim(label));
  if (key == "yes" || key == "true" || key == "1") return true;
  if (key == "no" || key == "false" || key == "0") return false;
  return std::nullopt;
}

namespace {

// One record, already split into named string fields.
using Record = std::map<std::string, std::string>;

std::vector<std::string> split_tsv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == '\t') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string scalar_to_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  return v.dump();
}

std::vector<std::pair<std::size_t, Record>> read_jsonl(std::istream& in) {
  std::vector<std::pair<std::size_t, Record>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw DataError("line " + std::to_string(line_no) + ": not a JSON object");
    Record r;
    for (const auto& [k, v] : j.items()) {
      if (!v.is_null()) r[k] = scalar_to_string(v);
    }
    rows.emplace_back(line_no, std::move(r));
  }
  return rows;
}

std::vector<std::pair<std::size_t, Record>> read_tsv(std::istream& in) {
  std::vector<std::pair<std::size_t, Record>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    auto fields = split_tsv_line(line);
    if (header.empty()) {
      header = std::move(fields);
      continue;
    }
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " columns, found " +
                      std::to_string(fields.size()));
    }
    Record r;
    for (std::size_t i = 0; i < header.size(); ++i) r[header[i]] = std::move(fields[i]);
    rows.emplace_back(line_no, std::move(r));
  }
  return rows;
}

}  // namespace

std::vector<Sample> load_samples(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sample file " + path.string());
  auto rows = options.format == FileFormat::kJsonl ? read_jsonl(in) : read_tsv(in);
  if (rows.empty()) throw DataError("sample file " + path.string() + " is empty");

  const FieldMapping& m = options.mapping;
  std::vector<Sample> samples;
  samples.reserve(rows.size());
  for (std::size_t index = 0; index < rows.size(); ++index) {
    const auto& [line_no, record] = rows[index];
    const std::string where = path.filename().string() + " line " + std::to_string(line_no);
    auto field = [&](const std::string& name,
                     const std::optional<std::string>& fallback) -> std::string {
      if (auto it = record.find(name); it != record.end()) return it->second;
      if (fallback) return *fallback;
      throw DataError(where + ": missing column '" + name + "'");
    };

    Sample s;
    auto id_it = record.find(m.id);
    s.id = id_it != record.end() ? id_it->second : std::to_string(index);
    s.rule_text = field(m.rule, options.default_rule);
    s.facts = field(m.facts, std::nullopt);
    s.issue = field(m.issue, options.default_issue);
    if (auto it = record.find(m.answer); it != record.end()) {
      s.gold = parse_label(it->second);
      if (!s.gold) throw DataError(where + ": unparseable label '" + it->second + "'");
    } else if (options.require_gold) {
      throw DataError(where + ": missing column '" + m.answer + "'");
    }
    if (auto it = record.find(m.family); it != record.end()) {
      s.family = RuleFamily::parse(it->second);
    } else if (options.family) {
      s.family = *options.family;
    } else {
      s.family = RuleFamily::other(path.stem().string());
    }
    try {
      s.validate();
    } catch (const ConfigError& e) {
      throw DataError(where + ": " + e.what());
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

nlohmann::json to_record(const Sample& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["rule"] = s.rule_text;
  j["facts"] = s.facts;
  j["issue"] = s.issue;
  j["answer"] = s.gold ? nlohmann::json(*s.gold ? "Yes" : "No") : nlohmann::json();
  j["rule_family"] = s.family.to_string();
  return j;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& s : samples) out << to_record(s).dump() << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace rulechain::datasets
