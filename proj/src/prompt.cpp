#include "rulechain/prompt.hpp"

#include <fstream>
#include <sstream>

#include "rulechain/resources.hpp"
#include "text_util.hpp"

namespace rulechain::prompt {

namespace {

struct MethodNames {
  Method method;
  std::string_view id;
  std::string_view display;
};

constexpr MethodNames kMethodNames[] = {
    {Method::kZeroShot, "zero_shot", "Zero-Shot"},
    {Method::kZeroShotLR, "zero_shot_lr", "Zero-Shot-LR"},
    {Method::kZeroShotLS, "zero_shot_ls", "Zero-Shot-LS"},
    {Method::kStandard, "standard", "Standard Prompting"},
    {Method::kChainOfThought, "chain_of_thought", "Chain of Thought"},
    {Method::kSelfAsk, "self_ask", "Self-Ask"},
    {Method::kChainOfLogic, "chain_of_logic", "Chain of Logic"},
};

const MethodNames& names_of(Method m) {
  for (const auto& n : kMethodNames) {
    if (n.method == m) return n;
  }
  return kMethodNames[0];
}

std::string strip_final_newline(std::string_view s) {
  if (!s.empty() && s.back() == '\n') s.remove_suffix(1);
  return std::string(s);
}

std::string builtin_template(const std::string& name) {
  auto res = resources::find("templates/" + name + ".txt");
  if (!res) throw ConfigError("missing builtin template " + name);
  return strip_final_newline(*res);
}

}  // namespace

std::string_view to_string(Method method) { return names_of(method).id; }
std::string_view display_name(Method method) { return names_of(method).display; }

Method method_from_string(std::string_view name) {
  const std::string key = text::to_lower(text::trim(name));
  for (const auto& n : kMethodNames) {
    if (n.id == key || text::to_lower(n.display) == key) return n.method;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

bool is_zero_shot(Method method) {
  return method == Method::kZeroShot || method == Method::kZeroShotLR ||
         method == Method::kZeroShotLS;
}

MethodConfig MethodConfig::make(Method method, std::optional<int> ablate) {
  MethodConfig c;
  c.method = method;
  c.ablate = ablate;
  c.answer_format = method == Method::kChainOfLogic ? trace::AnswerFormat::kTrueFalse
                                                    : trace::AnswerFormat::kYesNo;
  c.validate();
  return c;
}

void MethodConfig::validate() const {
  if (ablate) {
    if (method != Method::kChainOfLogic) {
      throw ConfigError("ablation is only defined for chain_of_logic");
    }
    if (*ablate < 1 || *ablate > 6) {
      throw ConfigError("ablation step must be in 1..6, got " + std::to_string(*ablate));
    }
  }
  const auto expected = method == Method::kChainOfLogic ? trace::AnswerFormat::kTrueFalse
                                                        : trace::AnswerFormat::kYesNo;
  if (answer_format != expected) {
    throw ConfigError(std::string(to_string(method)) + " expects the " +
                      std::string(trace::to_string(expected)) + " answer format");
  }
}

// ---------------------------------------------------------------------------
// Demonstrations

const std::string& Demonstration::solution(Method method) const {
  auto it = solutions.find(method);
  if (it == solutions.end()) {
    throw ConfigError("demonstration '" + id + "' has no " + std::string(to_string(method)) +
                      " solution");
  }
  return it->second;
}

Demonstration Demonstration::from_json(const nlohmann::json& j) {
  Demonstration d;
  try {
    d.id = j.at("id").get<std::string>();
    d.sample.id = d.id;
    d.sample.rule_text = j.at("rule").get<std::string>();
    d.sample.facts = j.at("facts").get<std::string>();
    d.sample.issue = j.at("issue").get<std::string>();
    d.sample.family = RuleFamily::parse(j.at("rule_family").get<std::string>());
    const std::string answer = text::to_lower(j.at("answer").get<std::string>());
    if (answer == "yes" || answer == "true") {
      d.sample.gold = true;
    } else if (answer == "no" || answer == "false") {
      d.sample.gold = false;
    } else {
      throw ConfigError("demonstration '" + d.id + "': unparseable answer");
    }
    for (const auto& [key, value] : j.at("solutions").items()) {
      d.solutions[method_from_string(key)] = value.get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed demonstration: ") + e.what());
  }
  d.sample.validate();
  return d;
}

nlohmann::json Demonstration::to_json() const {
  nlohmann::json j;
  j["id"] = id;
  j["rule_family"] = sample.family.to_string();
  j["rule"] = sample.rule_text;
  j["facts"] = sample.facts;
  j["issue"] = sample.issue;
  j["answer"] = sample.gold.value_or(false) ? "Yes" : "No";
  nlohmann::json sol = nlohmann::json::object();
  for (const auto& [m, text] : solutions) sol[std::string(to_string(m))] = text;
  j["solutions"] = sol;
  return j;
}

const DemoLibrary& DemoLibrary::builtin() {
  static const DemoLibrary lib = [] {
    DemoLibrary l;
    for (const auto& name : resources::list("demos/")) {
      l.add(Demonstration::from_json(nlohmann::json::parse(*resources::find(name))));
    }
    return l;
  }();
  return lib;
}

void DemoLibrary::add(Demonstration demo) {
  for (const auto& d : demos_) {
    if (d.id == demo.id) throw ConfigError("duplicate demonstration id '" + demo.id + "'");
  }
  demos_.push_back(std::move(demo));
}

void DemoLibrary::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open demonstration file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
  if (j.is_array()) {
    for (const auto& item : j) add(Demonstration::from_json(item));
  } else {
    add(Demonstration::from_json(j));
  }
}

const Demonstration& DemoLibrary::get(const std::string& id) const {
  for (const auto& d : demos_) {
    if (d.id == id) return d;
  }
  throw ConfigError("unknown demonstration '" + id + "'");
}

// ---------------------------------------------------------------------------
// Templates

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet set{builtin_template("input"), builtin_template("input_unstructured"),
                               builtin_template("zero_shot"), builtin_template("zero_shot_lr"),
                               builtin_template("zero_shot_ls")};
  return set;
}

TemplateSet TemplateSet::load_dir(const std::filesystem::path& dir) {
  auto read = [&](const char* name) {
    const auto path = dir / (std::string(name) + ".txt");
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open template " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return strip_final_newline(ss.str());
  };
  return {read("input"), read("input_unstructured"), read("zero_shot"), read("zero_shot_lr"),
          read("zero_shot_ls")};
}

std::string expand(std::string_view tmpl, const Sample& sample) {
  std::string out;
  out.reserve(tmpl.size() + sample.rule_text.size() + sample.facts.size() + sample.issue.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const std::size_t close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        const std::string_view key = tmpl.substr(i + 1, close - i - 1);
        const std::string* value = key == "rule"    ? &sample.rule_text
                                   : key == "facts" ? &sample.facts
                                   : key == "issue" ? &sample.issue
                                                    : nullptr;
        if (value != nullptr) {
          out += *value;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string format_structured_input(const Sample& sample, bool structured,
                                    const TemplateSet& templates) {
  return expand(structured ? templates.input : templates.input_unstructured, sample);
}

// ---------------------------------------------------------------------------
// Prompt assembly

namespace {

std::string answer_block(const std::string& solution) {
  const bool multiline = solution.find('\n') != std::string::npos;
  return std::string(kAnswerCue) + (multiline ? "\n" : " ") + solution;
}

std::string chain_of_logic_solution(const Demonstration& demo, std::optional<int> ablate) {
  const trace::ReasoningTrace t = trace::parse_trace(demo.solution(Method::kChainOfLogic));
  std::set<trace::Section> omit;
  if (ablate) {
    if (auto s = trace::section_for_step(*ablate)) omit.insert(*s);
  }
  return strip_final_newline(trace::render_trace(t, omit));
}

std::string test_block(const MethodConfig& config, const Sample& test,
                       const TemplateSet& templates) {
  switch (config.method) {
    case Method::kZeroShot:
      return expand(templates.zero_shot, test);
    case Method::kZeroShotLR:
      return expand(templates.zero_shot_lr, test);
    case Method::kZeroShotLS:
      return expand(templates.zero_shot_ls, test);
    case Method::kChainOfLogic:
      return format_structured_input(test, config.ablate != 1, templates);
    default:
      return format_structured_input(test, true, templates);
  }
}

}  // namespace

std::string build_prompt(const MethodConfig& config, const std::optional<Demonstration>& demo,
                         const Sample& test, const TemplateSet& templates) {
  config.validate();
  test.validate();
  const bool zero_shot = is_zero_shot(config.method);
  if (zero_shot && demo) {
    throw ConfigError(std::string(to_string(config.method)) + " takes no demonstration");
  }
  if (!zero_shot && !demo) {
    throw ConfigError(std::string(to_string(config.method)) + " requires a demonstration");
  }

  std::string prompt;
  if (demo) {
    if (demo->sample.family.same_rule(test.family)) {
      throw ConfigError("demonstration '" + demo->id + "' applies the same rule (" +
                        demo->sample.family.rule_key() + ") as test sample '" + test.id + "'");
    }
    std::string solution = config.method == Method::kChainOfLogic
                               ? chain_of_logic_solution(*demo, config.ablate)
                               : demo->solution(config.method);
    const bool structured = !(config.method == Method::kChainOfLogic && config.ablate == 1);
    prompt += format_structured_input(demo->sample, structured, templates);
    prompt += '\n';
    prompt += answer_block(solution);
    prompt += "\n\n";
  }
  prompt += test_block(config, test, templates);
  prompt += '\n';
  prompt += kAnswerCue;
  return prompt;
}

std::string build_followup(trace::AnswerFormat format) {
  return format == trace::AnswerFormat::kTrueFalse ? "Therefore the answer (true or false) is"
                                                   : "Therefore the answer (yes or no) is";
}

}  // namespace rulechain::prompt
