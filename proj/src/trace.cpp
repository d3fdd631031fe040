#include "rulechain/trace.hpp"

#include <regex>
#include <utility>

#include "text_util.hpp"

namespace rulechain::trace {

std::string_view to_string(AnswerFormat format) {
  return format == AnswerFormat::kYesNo ? "yes_no" : "true_false";
}

std::string_view to_string(Section section) {
  switch (section) {
    case Section::kDecomposition:
      return "decomposition";
    case Section::kExpression:
      return "expression";
    case Section::kQuestions:
      return "question_answering";
    case Section::kRecomposition:
      return "recomposition";
    case Section::kResolution:
      return "resolution";
    case Section::kFinalAnswer:
      return "final_answer";
  }
  return "unknown";
}

std::optional<Section> section_for_step(int step) {
  switch (step) {
    case 2:
      return Section::kDecomposition;
    case 3:
      return Section::kExpression;
    case 4:
      return Section::kQuestions;
    case 5:
      return Section::kRecomposition;
    case 6:
      return Section::kResolution;
    default:
      return std::nullopt;
  }
}

ParseFailure::ParseFailure(Section section, const std::string& detail)
    : std::runtime_error("trace parse failure in " + std::string(to_string(section)) +
                         ": " + detail),
      section_(section) {}

logic::Assignment ReasoningTrace::assignment() const {
  logic::Assignment a;
  for (const auto& q : qa) a[q.variable] = q.answer;
  return a;
}

std::vector<std::string> ReasoningTrace::missing_variables() const {
  std::vector<std::string> missing;
  if (!expression) return missing;
  const auto a = assignment();
  for (const auto& v : expression->variables()) {
    if (!a.contains(v)) missing.push_back(v);
  }
  return missing;
}

bool ReasoningTrace::complete() const {
  return expression.has_value() && missing_variables().empty();
}

nlohmann::json ReasoningTrace::to_json() const {
  nlohmann::json j;
  j["elements"] = nlohmann::json::array();
  for (const auto& e : elements) j["elements"].push_back({{"variable", e.variable}, {"text", e.text}});
  j["expression_text"] = expression_text;
  j["expression"] = expression ? nlohmann::json(logic::render(*expression)) : nlohmann::json();
  j["qa"] = nlohmann::json::array();
  for (const auto& q : qa) {
    j["qa"].push_back({{"variable", q.variable},
                       {"question", q.question},
                       {"rationale", q.rationale},
                       {"answer", q.answer}});
  }
  j["recomposition_text"] = recomposition_text;
  j["resolution_text"] = resolution_text;
  j["model_final"] = model_final ? nlohmann::json(*model_final) : nlohmann::json();
  j["complete"] = complete();
  j["missing_variables"] = missing_variables();
  j["recovered"] = recovered;
  j["raw"] = raw;
  return j;
}

// ---------------------------------------------------------------------------
// Answer tokens

namespace {

struct Polarity {
  bool positive = false;
  bool negative = false;
};

bool has_word(std::string_view hay, std::string_view word) {
  std::size_t pos = 0;
  while ((pos = hay.find(word, pos)) != std::string_view::npos) {
    const bool left = pos == 0 || !text::is_word_char(hay[pos - 1]);
    const std::size_t end = pos + word.size();
    const bool right = end >= hay.size() || !text::is_word_char(hay[end]);
    if (left && right) return true;
    pos = end;
  }
  return false;
}

// `lowered` must already be lower case.
Polarity scan(std::string_view lowered, AnswerFormat format) {
  const bool tf = format == AnswerFormat::kTrueFalse;
  return {has_word(lowered, tf ? "true" : "yes"), has_word(lowered, tf ? "false" : "no")};
}

std::optional<bool> decide(const Polarity& p) {
  if (p.positive == p.negative) return std::nullopt;
  return p.positive;
}

std::size_t rfind_word(std::string_view hay, std::string_view word) {
  std::size_t pos = hay.size();
  while (pos > 0) {
    pos = hay.rfind(word, pos - 1);
    if (pos == std::string_view::npos) return pos;
    const bool left = pos == 0 || !text::is_word_char(hay[pos - 1]);
    const std::size_t end = pos + word.size();
    const bool right = end >= hay.size() || !text::is_word_char(hay[end]);
    if (left && right) return pos;
  }
  return std::string_view::npos;
}

}  // namespace

std::optional<bool> extract_answer(std::string_view raw, AnswerFormat format) {
  const std::string lowered = text::to_lower(raw);
  const std::string_view s = lowered;
  for (std::string_view marker : {std::string_view("final answer"), std::string_view("answer")}) {
    const std::size_t pos = rfind_word(s, marker);
    if (pos != std::string_view::npos) return decide(scan(s.substr(pos + marker.size()), format));
  }
  std::vector<std::string> lines;
  for (auto& line : text::split_lines(s)) {
    if (!text::trim(line).empty()) lines.push_back(std::move(line));
  }
  if (lines.empty()) return std::nullopt;
  const Polarity last = scan(lines.back(), format);
  if (last.positive || last.negative) return decide(last);
  return decide(scan(lines.front(), format));
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

const logic::ParseOptions kTraceExprOptions{.allow_identifiers = true};

// Drops markdown emphasis, bullets and a leading "Step N:" label.
std::string normalize_line(std::string_view raw) {
  std::string line = text::trim(raw);
  bool changed = true;
  while (changed && !line.empty()) {
    changed = false;
    if (line[0] == '#' || line[0] == '*' || line[0] == '>') {
      line = text::trim(std::string_view(line).substr(1));
      changed = true;
    } else if (line.size() > 1 && line[0] == '-' && text::is_space(line[1])) {
      line = text::trim(std::string_view(line).substr(1));
      changed = true;
    }
  }
  static const std::regex step_label(R"(^step\s*\d+\s*[:.)-]\s*)", std::regex::icase);
  std::smatch m;
  if (std::regex_search(line, m, step_label)) line = line.substr(m.length(0));
  return line;
}

// Matches "<name>:" at the start of `line` (case-insensitive, tolerating
// markdown emphasis around the colon) and returns the remainder.
std::optional<std::string> match_header(const std::string& line, std::string_view name) {
  const std::string lowered = text::to_lower(line);
  if (!lowered.starts_with(name)) return std::nullopt;
  std::size_t i = name.size();
  while (i < line.size() && (line[i] == '*' || text::is_space(line[i]))) ++i;
  if (i >= line.size() || line[i] != ':') return std::nullopt;
  ++i;
  while (i < line.size() && line[i] == '*') ++i;
  return text::trim(std::string_view(line).substr(i));
}

std::optional<bool> parse_bool_token(std::string_view value) {
  const std::string lowered = text::to_lower(value);
  Polarity p = scan(lowered, AnswerFormat::kTrueFalse);
  if (!p.positive && !p.negative) p = scan(lowered, AnswerFormat::kYesNo);
  return decide(p);
}

void append_line(std::string& field, const std::string& line) {
  if (!field.empty()) field += '\n';
  field += line;
}

ReasoningTrace parse_lenient(std::string_view text) {
  ReasoningTrace t;
  t.raw = std::string(text);
  t.recovered = true;
  const auto lines = text::split_lines(text);
  std::size_t expr_line = lines.size();
  for (std::size_t i = 0; i < lines.size() && !t.expression; ++i) {
    const std::string line = normalize_line(lines[i]);
    std::vector<std::string> candidates{line};
    if (auto colon = line.rfind(':'); colon != std::string::npos) {
      candidates.push_back(text::trim(std::string_view(line).substr(colon + 1)));
    }
    for (auto c : candidates) {
      while (!c.empty() && (c.back() == '.' || c.back() == ',')) c.pop_back();
      try {
        logic::Expr e = logic::parse(c);
        const bool compound = e.kind() != logic::NodeKind::kVariable &&
                              e.kind() != logic::NodeKind::kLiteral;
        if (compound && !e.variables().empty()) {
          t.expression_text = c;
          t.expression = std::move(e);
          expr_line = i;
          break;
        }
      } catch (const logic::SyntaxError&) {
      }
    }
  }
  if (!t.expression) {
    throw ParseFailure(Section::kExpression, "no section headers and no expression-like line");
  }
  for (const auto& v : t.expression->variables()) {
    t.elements.push_back({v, ""});
    const std::regex pattern("(^|[^A-Za-z0-9_])" + v +
                             R"(\)?\s*(?::|=|is)?\s*(true|false|True|False|TRUE|FALSE)\b)");
    std::optional<bool> value;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (i == expr_line) continue;
      for (std::sregex_iterator it(lines[i].begin(), lines[i].end(), pattern), end; it != end; ++it) {
        value = text::to_lower((*it)[2].str()) == "true";
      }
    }
    if (value) t.qa.push_back({v, "", "", *value});
  }
  t.model_final = extract_answer(text, AnswerFormat::kTrueFalse);
  return t;
}

}  // namespace

ReasoningTrace parse_trace(std::string_view text, const ParseOptions& options) {
  ReasoningTrace t;
  t.raw = std::string(text);

  enum class Mode { kNone, kDecomposition, kExpressionNext, kQuestion, kRationale };
  Mode mode = Mode::kNone;
  std::set<Section> seen;
  std::optional<QaEntry> pending;  // question awaiting its answer
  static const std::regex element_re(R"(^([A-Z][A-Za-z0-9_]*)\s*[.):]\s+(.*)$)");
  static const std::regex question_re(
      R"(^question\s*\(\s*([A-Za-z][A-Za-z0-9_]*)\s*\)\s*:?\s*(.*)$)", std::regex::icase);

  auto close_pending = [&]() {
    if (pending) {
      throw ParseFailure(Section::kQuestions,
                         "question (" + pending->variable + ") has no answer");
    }
  };

  for (const auto& raw_line : text::split_lines(text)) {
    const std::string line = normalize_line(raw_line);
    if (line.empty()) continue;
    std::smatch m;

    if (auto rest = match_header(line, "final answer")) {
      close_pending();
      seen.insert(Section::kFinalAnswer);
      t.model_final = parse_bool_token(*rest);
      break;
    }
    if (auto rest = match_header(line, "rule decomposition")) {
      close_pending();
      seen.insert(Section::kDecomposition);
      mode = Mode::kDecomposition;
      continue;
    }
    if (auto rest = match_header(line, "logical expression")) {
      close_pending();
      seen.insert(Section::kExpression);
      t.expression_text = *rest;
      mode = rest->empty() ? Mode::kExpressionNext : Mode::kNone;
      continue;
    }
    if (auto rest = match_header(line, "question answering")) {
      close_pending();
      seen.insert(Section::kQuestions);
      mode = Mode::kNone;
      continue;
    }
    if (auto rest = match_header(line, "recomposition")) {
      close_pending();
      seen.insert(Section::kRecomposition);
      t.recomposition_text = *rest;
      mode = Mode::kNone;
      continue;
    }
    if (auto rest = match_header(line, "resolution")) {
      close_pending();
      seen.insert(Section::kResolution);
      t.resolution_text = *rest;
      mode = Mode::kNone;
      continue;
    }
    if (std::regex_match(line, m, question_re)) {
      close_pending();
      seen.insert(Section::kQuestions);
      pending = QaEntry{m[1].str(), text::trim(m[2].str()), "", false};
      mode = Mode::kQuestion;
      continue;
    }
    if (pending) {
      if (auto rest = match_header(line, "rationale")) {
        pending->rationale = *rest;
        mode = Mode::kRationale;
        continue;
      }
      if (auto rest = match_header(line, "answer")) {
        auto value = parse_bool_token(*rest);
        if (!value) {
          throw ParseFailure(Section::kQuestions,
                             "answer for (" + pending->variable + ") is not true/false");
        }
        pending->answer = *value;
        for (const auto& q : t.qa) {
          if (q.variable == pending->variable) {
            throw ParseFailure(Section::kQuestions,
                               "variable " + q.variable + " answered twice");
          }
        }
        t.qa.push_back(std::move(*pending));
        pending.reset();
        mode = Mode::kNone;
        continue;
      }
    }

    switch (mode) {
      case Mode::kDecomposition:
        if (std::regex_match(line, m, element_re)) {
          t.elements.push_back({m[1].str(), text::trim(m[2].str())});
        } else if (!t.elements.empty()) {
          append_line(t.elements.back().text, line);
        }
        break;
      case Mode::kExpressionNext:
        t.expression_text = line;
        mode = Mode::kNone;
        break;
      case Mode::kQuestion:
        append_line(pending->question, line);
        break;
      case Mode::kRationale:
        append_line(pending->rationale, line);
        break;
      case Mode::kNone:
        break;
    }
  }
  close_pending();

  if (seen.empty() && options.lenient) return parse_lenient(text);

  for (Section s : {Section::kDecomposition, Section::kExpression, Section::kQuestions,
                    Section::kRecomposition, Section::kResolution, Section::kFinalAnswer}) {
    if (options.required.contains(s) && !seen.contains(s)) {
      throw ParseFailure(s, "section missing");
    }
  }

  if (seen.contains(Section::kExpression)) {
    // Models often wrap the expression in code spans or trailing periods.
    while (!t.expression_text.empty() && (t.expression_text.front() == '`' || t.expression_text.front() == '*')) {
      t.expression_text.erase(0, 1);
    }
    while (!t.expression_text.empty() &&
           (t.expression_text.back() == '`' || t.expression_text.back() == '*' || t.expression_text.back() == '.')) {
      t.expression_text.pop_back();
    }
    t.expression_text = text::trim(t.expression_text);
    if (t.expression_text.empty()) throw ParseFailure(Section::kExpression, "empty expression");
    try {
      t.expression = logic::parse(t.expression_text, kTraceExprOptions);
    } catch (const logic::SyntaxError& e) {
      throw ParseFailure(Section::kExpression, e.what());
    }
  }

  if (seen.contains(Section::kDecomposition)) {
    std::set<std::string> declared;
    for (const auto& e : t.elements) {
      if (!declared.insert(e.variable).second) {
        throw ParseFailure(Section::kDecomposition, "duplicate element " + e.variable);
      }
    }
    if (t.expression) {
      for (const auto& v : t.expression->variables()) {
        if (!declared.contains(v)) {
          throw ParseFailure(Section::kDecomposition, "variable " + v + " has no element");
        }
      }
    }
  }
  return t;
}

std::string render_trace(const ReasoningTrace& t, const std::set<Section>& omit) {
  std::string out;
  auto line = [&out](const std::string& s) {
    out += s;
    out += '\n';
  };
  if (!omit.contains(Section::kDecomposition)) {
    line("Rule decomposition:");
    for (const auto& e : t.elements) line(e.variable + ". " + e.text);
  }
  if (!omit.contains(Section::kExpression)) {
    line("Logical expression: " + t.expression_text);
  }
  if (!omit.contains(Section::kQuestions)) {
    line("Question answering:");
    for (const auto& q : t.qa) {
      line("Question (" + q.variable + "): " + q.question);
      if (!q.rationale.empty()) line("Rationale: " + q.rationale);
      line(std::string("Answer: ") + (q.answer ? "true" : "false"));
    }
  }
  if (!omit.contains(Section::kRecomposition)) {
    line("Recomposition: " + t.recomposition_text);
  }
  if (!omit.contains(Section::kResolution) && !t.resolution_text.empty()) {
    line("Resolution: " + t.resolution_text);
  }
  if (!omit.contains(Section::kFinalAnswer)) {
    out += "Final answer:";
    if (t.model_final) out += *t.model_final ? " true" : " false";
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verification

std::string_view to_string(ErrorClass error) {
  switch (error) {
    case ErrorClass::kNone:
      return "None";
    case ErrorClass::kParseFailure:
      return "ParseFailure";
    case ErrorClass::kIncompleteDecomposition:
      return "IncompleteDecomposition";
    case ErrorClass::kLogicError:
      return "LogicError";
    case ErrorClass::kElementError:
      return "ElementError";
    case ErrorClass::kAmbiguousAnswer:
      return "AmbiguousAnswer";
  }
  return "None";
}

ErrorClass error_class_from_string(std::string_view name) {
  for (ErrorClass e : {ErrorClass::kNone, ErrorClass::kParseFailure,
                       ErrorClass::kIncompleteDecomposition, ErrorClass::kLogicError,
                       ErrorClass::kElementError, ErrorClass::kAmbiguousAnswer}) {
    if (to_string(e) == name) return e;
  }
  throw std::invalid_argument("unknown error class '" + std::string(name) + "'");
}

nlohmann::json Verdict::to_json() const {
  nlohmann::json j;
  j["independent_answer"] =
      independent_answer ? nlohmann::json(*independent_answer) : nlohmann::json();
  j["faithful"] = faithful;
  j["error_class"] = std::string(to_string(error_class));
  j["element_errors"] = element_errors;
  j["correct"] = correct ? nlohmann::json(*correct) : nlohmann::json();
  j["warnings"] = warnings;
  return j;
}

Verdict Verdict::from_json(const nlohmann::json& j) {
  Verdict v;
  if (!j.at("independent_answer").is_null()) v.independent_answer = j.at("independent_answer").get<bool>();
  v.faithful = j.at("faithful").get<bool>();
  v.error_class = error_class_from_string(j.at("error_class").get<std::string>());
  v.element_errors = j.at("element_errors").get<std::vector<std::string>>();
  if (!j.at("correct").is_null()) v.correct = j.at("correct").get<bool>();
  v.warnings = j.at("warnings").get<std::vector<std::string>>();
  return v;
}

namespace {

void check_recomposition(const ReasoningTrace& t, Verdict& v) {
  if (t.recomposition_text.empty() || !t.complete()) return;
  const std::string expected = logic::substitute(*t.expression, t.assignment());
  bool matches = false;
  try {
    matches = logic::parse(t.recomposition_text) == logic::parse(expected);
  } catch (const logic::SyntaxError&) {
    matches = text::to_lower(text::squash_spaces(t.recomposition_text)) == expected;
  }
  if (!matches) {
    v.warnings.push_back("recomposition '" + t.recomposition_text +
                         "' differs from substituted expression '" + expected + "'");
  }
}

}  // namespace

Verdict verify(const ReasoningTrace& t) {
  Verdict v;
  if (!t.expression) {
    v.warnings.push_back("trace has no logical expression; nothing to re-evaluate");
    v.error_class = t.model_final ? ErrorClass::kNone : ErrorClass::kAmbiguousAnswer;
    return v;
  }
  if (!t.complete()) {
    v.error_class = ErrorClass::kIncompleteDecomposition;
    std::string missing;
    for (const auto& m : t.missing_variables()) missing += (missing.empty() ? "" : ", ") + m;
    v.warnings.push_back("no sub-answer for " + missing);
    return v;
  }
  v.independent_answer = logic::evaluate(*t.expression, t.assignment());
  check_recomposition(t, v);
  if (!t.model_final) {
    v.error_class = ErrorClass::kAmbiguousAnswer;
    return v;
  }
  v.faithful = *t.model_final == *v.independent_answer;
  v.error_class = v.faithful ? ErrorClass::kNone : ErrorClass::kLogicError;
  return v;
}

Verdict verify(const ReasoningTrace& t, const logic::Assignment& element_gold) {
  Verdict v = verify(t);
  const auto answers = t.assignment();
  for (const auto& [variable, gold] : element_gold) {
    auto it = answers.find(variable);
    if (it != answers.end() && it->second != gold) v.element_errors.push_back(variable);
  }
  if (v.error_class == ErrorClass::kNone && !v.element_errors.empty()) {
    v.error_class = ErrorClass::kElementError;
  }
  return v;
}

Verdict parse_failure_verdict(const ParseFailure& failure) {
  Verdict v;
  v.error_class = ErrorClass::kParseFailure;
  v.warnings.push_back(failure.what());
  return v;
}

}  // namespace rulechain::trace
