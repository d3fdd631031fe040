#include "rulechain/dj.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <regex>
#include <set>
#include <stdexcept>

#include "text_util.hpp"

namespace rulechain::dj {

namespace {

constexpr std::array<std::string_view, 40> kNames = {
    "James",    "Lucas",    "Sophia",   "Benjamin", "Noah",      "William", "Theodore",
    "Emma",     "Mia",      "Evelyn",   "Elijah",   "Ava",       "Amelia",  "Olivia",
    "Liam",     "Charlotte", "Henry",   "Harper",   "Oliver",    "Isabella", "Mason",
    "Abigail",  "Ethan",    "Emily",    "Daniel",   "Ella",      "Logan",   "Grace",
    "Samuel",   "Chloe",    "Jack",     "Lily",     "Owen",      "Zoey",    "Caleb",
    "Nora",     "Isaac",    "Hazel",    "Wyatt",    "Aria"};

constexpr std::array<std::string_view, 50> kStates = {
    "Alabama",       "Alaska",        "Arizona",       "Arkansas",       "California",
    "Colorado",      "Connecticut",   "Delaware",      "Florida",        "Georgia",
    "Hawaii",        "Idaho",         "Illinois",      "Indiana",        "Iowa",
    "Kansas",        "Kentucky",      "Louisiana",     "Maine",          "Maryland",
    "Massachusetts", "Michigan",      "Minnesota",     "Mississippi",    "Missouri",
    "Montana",       "Nebraska",      "Nevada",        "New Hampshire",  "New Jersey",
    "New Mexico",    "New York",      "North Carolina", "North Dakota",  "Ohio",
    "Oklahoma",      "Oregon",        "Pennsylvania",  "Rhode Island",   "South Carolina",
    "South Dakota",  "Tennessee",     "Texas",         "Utah",           "Vermont",
    "Virginia",      "Washington",    "West Virginia", "Wisconsin",      "Wyoming"};

constexpr std::array<std::string_view, 12> kCauses = {
    "negligence",          "defamation",         "medical malpractice", "copyright infringement",
    "trademark infringement", "securities fraud", "breach of contract",  "battery",
    "trespass",            "conversion",         "wrongful termination", "patent infringement"};

std::string join_and(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += " and ";
    out += items[i];
  }
  return out;
}

std::vector<std::string> split_and(const std::string& s) {
  std::vector<std::string> out;
  static const std::regex sep(R"(\s*(?:,\s*and\s+|,\s*|\s+and\s+)\s*)");
  for (std::sregex_token_iterator it(s.begin(), s.end(), sep, -1), end; it != end; ++it) {
    std::string part = text::trim(it->str());
    if (!part.empty()) out.push_back(std::move(part));
  }
  return out;
}

}  // namespace

std::string format_amount(std::int64_t amount) {
  std::string digits = std::to_string(amount);
  std::string out;
  const int n = static_cast<int>(digits.size());
  for (int i = 0; i < n; ++i) {
    if (i > 0 && (n - i) % 3 == 0) out += ',';
    out += digits[static_cast<std::size_t>(i)];
  }
  return "$" + out;
}

void FactPattern::validate() const {
  std::set<std::string> names;
  std::set<std::string> p_names;
  std::set<std::string> d_names;
  for (const auto& p : plaintiffs) {
    if (!names.insert(p.name).second) throw ConfigError("duplicate party name " + p.name);
    p_names.insert(p.name);
  }
  for (const auto& d : defendants) {
    if (!names.insert(d.name).second) throw ConfigError("duplicate party name " + d.name);
    d_names.insert(d.name);
  }
  for (const auto& c : claims) {
    if (c.plaintiffs.empty()) throw ConfigError("claim without plaintiff");
    for (const auto& p : c.plaintiffs) {
      if (!p_names.contains(p)) throw ConfigError("claim names undeclared plaintiff " + p);
    }
    if (!d_names.contains(c.defendant)) {
      throw ConfigError("claim names undeclared defendant " + c.defendant);
    }
    if (c.amount <= 0) throw ConfigError("claim amount must be positive");
  }
}

nlohmann::json FactPattern::to_json() const {
  nlohmann::json j;
  auto parties = [](const std::vector<Party>& ps) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& p : ps) a.push_back({{"name", p.name}, {"state", p.state}});
    return a;
  };
  j["plaintiffs"] = parties(plaintiffs);
  j["defendants"] = parties(defendants);
  j["claims"] = nlohmann::json::array();
  for (const auto& c : claims) {
    j["claims"].push_back({{"plaintiffs", c.plaintiffs},
                           {"defendant", c.defendant},
                           {"cause", c.cause},
                           {"amount", c.amount}});
  }
  return j;
}

FactPattern FactPattern::from_json(const nlohmann::json& j) {
  FactPattern fp;
  for (const auto& p : j.at("plaintiffs")) fp.plaintiffs.push_back({p.at("name"), p.at("state")});
  for (const auto& d : j.at("defendants")) fp.defendants.push_back({d.at("name"), d.at("state")});
  for (const auto& c : j.at("claims")) {
    fp.claims.push_back({c.at("plaintiffs").get<std::vector<std::string>>(), c.at("defendant"),
                         c.at("cause"), c.at("amount").get<std::int64_t>()});
  }
  fp.validate();
  return fp;
}

std::string_view to_string(AicPolicy policy) {
  switch (policy) {
    case AicPolicy::kEveryPairExceeds:
      return "every_pair_exceeds";
    case AicPolicy::kAnyPairExceeds:
      return "any_pair_exceeds";
    case AicPolicy::kPerPlaintiffAggregate:
      return "per_plaintiff_aggregate";
  }
  return "every_pair_exceeds";
}

AicPolicy aic_policy_from_string(std::string_view name) {
  for (AicPolicy p : {AicPolicy::kEveryPairExceeds, AicPolicy::kAnyPairExceeds,
                      AicPolicy::kPerPlaintiffAggregate}) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("unknown amount-in-controversy policy '" + std::string(name) + "'");
}

nlohmann::json DjVerdict::to_json() const {
  nlohmann::json j;
  j["complete_diversity"] = complete_diversity;
  j["aic_satisfied"] = aic_satisfied;
  j["answer"] = answer;
  j["per_pair_totals"] = nlohmann::json::array();
  for (const auto& [pair, total] : per_pair_totals) {
    j["per_pair_totals"].push_back(
        {{"plaintiff", pair.first}, {"defendant", pair.second}, {"total", total}});
  }
  return j;
}

DjVerdict oracle(const FactPattern& facts, AicPolicy policy) {
  DjVerdict v;
  v.complete_diversity = true;
  for (const auto& p : facts.plaintiffs) {
    for (const auto& d : facts.defendants) {
      if (p.state == d.state) v.complete_diversity = false;
    }
  }
  std::map<std::string, std::int64_t> per_plaintiff;
  for (const auto& c : facts.claims) {
    for (const auto& p : c.plaintiffs) {
      v.per_pair_totals[{p, c.defendant}] += c.amount;
      per_plaintiff[p] += c.amount;
    }
  }
  auto exceeds = [](std::int64_t total) { return total > kAmountThreshold; };
  switch (policy) {
    case AicPolicy::kEveryPairExceeds:
      v.aic_satisfied = !v.per_pair_totals.empty() &&
                        std::all_of(v.per_pair_totals.begin(), v.per_pair_totals.end(),
                                    [&](const auto& kv) { return exceeds(kv.second); });
      break;
    case AicPolicy::kAnyPairExceeds:
      v.aic_satisfied = std::any_of(v.per_pair_totals.begin(), v.per_pair_totals.end(),
                                    [&](const auto& kv) { return exceeds(kv.second); });
      break;
    case AicPolicy::kPerPlaintiffAggregate:
      v.aic_satisfied = !per_plaintiff.empty() &&
                        std::all_of(per_plaintiff.begin(), per_plaintiff.end(),
                                    [&](const auto& kv) { return exceeds(kv.second); });
      break;
  }
  v.answer = v.complete_diversity && v.aic_satisfied;
  return v;
}

// ---------------------------------------------------------------------------
// Rendering

std::string render_facts(const FactPattern& facts) {
  std::vector<std::string> sentences;
  for (const auto& p : facts.plaintiffs) sentences.push_back(p.name + " is from " + p.state + ".");
  for (const auto& d : facts.defendants) sentences.push_back(d.name + " is from " + d.state + ".");

  struct Group {
    std::vector<std::string> plaintiffs;
    std::vector<std::string> defendants;
    std::vector<std::pair<std::string, std::int64_t>> items;
  };
  std::vector<Group> groups;
  for (const auto& c : facts.claims) {
    if (!groups.empty() && groups.back().plaintiffs == c.plaintiffs &&
        groups.back().defendants.size() == 1 && groups.back().defendants.front() == c.defendant) {
      groups.back().items.emplace_back(c.cause, c.amount);
    } else {
      groups.push_back({c.plaintiffs, {c.defendant}, {{c.cause, c.amount}}});
    }
  }
  // Identical claims against consecutive defendants read as "sues X and Y each".
  std::vector<Group> merged;
  for (auto& g : groups) {
    if (!merged.empty() && merged.back().plaintiffs == g.plaintiffs &&
        merged.back().items == g.items) {
      merged.back().defendants.push_back(g.defendants.front());
    } else {
      merged.push_back(std::move(g));
    }
  }
  for (const auto& g : merged) {
    std::string s = join_and(g.plaintiffs);
    s += g.plaintiffs.size() == 1 ? " sues " : g.plaintiffs.size() == 2 ? " both sue " : " all sue ";
    s += join_and(g.defendants);
    if (g.defendants.size() > 1) s += " each";
    s += " for ";
    std::vector<std::string> items;
    for (const auto& [cause, amount] : g.items) items.push_back(cause + " for " + format_amount(amount));
    s += join_and(items);
    s += '.';
    sentences.push_back(std::move(s));
  }
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

FactPattern parse_facts(std::string_view input) {
  const std::string text(input);
  static const std::regex sentence_end(R"(\.(?:\s+|$))");
  static const std::regex declaration(R"(^([A-Z][A-Za-z'-]*) is from ([A-Z][A-Za-z ]*)$)");
  static const std::regex lawsuit(R"(^(.+?) (sues|both sue|all sue) (.+?)( each)? for (.+)$)");
  static const std::regex item(R"(([a-z][a-z ]*?) for \$([0-9][0-9,]*))");

  std::vector<Party> declared;
  std::vector<std::string> plaintiff_order;
  std::vector<std::string> defendant_order;
  std::vector<Claim> claims;

  for (std::sregex_token_iterator it(text.begin(), text.end(), sentence_end, -1), end; it != end;
       ++it) {
    const std::string sentence = text::trim(it->str());
    if (sentence.empty()) continue;
    std::smatch m;
    if (std::regex_match(sentence, m, declaration)) {
      declared.push_back({m[1].str(), text::trim(m[2].str())});
      continue;
    }
    if (!std::regex_match(sentence, m, lawsuit)) {
      throw ConfigError("cannot read fact sentence '" + sentence + "'");
    }
    const auto plaintiffs = split_and(m[1].str());
    const auto defendants = split_and(m[3].str());
    const std::string items_text = m[5].str();
    std::vector<std::pair<std::string, std::int64_t>> items;
    for (std::sregex_iterator ii(items_text.begin(), items_text.end(), item), iend; ii != iend; ++ii) {
      std::string cause = text::trim((*ii)[1].str());
      if (cause.starts_with("and ")) cause = text::trim(cause.substr(4));
      std::string digits;
      for (char c : (*ii)[2].str()) {
        if (c != ',') digits += c;
      }
      items.emplace_back(std::move(cause), std::stoll(digits));
    }
    if (items.empty()) throw ConfigError("no claim amounts in '" + sentence + "'");
    for (const auto& p : plaintiffs) {
      if (std::find(plaintiff_order.begin(), plaintiff_order.end(), p) == plaintiff_order.end()) {
        plaintiff_order.push_back(p);
      }
    }
    for (const auto& d : defendants) {
      if (std::find(defendant_order.begin(), defendant_order.end(), d) == defendant_order.end()) {
        defendant_order.push_back(d);
      }
      for (const auto& [cause, amount] : items) claims.push_back({plaintiffs, d, cause, amount});
    }
  }

  FactPattern fp;
  auto state_of = [&](const std::string& name) -> const std::string& {
    for (const auto& p : declared) {
      if (p.name == name) return p.state;
    }
    throw ConfigError("party " + name + " has no declared state");
  };
  // Declaration order decides party order within each side.
  for (const auto& p : declared) {
    const bool is_p = std::find(plaintiff_order.begin(), plaintiff_order.end(), p.name) !=
                      plaintiff_order.end();
    const bool is_d = std::find(defendant_order.begin(), defendant_order.end(), p.name) !=
                      defendant_order.end();
    if (is_p && is_d) throw ConfigError(p.name + " is both plaintiff and defendant");
    if (is_p) fp.plaintiffs.push_back(p);
    if (is_d) fp.defendants.push_back(p);
  }
  for (const auto& n : plaintiff_order) state_of(n);
  for (const auto& n : defendant_order) state_of(n);
  fp.claims = std::move(claims);
  fp.validate();
  return fp;
}

// ---------------------------------------------------------------------------
// Generation

LevelShape level_shape(int level) {
  switch (level) {
    case 1:
      return {1, 1, 1};
    case 2:
      return {1, 2, 2};
    case 3:
      return {1, 1, 2};
    case 4:
      return {2, 1, 1};
    case 5:
      return {2, 1, 2};
    case 6:
      return {2, 2, 4};
    default:
      throw ConfigError("diversity jurisdiction level must be in 1..6, got " + std::to_string(level));
  }
}

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, n) by rejection, so results do not depend on the
  // standard library's distribution implementation.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

template <std::size_t N>
std::vector<std::string> pick_distinct(Rng& rng, const std::array<std::string_view, N>& pool,
                                       std::size_t count) {
  std::vector<std::string> all(pool.begin(), pool.end());
  rng.shuffle(all);
  all.resize(count);
  return all;
}

std::int64_t draw_amount(Rng& rng) {
  const auto bucket = rng.below(10);
  if (bucket < 4) return rng.between(1, 74) * 1'000;
  if (bucket < 8) return rng.between(76, 150) * 1'000;
  if (bucket < 9) return kAmountThreshold;
  return rng.between(10, 90) * 100'000;
}

FactPattern draw_pattern(Rng& rng, int level) {
  const LevelShape shape = level_shape(level);
  const auto names = pick_distinct(rng, kNames, static_cast<std::size_t>(shape.plaintiffs + shape.defendants));
  FactPattern fp;
  for (int i = 0; i < shape.plaintiffs; ++i) {
    fp.plaintiffs.push_back({names[static_cast<std::size_t>(i)], std::string(kStates[rng.below(kStates.size())])});
  }
  for (int i = 0; i < shape.defendants; ++i) {
    fp.defendants.push_back({names[static_cast<std::size_t>(shape.plaintiffs + i)],
                             std::string(kStates[rng.below(kStates.size())])});
  }
  if (rng.below(2) == 0) {
    auto& d = fp.defendants[rng.below(fp.defendants.size())];
    d.state = fp.plaintiffs[rng.below(fp.plaintiffs.size())].state;
  }

  const auto causes = pick_distinct(rng, kCauses, 4);
  std::vector<std::string> all_plaintiffs;
  for (const auto& p : fp.plaintiffs) all_plaintiffs.push_back(p.name);
  const std::string& p0 = fp.plaintiffs[0].name;
  const std::string& d0 = fp.defendants[0].name;
  switch (level) {
    case 1:
      fp.claims = {{{p0}, d0, causes[0], draw_amount(rng)}};
      break;
    case 2: {
      const std::int64_t amount = draw_amount(rng);
      fp.claims = {{{p0}, d0, causes[0], amount}, {{p0}, fp.defendants[1].name, causes[0], amount}};
      break;
    }
    case 3:
      fp.claims = {{{p0}, d0, causes[0], draw_amount(rng)}, {{p0}, d0, causes[1], draw_amount(rng)}};
      break;
    case 4:
      fp.claims = {{all_plaintiffs, d0, causes[0], draw_amount(rng)}};
      break;
    case 5:
      fp.claims = {{all_plaintiffs, d0, causes[0], draw_amount(rng)},
                   {all_plaintiffs, d0, causes[1], draw_amount(rng)}};
      break;
    case 6: {
      const std::string& d1 = fp.defendants[1].name;
      fp.claims = {{all_plaintiffs, d0, causes[0], draw_amount(rng)},
                   {all_plaintiffs, d0, causes[1], draw_amount(rng)},
                   {all_plaintiffs, d1, causes[2], draw_amount(rng)},
                   {all_plaintiffs, d1, causes[3], draw_amount(rng)}};
      break;
    }
  }
  return fp;
}

}  // namespace

std::vector<GeneratedSample> generate(int level, std::size_t n, std::uint64_t seed,
                                      AicPolicy policy) {
  level_shape(level);
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(level));
  std::vector<bool> targets(n, false);
  for (std::size_t i = 0; i < n / 2; ++i) targets[i] = true;
  if (n % 2 == 1) targets[n / 2] = rng.below(2) == 0;
  rng.shuffle(targets);

  constexpr int kMaxAttempts = 100'000;
  std::vector<GeneratedSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxAttempts) {
        throw std::runtime_error("diversity generator failed to hit the target label");
      }
      FactPattern fp = draw_pattern(rng, level);
      DjVerdict v = oracle(fp, policy);
      if (v.answer != targets[i]) continue;
      Sample s;
      s.id = "dj" + std::to_string(level) + "-" + std::to_string(seed) + "-" + std::to_string(i);
      s.rule_text = std::string(kRuleText);
      s.facts = render_facts(fp);
      s.issue = std::string(kIssueText);
      s.gold = v.answer;
      s.family = RuleFamily::diversity_jurisdiction(level);
      out.push_back({std::move(s), std::move(fp), std::move(v)});
      break;
    }
  }
  return out;
}

nlohmann::json sidecar(const std::vector<GeneratedSample>& samples, AicPolicy policy) {
  nlohmann::json j;
  j["aic_policy"] = std::string(to_string(policy));
  j["samples"] = nlohmann::json::array();
  for (const auto& g : samples) {
    j["samples"].push_back(
        {{"id", g.sample.id}, {"fact_pattern", g.facts.to_json()}, {"verdict", g.verdict.to_json()}});
  }
  return j;
}

}  // namespace rulechain::dj
