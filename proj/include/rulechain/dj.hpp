#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rulechain/sample.hpp"

// Diversity jurisdiction: structured fact patterns, the symbolic oracle and
// the synthetic sample generator for complexity levels 1-6.
namespace rulechain::dj {

inline constexpr std::int64_t kAmountThreshold = 75'000;

inline constexpr std::string_view kRuleText =
    "Diversity jurisdiction exists when there is (1) complete diversity between plaintiffs and "
    "defendants, and (2) the amount-in-controversy (AiC) is greater than $75k.";
inline constexpr std::string_view kIssueText = "Is there diversity jurisdiction?";

struct Party {
  std::string name;
  std::string state;
  friend bool operator==(const Party&, const Party&) = default;
};

/// A cause of action brought by one or more plaintiffs (jointly, "both sue")
/// against one defendant. Each listed plaintiff claims the full amount.
struct Claim {
  std::vector<std::string> plaintiffs;
  std::string defendant;
  std::string cause;
  std::int64_t amount = 0;
  friend bool operator==(const Claim&, const Claim&) = default;
};

struct FactPattern {
  std::vector<Party> plaintiffs;
  std::vector<Party> defendants;
  std::vector<Claim> claims;

  /// Throws ConfigError on duplicate names, undeclared parties or
  /// non-positive amounts.
  void validate() const;

  nlohmann::json to_json() const;
  static FactPattern from_json(const nlohmann::json& j);

  friend bool operator==(const FactPattern&, const FactPattern&) = default;
};

enum class AicPolicy {
  kEveryPairExceeds,       // every plaintiff-defendant pair with a claim
  kAnyPairExceeds,         // at least one pair
  kPerPlaintiffAggregate,  // every plaintiff's total across all defendants
};

std::string_view to_string(AicPolicy policy);
AicPolicy aic_policy_from_string(std::string_view name);

using PartyPair = std::pair<std::string, std::string>;  // (plaintiff, defendant)

struct DjVerdict {
  bool complete_diversity = false;
  bool aic_satisfied = false;
  bool answer = false;
  std::map<PartyPair, std::int64_t> per_pair_totals;

  nlohmann::json to_json() const;
  friend bool operator==(const DjVerdict&, const DjVerdict&) = default;
};

DjVerdict oracle(const FactPattern& facts, AicPolicy policy = AicPolicy::kEveryPairExceeds);

/// Sentence-per-fact rendering in the style of the benchmark fact patterns:
/// "X is from S." declarations, then "X sues Y for <cause> for $N." claims.
std::string render_facts(const FactPattern& facts);

/// Inverse of render_facts. Throws ConfigError on text it cannot read.
FactPattern parse_facts(std::string_view text);

struct LevelShape {
  int plaintiffs;
  int defendants;
  int claims;  // claim records in the fact pattern
};

/// Party and claim counts for a complexity level (1-6).
LevelShape level_shape(int level);

struct GeneratedSample {
  Sample sample;
  FactPattern facts;
  DjVerdict verdict;
};

/// `n` samples at `level`, labels balanced to within one sample by
/// rejection sampling. Deterministic for a given seed.
std::vector<GeneratedSample> generate(int level, std::size_t n, std::uint64_t seed,
                                      AicPolicy policy = AicPolicy::kEveryPairExceeds);

/// Audit record with the structured facts and element-level verdict.
nlohmann::json sidecar(const std::vector<GeneratedSample>& samples, AicPolicy policy);

std::string format_amount(std::int64_t amount);

}  // namespace rulechain::dj
