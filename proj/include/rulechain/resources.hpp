#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Files from data/templates and data/demos compiled into the library.
namespace rulechain::resources {

/// Looks up a resource by its path relative to data/, e.g. "templates/input.txt".
std::optional<std::string_view> find(const std::string& name);

/// Resource names starting with `prefix`, sorted.
std::vector<std::string> list(const std::string& prefix);

}  // namespace rulechain::resources
