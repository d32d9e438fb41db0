#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace camab {

// Method identifiers as they appear in serialized results.
inline constexpr std::string_view kMethodCts = "cts";
inline constexpr std::string_view kMethodShap = "shap";
inline constexpr std::string_view kMethodContextCite = "contextcite";
inline constexpr std::string_view kMethodLoo = "loo";

struct AttributionResult {
  std::string instance_id;
  std::string method;
  std::vector<double> scores;   // a_j, one per segment
  std::vector<size_t> ranking;  // segment indices, best first
  uint64_t oracle_calls = 0;
  uint64_t seed = 0;

  bool operator==(const AttributionResult&) const = default;
};

// Indices sorted by descending score; ties keep ascending index order.
std::vector<size_t> Rank(std::span<const double> scores);

nlohmann::json ToJson(const AttributionResult& result);
AttributionResult AttributionFromJson(const nlohmann::json& j);

}  // namespace camab
