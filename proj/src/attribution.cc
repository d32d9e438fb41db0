#include "camab/attribution.h"

#include <algorithm>
#include <numeric>

#include "camab/errors.h"

namespace camab {

using nlohmann::json;

std::vector<size_t> Rank(std::span<const double> scores) {
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] > scores[b];
  });
  return order;
}

json ToJson(const AttributionResult& result) {
  // Key order is fixed by nlohmann's sorted object map.
  return {{"instance_id", result.instance_id},
          {"method", result.method},
          {"scores", result.scores},
          {"ranking", result.ranking},
          {"oracle_calls", result.oracle_calls},
          {"seed", result.seed}};
}

AttributionResult AttributionFromJson(const json& j) {
  AttributionResult r;
  try {
    r.instance_id = j.at("instance_id").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.scores = j.at("scores").get<std::vector<double>>();
    r.ranking = j.at("ranking").get<std::vector<size_t>>();
    r.oracle_calls = j.at("oracle_calls").get<uint64_t>();
    r.seed = j.at("seed").get<uint64_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid attribution record: ") +
                          e.what());
  }
  if (r.ranking.size() != r.scores.size()) {
    throw ValidationError("attribution for '" + r.instance_id +
                          "' has mismatched scores and ranking");
  }
  std::vector<bool> seen(r.scores.size(), false);
  for (size_t j : r.ranking) {
    if (j >= seen.size() || seen[j]) {
      throw ValidationError("attribution for '" + r.instance_id +
                            "' has a ranking that is not a permutation");
    }
    seen[j] = true;
  }
  return r;
}

}  // namespace camab
