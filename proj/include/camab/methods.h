#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "camab/attribution.h"
#include "camab/bandit.h"
#include "camab/baselines.h"

namespace camab {

enum class Method { kCts, kShap, kContextCite, kLoo };

std::string_view MethodName(Method method);
std::optional<Method> ParseMethod(std::string_view name);
// Parses a comma-separated list; throws ValidationError on unknown names.
std::vector<Method> ParseMethodList(std::string_view names);

struct MethodSettings {
  CtsConfig cts;                  // max_rounds is replaced by the budget
  ContextCiteOptions contextcite; // n_samples is replaced by the budget
};

// Anchor queries (empty and full context) charged on top of a budget.
inline constexpr uint64_t kAnchorCharge = 2;

// Smallest budget s for which the method can run on `instance`.
size_t MinimumBudget(Method method, const Instance& instance);

// Runs `method` with query budget s: CTS rounds, KernelSHAP samples and
// ContextCite ablations all equal s; leave-one-out needs s >= N + 1. The
// oracle's ledger is expected to carry the s + kAnchorCharge limit.
AttributionResult RunMethod(Method method, const Instance& instance,
                            LikelihoodOracle& oracle, size_t budget,
                            uint64_t seed, const MethodSettings& settings);

}  // namespace camab
