#include "camab/methods.h"

#include "camab/errors.h"

namespace camab {

std::string_view MethodName(Method method) {
  switch (method) {
    case Method::kCts:
      return kMethodCts;
    case Method::kShap:
      return kMethodShap;
    case Method::kContextCite:
      return kMethodContextCite;
    case Method::kLoo:
      return kMethodLoo;
  }
  return "unknown";
}

std::optional<Method> ParseMethod(std::string_view name) {
  if (name == kMethodCts) return Method::kCts;
  if (name == kMethodShap) return Method::kShap;
  if (name == kMethodContextCite) return Method::kContextCite;
  if (name == kMethodLoo) return Method::kLoo;
  return std::nullopt;
}

std::vector<Method> ParseMethodList(std::string_view names) {
  std::vector<Method> out;
  size_t pos = 0;
  while (pos <= names.size()) {
    size_t comma = names.find(',', pos);
    if (comma == std::string_view::npos) comma = names.size();
    const std::string_view name = names.substr(pos, comma - pos);
    pos = comma + 1;
    if (name.empty()) continue;
    auto method = ParseMethod(name);
    if (!method) {
      throw ValidationError("unknown method '" + std::string(name) +
                            "' (expected cts, shap, contextcite or loo)");
    }
    out.push_back(*method);
  }
  if (out.empty()) throw ValidationError("no method given");
  return out;
}

size_t MinimumBudget(Method method, const Instance& instance) {
  const size_t n = instance.n_segments();
  switch (method) {
    case Method::kCts:
      return 1;
    case Method::kShap:
      return std::max<size_t>(1, n - 1);
    case Method::kContextCite:
      return 2;
    case Method::kLoo:
      return n + 1;
  }
  return 1;
}

AttributionResult RunMethod(Method method, const Instance& instance,
                            LikelihoodOracle& oracle, size_t budget,
                            uint64_t seed, const MethodSettings& settings) {
  if (budget < MinimumBudget(method, instance)) {
    throw ContractError("budget " + std::to_string(budget) + " is below the " +
                        std::string(MethodName(method)) + " minimum of " +
                        std::to_string(MinimumBudget(method, instance)) +
                        " for instance '" + instance.id + "'");
  }
  switch (method) {
    case Method::kCts: {
      CtsConfig config = settings.cts;
      config.max_rounds = budget;
      config.seed = seed;
      return RunCts(instance, oracle, config);
    }
    case Method::kShap:
      return KernelShap(instance, oracle, budget, seed);
    case Method::kContextCite: {
      ContextCiteOptions options = settings.contextcite;
      options.n_samples = budget;
      return ContextCite(instance, oracle, options, seed);
    }
    case Method::kLoo: {
      AttributionResult r = LeaveOneOut(instance, oracle);
      r.seed = seed;
      return r;
    }
  }
  throw ContractError("unknown method");
}

}  // namespace camab
