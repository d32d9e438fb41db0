#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camab/attribution.h"
#include "camab/corpus.h"
#include "camab/methods.h"
#include "camab/oracle.h"
#include "json.hpp"

namespace camab {

// ------------------------------------------------------------------ metrics

struct TopKAblation {
  size_t k = 0;                 // effective k, min(k, N)
  std::vector<size_t> removed;  // first k entries of the ranking
  SubsetMask kept_mask;         // full context minus `removed`
  bool clamped = false;         // requested k exceeded N
};

TopKAblation MakeTopKAblation(const AttributionResult& result,
                              size_t n_segments, size_t k);

struct TopKDrop {
  double drop = 0.0;
  // k >= N: everything was removed and the drop is f(C) - f(empty).
  bool degenerate_k = false;
};

// Average log-likelihood of the response under the full context minus the
// same under the context with the k top-ranked segments removed.
TopKDrop TopKLogProbDrop(const Instance& instance, LikelihoodOracle& oracle,
                         const AttributionResult& result, size_t k);

class SimilarityScorer {
 public:
  virtual ~SimilarityScorer() = default;
  // Similarity in [0, 1] of `candidate` to `reference`.
  virtual double Score(std::span<const std::string> candidate,
                       std::span<const std::string> reference) const = 0;
  virtual std::string name() const = 0;
};

// Bag-of-tokens F1: harmonic mean of multiset precision and recall.
class TokenF1Scorer : public SimilarityScorer {
 public:
  double Score(std::span<const std::string> candidate,
               std::span<const std::string> reference) const override;
  std::string name() const override { return "token_f1"; }
};

struct Consistency {
  double score = 0.0;
  bool empty_response = false;
};

// scorer(ablated, original). An empty ablated response scores 0 and is
// flagged.
Consistency ConsistencyScore(std::span<const std::string> original,
                             std::span<const std::string> ablated,
                             const SimilarityScorer& scorer);

// Regenerates the response under `kept_mask` with deterministic decoding
// and a cap of 2T tokens. Throws CapabilityError without a generator.
Generation GenerateAblated(const Instance& instance,
                           const SubsetMask& kept_mask,
                           ResponseGenerator* generator);

// --------------------------------------------------------------- comparison

struct ReportRow {
  std::string dataset;
  std::string method;
  size_t budget = 0;
  size_t k = 0;
  std::string metric;
  std::optional<double> mean;       // nullopt: infeasible or undefined
  std::optional<double> std_error;  // nullopt when n < 2
  size_t n = 0;
  size_t skips = 0;
  bool infeasible = false;
};

struct LedgerTotals {
  std::string method;
  size_t budget = 0;
  size_t instances = 0;
  uint64_t total_calls = 0;
  uint64_t max_calls = 0;
  uint64_t anchor_calls = 0;
  uint64_t cache_hits = 0;
  // Every instance stayed within budget + kAnchorCharge calls.
  bool within_budget = true;
  bool infeasible = false;
};

struct ComparisonReport {
  std::vector<ReportRow> rows;
  std::vector<LedgerTotals> ledgers;
  std::string anchor_convention;

  // Long format: dataset,method,budget,k,metric,mean,stderr,n,skips
  std::string ToCsv() const;
  nlohmann::json ToJson() const;
};

// Builds a fresh oracle whose ledger enforces `budget_limit` (nullopt for
// unlimited).
using OracleFactory = std::function<std::shared_ptr<LikelihoodOracle>(
    std::optional<uint64_t> budget_limit)>;

struct CompareOptions {
  std::string dataset = "default";
  std::vector<Method> methods;
  std::vector<size_t> budgets;
  std::vector<size_t> ks;
  uint64_t seed = 0;
  MethodSettings settings;
  // Optional consistency metric.
  ResponseGenerator* generator = nullptr;
  const SimilarityScorer* scorer = nullptr;
  // Ground-truth relevant segments per instance id; enables recovery rows.
  std::map<std::string, std::vector<size_t>> planted;
  size_t jobs = 1;
};

// Mean and standard error of `values` (standard error needs n >= 2).
std::pair<std::optional<double>, std::optional<double>> MeanAndStdError(
    std::span<const double> values);

// Runs every method at every budget on every instance, each run against its
// own oracle limited to budget + kAnchorCharge calls, then evaluates top-k
// drops (and consistency, recovery when configured) on a shared unlimited
// evaluation oracle. Instances raising UninformativeContextError or
// DegenerateSampleError are skipped and counted. A (method, budget) pair
// below some instance's minimum budget is reported infeasible without
// running.
ComparisonReport CompareMethods(std::span<const Instance> instances,
                                const CompareOptions& options,
                                const OracleFactory& factory);

}  // namespace camab
