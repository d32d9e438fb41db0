#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "camab/corpus.h"

namespace camab {

// Likelihoods are clamped to [kLikelihoodFloor, 1] so log-likelihoods stay
// finite; log-odds additionally clamp the upper end to 1 - kLikelihoodFloor.
inline constexpr double kLikelihoodFloor = 1e-9;

double ClampLikelihood(double p);
double ClampLikelihoodOpen(double p);

// Per-token likelihoods l_t(S) of the frozen response, one per token.
struct TokenLikelihoods {
  std::vector<double> values;

  size_t size() const { return values.size(); }
  bool operator==(const TokenLikelihoods&) const = default;
};

struct LedgerSnapshot {
  uint64_t oracle_calls = 0;
  uint64_t cache_hits = 0;
  // Calls whose mask was the empty or the full context.
  uint64_t anchor_calls = 0;
  std::optional<uint64_t> budget_limit;

  uint64_t non_anchor_calls() const { return oracle_calls - anchor_calls; }
};

// Thread-safe query accounting. oracle_calls never exceeds the limit: a
// charge that would exceed it throws BudgetError and is not recorded.
class BudgetLedger {
 public:
  explicit BudgetLedger(std::optional<uint64_t> budget_limit = std::nullopt)
      : limit_(budget_limit) {}

  void Charge(bool anchor);
  void RecordCacheHit() { cache_hits_.fetch_add(1); }

  uint64_t oracle_calls() const { return calls_.load(); }
  uint64_t cache_hits() const { return cache_hits_.load(); }
  std::optional<uint64_t> budget_limit() const { return limit_; }
  // Remaining charges, or nullopt when unlimited.
  std::optional<uint64_t> remaining() const;
  LedgerSnapshot Snapshot() const;

 private:
  std::optional<uint64_t> limit_;
  std::atomic<uint64_t> calls_{0};
  std::atomic<uint64_t> cache_hits_{0};
  std::atomic<uint64_t> anchor_calls_{0};
};

// Source of l_t(S). Implementations must tolerate concurrent Score calls.
class LikelihoodOracle {
 public:
  virtual ~LikelihoodOracle() = default;

  // Throws ContractError on a mask/instance mismatch and BudgetError when
  // the ledger is exhausted.
  virtual TokenLikelihoods Score(const Instance& instance,
                                 const SubsetMask& mask) = 0;
  virtual BudgetLedger& ledger() = 0;
};

// Free-running text generation, used for the consistency metric.
struct Generation {
  std::vector<std::string> tokens;
  bool capped = false;
};

class ResponseGenerator {
 public:
  virtual ~ResponseGenerator() = default;
  // Deterministic decoding of at most `max_tokens` tokens.
  virtual Generation Generate(const std::string& prompt,
                              size_t max_tokens) = 0;
};

// ----------------------------------------------------------- synthetic model

// Additive test model: l_t(S) = logistic(b_t + sum_{j in S} w_j).
struct SyntheticModel {
  std::vector<double> base_offsets;  // b_t, one per response token
  std::vector<double> weights;       // w_j, one per segment

  bool operator==(const SyntheticModel&) const = default;
};

double Logistic(double x);

TokenLikelihoods SyntheticScore(const SyntheticModel& model,
                                const SubsetMask& mask);

// Reads the optional "synthetic": {"base_offsets": [...], "weights": [...]}
// record field.
std::optional<SyntheticModel> SyntheticModelFromInstance(
    const Instance& instance);
void AttachSyntheticModel(Instance& instance, const SyntheticModel& model);

// Model for an instance without a planted one: weights and offsets drawn
// from a generator seeded by (seed, instance id).
SyntheticModel DeriveSyntheticModel(const Instance& instance, uint64_t seed);

class SyntheticOracle : public LikelihoodOracle {
 public:
  using ModelMap = std::map<std::string, SyntheticModel>;

  // Models are looked up by instance id.
  SyntheticOracle(std::shared_ptr<const ModelMap> models,
                  std::shared_ptr<BudgetLedger> ledger);
  // One model serving every instance of matching dimensions.
  SyntheticOracle(SyntheticModel model, std::shared_ptr<BudgetLedger> ledger);

  TokenLikelihoods Score(const Instance& instance,
                         const SubsetMask& mask) override;
  BudgetLedger& ledger() override { return *ledger_; }

 private:
  const SyntheticModel& ModelFor(const Instance& instance) const;

  std::shared_ptr<const ModelMap> models_;
  std::optional<SyntheticModel> single_;
  std::shared_ptr<BudgetLedger> ledger_;
};

}  // namespace camab
