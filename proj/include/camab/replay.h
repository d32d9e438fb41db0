#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "camab/errors.h"
#include "camab/oracle.h"

namespace camab {

// A replay store has no entry for the requested key.
class ReplayMissError : public Error {
 public:
  using Error::Error;
};

// Likelihood cache keyed by (instance id, mask hex). Persisted as JSONL of
// {"instance_id": str, "mask": hex, "values": [float]}.
class ReplayStore {
 public:
  using Key = std::pair<std::string, std::string>;

  ReplayStore() = default;
  ReplayStore(const ReplayStore&) = delete;
  ReplayStore& operator=(const ReplayStore&) = delete;

  static Key MakeKey(const Instance& instance, const SubsetMask& mask) {
    return {instance.id, mask.ToHex()};
  }

  std::optional<TokenLikelihoods> Lookup(const Key& key) const;
  void Insert(const Key& key, TokenLikelihoods values);

  // Returns the stored value for `key`, calling `compute` on a miss. Each
  // key is computed at most once even under concurrent first requests;
  // `hit` reports whether the value came from the store.
  TokenLikelihoods GetOrCompute(
      const Key& key, const std::function<TokenLikelihoods()>& compute,
      bool* hit);

  size_t size() const;

  // Entries are written sorted by key.
  void Save(const std::filesystem::path& path) const;
  // Merges the entries of `path`. Throws IntegrityError on a corrupt or
  // truncated line, naming the key when it can be recovered.
  void Load(const std::filesystem::path& path);

 private:
  struct Slot {
    std::mutex mu;
    std::optional<TokenLikelihoods> values;
  };
  std::shared_ptr<Slot> SlotFor(const Key& key);

  mutable std::mutex mu_;
  std::map<Key, std::shared_ptr<Slot>> slots_;
};

// Caches an inner oracle. Hits never reach the inner oracle. By default a
// hit is only counted as a cache hit; with kCharged it is also charged like
// a live call, so a cache shared across runs leaves their budgets alone.
enum class HitCharging { kFree, kCharged };

class ReplayOracle : public LikelihoodOracle {
 public:
  ReplayOracle(std::shared_ptr<LikelihoodOracle> inner,
               std::shared_ptr<ReplayStore> store,
               HitCharging charging = HitCharging::kFree);

  TokenLikelihoods Score(const Instance& instance,
                         const SubsetMask& mask) override;
  BudgetLedger& ledger() override { return inner_->ledger(); }

  ReplayStore& store() { return *store_; }

 private:
  std::shared_ptr<LikelihoodOracle> inner_;
  std::shared_ptr<ReplayStore> store_;
  HitCharging charging_;
};

// Serves a previously recorded store with no live model behind it. Each
// served evaluation is charged as an oracle call, so budgets behave as in
// the recorded run; a missing key raises ReplayMissError.
class StoredOracle : public LikelihoodOracle {
 public:
  StoredOracle(std::shared_ptr<const ReplayStore> store,
               std::shared_ptr<BudgetLedger> ledger);

  TokenLikelihoods Score(const Instance& instance,
                         const SubsetMask& mask) override;
  BudgetLedger& ledger() override { return *ledger_; }

 private:
  std::shared_ptr<const ReplayStore> store_;
  std::shared_ptr<BudgetLedger> ledger_;
};

}  // namespace camab
