#include "camab/replay.h"

#include <cctype>
#include <cmath>

#include "json.hpp"

namespace camab {

using nlohmann::json;

std::shared_ptr<ReplayStore::Slot> ReplayStore::SlotFor(const Key& key) {
  std::lock_guard lock(mu_);
  auto& slot = slots_[key];
  if (!slot) slot = std::make_shared<Slot>();
  return slot;
}

std::optional<TokenLikelihoods> ReplayStore::Lookup(const Key& key) const {
  std::shared_ptr<Slot> slot;
  {
    std::lock_guard lock(mu_);
    auto it = slots_.find(key);
    if (it == slots_.end()) return std::nullopt;
    slot = it->second;
  }
  std::lock_guard lock(slot->mu);
  return slot->values;
}

void ReplayStore::Insert(const Key& key, TokenLikelihoods values) {
  auto slot = SlotFor(key);
  std::lock_guard lock(slot->mu);
  slot->values = std::move(values);
}

TokenLikelihoods ReplayStore::GetOrCompute(
    const Key& key, const std::function<TokenLikelihoods()>& compute,
    bool* hit) {
  auto slot = SlotFor(key);
  std::lock_guard lock(slot->mu);
  if (slot->values) {
    if (hit) *hit = true;
    return *slot->values;
  }
  // A throwing compute leaves the slot empty for the next caller.
  slot->values = compute();
  if (hit) *hit = false;
  return *slot->values;
}

size_t ReplayStore::size() const {
  std::lock_guard lock(mu_);
  size_t n = 0;
  for (const auto& [key, slot] : slots_) {
    std::lock_guard slot_lock(slot->mu);
    if (slot->values) ++n;
  }
  return n;
}

void ReplayStore::Save(const std::filesystem::path& path) const {
  std::string out;
  std::lock_guard lock(mu_);
  for (const auto& [key, slot] : slots_) {
    std::lock_guard slot_lock(slot->mu);
    if (!slot->values) continue;
    json line = {{"instance_id", key.first},
                 {"mask", key.second},
                 {"values", slot->values->values}};
    out += line.dump();
    out += '\n';
  }
  WriteFileAtomic(path, out);
}

void ReplayStore::Load(const std::filesystem::path& path) {
  const std::string contents = ReadFile(path);
  if (!contents.empty() && contents.back() != '\n') {
    throw IntegrityError("replay store '" + path.string() +
                         "' is truncated: last line has no terminator");
  }
  size_t line_no = 0;
  size_t pos = 0;
  while (pos < contents.size()) {
    size_t eol = contents.find('\n', pos);
    const std::string line = contents.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;

    const std::string where =
        path.string() + ":" + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error&) {
      throw IntegrityError("corrupt replay entry at " + where + ": '" +
                           line.substr(0, 80) + "'");
    }
    Key key;
    try {
      key.first = record.at("instance_id").get<std::string>();
      key.second = record.at("mask").get<std::string>();
    } catch (const json::exception&) {
      throw IntegrityError("replay entry at " + where + " has no valid key");
    }
    const std::string key_text = "(" + key.first + ", " + key.second + ")";
    TokenLikelihoods values;
    try {
      values.values = record.at("values").get<std::vector<double>>();
    } catch (const json::exception&) {
      throw IntegrityError("replay entry " + key_text + " at " + where +
                           " has invalid values");
    }
    if (values.values.empty()) {
      throw IntegrityError("replay entry " + key_text + " at " + where +
                           " has no values");
    }
    for (double v : values.values) {
      if (!(v > 0.0 && v <= 1.0)) {
        throw IntegrityError("replay entry " + key_text + " at " + where +
                             " has a likelihood outside (0, 1]");
      }
    }
    for (char c : key.second) {
      if (!std::isxdigit(static_cast<unsigned char>(c))) {
        throw IntegrityError("replay entry " + key_text + " at " + where +
                             " has a malformed mask");
      }
    }
    Insert(key, std::move(values));
  }
}

// -------------------------------------------------------------- ReplayOracle

ReplayOracle::ReplayOracle(std::shared_ptr<LikelihoodOracle> inner,
                           std::shared_ptr<ReplayStore> store,
                           HitCharging charging)
    : inner_(std::move(inner)), store_(std::move(store)), charging_(charging) {
  if (!inner_) throw ContractError("replay oracle needs an inner oracle");
  if (!store_) store_ = std::make_shared<ReplayStore>();
}

TokenLikelihoods ReplayOracle::Score(const Instance& instance,
                                     const SubsetMask& mask) {
  if (mask.size() != instance.n_segments()) {
    throw ContractError("mask length does not match instance '" + instance.id +
                        "'");
  }
  bool hit = false;
  auto values = store_->GetOrCompute(
      ReplayStore::MakeKey(instance, mask),
      [&] { return inner_->Score(instance, mask); }, &hit);
  if (hit) {
    if (charging_ == HitCharging::kCharged) {
      inner_->ledger().Charge(mask.empty_set() || mask.full_set());
    }
    inner_->ledger().RecordCacheHit();
  }
  return values;
}

// -------------------------------------------------------------- StoredOracle

StoredOracle::StoredOracle(std::shared_ptr<const ReplayStore> store,
                           std::shared_ptr<BudgetLedger> ledger)
    : store_(std::move(store)), ledger_(std::move(ledger)) {
  if (!store_) throw ContractError("stored oracle needs a store");
  if (!ledger_) ledger_ = std::make_shared<BudgetLedger>();
}

TokenLikelihoods StoredOracle::Score(const Instance& instance,
                                     const SubsetMask& mask) {
  if (mask.size() != instance.n_segments()) {
    throw ContractError("mask length does not match instance '" + instance.id +
                        "'");
  }
  const auto key = ReplayStore::MakeKey(instance, mask);
  auto values = store_->Lookup(key);
  if (!values) {
    throw ReplayMissError("replay store has no entry for (" + key.first +
                          ", " + key.second + ")");
  }
  if (values->size() != instance.n_tokens()) {
    throw IntegrityError("replay entry (" + key.first + ", " + key.second +
                         ") has " + std::to_string(values->size()) +
                         " values, instance has " +
                         std::to_string(instance.n_tokens()) + " tokens");
  }
  ledger_->Charge(mask.empty_set() || mask.full_set());
  return *values;
}

}  // namespace camab
