#include "camab/oracle.h"

#include <algorithm>
#include <cmath>

#include "camab/errors.h"
#include "camab/rng.h"

namespace camab {

using nlohmann::json;

double ClampLikelihood(double p) {
  if (std::isnan(p)) return kLikelihoodFloor;
  return std::clamp(p, kLikelihoodFloor, 1.0);
}

double ClampLikelihoodOpen(double p) {
  if (std::isnan(p)) return kLikelihoodFloor;
  return std::clamp(p, kLikelihoodFloor, 1.0 - kLikelihoodFloor);
}

// -------------------------------------------------------------------- ledger

void BudgetLedger::Charge(bool anchor) {
  uint64_t current = calls_.load();
  do {
    if (limit_ && current >= *limit_) {
      throw BudgetError("oracle budget of " + std::to_string(*limit_) +
                        " calls exhausted");
    }
  } while (!calls_.compare_exchange_weak(current, current + 1));
  if (anchor) anchor_calls_.fetch_add(1);
}

std::optional<uint64_t> BudgetLedger::remaining() const {
  if (!limit_) return std::nullopt;
  const uint64_t used = calls_.load();
  return used >= *limit_ ? 0 : *limit_ - used;
}

LedgerSnapshot BudgetLedger::Snapshot() const {
  return LedgerSnapshot{calls_.load(), cache_hits_.load(),
                        anchor_calls_.load(), limit_};
}

// ----------------------------------------------------------------- synthetic

double Logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TokenLikelihoods SyntheticScore(const SyntheticModel& model,
                                const SubsetMask& mask) {
  if (mask.size() != model.weights.size()) {
    throw ContractError("synthetic model has " +
                        std::to_string(model.weights.size()) +
                        " weights but mask has " +
                        std::to_string(mask.size()) + " bits");
  }
  double contribution = 0.0;
  for (size_t j = 0; j < mask.size(); ++j) {
    if (mask.test(j)) contribution += model.weights[j];
  }
  TokenLikelihoods out;
  out.values.reserve(model.base_offsets.size());
  for (double b : model.base_offsets) {
    out.values.push_back(ClampLikelihood(Logistic(b + contribution)));
  }
  return out;
}

std::optional<SyntheticModel> SyntheticModelFromInstance(
    const Instance& instance) {
  auto it = instance.extra.find("synthetic");
  if (it == instance.extra.end()) return std::nullopt;
  try {
    SyntheticModel model;
    model.base_offsets = it->at("base_offsets").get<std::vector<double>>();
    model.weights = it->at("weights").get<std::vector<double>>();
    return model;
  } catch (const json::exception& e) {
    throw ValidationError("invalid 'synthetic' field in instance '" +
                          instance.id + "': " + e.what());
  }
}

void AttachSyntheticModel(Instance& instance, const SyntheticModel& model) {
  instance.extra["synthetic"] = {{"base_offsets", model.base_offsets},
                                 {"weights", model.weights}};
}

SyntheticModel DeriveSyntheticModel(const Instance& instance, uint64_t seed) {
  Rng rng(DeriveSeed(seed, instance.id, "synthetic-model"));
  SyntheticModel model;
  for (size_t t = 0; t < instance.n_tokens(); ++t) {
    model.base_offsets.push_back(-3.0 + 2.0 * rng.Uniform());
  }
  // Roughly a quarter of the segments carry signal.
  for (size_t j = 0; j < instance.n_segments(); ++j) {
    const bool relevant = rng.Uniform() < 0.25;
    const double w = relevant ? 1.0 + 2.0 * rng.Uniform() : 0.0;
    model.weights.push_back(w);
  }
  if (std::all_of(model.weights.begin(), model.weights.end(),
                  [](double w) { return w == 0.0; })) {
    model.weights[rng.UniformInt(model.weights.size())] = 2.0;
  }
  return model;
}

SyntheticOracle::SyntheticOracle(std::shared_ptr<const ModelMap> models,
                                 std::shared_ptr<BudgetLedger> ledger)
    : models_(std::move(models)), ledger_(std::move(ledger)) {
  if (!ledger_) ledger_ = std::make_shared<BudgetLedger>();
}

SyntheticOracle::SyntheticOracle(SyntheticModel model,
                                 std::shared_ptr<BudgetLedger> ledger)
    : single_(std::move(model)), ledger_(std::move(ledger)) {
  if (!ledger_) ledger_ = std::make_shared<BudgetLedger>();
}

const SyntheticModel& SyntheticOracle::ModelFor(
    const Instance& instance) const {
  if (models_) {
    auto it = models_->find(instance.id);
    if (it != models_->end()) return it->second;
  }
  if (single_) return *single_;
  throw ContractError("no synthetic model for instance '" + instance.id + "'");
}

TokenLikelihoods SyntheticOracle::Score(const Instance& instance,
                                        const SubsetMask& mask) {
  const SyntheticModel& model = ModelFor(instance);
  if (model.base_offsets.size() != instance.n_tokens() ||
      model.weights.size() != instance.n_segments()) {
    throw ContractError("synthetic model dimensions do not match instance '" +
                        instance.id + "'");
  }
  if (mask.size() != instance.n_segments()) {
    throw ContractError("mask length does not match instance '" + instance.id +
                        "'");
  }
  ledger_->Charge(mask.empty_set() || mask.full_set());
  return SyntheticScore(model, mask);
}

}  // namespace camab
