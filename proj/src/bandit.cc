#include "camab/bandit.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "camab/errors.h"
#include "camab/reward.h"

namespace camab {

void CtsConfig::Validate() const {
  if (!(top_p > 0.0 && top_p < 1.0)) {
    throw ContractError("top_p must lie in (0, 1)");
  }
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
    throw ContractError("noise_variance must be positive");
  }
  if (!(prior_variance > 0.0) || !std::isfinite(prior_variance)) {
    throw ContractError("prior_variance must be positive");
  }
}

CtsState InitCts(size_t n_segments, const CtsConfig& config) {
  if (n_segments == 0) throw ContractError("CTS needs at least one segment");
  config.Validate();
  CtsState state;
  state.config = config;
  state.posteriors.assign(
      n_segments,
      ArmPosterior{1.0 / static_cast<double>(n_segments), config.prior_variance});
  state.rng = Rng(config.seed);
  return state;
}

std::vector<double> SampleThetas(CtsState& state) {
  std::vector<double> thetas;
  thetas.reserve(state.posteriors.size());
  for (const auto& arm : state.posteriors) {
    thetas.push_back(state.rng.Gaussian(arm.mean, std::sqrt(arm.variance)));
  }
  return thetas;
}

size_t SubsetSize(size_t n_segments, double top_p) {
  // The epsilon keeps products like 0.6 * 5 = 3.0000000000000004 at 3.
  const double raw = std::ceil(top_p * static_cast<double>(n_segments) - 1e-9);
  const size_t k = raw < 1.0 ? 1 : static_cast<size_t>(raw);
  return std::min(k, n_segments);
}

SubsetMask SelectSubset(std::span<const double> thetas, double top_p) {
  if (thetas.empty()) throw ContractError("no arms to select from");
  const size_t k = SubsetSize(thetas.size(), top_p);
  std::vector<size_t> order = Rank(thetas);
  SubsetMask mask(thetas.size());
  for (size_t i = 0; i < k; ++i) mask.set(order[i]);
  return mask;
}

void UpdatePosterior(CtsState& state, const SubsetMask& mask, double observed) {
  if (state.round >= state.config.max_rounds) {
    throw ContractError("CTS round budget of " +
                        std::to_string(state.config.max_rounds) +
                        " already spent");
  }
  if (mask.size() != state.posteriors.size()) {
    throw ContractError("mask length does not match the number of arms");
  }
  if (!(observed >= 0.0 && observed <= 1.0)) {
    throw ContractError("observed reward must lie in [0, 1]");
  }
  const double noise = state.config.noise_variance;
  for (size_t j = 0; j < mask.size(); ++j) {
    if (!mask.test(j)) continue;
    ArmPosterior& arm = state.posteriors[j];
    const double variance = 1.0 / (1.0 / arm.variance + 1.0 / noise);
    arm.mean = variance * (arm.mean / arm.variance + observed / noise);
    arm.variance = variance;
  }
  state.history.push_back(CtsRound{mask, observed});
  ++state.round;
}

std::vector<double> PosteriorMeans(const CtsState& state) {
  std::vector<double> means;
  means.reserve(state.posteriors.size());
  for (const auto& arm : state.posteriors) means.push_back(arm.mean);
  return means;
}

AttributionResult RunCts(const Instance& instance, LikelihoodOracle& oracle,
                         const CtsConfig& config) {
  return RunCts(instance, oracle, config, nullptr);
}

AttributionResult RunCts(const Instance& instance, LikelihoodOracle& oracle,
                         const CtsConfig& config, CtsState* final_state) {
  const uint64_t calls_before = oracle.ledger().oracle_calls();
  CtsState state = InitCts(instance.n_segments(), config);
  const RewardContext ctx = PrepareReward(instance, oracle);

  while (state.round < config.max_rounds) {
    const std::vector<double> thetas = SampleThetas(state);
    const SubsetMask mask = SelectSubset(thetas, config.top_p);
    const double v = Reward(ctx, instance, mask, oracle);
    UpdatePosterior(state, mask, v);
  }

  AttributionResult result;
  result.instance_id = instance.id;
  result.method = std::string(kMethodCts);
  result.scores = PosteriorMeans(state);
  result.ranking = Rank(result.scores);
  result.oracle_calls = oracle.ledger().oracle_calls() - calls_before;
  result.seed = config.seed;
  if (final_state) *final_state = std::move(state);
  return result;
}

}  // namespace camab
