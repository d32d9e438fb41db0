#include "camab/reward.h"

#include <algorithm>

#include "camab/errors.h"

namespace camab {

RewardContext MakeRewardContext(TokenLikelihoods empty_likelihoods,
                                TokenLikelihoods full_likelihoods) {
  if (empty_likelihoods.size() != full_likelihoods.size() ||
      empty_likelihoods.size() == 0) {
    throw ContractError("anchor likelihoods must be non-empty and equal length");
  }
  RewardContext ctx{std::move(empty_likelihoods), std::move(full_likelihoods),
                    0.0};
  for (size_t t = 0; t < ctx.full_likelihoods.size(); ++t) {
    ctx.denominator +=
        ctx.full_likelihoods.values[t] - ctx.empty_likelihoods.values[t];
  }
  if (!(ctx.denominator > kDenominatorGuard)) {
    throw UninformativeContextError(
        "full context does not raise the response likelihood over the empty "
        "context (denominator " +
        std::to_string(ctx.denominator) + ")");
  }
  return ctx;
}

RewardContext PrepareReward(const Instance& instance,
                            LikelihoodOracle& oracle) {
  const size_t n = instance.n_segments();
  auto empty = oracle.Score(instance, SubsetMask::Empty(n));
  auto full = oracle.Score(instance, SubsetMask::Full(n));
  if (empty.size() != instance.n_tokens() || full.size() != instance.n_tokens()) {
    throw ContractError("oracle returned the wrong number of likelihoods for '" +
                        instance.id + "'");
  }
  try {
    return MakeRewardContext(std::move(empty), std::move(full));
  } catch (const UninformativeContextError& e) {
    throw UninformativeContextError("instance '" + instance.id + "': " +
                                    e.what());
  }
}

double RewardFromLikelihoods(const RewardContext& ctx,
                             const TokenLikelihoods& likelihoods) {
  if (likelihoods.size() != ctx.empty_likelihoods.size()) {
    throw ContractError("likelihood vector length does not match anchors");
  }
  double numerator = 0.0;
  for (size_t t = 0; t < likelihoods.size(); ++t) {
    numerator += likelihoods.values[t] - ctx.empty_likelihoods.values[t];
  }
  return std::clamp(numerator / ctx.denominator, 0.0, 1.0);
}

double Reward(const RewardContext& ctx, const Instance& instance,
              const SubsetMask& mask, LikelihoodOracle& oracle) {
  if (mask.size() != instance.n_segments()) {
    throw ContractError("mask length does not match instance '" + instance.id +
                        "'");
  }
  if (mask.empty_set()) return 0.0;
  if (mask.full_set()) return 1.0;
  return RewardFromLikelihoods(ctx, oracle.Score(instance, mask));
}

}  // namespace camab
