#pragma once

#include "camab/corpus.h"
#include "camab/oracle.h"

namespace camab {

// Minimum acceptable sum_t (l_t(C) - l_t(empty)).
inline constexpr double kDenominatorGuard = 1e-6;

// Anchor likelihoods of one instance. Immutable once prepared.
struct RewardContext {
  TokenLikelihoods empty_likelihoods;
  TokenLikelihoods full_likelihoods;
  double denominator = 0.0;
};

// Queries the empty and the full context (two oracle calls) and fixes the
// normalizer. Throws UninformativeContextError when the denominator is not
// above kDenominatorGuard.
RewardContext PrepareReward(const Instance& instance, LikelihoodOracle& oracle);

// Builds the context from already-known anchors without touching an oracle.
RewardContext MakeRewardContext(TokenLikelihoods empty_likelihoods,
                                TokenLikelihoods full_likelihoods);

// Supportiveness of a subset: the likelihood gain over the empty context,
// normalized by the full-context gain and clipped to [0, 1]. Empty and full
// masks are answered from the anchors without an oracle call.
double Reward(const RewardContext& ctx, const Instance& instance,
              const SubsetMask& mask, LikelihoodOracle& oracle);

// Clipped ratio for likelihoods already in hand.
double RewardFromLikelihoods(const RewardContext& ctx,
                             const TokenLikelihoods& likelihoods);

}  // namespace camab
