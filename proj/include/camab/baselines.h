#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "camab/attribution.h"
#include "camab/corpus.h"
#include "camab/oracle.h"
#include "camab/rng.h"

namespace camab {

// One perturbation draw and the method's scalar signal for it.
struct MaskSample {
  SubsetMask mask;
  double value = 0.0;
};

// (1/T) sum_t ln l_t(mask).
double AvgLogLikelihood(const Instance& instance, LikelihoodOracle& oracle,
                        const SubsetMask& mask);

// (1/T) sum_t ln(l_t / (1 - l_t)) with likelihoods clamped to
// [floor, 1 - floor].
double AvgLogOdds(const TokenLikelihoods& likelihoods);

// Each bit set independently with probability `inclusion_prob`.
std::vector<SubsetMask> SampleMasksUniform(size_t n_segments, size_t n_samples,
                                           double inclusion_prob, Rng& rng);

// Evaluates `signal` once per distinct mask and returns samples sorted by
// mask, one per input draw.
std::vector<MaskSample> EvaluateMasks(
    const std::vector<SubsetMask>& masks,
    const std::function<double(const SubsetMask&)>& signal);

// Segment-level KernelSHAP on the average log-likelihood, with the empty
// context as the reference. Spends n_samples + 2 oracle calls at most.
AttributionResult KernelShap(const Instance& instance, LikelihoodOracle& oracle,
                             size_t n_samples, uint64_t seed);

struct ContextCiteOptions {
  size_t n_samples = 60;
  double inclusion_prob = 0.5;
  size_t cv_folds = 5;
  size_t grid_points = 10;
  double grid_min_ratio = 1e-3;  // smallest lambda as a fraction of lambda_max
  // Skip cross-validation and use lambda = ratio * lambda_max.
  std::optional<double> lambda_ratio;
};

// Ablation regression: LASSO of the average log-odds on mask indicators,
// with lambda picked by K-fold CV over a log grid (minimum CV error).
AttributionResult ContextCite(const Instance& instance,
                              LikelihoodOracle& oracle,
                              const ContextCiteOptions& options, uint64_t seed);

// a_j = f(C) - f(C without j) for f the average log-likelihood. N+1 calls.
AttributionResult LeaveOneOut(const Instance& instance,
                              LikelihoodOracle& oracle);

// Lambda picked by ContextCite's cross-validation for these samples.
double SelectLassoLambda(const std::vector<MaskSample>& samples,
                         const ContextCiteOptions& options, uint64_t seed);

}  // namespace camab
