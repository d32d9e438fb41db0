#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "camab/attribution.h"
#include "camab/corpus.h"
#include "camab/oracle.h"
#include "camab/rng.h"

namespace camab {

struct CtsConfig {
  double top_p = 0.2;
  size_t max_rounds = 60;      // one oracle query per round
  double noise_variance = 1.0;
  double prior_variance = 1.0;
  uint64_t seed = 0;

  // Throws ContractError unless 0 < top_p < 1 and both variances are
  // positive and finite.
  void Validate() const;
};

// Gaussian belief over one segment's latent importance.
struct ArmPosterior {
  double mean = 0.0;
  double variance = 1.0;

  bool operator==(const ArmPosterior&) const = default;
};

struct CtsRound {
  SubsetMask mask;
  double reward = 0.0;
};

struct CtsState {
  CtsConfig config;
  std::vector<ArmPosterior> posteriors;
  size_t round = 0;
  std::vector<CtsRound> history;
  Rng rng{0};
};

// Every arm starts at N(1/n, prior_variance).
CtsState InitCts(size_t n_segments, const CtsConfig& config);

// One independent draw per arm from its posterior.
std::vector<double> SampleThetas(CtsState& state);

// max(1, ceil(top_p * n)), never more than n.
size_t SubsetSize(size_t n_segments, double top_p);

// The SubsetSize(n, top_p) arms with the largest draws; ties go to the
// lower index.
SubsetMask SelectSubset(std::span<const double> thetas, double top_p);

// Conjugate update of every arm in `mask` with the same observation:
//   var' = (1/var + 1/noise)^-1,  mean' = var' (mean/var + v/noise).
// Arms outside the mask are untouched. Throws ContractError once
// config.max_rounds updates have been applied or when v is outside [0, 1].
void UpdatePosterior(CtsState& state, const SubsetMask& mask, double observed);

std::vector<double> PosteriorMeans(const CtsState& state);

// Full attribution loop: two anchor queries, then max_rounds rounds of
// sample, select, reward, update. Scores are the final posterior means.
AttributionResult RunCts(const Instance& instance, LikelihoodOracle& oracle,
                         const CtsConfig& config);

// As RunCts, also returning the final engine state.
AttributionResult RunCts(const Instance& instance, LikelihoodOracle& oracle,
                         const CtsConfig& config, CtsState* final_state);

}  // namespace camab
