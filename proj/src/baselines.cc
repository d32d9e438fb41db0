#include "camab/baselines.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "camab/errors.h"
#include "camab/lasso.h"
#include "camab/shapley.h"

namespace camab {

double AvgLogLikelihood(const Instance& instance, LikelihoodOracle& oracle,
                        const SubsetMask& mask) {
  const TokenLikelihoods l = oracle.Score(instance, mask);
  if (l.size() == 0) throw ContractError("oracle returned no likelihoods");
  double sum = 0.0;
  for (double p : l.values) sum += std::log(ClampLikelihood(p));
  return sum / static_cast<double>(l.size());
}

double AvgLogOdds(const TokenLikelihoods& likelihoods) {
  if (likelihoods.size() == 0) throw ContractError("no likelihoods");
  double sum = 0.0;
  for (double p : likelihoods.values) {
    const double q = ClampLikelihoodOpen(p);
    sum += std::log(q) - std::log1p(-q);
  }
  return sum / static_cast<double>(likelihoods.size());
}

std::vector<SubsetMask> SampleMasksUniform(size_t n_segments, size_t n_samples,
                                           double inclusion_prob, Rng& rng) {
  std::vector<SubsetMask> masks;
  masks.reserve(n_samples);
  for (size_t s = 0; s < n_samples; ++s) {
    SubsetMask mask(n_segments);
    for (size_t j = 0; j < n_segments; ++j) {
      if (rng.Bernoulli(inclusion_prob)) mask.set(j);
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

std::vector<MaskSample> EvaluateMasks(
    const std::vector<SubsetMask>& masks,
    const std::function<double(const SubsetMask&)>& signal) {
  std::vector<SubsetMask> sorted = masks;
  std::sort(sorted.begin(), sorted.end());
  std::map<SubsetMask, double> values;
  std::vector<MaskSample> out;
  out.reserve(sorted.size());
  for (const auto& mask : sorted) {
    auto it = values.find(mask);
    if (it == values.end()) it = values.emplace(mask, signal(mask)).first;
    out.push_back(MaskSample{mask, it->second});
  }
  return out;
}

namespace {

AttributionResult MakeResult(const Instance& instance, std::string_view method,
                             std::vector<double> scores, uint64_t calls,
                             uint64_t seed) {
  AttributionResult r;
  r.instance_id = instance.id;
  r.method = std::string(method);
  r.ranking = Rank(scores);
  r.scores = std::move(scores);
  r.oracle_calls = calls;
  r.seed = seed;
  return r;
}

Eigen::MatrixXd DesignMatrix(const std::vector<MaskSample>& samples,
                             const std::vector<size_t>& rows) {
  const size_t n = samples.front().mask.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(n));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t j = 0; j < n; ++j) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
          samples[rows[r]].mask.test(j) ? 1.0 : 0.0;
    }
  }
  return x;
}

LassoProblem ProblemFor(const std::vector<MaskSample>& samples,
                        const std::vector<size_t>& rows, double lambda) {
  LassoProblem p;
  p.design = DesignMatrix(samples, rows);
  p.targets.resize(static_cast<Eigen::Index>(rows.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    p.targets(static_cast<Eigen::Index>(r)) = samples[rows[r]].value;
  }
  p.lambda = lambda;
  return p;
}

std::vector<double> LambdaGrid(double lambda_max,
                               const ContextCiteOptions& options) {
  std::vector<double> grid;
  const size_t points = std::max<size_t>(1, options.grid_points);
  for (size_t i = 0; i < points; ++i) {
    const double frac =
        points == 1 ? 0.0
                    : static_cast<double>(i) / static_cast<double>(points - 1);
    grid.push_back(lambda_max * std::pow(options.grid_min_ratio, frac));
  }
  return grid;
}

}  // namespace

AttributionResult KernelShap(const Instance& instance, LikelihoodOracle& oracle,
                             size_t n_samples, uint64_t seed) {
  const size_t n = instance.n_segments();
  const uint64_t calls_before = oracle.ledger().oracle_calls();
  const double f_empty = AvgLogLikelihood(instance, oracle, SubsetMask::Empty(n));
  const double f_full = AvgLogLikelihood(instance, oracle, SubsetMask::Full(n));

  Rng rng(seed);
  const std::vector<WeightedMask> design = KernelShapDesign(n, n_samples, rng);
  std::vector<double> values;
  values.reserve(design.size());
  for (const auto& row : design) {
    values.push_back(AvgLogLikelihood(instance, oracle, row.mask));
  }
  std::vector<double> phi = SolveKernelShap(n, f_empty, f_full, design, values);
  return MakeResult(instance, kMethodShap, std::move(phi),
                    oracle.ledger().oracle_calls() - calls_before, seed);
}

double SelectLassoLambda(const std::vector<MaskSample>& samples,
                         const ContextCiteOptions& options, uint64_t seed) {
  std::vector<size_t> all(samples.size());
  std::iota(all.begin(), all.end(), 0);
  const double lambda_max = LassoLambdaMax(ProblemFor(samples, all, 0.0));
  if (lambda_max <= 0.0) return 0.0;
  const std::vector<double> grid = LambdaGrid(lambda_max, options);
  if (options.lambda_ratio) return lambda_max * *options.lambda_ratio;

  const size_t folds = std::min(options.cv_folds, samples.size());
  if (folds < 2) return grid.back();

  // Seeded fold assignment over the mask-sorted samples.
  std::vector<size_t> perm = all;
  Rng rng(MixSeed(seed ^ 0x5eedf01d5eedf01dULL));
  for (size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.UniformInt(i)]);
  }
  std::vector<size_t> fold_of(samples.size());
  for (size_t i = 0; i < perm.size(); ++i) fold_of[perm[i]] = i % folds;

  double best_lambda = grid.front();
  double best_error = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    double sse = 0.0;
    for (size_t f = 0; f < folds; ++f) {
      std::vector<size_t> train, test;
      for (size_t i = 0; i < samples.size(); ++i) {
        (fold_of[i] == f ? test : train).push_back(i);
      }
      const LassoFit fit =
          LassoCoordinateDescent(ProblemFor(samples, train, lambda));
      for (size_t i : test) {
        double pred = fit.intercept;
        for (size_t j = 0; j < samples[i].mask.size(); ++j) {
          if (samples[i].mask.test(j)) {
            pred += fit.coefficients(static_cast<Eigen::Index>(j));
          }
        }
        const double err = samples[i].value - pred;
        sse += err * err;
      }
    }
    // Strict improvement only, so ties keep the larger lambda.
    if (sse < best_error) {
      best_error = sse;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

AttributionResult ContextCite(const Instance& instance,
                              LikelihoodOracle& oracle,
                              const ContextCiteOptions& options,
                              uint64_t seed) {
  if (options.n_samples == 0) {
    throw ContractError("ContextCite needs at least one sample");
  }
  const size_t n = instance.n_segments();
  const uint64_t calls_before = oracle.ledger().oracle_calls();
  Rng rng(seed);
  const auto masks =
      SampleMasksUniform(n, options.n_samples, options.inclusion_prob, rng);
  const std::vector<MaskSample> samples =
      EvaluateMasks(masks, [&](const SubsetMask& m) {
        return AvgLogOdds(oracle.Score(instance, m));
      });

  bool any_varies = false;
  for (size_t j = 0; j < n && !any_varies; ++j) {
    for (const auto& s : samples) {
      if (s.mask.test(j) != samples.front().mask.test(j)) {
        any_varies = true;
        break;
      }
    }
  }
  if (!any_varies) {
    throw DegenerateSampleError(
        "ContextCite drew identical masks for every sample; use a different "
        "seed or more samples");
  }

  const double lambda = SelectLassoLambda(samples, options, seed);
  std::vector<size_t> all(samples.size());
  std::iota(all.begin(), all.end(), 0);
  const LassoFit fit = LassoCoordinateDescent(ProblemFor(samples, all, lambda));
  std::vector<double> scores(fit.coefficients.data(),
                             fit.coefficients.data() + fit.coefficients.size());
  return MakeResult(instance, kMethodContextCite, std::move(scores),
                    oracle.ledger().oracle_calls() - calls_before, seed);
}

AttributionResult LeaveOneOut(const Instance& instance,
                              LikelihoodOracle& oracle) {
  const size_t n = instance.n_segments();
  const uint64_t calls_before = oracle.ledger().oracle_calls();
  const SubsetMask full = SubsetMask::Full(n);
  const double f_full = AvgLogLikelihood(instance, oracle, full);
  std::vector<double> scores(n);
  for (size_t j = 0; j < n; ++j) {
    SubsetMask ablated = full;
    ablated.set(j, false);
    scores[j] = f_full - AvgLogLikelihood(instance, oracle, ablated);
  }
  return MakeResult(instance, kMethodLoo, std::move(scores),
                    oracle.ledger().oracle_calls() - calls_before, 0);
}

}  // namespace camab
