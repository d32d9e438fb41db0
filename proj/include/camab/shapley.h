#pragma once

#include <functional>
#include <span>
#include <vector>

#include "camab/corpus.h"
#include "camab/rng.h"

namespace camab {

using ValueFunction = std::function<double(const SubsetMask&)>;

// Shapley kernel (n-1) / (C(n, z) z (n - z)) for 1 <= z <= n-1. Sizes 0
// and n are enforced as constraints, so asking for them is a ContractError.
double ShapleyKernelWeight(size_t n_segments, size_t subset_size);

// Exact Shapley values by enumerating all 2^n coalitions. n <= 12.
inline constexpr size_t kExactShapleyMaxSegments = 12;
std::vector<double> ExactShapley(const ValueFunction& value_fn,
                                 size_t n_segments);

struct WeightedMask {
  SubsetMask mask;
  double weight = 1.0;
};

// Regression design for KernelSHAP over masks of size 1..n-1. When
// 2^n - 2 <= n_samples every proper mask appears once with its kernel
// weight; otherwise n_samples masks are drawn with size probability
// proportional to the kernel mass of that size and uniform membership
// within a size, and duplicates are merged into a count weight. The result
// is sorted by mask.
std::vector<WeightedMask> KernelShapDesign(size_t n_segments, size_t n_samples,
                                           Rng& rng);

// True when the design enumerates every proper mask.
bool KernelShapEnumerates(size_t n_segments, size_t n_samples);

// Solves the weighted least-squares problem
//   f(S) ~ phi_0 + sum_j phi_j z_j,  phi_0 = f(empty),
//   sum_j phi_j = f(full) - f(empty)
// by eliminating the last coefficient. `values[i]` is f(design[i].mask).
// Throws DegenerateSampleError when the reduced system is rank deficient.
std::vector<double> SolveKernelShap(size_t n_segments, double empty_value,
                                    double full_value,
                                    std::span<const WeightedMask> design,
                                    std::span<const double> values);

}  // namespace camab
