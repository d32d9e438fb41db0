#include "camab/shapley.h"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>

#include "camab/errors.h"

namespace camab {

namespace {

double Binomial(size_t n, size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double result = 1.0;
  for (size_t i = 1; i <= k; ++i) {
    result *= static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return std::round(result);
}

SubsetMask MaskFromBits(size_t n, uint64_t bits) {
  SubsetMask m(n);
  for (size_t j = 0; j < n; ++j) {
    if ((bits >> j) & 1U) m.set(j);
  }
  return m;
}

}  // namespace

double ShapleyKernelWeight(size_t n_segments, size_t subset_size) {
  if (subset_size == 0 || subset_size >= n_segments) {
    throw ContractError("Shapley kernel is only defined for 1 <= z <= n-1 (z=" +
                        std::to_string(subset_size) +
                        ", n=" + std::to_string(n_segments) + ")");
  }
  const double n = static_cast<double>(n_segments);
  const double z = static_cast<double>(subset_size);
  return (n - 1.0) / (Binomial(n_segments, subset_size) * z * (n - z));
}

std::vector<double> ExactShapley(const ValueFunction& value_fn,
                                 size_t n_segments) {
  if (n_segments == 0 || n_segments > kExactShapleyMaxSegments) {
    throw ContractError("exact Shapley enumeration supports 1.." +
                        std::to_string(kExactShapleyMaxSegments) +
                        " segments, got " + std::to_string(n_segments));
  }
  const size_t n = n_segments;
  const uint64_t n_coalitions = uint64_t{1} << n;
  std::vector<double> value(n_coalitions);
  for (uint64_t bits = 0; bits < n_coalitions; ++bits) {
    value[bits] = value_fn(MaskFromBits(n, bits));
  }
  // |S|! (n - |S| - 1)! / n!
  std::vector<double> factorial(n + 1, 1.0);
  for (size_t i = 1; i <= n; ++i) factorial[i] = factorial[i - 1] * i;
  std::vector<double> coalition_weight(n);
  for (size_t s = 0; s < n; ++s) {
    coalition_weight[s] = factorial[s] * factorial[n - s - 1] / factorial[n];
  }

  std::vector<double> phi(n, 0.0);
  for (size_t j = 0; j < n; ++j) {
    const uint64_t bit = uint64_t{1} << j;
    for (uint64_t bits = 0; bits < n_coalitions; ++bits) {
      if (bits & bit) continue;
      const size_t s = std::popcount(bits);
      phi[j] += coalition_weight[s] * (value[bits | bit] - value[bits]);
    }
  }
  return phi;
}

bool KernelShapEnumerates(size_t n_segments, size_t n_samples) {
  if (n_segments >= 63) return false;
  return (uint64_t{1} << n_segments) - 2 <= n_samples;
}

std::vector<WeightedMask> KernelShapDesign(size_t n_segments, size_t n_samples,
                                           Rng& rng) {
  std::vector<WeightedMask> design;
  if (n_segments < 2) return design;
  const size_t n = n_segments;

  if (KernelShapEnumerates(n, n_samples)) {
    const uint64_t full = (uint64_t{1} << n) - 1;
    for (uint64_t bits = 1; bits < full; ++bits) {
      design.push_back(WeightedMask{MaskFromBits(n, bits),
                                    ShapleyKernelWeight(n, std::popcount(bits))});
    }
    std::sort(design.begin(), design.end(),
              [](const auto& a, const auto& b) { return a.mask < b.mask; });
    return design;
  }

  // Total kernel mass of size z is C(n, z) * w(z) = (n-1) / (z (n-z)).
  std::vector<double> cumulative;
  double total = 0.0;
  for (size_t z = 1; z < n; ++z) {
    total += static_cast<double>(n - 1) / static_cast<double>(z * (n - z));
    cumulative.push_back(total);
  }

  std::map<SubsetMask, double> counts;
  std::vector<size_t> pool(n);
  for (size_t s = 0; s < n_samples; ++s) {
    const double u = rng.Uniform() * total;
    size_t z = 1 + static_cast<size_t>(
                       std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                       cumulative.begin());
    z = std::min(z, n - 1);
    std::iota(pool.begin(), pool.end(), 0);
    SubsetMask mask(n);
    for (size_t i = 0; i < z; ++i) {
      const size_t pick = i + rng.UniformInt(n - i);
      std::swap(pool[i], pool[pick]);
      mask.set(pool[i]);
    }
    counts[mask] += 1.0;
  }
  for (auto& [mask, count] : counts) design.push_back(WeightedMask{mask, count});
  return design;
}

std::vector<double> SolveKernelShap(size_t n_segments, double empty_value,
                                    double full_value,
                                    std::span<const WeightedMask> design,
                                    std::span<const double> values) {
  if (design.size() != values.size()) {
    throw ContractError("KernelSHAP design and values differ in length");
  }
  const double total = full_value - empty_value;
  if (n_segments == 1) return {total};
  const size_t n = n_segments;
  const size_t m = design.size();
  const Eigen::Index free = static_cast<Eigen::Index>(n - 1);
  if (m < n - 1) {
    throw DegenerateSampleError(
        "KernelSHAP has " + std::to_string(m) + " distinct masks for " +
        std::to_string(n - 1) +
        " free coefficients; use a different seed or more samples");
  }

  // Row i: sqrt(w_i) * [z_j - z_last]_j  ~  sqrt(w_i) * (f_i - f0 - z_last * total)
  Eigen::MatrixXd a(static_cast<Eigen::Index>(m), free);
  Eigen::VectorXd b(static_cast<Eigen::Index>(m));
  for (size_t i = 0; i < m; ++i) {
    const SubsetMask& mask = design[i].mask;
    if (mask.size() != n) throw ContractError("design mask has wrong length");
    const double sw = std::sqrt(design[i].weight);
    const double z_last = mask.test(n - 1) ? 1.0 : 0.0;
    for (size_t j = 0; j + 1 < n; ++j) {
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          sw * ((mask.test(j) ? 1.0 : 0.0) - z_last);
    }
    b(static_cast<Eigen::Index>(i)) =
        sw * (values[i] - empty_value - z_last * total);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < free) {
    throw DegenerateSampleError(
        "KernelSHAP regression is rank deficient (rank " +
        std::to_string(qr.rank()) + " of " + std::to_string(free) +
        "); use a different seed or more samples");
  }
  const Eigen::VectorXd x = qr.solve(b);
  std::vector<double> phi(n);
  double partial = 0.0;
  for (size_t j = 0; j + 1 < n; ++j) {
    phi[j] = x(static_cast<Eigen::Index>(j));
    partial += phi[j];
  }
  phi[n - 1] = total - partial;
  return phi;
}

}  // namespace camab
