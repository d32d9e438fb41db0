#include "camab/eval.h"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "camab/baselines.h"
#include "camab/errors.h"
#include "camab/replay.h"

namespace camab {

using nlohmann::json;

// ------------------------------------------------------------------ metrics

TopKAblation MakeTopKAblation(const AttributionResult& result,
                              size_t n_segments, size_t k) {
  if (result.ranking.size() != n_segments) {
    throw ContractError("attribution for '" + result.instance_id +
                        "' does not match the instance's segment count");
  }
  TopKAblation a;
  a.clamped = k > n_segments;
  a.k = std::min(k, n_segments);
  a.removed.assign(result.ranking.begin(),
                   result.ranking.begin() + static_cast<ptrdiff_t>(a.k));
  a.kept_mask = SubsetMask::Full(n_segments);
  for (size_t j : a.removed) a.kept_mask.set(j, false);
  return a;
}

TopKDrop TopKLogProbDrop(const Instance& instance, LikelihoodOracle& oracle,
                         const AttributionResult& result, size_t k) {
  if (result.instance_id != instance.id) {
    throw ContractError("attribution '" + result.instance_id +
                        "' does not belong to instance '" + instance.id + "'");
  }
  const TopKAblation ablation = MakeTopKAblation(result, instance.n_segments(), k);
  TopKDrop out;
  out.degenerate_k = k >= instance.n_segments();
  if (ablation.k == 0) return out;
  const double full =
      AvgLogLikelihood(instance, oracle, SubsetMask::Full(instance.n_segments()));
  out.drop = full - AvgLogLikelihood(instance, oracle, ablation.kept_mask);
  return out;
}

double TokenF1Scorer::Score(std::span<const std::string> candidate,
                            std::span<const std::string> reference) const {
  if (candidate.empty() || reference.empty()) return 0.0;
  std::unordered_map<std::string_view, long> counts;
  for (const auto& t : reference) ++counts[t];
  long overlap = 0;
  for (const auto& t : candidate) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision =
      static_cast<double>(overlap) / static_cast<double>(candidate.size());
  const double recall =
      static_cast<double>(overlap) / static_cast<double>(reference.size());
  return 2.0 * precision * recall / (precision + recall);
}

Consistency ConsistencyScore(std::span<const std::string> original,
                             std::span<const std::string> ablated,
                             const SimilarityScorer& scorer) {
  if (original.empty()) throw ContractError("original response is empty");
  if (ablated.empty()) return Consistency{0.0, true};
  return Consistency{std::clamp(scorer.Score(ablated, original), 0.0, 1.0),
                     false};
}

Generation GenerateAblated(const Instance& instance,
                           const SubsetMask& kept_mask,
                           ResponseGenerator* generator) {
  if (generator == nullptr) {
    throw CapabilityError(
        "no generation-capable oracle configured; consistency needs one, use "
        "the log-probability metrics instead");
  }
  const size_t cap = 2 * instance.n_tokens();
  Generation g = generator->Generate(RenderPrompt(instance, kept_mask), cap);
  if (g.tokens.size() >= cap) {
    g.tokens.resize(cap);
    g.capped = true;
  }
  return g;
}

// ------------------------------------------------------------------- report

std::pair<std::optional<double>, std::optional<double>> MeanAndStdError(
    std::span<const double> values) {
  if (values.empty()) return {std::nullopt, std::nullopt};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, std::nullopt};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

std::string ComparisonReport::ToCsv() const {
  std::string out = "dataset,method,budget,k,metric,mean,stderr,n,skips\n";
  for (const auto& r : rows) {
    std::string mean = r.infeasible ? "infeasible"
                       : r.mean     ? fmt::format("{:.6f}", *r.mean)
                                    : "n/a";
    std::string se = r.std_error ? fmt::format("{:.6f}", *r.std_error) : "";
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.dataset, r.method,
                       r.budget, r.k, r.metric, mean, se, r.n, r.skips);
  }
  return out;
}

json ComparisonReport::ToJson() const {
  json j;
  j["anchor_convention"] = anchor_convention;
  j["rows"] = json::array();
  for (const auto& r : rows) {
    j["rows"].push_back(
        {{"dataset", r.dataset},
         {"method", r.method},
         {"budget", r.budget},
         {"k", r.k},
         {"metric", r.metric},
         {"mean", r.mean ? json(*r.mean) : json(nullptr)},
         {"stderr", r.std_error ? json(*r.std_error) : json(nullptr)},
         {"n", r.n},
         {"skips", r.skips},
         {"infeasible", r.infeasible}});
  }
  j["ledgers"] = json::array();
  for (const auto& l : ledgers) {
    j["ledgers"].push_back({{"method", l.method},
                            {"budget", l.budget},
                            {"instances", l.instances},
                            {"total_calls", l.total_calls},
                            {"max_calls", l.max_calls},
                            {"anchor_calls", l.anchor_calls},
                            {"cache_hits", l.cache_hits},
                            {"within_budget", l.within_budget},
                            {"infeasible", l.infeasible}});
  }
  return j;
}

// --------------------------------------------------------------- comparison

namespace {

enum class RunStatus { kOk, kSkipped };

struct CellOutcome {
  RunStatus status = RunStatus::kSkipped;
  LedgerSnapshot ledger;
  std::vector<double> drops;                       // per k
  std::vector<std::optional<double>> consistency;  // per k
  std::optional<double> recovery;
  std::optional<double> exact_recovery;
};

struct InstanceOutcome {
  // [method][budget]
  std::vector<std::vector<CellOutcome>> cells;
};

void ParallelFor(size_t n, size_t jobs, const std::function<void(size_t)>& fn) {
  jobs = std::max<size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> workers;
  for (size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

ComparisonReport CompareMethods(std::span<const Instance> instances,
                                const CompareOptions& options,
                                const OracleFactory& factory) {
  if (instances.empty()) throw ContractError("no instances to compare");
  if (options.methods.empty() || options.budgets.empty()) {
    throw ContractError("comparison needs at least one method and budget");
  }
  const size_t n_methods = options.methods.size();
  const size_t n_budgets = options.budgets.size();

  // A (method, budget) pair is infeasible when any instance is below the
  // method's minimum; such pairs are never run.
  std::vector<std::vector<bool>> infeasible(n_methods,
                                            std::vector<bool>(n_budgets, false));
  for (size_t m = 0; m < n_methods; ++m) {
    for (size_t b = 0; b < n_budgets; ++b) {
      for (const auto& inst : instances) {
        if (options.budgets[b] < MinimumBudget(options.methods[m], inst)) {
          infeasible[m][b] = true;
          break;
        }
      }
    }
  }

  const TokenF1Scorer default_scorer;
  const SimilarityScorer& scorer =
      options.scorer ? *options.scorer : default_scorer;

  std::vector<InstanceOutcome> outcomes(instances.size());
  ParallelFor(instances.size(), options.jobs, [&](size_t i) {
    const Instance& inst = instances[i];
    // Evaluation queries are not charged to any method; the cache shares
    // f(C) and repeated ablations across methods.
    ReplayOracle eval_oracle(factory(std::nullopt),
                             std::make_shared<ReplayStore>());
    const std::vector<std::string> original =
        WhitespaceTokenize(inst.ResponseText());
    const auto planted_it = options.planted.find(inst.id);

    InstanceOutcome& outcome = outcomes[i];
    outcome.cells.assign(n_methods, std::vector<CellOutcome>(n_budgets));
    for (size_t m = 0; m < n_methods; ++m) {
      const Method method = options.methods[m];
      const uint64_t seed =
          DeriveSeed(options.seed, inst.id, MethodName(method));
      for (size_t b = 0; b < n_budgets; ++b) {
        if (infeasible[m][b]) continue;
        const size_t budget = options.budgets[b];
        CellOutcome& cell = outcome.cells[m][b];

        ReplayOracle run_oracle(factory(budget + kAnchorCharge),
                                std::make_shared<ReplayStore>());
        AttributionResult result;
        try {
          result = RunMethod(method, inst, run_oracle, budget, seed,
                             options.settings);
        } catch (const UninformativeContextError&) {
          cell.ledger = run_oracle.ledger().Snapshot();
          continue;
        } catch (const DegenerateSampleError&) {
          cell.ledger = run_oracle.ledger().Snapshot();
          continue;
        }
        cell.status = RunStatus::kOk;
        cell.ledger = run_oracle.ledger().Snapshot();

        for (size_t k : options.ks) {
          cell.drops.push_back(TopKLogProbDrop(inst, eval_oracle, result, k).drop);
          if (options.generator != nullptr) {
            const auto ablation = MakeTopKAblation(result, inst.n_segments(), k);
            const Generation g =
                GenerateAblated(inst, ablation.kept_mask, options.generator);
            cell.consistency.push_back(
                ConsistencyScore(original, g.tokens, scorer).score);
          }
        }
        if (planted_it != options.planted.end() && !planted_it->second.empty()) {
          const auto& planted = planted_it->second;
          const size_t top = std::min(planted.size(), result.ranking.size());
          size_t hits = 0;
          for (size_t r = 0; r < top; ++r) {
            if (std::find(planted.begin(), planted.end(), result.ranking[r]) !=
                planted.end()) {
              ++hits;
            }
          }
          cell.recovery =
              static_cast<double>(hits) / static_cast<double>(planted.size());
          cell.exact_recovery = hits == planted.size() ? 1.0 : 0.0;
        }
      }
    }
  });

  // Fold in instance-id order.
  std::vector<size_t> order(instances.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return instances[a].id < instances[b].id;
  });

  ComparisonReport report;
  report.anchor_convention =
      "oracle_calls include the " + std::to_string(kAnchorCharge) +
      " anchor queries (empty and full context); each (instance, method, "
      "budget) run is limited to budget + " +
      std::to_string(kAnchorCharge) +
      " calls. Subtract anchor_calls for the anchor-free count.";

  bool any_planted = false;
  for (const auto& inst : instances) {
    if (options.planted.contains(inst.id)) any_planted = true;
  }

  for (size_t m = 0; m < n_methods; ++m) {
    const std::string method(MethodName(options.methods[m]));
    for (size_t b = 0; b < n_budgets; ++b) {
      const size_t budget = options.budgets[b];
      auto row = [&](size_t k, std::string metric,
                     const std::vector<double>& values, size_t skips) {
        ReportRow r;
        r.dataset = options.dataset;
        r.method = method;
        r.budget = budget;
        r.k = k;
        r.metric = std::move(metric);
        r.infeasible = infeasible[m][b];
        if (!r.infeasible) {
          auto [mean, se] = MeanAndStdError(values);
          r.mean = mean;
          r.std_error = se;
        }
        r.n = values.size();
        r.skips = skips;
        report.rows.push_back(std::move(r));
      };

      LedgerTotals totals;
      totals.method = method;
      totals.budget = budget;
      totals.infeasible = infeasible[m][b];
      size_t skips = 0;
      std::vector<double> calls;
      std::vector<std::vector<double>> drops(options.ks.size());
      std::vector<std::vector<double>> consistency(options.ks.size());
      std::vector<double> recovery, exact_recovery;
      size_t planted_k = 0;
      for (size_t i : order) {
        if (infeasible[m][b]) break;
        const CellOutcome& cell = outcomes[i].cells[m][b];
        ++totals.instances;
        totals.total_calls += cell.ledger.oracle_calls;
        totals.max_calls = std::max(totals.max_calls, cell.ledger.oracle_calls);
        totals.anchor_calls += cell.ledger.anchor_calls;
        totals.cache_hits += cell.ledger.cache_hits;
        if (cell.ledger.oracle_calls > budget + kAnchorCharge) {
          totals.within_budget = false;
        }
        if (cell.status != RunStatus::kOk) {
          ++skips;
          continue;
        }
        calls.push_back(static_cast<double>(cell.ledger.oracle_calls));
        for (size_t q = 0; q < options.ks.size(); ++q) {
          drops[q].push_back(cell.drops[q]);
          if (q < cell.consistency.size() && cell.consistency[q]) {
            consistency[q].push_back(*cell.consistency[q]);
          }
        }
        if (cell.recovery) {
          recovery.push_back(*cell.recovery);
          exact_recovery.push_back(*cell.exact_recovery);
          planted_k = options.planted.at(instances[i].id).size();
        }
      }

      for (size_t q = 0; q < options.ks.size(); ++q) {
        row(options.ks[q], "topk_drop", drops[q], skips);
      }
      if (options.generator != nullptr) {
        for (size_t q = 0; q < options.ks.size(); ++q) {
          row(options.ks[q], "consistency_" + scorer.name(), consistency[q],
              skips);
        }
      }
      if (any_planted) {
        row(planted_k, "recovery", recovery, skips);
        row(planted_k, "exact_recovery", exact_recovery, skips);
      }
      row(0, "oracle_calls", calls, skips);
      report.ledgers.push_back(totals);
    }
  }
  return report;
}

}  // namespace camab
