#include "cli.h"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <numeric>
#include <mutex>
#include <set>
#include <thread>

#include "camab/errors.h"
#include "camab/remote.h"
#include "camab/replay.h"

namespace camab::cli {

using nlohmann::json;

namespace {

MethodSettings SettingsFor(double top_p, double noise_variance) {
  MethodSettings s;
  s.cts.top_p = top_p;
  s.cts.noise_variance = noise_variance;
  return s;
}

std::string ReportText(const ComparisonReport& report, OutputFormat format) {
  if (format == OutputFormat::kCsv) return report.ToCsv();
  return report.ToJson().dump(2) + "\n";
}

// Runs fn(i) for every instance on `jobs` threads; results are placed by
// index so output order never depends on scheduling.
template <typename Fn>
void ForEachInstance(size_t n, size_t jobs, Fn&& fn) {
  jobs = std::max<size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> workers;
  for (size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<size_t> IdOrder(std::span<const Instance> instances) {
  std::vector<size_t> order(instances.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return instances[a].id < instances[b].id;
  });
  return order;
}

}  // namespace

OracleFactory MakeOracleFactory(const RunConfig& config,
                                std::span<const Instance> instances,
                                std::shared_ptr<ReplayStore>* record_store) {
  if (config.oracle == "synthetic") {
    auto models = std::make_shared<SyntheticOracle::ModelMap>();
    for (const auto& inst : instances) {
      auto model = SyntheticModelFromInstance(inst);
      (*models)[inst.id] = model ? *model : DeriveSyntheticModel(inst, 0);
    }
    return [models](std::optional<uint64_t> limit) {
      return std::make_shared<SyntheticOracle>(
          models, std::make_shared<BudgetLedger>(limit));
    };
  }
  if (config.oracle.rfind("replay:", 0) == 0) {
    const std::filesystem::path path = config.oracle.substr(7);
    auto store = std::make_shared<ReplayStore>();
    store->Load(path);
    std::shared_ptr<const ReplayStore> frozen = store;
    return [frozen](std::optional<uint64_t> limit) {
      return std::make_shared<StoredOracle>(
          frozen, std::make_shared<BudgetLedger>(limit));
    };
  }
  if (config.oracle == "remote") {
    if (config.model.empty()) {
      throw ValidationError("remote oracle needs --model");
    }
    const RemoteOptions options = RemoteOptionsFromEnv(config.model);
    std::shared_ptr<ReplayStore> store;
    if (config.cache) {
      store = std::make_shared<ReplayStore>();
      if (std::filesystem::exists(*config.cache)) store->Load(*config.cache);
      if (record_store) *record_store = store;
    }
    return [options, store](
               std::optional<uint64_t> limit) -> std::shared_ptr<LikelihoodOracle> {
      auto remote = std::make_shared<RemoteOracle>(
          options, std::make_shared<BudgetLedger>(limit));
      if (!store) return remote;
      // Hits are charged so a warm cache gives the same output as a cold one.
      return std::make_shared<ReplayOracle>(remote, store, HitCharging::kCharged);
    };
  }
  throw ValidationError("unknown oracle '" + config.oracle +
                        "' (expected synthetic, replay:PATH or remote)");
}

// ------------------------------------------------------------------ attribute

int CmdAttribute(const RunConfig& config, std::ostream& log) {
  std::vector<Instance> instances;
  try {
    instances = LoadJsonl(config.input, config.granularity);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitFatal;
  }

  try {
    std::shared_ptr<ReplayStore> record_store;
    const OracleFactory factory =
        MakeOracleFactory(config, instances, &record_store);
    const MethodSettings settings =
        SettingsFor(config.top_p, config.noise_variance);
    settings.cts.Validate();

    struct Slot {
      std::optional<AttributionResult> result;
      std::string skip_reason;
    };
    std::vector<std::vector<Slot>> slots(
        instances.size(), std::vector<Slot>(config.methods.size()));

    ForEachInstance(instances.size(), config.jobs, [&](size_t i) {
      const Instance& inst = instances[i];
      for (size_t m = 0; m < config.methods.size(); ++m) {
        const Method method = config.methods[m];
        Slot& slot = slots[i][m];
        if (config.budget < MinimumBudget(method, inst)) {
          slot.skip_reason = fmt::format(
              "budget {} below the {} minimum of {}", config.budget,
              MethodName(method), MinimumBudget(method, inst));
          continue;
        }
        // Per-run cache: repeated masks within one run are free.
        ReplayOracle oracle(factory(config.budget + kAnchorCharge),
                            std::make_shared<ReplayStore>());
        const uint64_t seed =
            DeriveSeed(config.seed, inst.id, MethodName(method));
        try {
          slot.result =
              RunMethod(method, inst, oracle, config.budget, seed, settings);
        } catch (const UninformativeContextError& e) {
          slot.skip_reason = e.what();
        } catch (const DegenerateSampleError& e) {
          slot.skip_reason = e.what();
        } catch (const AlignmentError& e) {
          slot.skip_reason = e.what();
        }
      }
    });

    std::string out;
    if (config.format == OutputFormat::kCsv) {
      out = "instance_id,method,segment,score,rank\n";
    }
    size_t skipped = 0;
    size_t written = 0;
    for (size_t i : IdOrder(instances)) {
      for (size_t m = 0; m < config.methods.size(); ++m) {
        const Slot& slot = slots[i][m];
        if (!slot.result) {
          ++skipped;
          log << "skipped " << instances[i].id << " ["
              << MethodName(config.methods[m]) << "]: " << slot.skip_reason
              << "\n";
          continue;
        }
        ++written;
        const AttributionResult& r = *slot.result;
        if (config.format == OutputFormat::kJson) {
          out += ToJson(r).dump();
          out += '\n';
        } else {
          for (size_t pos = 0; pos < r.ranking.size(); ++pos) {
            const size_t j = r.ranking[pos];
            out += fmt::format("{},{},{},{:.17g},{}\n", r.instance_id, r.method,
                               j, r.scores[j], pos + 1);
          }
        }
      }
    }
    WriteFileAtomic(config.output, out);
    if (record_store && config.cache) record_store->Save(*config.cache);
    log << "wrote " << written << " attributions to " << config.output.string()
        << " (" << skipped << " skipped)\n";
    return skipped > 0 ? kExitPartial : kExitOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitFatal;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitFatal;
  }
}

// ------------------------------------------------------------------- evaluate

int CmdEvaluate(const RunConfig& config,
                const std::filesystem::path& attributions, std::ostream& log) {
  try {
    if (!std::filesystem::exists(attributions)) {
      log << "error: attribution file '" << attributions.string()
          << "' does not exist\n";
      return kExitFatal;
    }
    const std::vector<Instance> instances =
        LoadJsonl(config.input, config.granularity);
    std::map<std::string, size_t> by_id;
    for (size_t i = 0; i < instances.size(); ++i) by_id[instances[i].id] = i;

    // results[method][instance index]
    std::map<std::string, std::map<size_t, AttributionResult>> results;
    std::vector<std::string> method_order;
    std::set<std::string> orphans;
    const std::string text = ReadFile(attributions);
    size_t line_no = 0;
    size_t pos = 0;
    while (pos < text.size()) {
      size_t eol = text.find('\n', pos);
      if (eol == std::string::npos) eol = text.size();
      const std::string line = text.substr(pos, eol - pos);
      pos = eol + 1;
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json record;
      try {
        record = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed attribution: ") + e.what(),
                         line_no);
      }
      AttributionResult r = AttributionFromJson(record);
      auto it = by_id.find(r.instance_id);
      if (it == by_id.end()) {
        orphans.insert(r.instance_id);
        continue;
      }
      if (r.scores.size() != instances[it->second].n_segments()) {
        throw ValidationError("attribution for '" + r.instance_id +
                              "' has the wrong number of scores");
      }
      if (!results.contains(r.method)) method_order.push_back(r.method);
      results[r.method][it->second] = std::move(r);
    }
    if (!orphans.empty()) {
      log << "error: attributions without a matching instance:";
      for (const auto& id : orphans) log << " " << id;
      log << "\n";
      return kExitFatal;
    }
    if (!config.methods.empty()) {
      std::vector<std::string> requested;
      for (Method m : config.methods) {
        const std::string name(MethodName(m));
        if (results.contains(name)) requested.push_back(name);
      }
      if (!requested.empty()) method_order = requested;
    }

    const OracleFactory factory = MakeOracleFactory(config, instances, nullptr);
    std::shared_ptr<RemoteOracle> generator;
    if (config.consistency) {
      if (config.oracle != "remote") {
        throw CapabilityError(
            "consistency needs the remote oracle for generation; use the "
            "log-probability metrics instead");
      }
      generator = std::make_shared<RemoteOracle>(
          RemoteOptionsFromEnv(config.model), nullptr);
    }
    const TokenF1Scorer scorer;

    ComparisonReport report;
    report.anchor_convention =
        "evaluation queries are not charged to any method budget";
    bool any_skip = false;
    bool any_value = false;
    std::vector<std::shared_ptr<ReplayOracle>> oracles(instances.size());
    for (size_t i = 0; i < instances.size(); ++i) {
      oracles[i] = std::make_shared<ReplayOracle>(
          factory(std::nullopt), std::make_shared<ReplayStore>());
    }
    const std::vector<size_t> order = IdOrder(instances);
    for (const auto& method : method_order) {
      const auto& per_instance = results[method];
      const size_t skips = instances.size() - per_instance.size();
      any_skip = any_skip || skips > 0;
      for (size_t k : config.ks) {
        std::vector<double> drops, consistency;
        size_t clamped = 0;
        for (size_t i : order) {
          auto it = per_instance.find(i);
          if (it == per_instance.end()) continue;
          const TopKDrop d = TopKLogProbDrop(instances[i], *oracles[i], it->second, k);
          clamped += d.degenerate_k;
          drops.push_back(d.drop);
          if (generator) {
            const auto ablation =
                MakeTopKAblation(it->second, instances[i].n_segments(), k);
            const Generation g =
                GenerateAblated(instances[i], ablation.kept_mask, generator.get());
            consistency.push_back(
                ConsistencyScore(WhitespaceTokenize(instances[i].ResponseText()),
                                 g.tokens, scorer)
                    .score);
          }
        }
        if (clamped > 0) {
          log << fmt::format("warning: k={} covers every segment of {} instance(s) [{}]\n",
                             k, clamped, method);
        }
        auto add = [&](std::string metric, const std::vector<double>& values) {
          ReportRow r;
          r.dataset = config.dataset;
          r.method = method;
          r.budget = config.budget;
          r.k = k;
          r.metric = std::move(metric);
          auto [mean, se] = MeanAndStdError(values);
          r.mean = mean;
          r.std_error = se;
          r.n = values.size();
          r.skips = skips;
          report.rows.push_back(std::move(r));
        };
        add("topk_drop", drops);
        if (generator) add("consistency_" + scorer.name(), consistency);
        any_value = any_value || !drops.empty();
      }
    }

    WriteFileAtomic(config.output, ReportText(report, config.format));
    if (!any_value) {
      log << "no attributed instances to evaluate; wrote an empty report\n";
      return kExitPartial;
    }
    log << "wrote " << report.rows.size() << " report rows to "
        << config.output.string() << "\n";
    return any_skip ? kExitPartial : kExitOk;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitFatal;
  }
}

// ---------------------------------------------------------------------- bench

SyntheticBenchmark MakeSyntheticBenchmark(const BenchConfig& config) {
  if (config.segments == 0 || config.runs == 0 || config.tokens == 0) {
    throw ValidationError("segments, runs and tokens must be positive");
  }
  if (config.planted >= config.segments) {
    throw ValidationError("planted must be smaller than segments");
  }
  if (!(config.base_offset_low <= config.base_offset_high)) {
    throw ValidationError("base offset range is empty");
  }
  SyntheticBenchmark bench;
  for (size_t r = 0; r < config.runs; ++r) {
    Instance inst;
    inst.id = fmt::format("bench-{:05d}", r);
    inst.question = fmt::format("Synthetic question {}?", r);
    for (size_t j = 0; j < config.segments; ++j) {
      inst.segments.push_back(Segment{j, fmt::format("Segment {} of {}.", j, r)});
    }
    for (size_t t = 0; t < config.tokens; ++t) {
      inst.response_tokens.push_back(fmt::format("tok{}", t));
    }

    Rng rng(DeriveSeed(config.seed, inst.id, "bench"));
    std::vector<size_t> pool(config.segments);
    std::iota(pool.begin(), pool.end(), 0);
    for (size_t i = 0; i < config.planted; ++i) {
      std::swap(pool[i], pool[i + rng.UniformInt(config.segments - i)]);
    }
    std::vector<size_t> planted(pool.begin(),
                                pool.begin() + static_cast<ptrdiff_t>(config.planted));
    std::sort(planted.begin(), planted.end());

    SyntheticModel model;
    model.weights.assign(config.segments, 0.0);
    for (size_t j : planted) model.weights[j] = config.planted_weight;
    for (size_t t = 0; t < config.tokens; ++t) {
      model.base_offsets.push_back(
          config.base_offset_low +
          (config.base_offset_high - config.base_offset_low) * rng.Uniform());
    }
    AttachSyntheticModel(inst, model);
    bench.planted[inst.id] = std::move(planted);
    bench.instances.push_back(std::move(inst));
  }
  return bench;
}

int CmdBenchSynthetic(const BenchConfig& config, std::ostream& log,
                      ComparisonReport* report_out) {
  try {
    const SyntheticBenchmark bench = MakeSyntheticBenchmark(config);
    RunConfig run;
    run.oracle = "synthetic";
    const OracleFactory factory =
        MakeOracleFactory(run, bench.instances, nullptr);

    CompareOptions options;
    options.dataset = "synthetic";
    options.methods = config.methods;
    options.budgets = config.budgets;
    options.ks = config.ks;
    options.seed = config.seed;
    options.settings = SettingsFor(config.top_p, config.noise_variance);
    options.settings.cts.Validate();
    options.planted = bench.planted;
    options.jobs = config.jobs;

    ComparisonReport report = CompareMethods(bench.instances, options, factory);
    if (!config.output.empty()) {
      WriteFileAtomic(config.output, ReportText(report, config.format));
    }
    for (const auto& row : report.rows) {
      if (row.metric != "exact_recovery") continue;
      log << fmt::format("{}@{}: recovery rate {}\n", row.method, row.budget,
                         row.mean ? fmt::format("{:.3f}", *row.mean) : "n/a");
    }
    if (report_out) *report_out = std::move(report);
    return kExitOk;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitFatal;
  }
}

}  // namespace camab::cli
