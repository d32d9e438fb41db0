#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "camab/corpus.h"
#include "camab/eval.h"
#include "camab/methods.h"
#include "camab/replay.h"

namespace camab::cli {

// Stable exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

enum class OutputFormat { kJson, kCsv };

struct RunConfig {
  std::filesystem::path input;
  std::vector<Method> methods = {Method::kCts};
  // "synthetic", "replay:PATH" or "remote".
  std::string oracle = "synthetic";
  size_t budget = 60;
  double top_p = 0.2;
  double noise_variance = 1.0;
  uint64_t seed = 0;
  std::vector<size_t> ks = {1, 3, 5};
  std::filesystem::path output;
  OutputFormat format = OutputFormat::kJson;
  // Remote oracle only.
  std::string model;
  std::optional<std::filesystem::path> cache;  // record-through replay store
  bool consistency = false;                    // regenerate ablated responses
  Granularity granularity = Granularity::kSentence;
  std::string dataset = "default";
  size_t jobs = 1;
};

// Runs each method on each instance and writes one AttributionResult per
// (instance, method), ordered by instance id. Returns kExitPartial when any
// instance was skipped.
int CmdAttribute(const RunConfig& config, std::ostream& log);

// Scores previously written attributions with the top-k drop (and
// consistency when enabled) and writes the comparison report.
int CmdEvaluate(const RunConfig& config,
                const std::filesystem::path& attributions, std::ostream& log);

struct BenchConfig {
  size_t segments = 12;
  size_t planted = 3;
  double planted_weight = 2.0;
  size_t runs = 100;
  std::vector<size_t> budgets = {20, 40, 60};
  std::vector<Method> methods = {Method::kCts, Method::kContextCite};
  std::vector<size_t> ks = {1, 3, 5};
  size_t tokens = 4;
  // Per-token offsets b_t are drawn uniformly from this range.
  double base_offset_low = -3.0;
  double base_offset_high = -1.0;
  double top_p = 0.2;
  double noise_variance = 1.0;
  uint64_t seed = 0;
  std::filesystem::path output;
  OutputFormat format = OutputFormat::kCsv;
  size_t jobs = 1;
};

struct SyntheticBenchmark {
  std::vector<Instance> instances;  // each carries its planted model
  std::map<std::string, std::vector<size_t>> planted;
};

// `runs` instances with `planted` segments at `planted_weight` and the rest
// at zero; planted positions and offsets come from the seed.
SyntheticBenchmark MakeSyntheticBenchmark(const BenchConfig& config);

// Runs the synthetic benchmark through CompareMethods. When `report` is
// non-null it receives the report as well.
int CmdBenchSynthetic(const BenchConfig& config, std::ostream& log,
                      ComparisonReport* report = nullptr);

// Oracle factory for an oracle spec string. Synthetic models are read from
// each instance's "synthetic" field, or derived from its id when absent.
OracleFactory MakeOracleFactory(const RunConfig& config,
                                std::span<const Instance> instances,
                                std::shared_ptr<ReplayStore>* record_store);

}  // namespace camab::cli
