#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "camab/errors.h"
#include "cli.h"

namespace {

using camab::cli::OutputFormat;

const std::map<std::string, OutputFormat> kFormats = {
    {"json", OutputFormat::kJson}, {"csv", OutputFormat::kCsv}};
const std::map<std::string, camab::Granularity> kGranularities = {
    {"sentence", camab::Granularity::kSentence},
    {"paragraph", camab::Granularity::kParagraph}};

// Flags shared by attribute and evaluate.
void AddRunFlags(CLI::App* cmd, camab::cli::RunConfig& config,
                 std::string& methods) {
  cmd->add_option("--input", config.input, "instances (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--method,--methods", methods,
                  "comma-separated: cts, shap, contextcite, loo");
  cmd->add_option("--oracle", config.oracle,
                  "synthetic | replay:PATH | remote")
      ->capture_default_str();
  cmd->add_option("--budget", config.budget, "oracle queries per run")
      ->capture_default_str();
  cmd->add_option("--seed", config.seed)->capture_default_str();
  cmd->add_option("--output", config.output)->required();
  cmd->add_option("--format", config.format)
      ->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case));
  cmd->add_option("--model", config.model, "model name for the remote oracle");
  cmd->add_option("--granularity", config.granularity)
      ->transform(CLI::CheckedTransformer(kGranularities, CLI::ignore_case));
  cmd->add_option("--jobs", config.jobs, "worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context attribution with combinatorial Thompson sampling"};
  app.require_subcommand(1);

  camab::cli::RunConfig attr;
  std::string attr_methods = "cts";
  std::string cache;
  auto* attribute = app.add_subcommand("attribute", "score context segments");
  AddRunFlags(attribute, attr, attr_methods);
  attribute->add_option("--top-p", attr.top_p, "share of segments per query")
      ->capture_default_str();
  attribute->add_option("--noise-variance", attr.noise_variance)
      ->capture_default_str();
  attribute->add_option("--cache", cache,
                        "record remote responses into this replay store");

  camab::cli::RunConfig eval;
  std::string eval_methods;
  std::string attributions;
  auto* evaluate =
      app.add_subcommand("evaluate", "top-k drop of saved attributions");
  AddRunFlags(evaluate, eval, eval_methods);
  evaluate->add_option("--attributions", attributions)->required();
  evaluate->add_option("--k", eval.ks, "k values")->delimiter(',');
  evaluate->add_option("--dataset", eval.dataset)->capture_default_str();
  evaluate->add_flag("--consistency", eval.consistency,
                     "regenerate ablated responses (remote oracle)");

  camab::cli::BenchConfig bench;
  std::string bench_methods = "cts,contextcite";
  auto* synth = app.add_subcommand("bench-synthetic",
                                   "planted-segment recovery benchmark");
  synth->add_option("--segments", bench.segments)->capture_default_str();
  synth->add_option("--planted", bench.planted)->capture_default_str();
  synth->add_option("--planted-weight", bench.planted_weight)
      ->capture_default_str();
  synth->add_option("--runs", bench.runs)->capture_default_str();
  synth->add_option("--budgets", bench.budgets)->delimiter(',');
  synth->add_option("--method,--methods", bench_methods)->capture_default_str();
  synth->add_option("--k", bench.ks)->delimiter(',');
  synth->add_option("--tokens", bench.tokens)->capture_default_str();
  synth->add_option("--base-offset-low", bench.base_offset_low,
                    "per-token offsets are drawn uniformly from [low, high]")
      ->capture_default_str();
  synth->add_option("--base-offset-high", bench.base_offset_high)
      ->capture_default_str();
  synth->add_option("--top-p", bench.top_p)->capture_default_str();
  synth->add_option("--noise-variance", bench.noise_variance)
      ->capture_default_str();
  synth->add_option("--seed", bench.seed)->capture_default_str();
  synth->add_option("--output", bench.output, "report path (stdout summary only when absent)");
  synth->add_option("--format", bench.format)
      ->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case));
  synth->add_option("--jobs", bench.jobs)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return camab::cli::kExitFatal;
  }

  try {
    if (*attribute) {
      attr.methods = camab::ParseMethodList(attr_methods);
      if (!cache.empty()) attr.cache = cache;
      return camab::cli::CmdAttribute(attr, std::cerr);
    }
    if (*evaluate) {
      if (!eval_methods.empty()) {
        eval.methods = camab::ParseMethodList(eval_methods);
      } else {
        eval.methods.clear();
      }
      return camab::cli::CmdEvaluate(eval, attributions, std::cerr);
    }
    bench.methods = camab::ParseMethodList(bench_methods);
    return camab::cli::CmdBenchSynthetic(bench, std::cerr);
  } catch (const camab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return camab::cli::kExitFatal;
  }
}
