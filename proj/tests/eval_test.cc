#include <gtest/gtest.h>

#include <cmath>

#include "camab/errors.h"
#include "camab/eval.h"
#include "test_support.h"

namespace camab {
namespace {

using testing::MakeInstance;
using testing::OracleFor;
using testing::TwoSegmentInstance;
using testing::TwoSegmentModel;

AttributionResult ResultFor(const Instance& inst, std::vector<double> scores) {
  AttributionResult r;
  r.instance_id = inst.id;
  r.method = "cts";
  r.ranking = Rank(scores);
  r.scores = std::move(scores);
  return r;
}

TEST(Rank, Examples) {
  EXPECT_EQ(Rank(std::vector<double>{0.1, 0.9, 0.5}), (std::vector<size_t>{1, 2, 0}));
  EXPECT_EQ(Rank(std::vector<double>{0.3, 0.3, 0.3}), (std::vector<size_t>{0, 1, 2}));
  EXPECT_EQ(Rank(std::vector<double>{4.0}), (std::vector<size_t>{0}));
}

TEST(AttributionJson, RoundTrip) {
  const Instance inst = MakeInstance("j", 3, 1);
  AttributionResult r = ResultFor(inst, {0.1, 0.25, -3.5e-7});
  r.oracle_calls = 42;
  r.seed = 18446744073709551615ULL;
  EXPECT_EQ(AttributionFromJson(ToJson(r)), r);
  nlohmann::json bad = ToJson(r);
  bad["ranking"] = {0, 0, 1};
  EXPECT_THROW(AttributionFromJson(bad), ValidationError);
}

TEST(TopKDrop, TwoSegmentModel) {
  const Instance inst = TwoSegmentInstance();
  auto oracle = OracleFor(TwoSegmentModel());
  const AttributionResult good = ResultFor(inst, {1.0, 0.0});
  EXPECT_NEAR(TopKLogProbDrop(inst, *oracle, good, 1).drop, 1.0, 1e-14);
  EXPECT_EQ(TopKLogProbDrop(inst, *oracle, good, 0).drop, 0.0);
  const AttributionResult reversed = ResultFor(inst, {0.0, 1.0});
  EXPECT_NEAR(TopKLogProbDrop(inst, *oracle, reversed, 1).drop, 0.0, 1e-15);
}

TEST(TopKDrop, KAtLeastNIsFlagged) {
  const Instance inst = TwoSegmentInstance();
  auto oracle = OracleFor(TwoSegmentModel());
  const AttributionResult r = ResultFor(inst, {1.0, 0.0});
  const TopKDrop all = TopKLogProbDrop(inst, *oracle, r, 5);
  EXPECT_TRUE(all.degenerate_k);
  // Removing everything equals removing segment 0 here.
  EXPECT_NEAR(all.drop, 1.0, 1e-14);
  EXPECT_FALSE(TopKLogProbDrop(inst, *oracle, r, 1).degenerate_k);
}

TEST(TopKDrop, MismatchedInstance) {
  const Instance inst = TwoSegmentInstance();
  auto oracle = OracleFor(TwoSegmentModel());
  AttributionResult r = ResultFor(inst, {1.0, 0.0});
  r.instance_id = "other";
  EXPECT_THROW(TopKLogProbDrop(inst, *oracle, r, 1), ContractError);
}

TEST(TokenF1, Examples) {
  const TokenF1Scorer f1;
  const std::vector<std::string> abcd = {"a", "b", "c", "d"};
  const std::vector<std::string> ab = {"a", "b"};
  const std::vector<std::string> xy = {"x", "y"};
  EXPECT_DOUBLE_EQ(f1.Score(abcd, abcd), 1.0);
  EXPECT_EQ(f1.Score(xy, abcd), 0.0);
  EXPECT_NEAR(f1.Score(ab, abcd), 2.0 / 3.0, 1e-15);
  // Multiset: repeated tokens only match as often as they occur.
  const std::vector<std::string> aaa = {"a", "a", "a"};
  const std::vector<std::string> a = {"a"};
  EXPECT_NEAR(f1.Score(aaa, a), 0.5, 1e-15);
}

TEST(Consistency, EmptyAblatedResponseIsFlagged) {
  const TokenF1Scorer f1;
  const std::vector<std::string> orig = {"a"};
  const Consistency c = ConsistencyScore(orig, {}, f1);
  EXPECT_EQ(c.score, 0.0);
  EXPECT_TRUE(c.empty_response);
}

class CannedGenerator : public ResponseGenerator {
 public:
  explicit CannedGenerator(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {}
  Generation Generate(const std::string& prompt, size_t max_tokens) override {
    last_prompt = prompt;
    last_max = max_tokens;
    return Generation{tokens_, false};
  }
  std::string last_prompt;
  size_t last_max = 0;

 private:
  std::vector<std::string> tokens_;
};

TEST(GenerateAblated, EchoesCannedResponse) {
  const Instance inst = MakeInstance("g", 3, 2);
  CannedGenerator gen({"hello", "there"});
  const SubsetMask kept = SubsetMask::FromIndices(3, {0, 2});
  const Generation g = GenerateAblated(inst, kept, &gen);
  EXPECT_EQ(g.tokens, (std::vector<std::string>{"hello", "there"}));
  EXPECT_FALSE(g.capped);
  EXPECT_EQ(gen.last_prompt, RenderPrompt(inst, kept));
  EXPECT_EQ(gen.last_max, 4u);
}

TEST(GenerateAblated, CapTruncatesAndFlags) {
  const Instance inst = MakeInstance("g", 3, 2);
  CannedGenerator gen({"a", "b", "c", "d", "e", "f"});
  const Generation g = GenerateAblated(inst, SubsetMask::Full(3), &gen);
  EXPECT_EQ(g.tokens.size(), 4u);
  EXPECT_TRUE(g.capped);
}

TEST(GenerateAblated, NoGenerator) {
  const Instance inst = MakeInstance("g", 3, 2);
  EXPECT_THROW(GenerateAblated(inst, SubsetMask::Full(3), nullptr), CapabilityError);
}

TEST(MeanAndStdError, Values) {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  auto [mean, se] = MeanAndStdError(v);
  EXPECT_DOUBLE_EQ(*mean, 2.5);
  EXPECT_NEAR(*se, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  auto [m1, s1] = MeanAndStdError(std::vector<double>{7.0});
  EXPECT_EQ(*m1, 7.0);
  EXPECT_FALSE(s1.has_value());
  EXPECT_FALSE(MeanAndStdError(std::vector<double>{}).first.has_value());
}

OracleFactory FactoryFor(std::vector<Instance>& instances) {
  auto models = std::make_shared<SyntheticOracle::ModelMap>();
  for (auto& inst : instances) (*models)[inst.id] = *SyntheticModelFromInstance(inst);
  return [models](std::optional<uint64_t> limit) {
    return std::make_shared<SyntheticOracle>(models, std::make_shared<BudgetLedger>(limit));
  };
}

std::vector<Instance> SmallCorpus(size_t count, size_t n) {
  std::vector<Instance> out;
  Rng rng(77);
  for (size_t i = 0; i < count; ++i) {
    Instance inst = MakeInstance("i" + std::to_string(i), n, 2);
    AttachSyntheticModel(inst, testing::RandomModel(n, 2, rng));
    out.push_back(std::move(inst));
  }
  return out;
}

TEST(CompareMethods, SingleInstanceShape) {
  auto instances = SmallCorpus(1, 5);
  CompareOptions opt;
  opt.methods = {Method::kCts};
  opt.budgets = {20, 40};
  opt.ks = {1, 3};
  const ComparisonReport rep = CompareMethods(instances, opt, FactoryFor(instances));
  size_t drops = 0;
  for (const auto& row : rep.rows) {
    if (row.metric != "topk_drop") continue;
    ++drops;
    EXPECT_EQ(row.n, 1u);
    EXPECT_FALSE(row.std_error.has_value());
  }
  EXPECT_EQ(drops, 4u);
  EXPECT_FALSE(rep.anchor_convention.empty());
  const std::string csv = rep.ToCsv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "dataset,method,budget,k,metric,mean,stderr,n,skips");
}

TEST(CompareMethods, InfeasibleBudgetIsMarked) {
  auto instances = SmallCorpus(3, 25);
  CompareOptions opt;
  opt.methods = {Method::kLoo, Method::kCts};
  opt.budgets = {20};
  opt.ks = {1};
  const ComparisonReport rep = CompareMethods(instances, opt, FactoryFor(instances));
  bool saw_loo = false;
  for (const auto& row : rep.rows) {
    if (row.method != "loo") {
      EXPECT_FALSE(row.infeasible);
      continue;
    }
    saw_loo = true;
    EXPECT_TRUE(row.infeasible);
    EXPECT_EQ(row.n, 0u);
  }
  EXPECT_TRUE(saw_loo);
  EXPECT_NE(rep.ToCsv().find("infeasible"), std::string::npos);
  for (const auto& l : rep.ledgers) {
    if (l.method == "loo") EXPECT_EQ(l.total_calls, 0u);
  }
}

TEST(CompareMethods, LedgerWithinBudgetAndParallelStable) {
  auto instances = SmallCorpus(8, 6);
  CompareOptions opt;
  opt.methods = {Method::kCts, Method::kShap, Method::kContextCite, Method::kLoo};
  opt.budgets = {20, 40, 60};
  opt.ks = {1, 3};
  const ComparisonReport serial = CompareMethods(instances, opt, FactoryFor(instances));
  opt.jobs = 4;
  const ComparisonReport parallel = CompareMethods(instances, opt, FactoryFor(instances));
  EXPECT_EQ(serial.ToCsv(), parallel.ToCsv());
  EXPECT_EQ(serial.ToJson(), parallel.ToJson());
  for (const auto& l : serial.ledgers) {
    EXPECT_TRUE(l.within_budget);
    EXPECT_LE(l.max_calls, l.budget + kAnchorCharge);
  }
}

TEST(CompareMethods, UninformativeInstancesAreSkipped) {
  auto instances = SmallCorpus(3, 4);
  AttachSyntheticModel(instances[1], SyntheticModel{{-1, -1}, {0, 0, 0, 0}});
  CompareOptions opt;
  opt.methods = {Method::kCts};
  opt.budgets = {20};
  opt.ks = {1};
  const ComparisonReport rep = CompareMethods(instances, opt, FactoryFor(instances));
  for (const auto& row : rep.rows) {
    if (row.metric != "topk_drop") continue;
    EXPECT_EQ(row.n, 2u);
    EXPECT_EQ(row.skips, 1u);
  }
}

TEST(CompareMethods, RecoveryRowsWithPlantedTruth) {
  std::vector<Instance> instances;
  CompareOptions opt;
  for (int i = 0; i < 4; ++i) {
    Instance inst = MakeInstance("p" + std::to_string(i), 6, 2);
    std::vector<double> w(6, 0.0);
    w[i] = w[i + 2] = 2.0;
    AttachSyntheticModel(inst, SyntheticModel{{-2, -1}, w});
    opt.planted[inst.id] = {static_cast<size_t>(i), static_cast<size_t>(i + 2)};
    instances.push_back(std::move(inst));
  }
  opt.methods = {Method::kLoo};
  opt.budgets = {20};
  opt.ks = {2};
  const ComparisonReport rep = CompareMethods(instances, opt, FactoryFor(instances));
  bool found = false;
  for (const auto& row : rep.rows) {
    if (row.metric != "exact_recovery") continue;
    found = true;
    EXPECT_EQ(row.k, 2u);
    EXPECT_DOUBLE_EQ(*row.mean, 1.0);
  }
  EXPECT_TRUE(found);
}

}  // namespace
}  // namespace camab
