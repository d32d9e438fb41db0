#include <gtest/gtest.h>

#include <filesystem>

#include "camab/corpus.h"
#include "camab/errors.h"
#include "camab/rng.h"

namespace camab {
namespace {

using nlohmann::json;

TEST(InstanceJson, MapsFields) {
  const auto insts = ParseJsonl(
      R"({"id":"a","question":"q?","segments":["s0","s1"],"response_tokens":["yes"]})"
      "\n");
  ASSERT_EQ(insts.size(), 1u);
  EXPECT_EQ(insts[0].id, "a");
  EXPECT_EQ(insts[0].n_segments(), 2u);
  EXPECT_EQ(insts[0].n_tokens(), 1u);
  EXPECT_EQ(insts[0].segments[1].text, "s1");
  EXPECT_EQ(insts[0].segments[1].index, 1u);
}

TEST(InstanceJson, RejectsEmptySegments) {
  EXPECT_THROW(ParseJsonl(R"({"id":"a","question":"q?","segments":[]})"),
               ValidationError);
}

TEST(InstanceJson, RejectsMissingResponseTokens) {
  EXPECT_THROW(
      ParseJsonl(R"({"id":"a","question":"q?","segments":["s"],"response_tokens":[]})"),
      ValidationError);
}

TEST(InstanceJson, DuplicateIdCitesLine) {
  const std::string line =
      R"({"id":"a","question":"q?","segments":["s0"],"response_tokens":["x"]})";
  try {
    ParseJsonl(line + "\n" + line + "\n");
    FAIL() << "expected a duplicate-id error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(InstanceJson, MalformedLineIsParseError) {
  try {
    ParseJsonl("{\"id\":\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(InstanceJson, RawContextIsSegmented) {
  const auto insts = ParseJsonl(
      R"({"id":"a","question":"q?","context":"A. B! C?","response":"yes it is"})");
  ASSERT_EQ(insts[0].n_segments(), 3u);
  EXPECT_EQ(insts[0].segments[2].text, "C?");
  EXPECT_EQ(insts[0].response_tokens, (std::vector<std::string>{"yes", "it", "is"}));
}

TEST(InstanceJson, RoundTripKeepsUnknownFields) {
  const json record = {{"id", "r"},
                       {"question", "q?"},
                       {"segments", {"s0", "s1"}},
                       {"response_tokens", {"a", "b"}},
                       {"label", 3}};
  const Instance inst = InstanceFromJson(record);
  const Instance back = InstanceFromJson(InstanceToJson(inst));
  EXPECT_EQ(inst, back);
  EXPECT_EQ(InstanceToJson(inst).at("label"), 3);
}

TEST(InstanceJson, SaveAndLoad) {
  const auto dir = std::filesystem::temp_directory_path() / "camab_corpus_test";
  std::filesystem::create_directories(dir);
  auto insts = ParseJsonl(
      R"({"id":"b","question":"q?","segments":["s0"],"response_tokens":["x"]})"
      "\n"
      R"({"id":"a","question":"q2?","segments":["s0","s1"],"response_tokens":["y"]})");
  SaveJsonl(dir / "out.jsonl", insts);
  EXPECT_EQ(LoadJsonl(dir / "out.jsonl"), insts);
  EXPECT_THROW(LoadJsonl(dir / "missing.jsonl"), Error);
}

TEST(Segmentation, Sentences) {
  const auto segs = SegmentText("A. B! C?", Granularity::kSentence);
  ASSERT_EQ(segs.size(), 3u);
  EXPECT_EQ(segs[0].text, "A.");
  EXPECT_EQ(segs[1].text, "B!");
  EXPECT_EQ(segs[2].text, "C?");
}

TEST(Segmentation, Paragraphs) {
  const auto segs = SegmentText("p1\n\np2", Granularity::kParagraph);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].text, "p1");
  EXPECT_EQ(segs[1].text, "p2");
}

TEST(Segmentation, BlankInputFails) {
  EXPECT_THROW(SegmentText("   ", Granularity::kSentence), ValidationError);
}

TEST(Segmentation, IndicesAreDense) {
  const auto segs = SegmentText("One. Two.   Three", Granularity::kSentence);
  for (size_t j = 0; j < segs.size(); ++j) EXPECT_EQ(segs[j].index, j);
}

class PromptTest : public ::testing::Test {
 protected:
  Instance inst = ParseJsonl(
      R"({"id":"a","question":"q?","segments":["s0","s1"],"response_tokens":["yes"]})")[0];
};

TEST_F(PromptTest, FullMask) {
  const std::string p = RenderPrompt(inst, SubsetMask::Full(2));
  EXPECT_NE(p.find("s0\ns1"), std::string::npos);
  EXPECT_NE(p.find("q?"), std::string::npos);
}

TEST_F(PromptTest, EmptyMask) {
  EXPECT_EQ(RenderPrompt(inst, SubsetMask::Empty(2)), "q?\n");
}

TEST_F(PromptTest, SelectiveMask) {
  const std::string p = RenderPrompt(inst, SubsetMask::FromIndices(2, {1}));
  EXPECT_NE(p.find("s1"), std::string::npos);
  EXPECT_EQ(p.find("s0"), std::string::npos);
}

TEST_F(PromptTest, WrongMaskLength) {
  EXPECT_THROW(RenderPrompt(inst, SubsetMask::Full(3)), ContractError);
}

TEST_F(PromptTest, CustomTemplateWithPlaceholderText) {
  inst.prompt_template = "Q: {question}\nC: {context}\nA:";
  inst.segments[0].text = "literal {question}";
  const std::string p = RenderPrompt(inst, SubsetMask::FromIndices(2, {0}));
  EXPECT_EQ(p, "Q: q?\nC: literal {question}\nA:");
}

TEST(SubsetMask, HexRoundTrip) {
  Rng rng(5);
  for (size_t n : {1u, 3u, 4u, 7u, 64u, 65u, 130u}) {
    for (int rep = 0; rep < 20; ++rep) {
      SubsetMask m(n);
      for (size_t j = 0; j < n; ++j) m.set(j, rng.Bernoulli(0.5));
      const std::string hex = m.ToHex();
      EXPECT_EQ(hex.size(), (n + 3) / 4);
      EXPECT_EQ(SubsetMask::FromHex(n, hex), m);
    }
  }
}

TEST(SubsetMask, HexIsBitValueNumber) {
  // Segment j contributes 2^j; digits are written most significant first.
  EXPECT_EQ(SubsetMask::FromIndices(8, {0}).ToHex(), "01");
  EXPECT_EQ(SubsetMask::FromIndices(8, {4}).ToHex(), "10");
  EXPECT_EQ(SubsetMask::FromIndices(5, {1, 4}).ToHex(), "12");
  EXPECT_EQ(SubsetMask::Full(12).ToHex(), "fff");
}

TEST(SubsetMask, FromHexRejectsStrayBits) {
  EXPECT_THROW(SubsetMask::FromHex(3, "8"), Error);
  EXPECT_THROW(SubsetMask::FromHex(4, "g"), Error);
  EXPECT_THROW(SubsetMask::FromHex(4, "00"), Error);
}

TEST(SubsetMask, SetAlgebra) {
  const SubsetMask m = SubsetMask::FromIndices(70, {0, 5, 69});
  EXPECT_EQ(m.count(), 3u);
  EXPECT_EQ(m.Indices(), (std::vector<size_t>{0, 5, 69}));
  const SubsetMask c = m.Complement();
  EXPECT_EQ(c.count(), 67u);
  EXPECT_FALSE(c.test(69));
  EXPECT_TRUE(m.IsSubsetOf(SubsetMask::Full(70)));
  EXPECT_FALSE(SubsetMask::Full(70).IsSubsetOf(m));
  EXPECT_TRUE(SubsetMask::Full(70).full_set());
  EXPECT_TRUE(SubsetMask::Empty(70).empty_set());
  EXPECT_THROW(m.test(70), ContractError);
}

TEST(Tokenize, Whitespace) {
  EXPECT_EQ(WhitespaceTokenize("  a\tb\n c "), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(WhitespaceTokenize("   ").empty());
}

TEST(Files, AtomicWriteReplacesContents) {
  const auto path = std::filesystem::temp_directory_path() / "camab_atomic.txt";
  WriteFileAtomic(path, "first");
  WriteFileAtomic(path, "second");
  EXPECT_EQ(ReadFile(path), "second");
}

}  // namespace
}  // namespace camab
