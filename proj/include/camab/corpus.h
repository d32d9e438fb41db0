#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace camab {

struct Segment {
  size_t index = 0;
  std::string text;

  bool operator==(const Segment&) const = default;
};

// Inclusion set over the N segments of one instance. Bit j set means
// segment j is part of the context.
class SubsetMask {
 public:
  SubsetMask() = default;
  explicit SubsetMask(size_t n_segments);

  static SubsetMask Empty(size_t n_segments) { return SubsetMask(n_segments); }
  static SubsetMask Full(size_t n_segments);
  static SubsetMask FromIndices(size_t n_segments,
                                std::span<const size_t> indices);
  static SubsetMask FromIndices(size_t n_segments,
                                std::initializer_list<size_t> indices) {
    return FromIndices(n_segments, std::span<const size_t>(indices.begin(), indices.size()));
  }

  size_t size() const { return size_; }
  bool test(size_t j) const;
  SubsetMask& set(size_t j, bool value = true);
  size_t count() const;
  bool empty_set() const { return count() == 0; }
  bool full_set() const { return count() == size_; }

  std::vector<size_t> Indices() const;
  SubsetMask Complement() const;
  bool IsSubsetOf(const SubsetMask& other) const;

  // Lower-case hex of the mask read as an integer with bit j worth 2^j,
  // zero-padded to ceil(N/4) digits. Used as the replay-store key.
  std::string ToHex() const;
  static SubsetMask FromHex(size_t n_segments, std::string_view hex);

  bool operator==(const SubsetMask&) const = default;
  // Orders by size, then by the integer value of the bits.
  bool operator<(const SubsetMask& other) const;

  size_t Hash() const;

 private:
  size_t size_ = 0;
  std::vector<uint64_t> words_;
};

struct Instance {
  std::string id;
  std::string question;
  std::vector<Segment> segments;
  std::vector<std::string> response_tokens;
  // Raw response string when the record supplied one; otherwise the tokens
  // joined by single spaces are used as the response text.
  std::optional<std::string> response;
  // Template with {question} and {context} placeholders.
  std::optional<std::string> prompt_template;
  // Extra record fields that callers attach (e.g. a planted synthetic model).
  nlohmann::json extra = nlohmann::json::object();

  size_t n_segments() const { return segments.size(); }
  size_t n_tokens() const { return response_tokens.size(); }
  std::string ResponseText() const;

  bool operator==(const Instance&) const = default;
};

enum class Granularity { kSentence, kParagraph };

// Splits a raw context deterministically. Sentence mode ends a fragment at
// '.', '!' or '?' followed by whitespace; paragraph mode splits on blank
// lines. Fragments are trimmed and empty ones dropped.
std::vector<Segment> SegmentText(std::string_view context,
                                 Granularity granularity);

std::vector<std::string> WhitespaceTokenize(std::string_view text);

// Builds and validates one instance from a JSON record.
Instance InstanceFromJson(const nlohmann::json& record,
                          Granularity granularity = Granularity::kSentence);
nlohmann::json InstanceToJson(const Instance& instance);

std::vector<Instance> LoadJsonl(
    const std::filesystem::path& path,
    Granularity granularity = Granularity::kSentence);
std::vector<Instance> ParseJsonl(
    std::string_view contents,
    Granularity granularity = Granularity::kSentence);
void SaveJsonl(const std::filesystem::path& path,
               std::span<const Instance> instances);

inline constexpr std::string_view kDefaultPromptTemplate =
    "{context}\n\n{question}\n";

// Included segments in index order joined by '\n', substituted into the
// instance template. With the default template an empty context drops the
// context block entirely.
std::string RenderPrompt(const Instance& instance, const SubsetMask& mask);

// Writes `contents` to a sibling temporary file, then renames it over `path`.
void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents);
std::string ReadFile(const std::filesystem::path& path);

}  // namespace camab

template <>
struct std::hash<camab::SubsetMask> {
  size_t operator()(const camab::SubsetMask& m) const { return m.Hash(); }
};
