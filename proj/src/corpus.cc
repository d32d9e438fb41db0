#include "camab/corpus.h"

#include <algorithm>
#include <bit>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "camab/errors.h"

namespace camab {

using nlohmann::json;

// ---------------------------------------------------------------- SubsetMask

SubsetMask::SubsetMask(size_t n_segments)
    : size_(n_segments), words_((n_segments + 63) / 64, 0) {}

SubsetMask SubsetMask::Full(size_t n_segments) {
  SubsetMask m(n_segments);
  for (size_t j = 0; j < n_segments; ++j) m.set(j);
  return m;
}

SubsetMask SubsetMask::FromIndices(size_t n_segments,
                                   std::span<const size_t> indices) {
  SubsetMask m(n_segments);
  for (size_t j : indices) m.set(j);
  return m;
}

bool SubsetMask::test(size_t j) const {
  if (j >= size_) throw ContractError("mask index out of range");
  return (words_[j / 64] >> (j % 64)) & 1U;
}

SubsetMask& SubsetMask::set(size_t j, bool value) {
  if (j >= size_) throw ContractError("mask index out of range");
  const uint64_t bit = uint64_t{1} << (j % 64);
  if (value) {
    words_[j / 64] |= bit;
  } else {
    words_[j / 64] &= ~bit;
  }
  return *this;
}

size_t SubsetMask::count() const {
  size_t c = 0;
  for (uint64_t w : words_) c += std::popcount(w);
  return c;
}

std::vector<size_t> SubsetMask::Indices() const {
  std::vector<size_t> out;
  for (size_t j = 0; j < size_; ++j) {
    if (test(j)) out.push_back(j);
  }
  return out;
}

SubsetMask SubsetMask::Complement() const {
  SubsetMask m(size_);
  for (size_t j = 0; j < size_; ++j) m.set(j, !test(j));
  return m;
}

bool SubsetMask::IsSubsetOf(const SubsetMask& other) const {
  if (other.size_ != size_) return false;
  for (size_t w = 0; w < words_.size(); ++w) {
    if (words_[w] & ~other.words_[w]) return false;
  }
  return true;
}

std::string SubsetMask::ToHex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  const size_t n_digits = std::max<size_t>(1, (size_ + 3) / 4);
  std::string out(n_digits, '0');
  for (size_t d = 0; d < n_digits; ++d) {
    unsigned nibble = 0;
    for (size_t b = 0; b < 4; ++b) {
      const size_t j = d * 4 + b;
      if (j < size_ && test(j)) nibble |= 1U << b;
    }
    out[n_digits - 1 - d] = kDigits[nibble];
  }
  return out;
}

SubsetMask SubsetMask::FromHex(size_t n_segments, std::string_view hex) {
  SubsetMask m(n_segments);
  const size_t n = hex.size();
  // Keys compare as strings, so only the canonical width is accepted.
  if (n != std::max<size_t>(1, (n_segments + 3) / 4)) {
    throw ValidationError("mask '" + std::string(hex) + "' has " +
                          std::to_string(n) + " digits, expected " +
                          std::to_string(std::max<size_t>(1, (n_segments + 3) / 4)));
  }
  for (size_t d = 0; d < n; ++d) {
    const char c = hex[n - 1 - d];
    unsigned nibble;
    if (c >= '0' && c <= '9') {
      nibble = c - '0';
    } else if (c >= 'a' && c <= 'f') {
      nibble = c - 'a' + 10;
    } else if (c >= 'A' && c <= 'F') {
      nibble = c - 'A' + 10;
    } else {
      throw ValidationError("invalid hex digit in mask '" + std::string(hex) +
                            "'");
    }
    for (size_t b = 0; b < 4; ++b) {
      if (!(nibble & (1U << b))) continue;
      const size_t j = d * 4 + b;
      if (j >= n_segments) {
        throw ValidationError("mask '" + std::string(hex) + "' exceeds " +
                              std::to_string(n_segments) + " segments");
      }
      m.set(j);
    }
  }
  return m;
}

bool SubsetMask::operator<(const SubsetMask& other) const {
  if (size_ != other.size_) return size_ < other.size_;
  for (size_t w = words_.size(); w-- > 0;) {
    if (words_[w] != other.words_[w]) return words_[w] < other.words_[w];
  }
  return false;
}

size_t SubsetMask::Hash() const {
  uint64_t h = 0x9e3779b97f4a7c15ULL ^ size_;
  for (uint64_t w : words_) {
    h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<size_t>(h);
}

// ------------------------------------------------------------------ helpers

namespace {

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && IsSpace(s.front())) s.remove_prefix(1);
  while (!s.empty() && IsSpace(s.back())) s.remove_suffix(1);
  return s;
}

void ReplaceAll(std::string& s, std::string_view from, std::string_view to) {
  size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

const json* Find(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return nullptr;
  return &*it;
}

std::string RequireString(const json& record, const char* key,
                          const std::string& id) {
  const json* v = Find(record, key);
  if (v == nullptr) {
    throw ValidationError("missing field '" + std::string(key) +
                          "' in instance '" + id + "'");
  }
  if (!v->is_string()) {
    throw ValidationError("field '" + std::string(key) +
                          "' must be a string in instance '" + id + "'");
  }
  return v->get<std::string>();
}

std::vector<std::string> RequireStringArray(const json& v, const char* key,
                                            const std::string& id) {
  if (!v.is_array()) {
    throw ValidationError("field '" + std::string(key) +
                          "' must be an array in instance '" + id + "'");
  }
  std::vector<std::string> out;
  for (const json& e : v) {
    if (!e.is_string()) {
      throw ValidationError("field '" + std::string(key) +
                            "' must contain strings in instance '" + id + "'");
    }
    out.push_back(e.get<std::string>());
  }
  return out;
}

const std::set<std::string>& KnownKeys() {
  static const std::set<std::string> keys = {
      "id",       "question", "segments",       "context",
      "response", "response_tokens", "prompt_template"};
  return keys;
}

}  // namespace

// ---------------------------------------------------------------- segmenting

std::vector<Segment> SegmentText(std::string_view context,
                                 Granularity granularity) {
  if (Trim(context).empty()) {
    throw ValidationError("context is empty after trimming");
  }
  std::vector<std::string> pieces;
  if (granularity == Granularity::kSentence) {
    size_t start = 0;
    for (size_t i = 0; i < context.size(); ++i) {
      const char c = context[i];
      if ((c == '.' || c == '!' || c == '?') && i + 1 < context.size() &&
          IsSpace(context[i + 1])) {
        pieces.emplace_back(Trim(context.substr(start, i + 1 - start)));
        start = i + 1;
      }
    }
    pieces.emplace_back(Trim(context.substr(start)));
  } else {
    std::string current;
    size_t pos = 0;
    while (pos <= context.size()) {
      size_t eol = context.find('\n', pos);
      if (eol == std::string_view::npos) eol = context.size();
      std::string_view line = context.substr(pos, eol - pos);
      if (Trim(line).empty()) {
        pieces.emplace_back(Trim(current));
        current.clear();
      } else {
        if (!current.empty()) current += '\n';
        current += line;
      }
      pos = eol + 1;
    }
    pieces.emplace_back(Trim(current));
  }

  std::vector<Segment> out;
  for (auto& p : pieces) {
    if (p.empty()) continue;
    out.push_back(Segment{out.size(), std::move(p)});
  }
  return out;
}

std::vector<std::string> WhitespaceTokenize(std::string_view text) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && IsSpace(text[i])) ++i;
    const size_t start = i;
    while (i < text.size() && !IsSpace(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string Instance::ResponseText() const {
  if (response) return *response;
  std::string out;
  for (size_t t = 0; t < response_tokens.size(); ++t) {
    if (t) out += ' ';
    out += response_tokens[t];
  }
  return out;
}

// ------------------------------------------------------------------- records

Instance InstanceFromJson(const json& record, Granularity granularity) {
  if (!record.is_object()) throw ValidationError("record is not an object");
  Instance inst;
  inst.id = RequireString(record, "id", "<unknown>");
  if (Trim(inst.id).empty()) throw ValidationError("field 'id' is empty");
  inst.question = RequireString(record, "question", inst.id);

  if (const json* segs = Find(record, "segments")) {
    const auto texts = RequireStringArray(*segs, "segments", inst.id);
    for (const auto& text : texts) {
      if (Trim(text).empty()) {
        throw ValidationError("field 'segments' has an empty segment at "
                              "position " +
                              std::to_string(inst.segments.size()) +
                              " in instance '" + inst.id + "'");
      }
      inst.segments.push_back(Segment{inst.segments.size(), text});
    }
  } else if (Find(record, "context") != nullptr) {
    const std::string context = RequireString(record, "context", inst.id);
    if (Trim(context).empty()) {
      throw ValidationError("field 'context' is empty in instance '" +
                            inst.id + "'");
    }
    inst.segments = SegmentText(context, granularity);
  } else {
    throw ValidationError("missing field 'segments' in instance '" + inst.id +
                          "'");
  }
  if (inst.segments.empty()) {
    throw ValidationError("field 'segments' is empty in instance '" + inst.id +
                          "'");
  }

  if (const json* toks = Find(record, "response_tokens")) {
    inst.response_tokens = RequireStringArray(*toks, "response_tokens", inst.id);
    for (const auto& t : inst.response_tokens) {
      if (t.empty()) {
        throw ValidationError("field 'response_tokens' has an empty token in "
                              "instance '" +
                              inst.id + "'");
      }
    }
    if (Find(record, "response") != nullptr) {
      inst.response = RequireString(record, "response", inst.id);
    }
  } else if (Find(record, "response") != nullptr) {
    inst.response = RequireString(record, "response", inst.id);
    inst.response_tokens = WhitespaceTokenize(*inst.response);
  } else {
    throw ValidationError("missing field 'response_tokens' in instance '" +
                          inst.id + "'");
  }
  if (inst.response_tokens.empty()) {
    throw ValidationError("field 'response_tokens' is empty in instance '" +
                          inst.id + "'");
  }

  if (Find(record, "prompt_template") != nullptr) {
    inst.prompt_template = RequireString(record, "prompt_template", inst.id);
  }
  for (auto it = record.begin(); it != record.end(); ++it) {
    if (!KnownKeys().contains(it.key())) inst.extra[it.key()] = it.value();
  }
  return inst;
}

json InstanceToJson(const Instance& instance) {
  json out = instance.extra;
  out["id"] = instance.id;
  out["question"] = instance.question;
  json segs = json::array();
  for (const auto& s : instance.segments) segs.push_back(s.text);
  out["segments"] = std::move(segs);
  out["response_tokens"] = instance.response_tokens;
  if (instance.response) out["response"] = *instance.response;
  if (instance.prompt_template) {
    out["prompt_template"] = *instance.prompt_template;
  }
  return out;
}

std::vector<Instance> ParseJsonl(std::string_view contents,
                                 Granularity granularity) {
  std::vector<Instance> out;
  std::unordered_set<std::string> seen;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos < contents.size()) {
    size_t eol = contents.find('\n', pos);
    if (eol == std::string_view::npos) eol = contents.size();
    std::string_view line = contents.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (Trim(line).empty()) continue;

    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    Instance inst;
    try {
      inst = InstanceFromJson(record, granularity);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(e.what()) + " (line " +
                            std::to_string(line_no) + ")");
    }
    if (!seen.insert(inst.id).second) {
      throw ValidationError("duplicate id '" + inst.id + "' (line " +
                            std::to_string(line_no) + ")");
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<Instance> LoadJsonl(const std::filesystem::path& path,
                                Granularity granularity) {
  return ParseJsonl(ReadFile(path), granularity);
}

void SaveJsonl(const std::filesystem::path& path,
               std::span<const Instance> instances) {
  std::string out;
  for (const auto& inst : instances) {
    out += InstanceToJson(inst).dump();
    out += '\n';
  }
  WriteFileAtomic(path, out);
}

// ------------------------------------------------------------------- prompts

std::string RenderPrompt(const Instance& instance, const SubsetMask& mask) {
  if (mask.size() != instance.n_segments()) {
    throw ContractError("mask length " + std::to_string(mask.size()) +
                        " does not match " +
                        std::to_string(instance.n_segments()) +
                        " segments of instance '" + instance.id + "'");
  }
  std::string context;
  for (const auto& seg : instance.segments) {
    if (!mask.test(seg.index)) continue;
    if (!context.empty()) context += '\n';
    context += seg.text;
  }

  std::string prompt;
  if (instance.prompt_template) {
    prompt = *instance.prompt_template;
  } else if (context.empty()) {
    prompt = "{question}\n";
  } else {
    prompt = std::string(kDefaultPromptTemplate);
  }
  // Context goes in last, through a sentinel, so placeholder-like text in
  // the question or the segments is never expanded.
  static constexpr std::string_view kSentinel = "\x1e\x1d" "ctx" "\x1d\x1e";
  ReplaceAll(prompt, "{context}", kSentinel);
  ReplaceAll(prompt, "{question}", instance.question);
  ReplaceAll(prompt, kSentinel, context);
  return prompt;
}

// ---------------------------------------------------------------------- files

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace camab
