#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace biasline {

class TermMatcher;

struct Document {
  std::string id;
  std::string text;
  std::map<std::string, std::string> meta;

  bool operator==(const Document&) const = default;
  auto operator<=>(const Document& o) const {
    if (auto c = id <=> o.id; c != 0) return c;
    return text <=> o.text;
  }
};

enum class CorpusFormat { Jsonl, Textdir };

CorpusFormat parse_corpus_format(std::string_view name);

/// Streams documents in a deterministic order: files sorted by relative
/// path, then line order. JSONL lines need a string `text`; `id` falls back
/// to `<file>:<line>` when absent. Other fields are kept in `meta` (strings
/// verbatim, anything else as compact JSON). Lines that fail to parse or lack
/// `text` are counted as malformed and skipped.
class CorpusReader {
 public:
  /// `path` is a .jsonl file or a directory of them (Jsonl), or a directory
  /// searched recursively for .txt files (Textdir). Throws IoError.
  CorpusReader(const std::filesystem::path& path, CorpusFormat format);

  bool next(Document& doc);

  size_t documents_read() const { return docs_read_; }
  size_t malformed_count() const { return malformed_; }
  /// `file:line` of the first few malformed lines.
  const std::vector<std::string>& malformed_examples() const { return malformed_examples_; }
  /// Bytes of document text produced so far.
  uint64_t text_bytes() const { return text_bytes_; }

 private:
  bool open_next_file();
  bool next_jsonl(Document& doc);
  bool next_textdir(Document& doc);

  std::filesystem::path root_;
  CorpusFormat format_;
  std::vector<std::filesystem::path> files_;
  size_t file_idx_ = 0;
  std::ifstream in_;
  std::string rel_name_;
  size_t line_no_ = 0;
  std::string line_;
  size_t docs_read_ = 0;
  size_t malformed_ = 0;
  uint64_t text_bytes_ = 0;
  std::vector<std::string> malformed_examples_;
};

CorpusReader open_corpus(const std::filesystem::path& path, CorpusFormat format);

/// Documents retained per occupation, and the RNG seed that keys selection.
struct SampleSpec {
  uint64_t cap = 100000;
  uint64_t seed = 42;
};

/// 128-bit admission key for the k-min-hash sampler.
struct SampleKey {
  uint64_t hi = 0;
  uint64_t lo = 0;
  auto operator<=>(const SampleKey&) const = default;
};

/// Keyed hash of (seed, occupation, document id).
SampleKey sample_key(uint64_t seed, std::string_view occupation, std::string_view doc_id);

/// Keeps the `cap` entries with the smallest keys. The retained multiset
/// depends only on the offered multiset, never on offer order, and two
/// samplers merge to what one sampler would have kept.
template <class Payload>
class KMinSampler {
 public:
  using Entry = std::pair<SampleKey, Payload>;

  explicit KMinSampler(uint64_t cap = 1) : cap_(cap) {}

  uint64_t cap() const { return cap_; }
  size_t size() const { return heap_.size(); }
  uint64_t offered() const { return offered_; }

  void offer(SampleKey key, Payload payload) {
    ++offered_;
    if (heap_.size() < cap_) {
      heap_.emplace_back(key, std::move(payload));
      std::push_heap(heap_.begin(), heap_.end());
      return;
    }
    if (!(std::pair<const SampleKey&, const Payload&>(key, payload) <
          std::pair<const SampleKey&, const Payload&>(heap_.front().first, heap_.front().second)))
      return;
    std::pop_heap(heap_.begin(), heap_.end());
    heap_.back() = Entry(key, std::move(payload));
    std::push_heap(heap_.begin(), heap_.end());
  }

  void merge(KMinSampler&& other) {
    const uint64_t offered = offered_ + other.offered_;
    for (auto& e : other.heap_) offer(e.first, std::move(e.second));
    offered_ = offered;
    other.heap_.clear();
  }

  /// Retained entries in ascending key order.
  std::vector<Entry> sorted() const {
    std::vector<Entry> out = heap_;
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  uint64_t cap_;
  uint64_t offered_ = 0;
  std::vector<Entry> heap_;
};

using DocumentSource = std::function<bool(Document&)>;

/// For each matcher term (occupation), a uniform without-replacement sample
/// of min(cap, hits) documents containing it, in ascending key order.
/// Occupations without any hit are absent from the result.
std::map<std::string, std::vector<Document>> sample_per_occupation(const DocumentSource& docs,
                                                                   const TermMatcher& matcher,
                                                                   const SampleSpec& spec);

std::map<std::string, std::vector<Document>> sample_per_occupation(std::span<const Document> docs,
                                                                   const TermMatcher& matcher,
                                                                   const SampleSpec& spec);

}  // namespace biasline
