#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace biasline {

/// Half-open byte range [start, end) of one sentence.
struct SentenceSpan {
  size_t start = 0;
  size_t end = 0;

  bool operator==(const SentenceSpan&) const = default;
};

struct TermHit {
  uint32_t term_id = 0;
  size_t start = 0;
  size_t end = 0;

  bool operator==(const TermHit&) const = default;
};

/// True for code points treated as letters when deciding word boundaries.
/// ASCII is exact; beyond ASCII a range table covers the alphabetic blocks of
/// the common scripts (Latin, Greek, Cyrillic, Armenian, Hebrew, Arabic,
/// Indic, Kana, CJK, Hangul).
bool is_letter(char32_t cp);

/// Decodes the code point starting at `pos`. Invalid sequences decode as
/// U+FFFD with length 1.
char32_t decode_utf8(std::string_view text, size_t pos, size_t* length = nullptr);

/// Decodes the code point that ends just before `pos` (pos > 0).
char32_t decode_utf8_before(std::string_view text, size_t pos);

/// Rule-based sentence splitter.
///
/// A sentence ends after a run of `.`, `?` or `!` (plus any closing quotes or
/// brackets) when it is followed by whitespace and then an uppercase letter,
/// an opening quote, or the end of the text. A period ending a known
/// abbreviation ("dr.", "u.s.", "e.g.", ...) never ends a sentence. A blank
/// line always ends one. Spans exclude surrounding whitespace, so the gaps
/// between consecutive spans are pure whitespace.
std::vector<SentenceSpan> segment_sentences(std::string_view text);

/// The abbreviations that suppress a split (lowercase, with trailing period).
const std::vector<std::string>& sentence_abbreviations();

/// Case-insensitive whole-word multi-pattern matcher (Aho-Corasick).
///
/// Terms are lowercased and their internal whitespace collapsed; an internal
/// space matches exactly one whitespace byte of the text. ASCII letters are
/// case-folded; other bytes match literally. A hit needs a non-letter (or
/// the edge of the text/window) on both sides.
///
/// Terms may be split into groups. Overlaps are resolved independently per
/// group, leftmost-longest: scanning left to right, the longest valid term at
/// the earliest start wins and no other hit of the same group may overlap it.
class TermMatcher {
 public:
  TermMatcher() = default;
  /// `groups[i]` is the group of `terms[i]`; defaults to a single group.
  /// Throws ConfigError on an empty or duplicate term.
  explicit TermMatcher(std::vector<std::string> terms, std::vector<uint32_t> groups = {});

  const std::vector<std::string>& terms() const { return terms_; }
  size_t size() const { return terms_.size(); }
  uint32_t group_of(uint32_t term_id) const { return groups_[term_id]; }
  std::optional<uint32_t> term_id(std::string_view term) const;

  /// Appends hits inside [window_start, window_end) to `out`, sorted by start.
  void find(std::string_view text, size_t window_start, size_t window_end,
            std::vector<TermHit>& out) const;

 private:
  struct Candidate {
    uint32_t group;
    size_t start;
    size_t end;
    uint32_t term_id;
  };

  void build();

  std::vector<std::string> terms_;
  std::vector<uint32_t> groups_;
  uint32_t group_count_ = 0;

  // Byte -> alphabet class; class 0 means "no term uses this byte".
  uint8_t byte_class_[256] = {};
  uint32_t class_count_ = 1;
  std::vector<uint32_t> delta_;      // state * class_count_ + class -> state
  std::vector<int32_t> term_at_;     // term ending at this state, or -1
  std::vector<uint32_t> dict_link_;  // next state on the suffix chain with output, 0 = none
  std::vector<uint8_t> has_output_;
};

/// All hits in `text`, or only inside `window` when given. Window edges act
/// as text edges for the boundary rule.
std::vector<TermHit> find_terms(const TermMatcher& matcher, std::string_view text,
                                std::optional<SentenceSpan> window = {});

}  // namespace biasline
