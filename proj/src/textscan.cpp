#include "biasline/textscan.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <unordered_map>

#include "biasline/error.hpp"
#include "biasline/strings.hpp"

namespace biasline {

namespace {

struct Range {
  char32_t lo;
  char32_t hi;
};

// Alphabetic blocks outside ASCII, sorted by `lo`.
constexpr std::array<Range, 40> kLetterRanges{{
    {0x00AA, 0x00AA}, {0x00B5, 0x00B5}, {0x00BA, 0x00BA}, {0x00C0, 0x00D6},
    {0x00D8, 0x00F6}, {0x00F8, 0x02C1}, {0x02C6, 0x02D1}, {0x02E0, 0x02E4},
    {0x0370, 0x0374}, {0x0376, 0x0377}, {0x037A, 0x037D}, {0x037F, 0x037F},
    {0x0386, 0x0386}, {0x0388, 0x03F5}, {0x03F7, 0x0481}, {0x048A, 0x052F},
    {0x0531, 0x0556}, {0x0560, 0x0588}, {0x05D0, 0x05EA}, {0x0620, 0x064A},
    {0x0671, 0x06D3}, {0x0904, 0x0939}, {0x0E01, 0x0E30}, {0x10A0, 0x10FF},
    {0x1100, 0x11FF}, {0x1E00, 0x1FBC}, {0x1FC2, 0x1FFC}, {0x2C00, 0x2CE4},
    {0x3041, 0x3096}, {0x30A1, 0x30FA}, {0x3105, 0x312F}, {0x3400, 0x4DBF},
    {0x4E00, 0x9FFF}, {0xA640, 0xA66E}, {0xAC00, 0xD7A3}, {0xF900, 0xFAFF},
    {0xFB00, 0xFB06}, {0xFF21, 0xFF3A}, {0xFF41, 0xFF5A}, {0x10400, 0x1044F},
}};

inline bool ascii_alpha(unsigned char c) { return (c | 0x20) >= 'a' && (c | 0x20) <= 'z'; }

bool is_upper_start(char32_t cp) {
  if (cp < 0x80) return cp >= 'A' && cp <= 'Z';
  return (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) || (cp >= 0x0391 && cp <= 0x03A9) ||
         (cp >= 0x0410 && cp <= 0x042F);
}

bool is_opening_quote(char32_t cp) {
  return cp == '"' || cp == '\'' || cp == 0x201C || cp == 0x2018 || cp == 0x00AB;
}

bool is_closing_punct(char32_t cp) {
  return cp == '"' || cp == '\'' || cp == ')' || cp == ']' || cp == 0x201D || cp == 0x2019 ||
         cp == 0x00BB;
}

inline bool is_terminator(char c) { return c == '.' || c == '?' || c == '!'; }

inline bool is_inline_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f';
}

}  // namespace

bool is_letter(char32_t cp) {
  if (cp < 0x80) return ascii_alpha(static_cast<unsigned char>(cp));
  auto it = std::upper_bound(kLetterRanges.begin(), kLetterRanges.end(), cp,
                             [](char32_t v, const Range& r) { return v < r.lo; });
  if (it == kLetterRanges.begin()) return false;
  --it;
  return cp <= it->hi;
}

char32_t decode_utf8(std::string_view text, size_t pos, size_t* length) {
  auto fail = [&]() {
    if (length) *length = 1;
    return char32_t{0xFFFD};
  };
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  const size_t n = text.size();
  unsigned char c = s[pos];
  if (c < 0x80) {
    if (length) *length = 1;
    return c;
  }
  size_t need;
  char32_t cp;
  if ((c & 0xE0) == 0xC0) {
    need = 1;
    cp = c & 0x1F;
  } else if ((c & 0xF0) == 0xE0) {
    need = 2;
    cp = c & 0x0F;
  } else if ((c & 0xF8) == 0xF0) {
    need = 3;
    cp = c & 0x07;
  } else {
    return fail();
  }
  if (pos + need >= n) return fail();
  for (size_t k = 1; k <= need; ++k) {
    unsigned char cc = s[pos + k];
    if ((cc & 0xC0) != 0x80) return fail();
    cp = (cp << 6) | (cc & 0x3F);
  }
  if (length) *length = need + 1;
  return cp;
}

char32_t decode_utf8_before(std::string_view text, size_t pos) {
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  if (s[pos - 1] < 0x80) return s[pos - 1];
  size_t b = pos - 1;
  size_t steps = 0;
  while (b > 0 && (s[b] & 0xC0) == 0x80 && steps < 3) {
    --b;
    ++steps;
  }
  size_t len = 0;
  char32_t cp = decode_utf8(text, b, &len);
  if (b + len != pos) return 0xFFFD;
  return cp;
}

const std::vector<std::string>& sentence_abbreviations() {
  static const std::vector<std::string> kAbbrevs = {
      "dr.", "mr.",  "mrs.", "ms.",  "prof.", "e.g.", "i.e.", "etc.", "u.s.",
      "u.k.", "st.", "jr.", "sr.", "vs.", "mt.", "inc.", "ltd."};
  return kAbbrevs;
}

namespace {

bool ends_abbreviation(std::string_view text, size_t period) {
  size_t b = period;
  while (b > 0 && !is_space(text[b - 1])) --b;
  while (b < period) {
    char32_t cp = decode_utf8(text, b);
    if (!is_opening_quote(cp) && cp != '(' && cp != '[') break;
    size_t len = 1;
    decode_utf8(text, b, &len);
    b += len;
  }
  std::string token = ascii_lower(text.substr(b, period - b + 1));
  const auto& abbrevs = sentence_abbreviations();
  return std::find(abbrevs.begin(), abbrevs.end(), token) != abbrevs.end();
}

}  // namespace

std::vector<SentenceSpan> segment_sentences(std::string_view text) {
  std::vector<SentenceSpan> spans;
  const size_t n = text.size();
  auto skip_ws = [&](size_t i) {
    while (i < n && is_space(text[i])) ++i;
    return i;
  };
  auto close = [&](size_t start, size_t end) {
    while (end > start && is_space(text[end - 1])) --end;
    if (end > start) spans.push_back({start, end});
  };

  size_t start = skip_ws(0);
  size_t i = start;
  while (i < n) {
    const char c = text[i];
    if (c == '\n') {
      size_t j = i + 1;
      while (j < n && is_inline_space(text[j])) ++j;
      if (j < n && text[j] == '\n') {
        close(start, i);
        start = skip_ws(j);
        i = start;
        continue;
      }
      ++i;
      continue;
    }
    if (!is_terminator(c)) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < n && is_terminator(text[j])) ++j;
    size_t k = j;
    while (k < n) {
      size_t len = 1;
      char32_t cp = decode_utf8(text, k, &len);
      if (!is_closing_punct(cp)) break;
      k += len;
    }
    if (k >= n || !is_space(text[k])) {
      i = std::max(j, k);
      continue;
    }
    size_t m = skip_ws(k);
    if (m >= n) {
      i = k;
      continue;
    }
    const char32_t next = decode_utf8(text, m);
    const bool single_period = (j == i + 1 && c == '.');
    if ((is_upper_start(next) || is_opening_quote(next)) &&
        !(single_period && ends_abbreviation(text, i))) {
      close(start, k);
      start = m;
      i = m;
      continue;
    }
    i = k;
  }
  close(start, n);
  return spans;
}

// ---------------------------------------------------------------------------
// TermMatcher

namespace {

inline unsigned char fold_byte(unsigned char b) {
  if (b >= 'A' && b <= 'Z') return static_cast<unsigned char>(b - 'A' + 'a');
  if (is_space(static_cast<char>(b))) return ' ';
  return b;
}

}  // namespace

TermMatcher::TermMatcher(std::vector<std::string> terms, std::vector<uint32_t> groups)
    : terms_(std::move(terms)), groups_(std::move(groups)) {
  if (groups_.empty()) groups_.assign(terms_.size(), 0);
  if (groups_.size() != terms_.size()) throw ConfigError("TermMatcher: groups/terms size mismatch");
  std::unordered_map<std::string, size_t> seen;
  for (size_t i = 0; i < terms_.size(); ++i) {
    terms_[i] = ascii_lower(collapse_spaces(terms_[i]));
    if (terms_[i].empty()) throw ConfigError("TermMatcher: empty term at index " + std::to_string(i));
    if (!seen.emplace(terms_[i], i).second)
      throw ConfigError("TermMatcher: duplicate term '" + terms_[i] + "'");
    group_count_ = std::max(group_count_, groups_[i] + 1);
  }
  build();
}

void TermMatcher::build() {
  uint8_t folded_class[256] = {};
  class_count_ = 1;
  for (const auto& t : terms_) {
    for (unsigned char b : t) {
      if (folded_class[b] == 0) {
        if (class_count_ == 255) throw ConfigError("TermMatcher: alphabet too large");
        folded_class[b] = static_cast<uint8_t>(class_count_++);
      }
    }
  }
  for (int b = 0; b < 256; ++b) byte_class_[b] = folded_class[fold_byte(static_cast<unsigned char>(b))];

  constexpr uint32_t kNone = UINT32_MAX;
  const uint32_t C = class_count_;
  delta_.assign(C, kNone);
  term_at_.assign(1, -1);
  for (size_t id = 0; id < terms_.size(); ++id) {
    uint32_t s = 0;
    for (unsigned char b : terms_[id]) {
      uint32_t c = folded_class[b];
      uint32_t& next = delta_[s * C + c];
      if (next == kNone) {
        next = static_cast<uint32_t>(term_at_.size());
        term_at_.push_back(-1);
        delta_.resize(delta_.size() + C, kNone);
      }
      s = delta_[s * C + c];
    }
    term_at_[s] = static_cast<int32_t>(id);
  }

  const size_t states = term_at_.size();
  std::vector<uint32_t> fail(states, 0);
  dict_link_.assign(states, 0);
  std::deque<uint32_t> queue;
  for (uint32_t c = 0; c < C; ++c) {
    uint32_t& next = delta_[c];
    if (next == kNone) {
      next = 0;
    } else {
      fail[next] = 0;
      queue.push_back(next);
    }
  }
  while (!queue.empty()) {
    uint32_t s = queue.front();
    queue.pop_front();
    uint32_t f = fail[s];
    dict_link_[s] = term_at_[f] >= 0 ? f : dict_link_[f];
    for (uint32_t c = 0; c < C; ++c) {
      uint32_t& next = delta_[s * C + c];
      if (next == kNone) {
        next = delta_[f * C + c];
      } else {
        fail[next] = delta_[f * C + c];
        queue.push_back(next);
      }
    }
  }
  has_output_.assign(states, 0);
  for (size_t s = 0; s < states; ++s) has_output_[s] = (term_at_[s] >= 0 || dict_link_[s] != 0);
}

std::optional<uint32_t> TermMatcher::term_id(std::string_view term) const {
  std::string norm = ascii_lower(collapse_spaces(term));
  for (size_t i = 0; i < terms_.size(); ++i)
    if (terms_[i] == norm) return static_cast<uint32_t>(i);
  return std::nullopt;
}

void TermMatcher::find(std::string_view text, size_t ws, size_t we,
                       std::vector<TermHit>& out) const {
  if (terms_.empty() || ws >= we) return;
  we = std::min(we, text.size());
  thread_local std::vector<Candidate> cands;
  cands.clear();

  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  const uint32_t C = class_count_;
  const uint32_t* delta = delta_.data();
  uint32_t state = 0;
  for (size_t i = ws; i < we; ++i) {
    state = delta[state * C + byte_class_[s[i]]];
    if (!has_output_[state]) continue;
    for (uint32_t t = term_at_[state] >= 0 ? state : dict_link_[state]; t != 0; t = dict_link_[t]) {
      const auto id = static_cast<uint32_t>(term_at_[t]);
      const size_t end = i + 1;
      const size_t start = end - terms_[id].size();
      const bool left_ok = start == ws || (s[start - 1] < 0x80 ? !ascii_alpha(s[start - 1])
                                                               : !is_letter(decode_utf8_before(text, start)));
      if (!left_ok) continue;
      const bool right_ok =
          end == we || (s[end] < 0x80 ? !ascii_alpha(s[end]) : !is_letter(decode_utf8(text, end)));
      if (!right_ok) continue;
      cands.push_back({groups_[id], start, end, id});
    }
  }
  if (cands.empty()) return;

  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.group != b.group) return a.group < b.group;
    if (a.start != b.start) return a.start < b.start;
    return a.end > b.end;
  });
  const size_t first_out = out.size();
  uint32_t group = UINT32_MAX;
  size_t last_end = 0;
  for (const auto& c : cands) {
    if (c.group != group) {
      group = c.group;
      last_end = ws;
    }
    if (c.start < last_end) continue;
    out.push_back({c.term_id, c.start, c.end});
    last_end = c.end;
  }
  if (group_count_ > 1) {
    std::sort(out.begin() + static_cast<std::ptrdiff_t>(first_out), out.end(),
              [](const TermHit& a, const TermHit& b) {
                if (a.start != b.start) return a.start < b.start;
                if (a.end != b.end) return a.end > b.end;
                return a.term_id < b.term_id;
              });
  }
}

std::vector<TermHit> find_terms(const TermMatcher& matcher, std::string_view text,
                                std::optional<SentenceSpan> window) {
  std::vector<TermHit> hits;
  size_t ws = window ? window->start : 0;
  size_t we = window ? window->end : text.size();
  matcher.find(text, ws, we, hits);
  return hits;
}

}  // namespace biasline
