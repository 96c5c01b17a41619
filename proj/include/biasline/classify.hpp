#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biasline/corpus.hpp"
#include "biasline/lexicon.hpp"
#include "biasline/records.hpp"
#include "biasline/textscan.hpp"

namespace biasline {

enum class GenderLabel { Female, Male, Mixed, None };
enum class CountMode { Sentence, Document };

std::string_view to_string(GenderLabel l);
std::string_view to_string(CountMode m);
CountMode parse_count_mode(std::string_view s);

/// Gendered tallies for one occupation. Token counts are the number of
/// gender-token hits inside counted units; unit counts are the number of
/// units labelled with that gender.
struct OccupationCounts {
  uint64_t female_tokens = 0;
  uint64_t male_tokens = 0;
  uint64_t female_units = 0;
  uint64_t male_units = 0;
  uint64_t units_scanned = 0;

  OccupationCounts& operator+=(const OccupationCounts& o) {
    female_tokens += o.female_tokens;
    male_tokens += o.male_tokens;
    female_units += o.female_units;
    male_units += o.male_units;
    units_scanned += o.units_scanned;
    return *this;
  }
  auto operator<=>(const OccupationCounts&) const = default;
};

struct CountsMeta {
  CountMode mode = CountMode::Sentence;
  std::optional<uint64_t> seed;
  std::optional<uint64_t> cap;
  std::string lexicon_digest;
  /// Resolved run configuration and summary, carried verbatim.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

/// Per-occupation counts in lexicon order.
struct CountsTable {
  CountsMeta meta;
  std::vector<std::string> occupations;
  std::vector<OccupationCounts> counts;

  static CountsTable zeros(const LexiconBundle& bundle, CountMode mode);

  const OccupationCounts* find(std::string_view occupation) const;
  OccupationCounts* find(std::string_view occupation);

  /// Field-wise sum. Throws ConfigError when the occupation lists differ.
  void merge(const CountsTable& other);

  bool same_counts(const CountsTable& other) const {
    return occupations == other.occupations && counts == other.counts;
  }

  nlohmann::ordered_json to_json() const;
  static CountsTable from_json(const nlohmann::ordered_json& j);
};

/// Generation counts split by (prompt, setup) cell.
struct CellKey {
  std::string prompt_id;
  PromptType prompt_type = PromptType::Neutral;
  SetupName setup = SetupName::Baseline;

  auto operator<=>(const CellKey&) const = default;
};

struct PartitionedCounts {
  CountsMeta meta;
  std::map<CellKey, CountsTable> cells;

  /// Sum over all cells.
  CountsTable pooled() const;

  nlohmann::ordered_json to_json() const;
  static PartitionedCounts from_json(const nlohmann::ordered_json& j);
};

/// Matcher over female ∪ male tokens (one group).
TermMatcher make_gender_matcher(const LexiconBundle& bundle);

/// Female iff only female tokens occur, Male iff only male, Mixed iff both,
/// None iff neither.
GenderLabel classify_unit(std::string_view unit_text, const LexiconBundle& bundle,
                          const TermMatcher& gender_matcher);

struct ScanOptions {
  CountMode mode = CountMode::Sentence;
  /// Also match a naive "+s" plural of each occupation term.
  bool plural_s = false;
};

/// Unit-level tallies regardless of occupation.
struct UnitStats {
  uint64_t units = 0;  // units containing at least one occupation
  uint64_t female = 0;
  uint64_t male = 0;
  uint64_t mixed = 0;
  uint64_t none = 0;

  UnitStats& operator+=(const UnitStats& o) {
    units += o.units;
    female += o.female;
    male += o.male;
    mixed += o.mixed;
    none += o.none;
    return *this;
  }
};

/// Scans text for occupations and gender tokens in one pass and produces
/// per-occupation contributions of each document. Immutable; share freely.
class CooccurrenceCounter {
 public:
  struct Contribution {
    uint32_t occupation;
    OccupationCounts counts;
  };

  explicit CooccurrenceCounter(const LexiconBundle& bundle, ScanOptions options = {});

  const std::vector<std::string>& occupations() const { return occupations_; }
  const TermMatcher& matcher() const { return matcher_; }
  const ScanOptions& options() const { return options_; }

  /// Replaces `out` with this document's contributions, sorted by
  /// occupation index. Each occupation appears at most once.
  void scan(std::string_view text, std::vector<Contribution>& out, UnitStats* stats = nullptr) const;

 private:
  enum class Kind : uint8_t { Occupation, Female, Male };
  struct TermInfo {
    Kind kind;
    uint32_t occupation;
  };

  void count_unit(std::span<const TermHit> hits, std::vector<Contribution>& out,
                  UnitStats* stats) const;

  ScanOptions options_;
  std::vector<std::string> occupations_;
  TermMatcher matcher_;
  std::vector<TermInfo> info_;
  bool bucket_safe_ = true;
};

/// Counts sampled documents: each document list only contributes to the
/// occupation it was sampled for.
CountsTable count_cooccurrences(const std::map<std::string, std::vector<Document>>& docs,
                                const LexiconBundle& bundle, CountMode mode,
                                const ScanOptions& options = {});

/// Counts every document for every occupation it mentions.
CountsTable count_documents(std::span<const Document> docs, const LexiconBundle& bundle,
                            const ScanOptions& options = {});

struct GenerationCountStats {
  uint64_t records = 0;
  uint64_t unknown_occupation = 0;
};

/// Classifies each response on its full text and credits the record's
/// tagged occupation, partitioned by (prompt, setup).
PartitionedCounts count_generations(std::span<const GenerationRecord> records,
                                    const LexiconBundle& bundle,
                                    GenerationCountStats* stats = nullptr);

void save_json(const nlohmann::ordered_json& j, const std::filesystem::path& path);
nlohmann::ordered_json load_json(const std::filesystem::path& path);

}  // namespace biasline
