#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace biasline {

/// Gendered token sets, occupation list, sector map and optional
/// real-world reference proportions. Immutable once loaded.
struct LexiconBundle {
  std::set<std::string> female_tokens;
  std::set<std::string> male_tokens;
  std::vector<std::string> occupations;          // file order
  std::map<std::string, std::string> sectors;    // occupation -> sector
  std::optional<std::map<std::string, double>> reference;  // occupation -> fraction female

  /// Non-fatal findings from loading (e.g. occupations without a sector).
  std::vector<std::string> warnings;

  /// SHA-256 over a canonical serialization of the bundle contents.
  std::string digest() const;

  std::vector<std::string> unmapped_occupations() const;

  bool operator==(const LexiconBundle& other) const {
    return female_tokens == other.female_tokens && male_tokens == other.male_tokens &&
           occupations == other.occupations && sectors == other.sectors &&
           reference == other.reference;
  }
};

/// Loads `gender_dir/female.txt` and `gender_dir/male.txt`, the occupation
/// list, the sector CSV and an optional reference CSV. Every term is
/// lowercased and internal whitespace collapsed. Throws ConfigError naming
/// the offending term and line, or IoError for missing files.
LexiconBundle load_lexicon_bundle(const std::filesystem::path& gender_dir,
                                  const std::filesystem::path& occupations_file,
                                  const std::filesystem::path& sectors_file,
                                  const std::optional<std::filesystem::path>& reference_file = {});

/// Loads the standard layout: female.txt, male.txt, occupations.txt, sectors.csv
/// inside `dir`.
LexiconBundle load_lexicon_dir(const std::filesystem::path& dir,
                               const std::optional<std::filesystem::path>& reference_file = {});

/// Reads a `term,value` reference CSV of fractions in [0, 1].
std::map<std::string, double> load_reference_csv(const std::filesystem::path& path);

/// Writes the bundle in the standard layout (plus reference.csv when present).
void save_lexicon_bundle(const LexiconBundle& bundle, const std::filesystem::path& dir);

}  // namespace biasline
