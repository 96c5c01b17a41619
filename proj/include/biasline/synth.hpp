#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "biasline/lexicon.hpp"

namespace biasline {

struct PlantedOccupation {
  std::string term;
  double p_female = 0.5;
  uint64_t docs = 0;
};

/// Planted per-occupation gender proportions for a synthetic corpus.
struct PlantSpec {
  uint64_t seed = 42;
  std::vector<std::string> filler;  // empty = default_filler()
  std::vector<PlantedOccupation> occupations;
  /// Extra distractor documents per occupation, each either mixed-gender or
  /// gender-free. They never change the planted proportions.
  uint64_t noise_docs = 0;

  static PlantSpec from_json_file(const std::filesystem::path& path);
};

/// Neutral words known not to collide with the shipped lexicon.
const std::vector<std::string>& default_filler();

/// Assigns every bundle occupation `docs` documents and a p_female drawn
/// from the grid {0, 0.05, ..., 1} with `seed`.
PlantSpec grid_plant(const LexiconBundle& bundle, uint64_t docs, uint64_t seed);

struct GroundTruthRow {
  std::string occupation;
  double p_planted = 0.0;
  double p_realized = 0.0;
  uint64_t docs = 0;
  uint64_t female_docs = 0;
};

struct SynthOutput {
  std::filesystem::path corpus;        // <out>/corpus.jsonl
  std::filesystem::path ground_truth;  // <out>/ground_truth.csv
  std::vector<GroundTruthRow> rows;
  uint64_t bytes = 0;
};

/// Throws ConfigError when the spec does not fit the bundle: unknown or
/// repeated occupation, p_female outside [0, 1], zero docs, or a filler word
/// that is a gender token or a word of an occupation term (named).
void validate_plant(const PlantSpec& spec, const LexiconBundle& bundle);

/// Writes one single-sentence document per draw, "The <occupation> said
/// <token> <filler...>.", with exactly one gender token each.
SynthOutput make_synthetic_corpus(const PlantSpec& spec, const LexiconBundle& bundle,
                                  const std::filesystem::path& out);

std::vector<GroundTruthRow> load_ground_truth(const std::filesystem::path& path);

}  // namespace biasline
