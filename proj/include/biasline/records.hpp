#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>

#include "biasline/corpus.hpp"

namespace biasline {

enum class PromptType { Neutral, Positive, Negative };
enum class SetupName { Baseline, TopK40, TopP09, Temp07 };

std::string_view to_string(PromptType t);
std::string_view to_string(SetupName s);
/// Throw ConfigError on unknown names.
PromptType parse_prompt_type(std::string_view s);
SetupName parse_setup_name(std::string_view s);

/// One model response, tagged with what produced it.
struct GenerationRecord {
  std::string occupation;
  std::string prompt_id;
  PromptType prompt_type = PromptType::Neutral;
  SetupName setup = SetupName::Baseline;
  uint32_t sample_idx = 0;
  std::string model;
  std::string text;

  /// (occupation, prompt_id, setup, sample_idx, model) identifies a record.
  auto key() const { return std::tie(occupation, prompt_id, setup, sample_idx, model); }

  bool operator==(const GenerationRecord&) const = default;
};

/// One compact JSON object, fields in schema order, no trailing newline.
std::string to_jsonl(const GenerationRecord& r);

/// Parses one JSONL line; nullopt when it is not a valid record.
std::optional<GenerationRecord> parse_generation_record(std::string_view line);

/// Rebuilds a record from a document produced by CorpusReader on a
/// generation file.
std::optional<GenerationRecord> record_from_document(const Document& doc);

}  // namespace biasline
