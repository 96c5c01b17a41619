#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "biasline/records.hpp"

namespace biasline {

enum class PromptStyle { Statement, Question };
std::string_view to_string(PromptStyle s);
PromptStyle parse_prompt_style(std::string_view s);

/// A prompt with exactly one `[OCCUPATION]` placeholder.
struct PromptTemplate {
  std::string id;
  PromptType prompt_type = PromptType::Neutral;
  PromptStyle style = PromptStyle::Statement;
  std::string text;
};

/// Reads a TSV with header `id, prompt_type, style, template`.
std::vector<PromptTemplate> load_prompt_templates(const std::filesystem::path& path);

/// Substitutes the occupation; a literal "a/n " right before the
/// placeholder becomes "an " for a vowel-initial occupation and "a "
/// otherwise. Throws ConfigError when the placeholder is missing or repeated.
std::string render_prompt(const PromptTemplate& tmpl, std::string_view occupation);

struct DecodingSetup {
  SetupName name = SetupName::Baseline;
  double temperature = 1.0;
  double top_p = 1.0;
  std::optional<int> top_k;  // nullopt = unlimited
};

/// baseline (T=1, p=1, k unlimited), topk40, topp09, temp07.
DecodingSetup decoding_setup(SetupName name);
std::vector<DecodingSetup> all_decoding_setups();

struct GenerationConfig {
  /// API root, e.g. "http://localhost:8000/v1". Statement prompts go to
  /// `<root>/completions`, question prompts to `<root>/chat/completions`.
  std::string endpoint;
  std::string token;
  std::string model;
  std::vector<PromptTemplate> templates;
  std::vector<std::string> occupations;
  std::vector<DecodingSetup> setups;
  uint32_t n_samples = 50;
  std::filesystem::path out;
  bool resume = false;
  unsigned concurrency = 8;
  unsigned max_tokens = 256;
  unsigned max_attempts = 3;
  std::chrono::milliseconds backoff{250};
  std::chrono::seconds timeout{120};
  /// Per-request seed derived from this and the record key; nullopt omits it.
  std::optional<uint64_t> seed = 42;
};

struct GenerationSummary {
  uint64_t requested = 0;         // full matrix size
  uint64_t already_present = 0;   // skipped on resume
  uint64_t completed = 0;         // present in `out` after the run
  uint64_t failed = 0;            // gave up after retries or permanent error
  uint64_t requests_issued = 0;   // HTTP attempts, including retries
};

/// Emits one JSONL record per (occupation, template, setup, sample) into
/// `config.out`. Transient failures (connection errors, 408, 429, 5xx) are
/// retried with exponential backoff; records that still fail are counted
/// and skipped. Throws AuthError on 401/403.
GenerationSummary run_generation(const GenerationConfig& config);

/// Reads a generation JSONL file, counting lines that are not valid records.
std::vector<GenerationRecord> load_generation_records(const std::filesystem::path& path,
                                                      uint64_t* malformed = nullptr);

}  // namespace biasline
