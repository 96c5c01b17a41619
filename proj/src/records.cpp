#include "biasline/records.hpp"

#include <charconv>
#include <nlohmann/json.hpp>

#include "biasline/error.hpp"

namespace biasline {

std::string_view to_string(PromptType t) {
  switch (t) {
    case PromptType::Neutral: return "neutral";
    case PromptType::Positive: return "positive";
    case PromptType::Negative: return "negative";
  }
  return "neutral";
}

std::string_view to_string(SetupName s) {
  switch (s) {
    case SetupName::Baseline: return "baseline";
    case SetupName::TopK40: return "topk40";
    case SetupName::TopP09: return "topp09";
    case SetupName::Temp07: return "temp07";
  }
  return "baseline";
}

PromptType parse_prompt_type(std::string_view s) {
  if (s == "neutral") return PromptType::Neutral;
  if (s == "positive") return PromptType::Positive;
  if (s == "negative") return PromptType::Negative;
  throw ConfigError("unknown prompt type '" + std::string(s) + "'");
}

SetupName parse_setup_name(std::string_view s) {
  if (s == "baseline") return SetupName::Baseline;
  if (s == "topk40") return SetupName::TopK40;
  if (s == "topp09") return SetupName::TopP09;
  if (s == "temp07") return SetupName::Temp07;
  throw ConfigError("unknown decoding setup '" + std::string(s) + "'");
}

std::string to_jsonl(const GenerationRecord& r) {
  nlohmann::ordered_json j;
  j["occupation"] = r.occupation;
  j["prompt_id"] = r.prompt_id;
  j["prompt_type"] = to_string(r.prompt_type);
  j["setup"] = to_string(r.setup);
  j["sample_idx"] = r.sample_idx;
  j["model"] = r.model;
  j["text"] = r.text;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

namespace {

std::optional<GenerationRecord> from_fields(const std::string* occupation, const std::string* prompt_id,
                                            const std::string* prompt_type, const std::string* setup,
                                            std::optional<uint32_t> sample_idx, const std::string* model,
                                            const std::string* text) {
  if (!occupation || !prompt_id || !prompt_type || !setup || !sample_idx || !model || !text)
    return std::nullopt;
  GenerationRecord r;
  try {
    r.prompt_type = parse_prompt_type(*prompt_type);
    r.setup = parse_setup_name(*setup);
  } catch (const ConfigError&) {
    return std::nullopt;
  }
  r.occupation = *occupation;
  r.prompt_id = *prompt_id;
  r.sample_idx = *sample_idx;
  r.model = *model;
  r.text = *text;
  return r;
}

}  // namespace

std::optional<GenerationRecord> parse_generation_record(std::string_view line) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (!j.is_object()) return std::nullopt;
  auto str = [&](const char* k) -> const std::string* {
    auto it = j.find(k);
    return (it != j.end() && it->is_string()) ? &it->get_ref<const std::string&>() : nullptr;
  };
  std::optional<uint32_t> idx;
  if (auto it = j.find("sample_idx"); it != j.end() && it->is_number_unsigned())
    idx = it->get<uint32_t>();
  return from_fields(str("occupation"), str("prompt_id"), str("prompt_type"), str("setup"), idx,
                     str("model"), str("text"));
}

std::optional<GenerationRecord> record_from_document(const Document& doc) {
  auto str = [&](const char* k) -> const std::string* {
    auto it = doc.meta.find(k);
    return it != doc.meta.end() ? &it->second : nullptr;
  };
  std::optional<uint32_t> idx;
  if (const std::string* s = str("sample_idx")) {
    uint32_t v = 0;
    auto res = std::from_chars(s->data(), s->data() + s->size(), v);
    if (res.ec == std::errc() && res.ptr == s->data() + s->size()) idx = v;
  }
  return from_fields(str("occupation"), str("prompt_id"), str("prompt_type"), str("setup"), idx,
                     str("model"), &doc.text);
}

}  // namespace biasline
