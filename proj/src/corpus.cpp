#include "biasline/corpus.hpp"

#include <cstring>
#include <nlohmann/json.hpp>

#include "biasline/error.hpp"
#include "biasline/textscan.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace biasline {

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::Jsonl;
  if (name == "textdir") return CorpusFormat::Textdir;
  throw ConfigError("unknown corpus format '" + std::string(name) + "' (expected jsonl|textdir)");
}

CorpusReader::CorpusReader(const fs::path& path, CorpusFormat format) : root_(path), format_(format) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw IoError("corpus path not found: " + path.string());
  const char* ext = format == CorpusFormat::Jsonl ? ".jsonl" : ".txt";
  if (fs::is_regular_file(path, ec)) {
    if (format == CorpusFormat::Textdir)
      throw IoError("textdir corpus must be a directory: " + path.string());
    files_.push_back(path);
    root_ = path.parent_path();
  } else if (fs::is_directory(path, ec)) {
    for (fs::recursive_directory_iterator it(path, ec), end; it != end; it.increment(ec)) {
      if (ec) throw IoError("cannot list " + path.string() + ": " + ec.message());
      if (it->is_regular_file() && it->path().extension() == ext) files_.push_back(it->path());
    }
    if (ec) throw IoError("cannot list " + path.string() + ": " + ec.message());
    std::sort(files_.begin(), files_.end(), [&](const fs::path& a, const fs::path& b) {
      return a.lexically_relative(path).generic_string() < b.lexically_relative(path).generic_string();
    });
  } else {
    throw IoError("unreadable corpus path: " + path.string());
  }
}

CorpusReader open_corpus(const fs::path& path, CorpusFormat format) { return CorpusReader(path, format); }

bool CorpusReader::open_next_file() {
  in_.close();
  in_.clear();
  if (file_idx_ >= files_.size()) return false;
  const fs::path& p = files_[file_idx_++];
  in_.open(p, std::ios::binary);
  if (!in_) throw IoError("cannot open " + p.string());
  rel_name_ = p.lexically_relative(root_).generic_string();
  line_no_ = 0;
  return true;
}

bool CorpusReader::next(Document& doc) {
  return format_ == CorpusFormat::Jsonl ? next_jsonl(doc) : next_textdir(doc);
}

bool CorpusReader::next_jsonl(Document& doc) {
  for (;;) {
    if (!in_.is_open() && !open_next_file()) return false;
    if (!std::getline(in_, line_)) {
      if (in_.bad()) throw IoError("read error in " + rel_name_);
      in_.close();
      continue;
    }
    ++line_no_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    if (line_.find_first_not_of(" \t") == std::string::npos) continue;

    json obj = json::parse(line_, nullptr, /*allow_exceptions=*/false);
    auto text_it = obj.is_object() ? obj.find("text") : obj.end();
    if (!obj.is_object() || text_it == obj.end() || !text_it->is_string()) {
      ++malformed_;
      if (malformed_examples_.size() < 10)
        malformed_examples_.push_back(rel_name_ + ":" + std::to_string(line_no_));
      continue;
    }
    doc.meta.clear();
    doc.id.clear();
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const std::string& key = it.key();
      if (key == "text") continue;
      std::string value = it->is_string() ? it->get<std::string>() : it->dump();
      if (key == "id")
        doc.id = std::move(value);
      else
        doc.meta.emplace(key, std::move(value));
    }
    if (doc.id.empty()) doc.id = rel_name_ + ":" + std::to_string(line_no_);
    doc.text = std::move(text_it->get_ref<std::string&>());
    ++docs_read_;
    text_bytes_ += doc.text.size();
    return true;
  }
}

bool CorpusReader::next_textdir(Document& doc) {
  if (!open_next_file()) return false;
  doc.meta.clear();
  doc.id = rel_name_;
  doc.text.assign(std::istreambuf_iterator<char>(in_), std::istreambuf_iterator<char>());
  if (in_.bad()) throw IoError("read error in " + rel_name_);
  in_.close();
  ++docs_read_;
  text_bytes_ += doc.text.size();
  return true;
}

// ---------------------------------------------------------------------------

namespace {

inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t absorb(uint64_t h, std::string_view s) {
  h = mix64(h ^ (s.size() * 0x9e3779b97f4a7c15ULL));
  size_t i = 0;
  for (; i + 8 <= s.size(); i += 8) {
    uint64_t chunk;
    std::memcpy(&chunk, s.data() + i, 8);
    h = mix64(h ^ chunk) + 0x9e3779b97f4a7c15ULL;
  }
  uint64_t tail = 0;
  for (size_t k = 0; i + k < s.size(); ++k)
    tail |= static_cast<uint64_t>(static_cast<unsigned char>(s[i + k])) << (8 * k);
  return mix64(h ^ tail ^ 0xff51afd7ed558ccdULL);
}

uint64_t keyed(uint64_t seed, uint64_t salt, std::string_view occupation, std::string_view id) {
  uint64_t h = mix64(seed ^ salt);
  h = absorb(h, occupation);
  h = absorb(h, id);
  return mix64(h);
}

}  // namespace

SampleKey sample_key(uint64_t seed, std::string_view occupation, std::string_view doc_id) {
  return {keyed(seed, 0x243f6a8885a308d3ULL, occupation, doc_id),
          keyed(seed, 0x13198a2e03707344ULL, occupation, doc_id)};
}

std::map<std::string, std::vector<Document>> sample_per_occupation(const DocumentSource& docs,
                                                                   const TermMatcher& matcher,
                                                                   const SampleSpec& spec) {
  if (spec.cap < 1) throw ConfigError("sample cap must be >= 1");
  std::vector<KMinSampler<Document>> samplers(matcher.size(), KMinSampler<Document>(spec.cap));
  std::vector<TermHit> hits;
  std::vector<uint32_t> present;
  Document doc;
  while (docs(doc)) {
    hits.clear();
    matcher.find(doc.text, 0, doc.text.size(), hits);
    present.clear();
    for (const auto& h : hits) present.push_back(h.term_id);
    std::sort(present.begin(), present.end());
    present.erase(std::unique(present.begin(), present.end()), present.end());
    for (uint32_t id : present)
      samplers[id].offer(sample_key(spec.seed, matcher.terms()[id], doc.id), doc);
  }
  std::map<std::string, std::vector<Document>> out;
  for (size_t id = 0; id < samplers.size(); ++id) {
    if (samplers[id].size() == 0) continue;
    auto& list = out[matcher.terms()[id]];
    for (auto& e : samplers[id].sorted()) list.push_back(std::move(e.second));
  }
  return out;
}

std::map<std::string, std::vector<Document>> sample_per_occupation(std::span<const Document> docs,
                                                                   const TermMatcher& matcher,
                                                                   const SampleSpec& spec) {
  size_t i = 0;
  return sample_per_occupation(
      [&](Document& d) {
        if (i >= docs.size()) return false;
        d = docs[i++];
        return true;
      },
      matcher, spec);
}

}  // namespace biasline
