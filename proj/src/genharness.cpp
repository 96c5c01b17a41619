#include "biasline/genharness.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "biasline/corpus.hpp"
#include "biasline/error.hpp"
#include "biasline/strings.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace biasline {

std::string_view to_string(PromptStyle s) { return s == PromptStyle::Statement ? "statement" : "question"; }

PromptStyle parse_prompt_style(std::string_view s) {
  if (s == "statement") return PromptStyle::Statement;
  if (s == "question") return PromptStyle::Question;
  throw ConfigError("unknown prompt style '" + std::string(s) + "' (expected statement|question)");
}

namespace {

constexpr std::string_view kPlaceholder = "[OCCUPATION]";

size_t count_placeholders(std::string_view s) {
  size_t n = 0;
  for (size_t pos = s.find(kPlaceholder); pos != std::string_view::npos;
       pos = s.find(kPlaceholder, pos + kPlaceholder.size()))
    ++n;
  return n;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t b = 0;
  for (size_t e; (e = line.find('\t', b)) != std::string::npos; b = e + 1) out.push_back(line.substr(b, e - b));
  out.push_back(line.substr(b));
  return out;
}

}  // namespace

std::vector<PromptTemplate> load_prompt_templates(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open prompt file " + path.string());
  std::vector<PromptTemplate> out;
  std::set<std::string> ids;
  std::string line;
  size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    auto f = split_tabs(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (!header) {
      header = true;
      if (f.size() == 4 && f[0] == "id" && f[1] == "prompt_type" && f[2] == "style" && f[3] == "template")
        continue;
      throw ConfigError(where + ": expected header id<TAB>prompt_type<TAB>style<TAB>template");
    }
    if (f.size() != 4) throw ConfigError(where + ": expected 4 tab-separated columns");
    PromptTemplate t;
    t.id = std::string(trim(f[0]));
    t.prompt_type = parse_prompt_type(trim(f[1]));
    t.style = parse_prompt_style(trim(f[2]));
    t.text = std::string(trim(f[3]));
    if (count_placeholders(t.text) != 1)
      throw ConfigError(where + ": template '" + t.id + "' must contain exactly one [OCCUPATION]");
    if (!ids.insert(t.id).second) throw ConfigError(where + ": duplicate prompt id '" + t.id + "'");
    out.push_back(std::move(t));
  }
  return out;
}

std::string render_prompt(const PromptTemplate& tmpl, std::string_view occupation) {
  if (occupation.empty()) throw ConfigError("render_prompt: empty occupation");
  if (count_placeholders(tmpl.text) != 1)
    throw ConfigError("template '" + tmpl.id + "' must contain exactly one [OCCUPATION]");
  std::string s = tmpl.text;
  size_t pos = s.find(kPlaceholder);
  s.replace(pos, kPlaceholder.size(), occupation);
  constexpr std::string_view kArticle = "a/n ";
  if (pos >= kArticle.size() && std::string_view(s).substr(pos - kArticle.size(), kArticle.size()) == kArticle) {
    const char first = ascii_lower(occupation.front());
    const bool vowel = first == 'a' || first == 'e' || first == 'i' || first == 'o' || first == 'u';
    s.replace(pos - kArticle.size(), kArticle.size(), vowel ? "an " : "a ");
  }
  return s;
}

DecodingSetup decoding_setup(SetupName name) {
  switch (name) {
    case SetupName::Baseline: return {name, 1.0, 1.0, std::nullopt};
    case SetupName::TopK40: return {name, 1.0, 1.0, 40};
    case SetupName::TopP09: return {name, 1.0, 0.9, std::nullopt};
    case SetupName::Temp07: return {name, 0.7, 1.0, std::nullopt};
  }
  throw ConfigError("unknown decoding setup");
}

std::vector<DecodingSetup> all_decoding_setups() {
  return {decoding_setup(SetupName::Baseline), decoding_setup(SetupName::TopK40),
          decoding_setup(SetupName::TopP09), decoding_setup(SetupName::Temp07)};
}

std::vector<GenerationRecord> load_generation_records(const fs::path& path, uint64_t* malformed) {
  CorpusReader reader(path, CorpusFormat::Jsonl);
  std::vector<GenerationRecord> out;
  uint64_t bad = 0;
  Document doc;
  while (reader.next(doc)) {
    if (auto r = record_from_document(doc))
      out.push_back(std::move(*r));
    else
      ++bad;
  }
  if (malformed) *malformed = bad + reader.malformed_count();
  return out;
}

// ---------------------------------------------------------------------------
// run_generation

namespace {

struct Endpoint {
  std::string scheme_host_port;
  std::string path_prefix;
};

Endpoint parse_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must be a URL: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported endpoint scheme: " + scheme);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") throw ConfigError("https endpoints need a build with OpenSSL support");
#endif
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = url.substr(0, path_start);
  e.path_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.path_prefix.empty() && e.path_prefix.back() == '/') e.path_prefix.pop_back();
  return e;
}

struct Job {
  const std::string* occupation;
  const PromptTemplate* tmpl;
  const DecodingSetup* setup;
  uint32_t sample_idx;
};

uint64_t request_seed(uint64_t seed, const Job& j) {
  // FNV-1a over the record key, folded with the run seed.
  uint64_t h = 1469598103934665603ULL ^ seed;
  auto eat = [&](std::string_view s) {
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
    h = (h ^ 0x1f) * 1099511628211ULL;
  };
  eat(*j.occupation);
  eat(j.tmpl->id);
  eat(to_string(j.setup->name));
  eat(std::to_string(j.sample_idx));
  return h & 0x7fffffffULL;
}

std::string record_key(const std::string& occupation, const std::string& prompt_id, SetupName setup,
                       uint32_t sample_idx, const std::string& model) {
  std::string k = occupation;
  k += '\x1f';
  k += prompt_id;
  k += '\x1f';
  k += to_string(setup);
  k += '\x1f';
  k += std::to_string(sample_idx);
  k += '\x1f';
  k += model;
  return k;
}

enum class Outcome { Ok, Transient, Permanent };

}  // namespace

GenerationSummary run_generation(const GenerationConfig& cfg) {
  if (cfg.model.empty()) throw ConfigError("generation: model name is required");
  if (cfg.max_attempts == 0) throw ConfigError("generation: max_attempts must be >= 1");
  const Endpoint endpoint = parse_endpoint(cfg.endpoint);

  std::set<std::string> done;
  uint64_t present = 0;
  if (cfg.resume && fs::exists(cfg.out)) {
    std::ifstream in(cfg.out, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (auto r = parse_generation_record(line))
        if (done.insert(record_key(r->occupation, r->prompt_id, r->setup, r->sample_idx, r->model)).second)
          ++present;
    }
  }

  GenerationSummary summary;
  std::vector<Job> jobs;
  for (const auto& occ : cfg.occupations)
    for (const auto& t : cfg.templates)
      for (const auto& s : cfg.setups)
        for (uint32_t i = 0; i < cfg.n_samples; ++i) {
          ++summary.requested;
          if (done.count(record_key(occ, t.id, s.name, i, cfg.model))) {
            ++summary.already_present;
            continue;
          }
          jobs.push_back({&occ, &t, &s, i});
        }

  if (cfg.out.has_parent_path()) fs::create_directories(cfg.out.parent_path());
  const bool append = cfg.resume && fs::exists(cfg.out);
  bool needs_newline = false;
  if (append && fs::file_size(cfg.out) > 0) {
    std::ifstream in(cfg.out, std::ios::binary);
    in.seekg(-1, std::ios::end);
    needs_newline = in.get() != '\n';
  }
  std::ofstream sink(cfg.out, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!sink) throw IoError("cannot write " + cfg.out.string());
  if (needs_newline) sink << '\n';  // isolate a torn trailing line
  std::mutex sink_mu;

  std::atomic<size_t> next{0};
  std::atomic<uint64_t> completed{0}, failed{0}, issued{0};
  std::atomic<bool> stop{false};
  std::exception_ptr fatal;
  std::mutex fatal_mu;

  auto attempt = [&](httplib::Client& client, const Job& job, std::string& text) -> Outcome {
    const bool chat = job.tmpl->style == PromptStyle::Question;
    const std::string prompt = render_prompt(*job.tmpl, *job.occupation);
    json body;
    body["model"] = cfg.model;
    if (chat)
      body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
    else
      body["prompt"] = prompt;
    body["max_tokens"] = cfg.max_tokens;
    body["temperature"] = job.setup->temperature;
    body["top_p"] = job.setup->top_p;
    body["top_k"] = job.setup->top_k.value_or(-1);
    if (cfg.seed) body["seed"] = request_seed(*cfg.seed, job);

    httplib::Headers headers;
    if (!cfg.token.empty()) headers.emplace("Authorization", "Bearer " + cfg.token);
    const std::string path = endpoint.path_prefix + (chat ? "/chat/completions" : "/completions");
    ++issued;
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) return Outcome::Transient;
    const int status = res->status;
    if (status == 401 || status == 403)
      throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
    if (status == 408 || status == 429 || status >= 500) return Outcome::Transient;
    if (status != 200) return Outcome::Permanent;
    auto reply = json::parse(res->body, nullptr, false);
    try {
      const auto& choice = reply.at("choices").at(0);
      text = chat ? choice.at("message").at("content").get<std::string>() : choice.at("text").get<std::string>();
    } catch (const json::exception&) {
      return Outcome::Transient;
    }
    return Outcome::Ok;
  };

  auto worker = [&] {
    httplib::Client client(endpoint.scheme_host_port);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout).count());
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout).count());
    client.set_keep_alive(true);
    try {
      for (size_t idx; !stop && (idx = next++) < jobs.size();) {
        const Job& job = jobs[idx];
        std::string text;
        Outcome outcome = Outcome::Transient;
        for (unsigned a = 0; a < cfg.max_attempts && !stop; ++a) {
          if (a > 0) std::this_thread::sleep_for(cfg.backoff * (1u << (a - 1)));
          outcome = attempt(client, job, text);
          if (outcome != Outcome::Transient) break;
        }
        if (outcome != Outcome::Ok) {
          ++failed;
          continue;
        }
        GenerationRecord r{*job.occupation, job.tmpl->id, job.tmpl->prompt_type, job.setup->name,
                           job.sample_idx,  cfg.model,    std::move(text)};
        const std::string line = to_jsonl(r);
        std::lock_guard lock(sink_mu);
        sink << line << '\n';
        sink.flush();
        if (!sink) throw IoError("write failed: " + cfg.out.string());
        ++completed;
      }
    } catch (...) {
      std::lock_guard lock(fatal_mu);
      if (!fatal) fatal = std::current_exception();
      stop = true;
    }
  };

  const unsigned n_workers = static_cast<unsigned>(std::min<size_t>(std::max(1u, cfg.concurrency), jobs.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  sink.close();
  if (fatal) std::rethrow_exception(fatal);

  summary.completed = present + completed;
  summary.failed = failed;
  summary.requests_issued = issued;
  return summary;
}

}  // namespace biasline
