#include "biasline/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <set>

#include "biasline/classify.hpp"
#include "biasline/corpus.hpp"
#include "biasline/error.hpp"
#include "biasline/genharness.hpp"
#include "biasline/lexicon.hpp"
#include "biasline/metrics.hpp"
#include "biasline/report.hpp"
#include "biasline/scan.hpp"
#include "biasline/strings.hpp"
#include "biasline/synth.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace biasline {

namespace {

constexpr const char* kVersion = "0.1.0";

// Removes the listed paths unless the command reaches commit().
class OutputGuard {
 public:
  void track(const fs::path& p) {
    if (!p.empty()) paths_.push_back(p);
  }
  void commit() { paths_.clear(); }
  ~OutputGuard() {
    std::error_code ec;
    for (const auto& p : paths_) fs::remove_all(p, ec);
  }

 private:
  std::vector<fs::path> paths_;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  size_t b = 0;
  while (b <= s.size()) {
    size_t e = s.find(',', b);
    if (e == std::string::npos) e = s.size();
    auto item = trim(std::string_view(s).substr(b, e - b));
    if (!item.empty()) out.emplace_back(item);
    b = e + 1;
  }
  return out;
}

LexiconBundle load_lexicon_arg(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("lexicon directory not found: " + dir);
  try {
    return load_lexicon_dir(dir);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

std::set<OutputFormat> parse_formats(const std::string& s) {
  std::set<OutputFormat> out;
  for (const auto& f : split_list(s)) {
    if (f == "json") out.insert(OutputFormat::Json);
    else if (f == "csv") out.insert(OutputFormat::Csv);
    else if (f == "svg") out.insert(OutputFormat::Svg);
    else throw ConfigError("unknown output format '" + f + "' (expected json, csv, svg)");
  }
  if (out.empty()) throw ConfigError("no output formats selected");
  return out;
}

ojson base_config(const char* command) {
  ojson c;
  c["command"] = command;
  c["version"] = kVersion;
  return c;
}

ojson unit_stats_json(const UnitStats& u) {
  return {{"units", u.units}, {"female", u.female}, {"male", u.male}, {"mixed", u.mixed}, {"none", u.none}};
}

// --- scan -----------------------------------------------------------------

struct ScanArgs {
  std::string corpus, format = "jsonl", lexicon, mode = "sentence", out;
  uint64_t cap = 100000, seed = 42;
  unsigned threads = 1;
  bool plural_s = false;
};

int cmd_scan(const ScanArgs& a, std::ostream& out, std::ostream& err) {
  const auto bundle = load_lexicon_arg(a.lexicon);
  const auto format = parse_corpus_format(a.format);
  const ScanOptions options{parse_count_mode(a.mode), a.plural_s};
  if (a.cap == 0) throw ConfigError("--cap must be positive");
  require_file(a.corpus, "corpus");
  out << "seed: " << a.seed << "\n";

  OutputGuard guard;
  guard.track(a.out);
  auto reader = open_corpus(a.corpus, format);
  auto result = scan_corpus(reader, bundle, options, SampleSpec{a.cap, a.seed}, std::max(1u, a.threads));

  // Thread count is left out so outputs do not depend on it.
  ojson config = base_config("scan");
  config["corpus"] = a.corpus;
  config["format"] = a.format;
  config["lexicon"] = a.lexicon;
  config["lexicon_digest"] = bundle.digest();
  config["mode"] = a.mode;
  config["cap"] = a.cap;
  config["seed"] = a.seed;
  config["plural_s"] = a.plural_s;
  config["out"] = a.out;
  const auto& s = result.stats;
  ojson summary{{"docs_read", s.docs_read},
                {"malformed", s.malformed},
                {"text_bytes", s.text_bytes},
                {"docs_with_occupation", s.docs_with_occupation},
                {"units", unit_stats_json(s.units)}};
  result.table.meta.extra["config"] = config;
  result.table.meta.extra["summary"] = summary;
  save_json(result.table.to_json(), a.out);
  guard.commit();

  if (s.docs_read == 0) err << "warning: corpus contains no documents; wrote an all-zero table\n";
  if (s.malformed) err << "warning: skipped " << s.malformed << " malformed lines\n";
  out << "docs read: " << s.docs_read << "\n"
      << "docs with an occupation: " << s.docs_with_occupation << "\n"
      << "units counted: " << s.units.units << " (female " << s.units.female << ", male " << s.units.male
      << ")\n"
      << "units discarded: mixed " << s.units.mixed << ", none " << s.units.none << "\n"
      << "wrote " << a.out << "\n";
  return kExitOk;
}

// --- classify -------------------------------------------------------------

struct ClassifyArgs {
  std::string gens, lexicon, out;
};

PartitionedCounts classify_file(const std::string& gens, const LexiconBundle& bundle, ojson config,
                                std::ostream& out, std::ostream& err) {
  uint64_t malformed = 0;
  const auto records = load_generation_records(gens, &malformed);
  GenerationCountStats stats;
  auto counts = count_generations(records, bundle, &stats);
  counts.meta.extra["config"] = std::move(config);
  counts.meta.extra["summary"] = {
      {"records", stats.records}, {"malformed", malformed}, {"unknown_occupation", stats.unknown_occupation}};
  if (malformed) err << "warning: skipped " << malformed << " malformed generation lines\n";
  if (stats.unknown_occupation)
    err << "warning: " << stats.unknown_occupation << " records name an occupation outside the lexicon\n";
  out << "records classified: " << stats.records << "\n"
      << "cells: " << counts.cells.size() << "\n";
  return counts;
}

int cmd_classify(const ClassifyArgs& a, std::ostream& out, std::ostream& err) {
  const auto bundle = load_lexicon_arg(a.lexicon);
  require_file(a.gens, "generation file");
  OutputGuard guard;
  guard.track(a.out);
  ojson config = base_config("classify");
  config["gens"] = a.gens;
  config["lexicon"] = a.lexicon;
  config["lexicon_digest"] = bundle.digest();
  config["out"] = a.out;
  const auto counts = classify_file(a.gens, bundle, config, out, err);
  save_json(counts.to_json(), a.out);
  guard.commit();
  out << "wrote " << a.out << "\n";
  return kExitOk;
}

// --- generate -------------------------------------------------------------

struct GenerateArgs {
  std::string endpoint, token, model, lexicon, occupations, setups = "baseline,topk40,topp09,temp07", out, counts;
  std::vector<std::string> prompts;
  uint32_t n_samples = 50;
  unsigned concurrency = 8, max_tokens = 256, max_attempts = 3;
  uint64_t seed = 42;
  bool resume = false;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out, std::ostream& err) {
  const auto bundle = load_lexicon_arg(a.lexicon);
  if (a.endpoint.empty()) throw ConfigError("no endpoint: pass --endpoint or set BIASLINE_ENDPOINT");
  if (a.n_samples == 0) throw ConfigError("--n-samples must be positive");

  GenerationConfig cfg;
  cfg.endpoint = a.endpoint;
  cfg.token = a.token;
  cfg.model = a.model;
  std::set<std::string> ids;
  for (const auto& p : a.prompts) {
    require_file(p, "prompt file");
    for (auto& t : load_prompt_templates(p)) {
      if (!ids.insert(t.id).second) throw ConfigError("prompt id '" + t.id + "' appears in more than one file");
      cfg.templates.push_back(std::move(t));
    }
  }
  if (cfg.templates.empty()) throw ConfigError("no prompt templates loaded");
  if (a.occupations.empty()) {
    cfg.occupations = bundle.occupations;
  } else {
    const std::set<std::string> known(bundle.occupations.begin(), bundle.occupations.end());
    for (auto& o : split_list(a.occupations)) {
      if (!known.count(o)) throw ConfigError("occupation '" + o + "' is not in the lexicon");
      cfg.occupations.push_back(std::move(o));
    }
  }
  for (const auto& s : split_list(a.setups)) cfg.setups.push_back(decoding_setup(parse_setup_name(s)));
  if (cfg.setups.empty()) throw ConfigError("no decoding setups selected");
  cfg.n_samples = a.n_samples;
  cfg.out = a.out;
  cfg.resume = a.resume;
  cfg.concurrency = a.concurrency;
  cfg.max_tokens = a.max_tokens;
  cfg.max_attempts = a.max_attempts;
  cfg.seed = a.seed;
  out << "seed: " << a.seed << "\n";

  ojson config = base_config("generate");
  config["endpoint"] = a.endpoint;
  config["token_set"] = !a.token.empty();
  config["model"] = a.model;
  config["lexicon"] = a.lexicon;
  config["lexicon_digest"] = bundle.digest();
  config["prompts"] = a.prompts;
  config["occupations"] = cfg.occupations;
  config["setups"] = split_list(a.setups);
  config["n_samples"] = a.n_samples;
  config["max_tokens"] = a.max_tokens;
  config["max_attempts"] = a.max_attempts;
  config["concurrency"] = a.concurrency;
  config["seed"] = a.seed;
  config["resume"] = a.resume;
  config["out"] = a.out;
  config["counts"] = a.counts;

  // A resumed file is an append-only journal and survives failures.
  OutputGuard guard;
  if (!a.resume) guard.track(a.out);
  const fs::path meta_path = a.out + ".meta.json";
  guard.track(meta_path);
  guard.track(a.counts);

  const auto summary = run_generation(cfg);
  ojson sj{{"requested", summary.requested},
           {"already_present", summary.already_present},
           {"completed", summary.completed},
           {"failed", summary.failed},
           {"requests_issued", summary.requests_issued}};
  save_json(ojson{{"config", config}, {"summary", sj}}, meta_path);
  out << "requested: " << summary.requested << "\n"
      << "already present: " << summary.already_present << "\n"
      << "completed: " << summary.completed << "\n"
      << "failed: " << summary.failed << "\n"
      << "requests issued: " << summary.requests_issued << "\n";
  if (summary.failed) err << "warning: " << summary.failed << " records failed after retries\n";

  if (!a.counts.empty()) {
    const auto counts = classify_file(a.out, bundle, config, out, err);
    save_json(counts.to_json(), a.counts);
    out << "wrote " << a.counts << "\n";
  }
  guard.commit();
  return kExitOk;
}

// --- analyze / report -----------------------------------------------------

struct AnalyzeArgs {
  std::string data, gens, lexicon, reference = "uniform", weighting = "token", out, formats = "json,csv,svg";
};

void print_report_summary(const AnalysisReport& r, std::ostream& out) {
  out << "occupations: " << r.occupations.size() << "\n"
      << "STA (data): " << format_sig(r.summary.sta_data) << "\n";
  if (r.summary.sta_generated) out << "STA (generated): " << format_sig(*r.summary.sta_generated) << "\n";
  out << "mean amplification: " << format_sig(r.summary.mean_amplification_pp) << " pp over "
      << r.summary.n_shared << " occupations\n"
      << "correlation cells: " << r.correlation.size() << "\n";
  if (r.regression)
    out << "regression R^2: " << format_sig(r.regression->r_squared) << "\n";
  else
    out << "regression: " << r.regression_error << "\n";
}

int emit_guarded(const AnalysisReport& report, const std::string& dir, const std::set<OutputFormat>& formats,
                 std::ostream& out) {
  OutputGuard guard;
  if (!fs::exists(dir)) guard.track(dir);
  const auto manifest = emit_outputs(report, dir, formats);
  guard.commit();
  out << "wrote " << manifest.size() + 1 << " files to " << dir << "\n";
  return kExitOk;
}

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream&) {
  const auto bundle = load_lexicon_arg(a.lexicon);
  const auto formats = parse_formats(a.formats);
  require_file(a.data, "data counts");
  require_file(a.gens, "generation counts");
  ReportOptions options;
  options.weighting = parse_weighting(a.weighting);
  if (a.reference != "uniform") {
    require_file(a.reference, "reference file");
    options.reference.per_occupation = load_reference_csv(a.reference);
  }
  CountsTable data;
  PartitionedCounts gens;
  try {
    data = CountsTable::from_json(load_json(a.data));
    gens = PartitionedCounts::from_json(load_json(a.gens));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed counts file: ") + e.what());
  }
  for (const auto* m : {&data.meta, &gens.meta})
    if (m->seed) out << "seed: " << *m->seed << "\n";

  ojson config = base_config("analyze");
  config["data"] = a.data;
  config["gens"] = a.gens;
  config["lexicon"] = a.lexicon;
  config["reference"] = a.reference;
  config["weighting"] = a.weighting;
  config["formats"] = split_list(a.formats);
  config["out"] = a.out;
  options.run = config;
  const auto report = build_report(data, gens, bundle, options);
  print_report_summary(report, out);
  return emit_guarded(report, a.out, formats, out);
}

struct ReportArgs {
  std::string from, out, formats = "json,csv,svg";
};

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream&) {
  const auto formats = parse_formats(a.formats);
  require_file(a.from, "report");
  const auto report = load_report(a.from);
  print_report_summary(report, out);
  return emit_guarded(report, a.out, formats, out);
}

// --- synth ----------------------------------------------------------------

struct SynthArgs {
  std::string lexicon, spec, out;
  uint64_t docs = 0, seed = 42, noise_docs = 0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream&) {
  const auto bundle = load_lexicon_arg(a.lexicon);
  PlantSpec spec;
  if (!a.spec.empty()) {
    require_file(a.spec, "plant spec");
    spec = PlantSpec::from_json_file(a.spec);
  } else {
    if (a.docs == 0) throw ConfigError("pass --spec or a positive --docs");
    spec = grid_plant(bundle, a.docs, a.seed);
    spec.noise_docs = a.noise_docs;
  }
  out << "seed: " << spec.seed << "\n";
  OutputGuard guard;
  if (!fs::exists(a.out)) guard.track(a.out);
  const auto res = make_synthetic_corpus(spec, bundle, a.out);
  guard.commit();
  uint64_t docs = 0;
  for (const auto& r : res.rows) docs += r.docs;
  out << "occupations: " << res.rows.size() << "\n"
      << "planted documents: " << docs << "\n"
      << "wrote " << res.corpus.string() << " and " << res.ground_truth.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gender-occupation bias measurement for corpora and model generations", "biasline"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  ScanArgs scan;
  auto* sc = app.add_subcommand("scan", "Count gender co-occurrences per occupation in a corpus");
  sc->add_option("--corpus", scan.corpus, "JSONL file/directory or text directory")->required();
  sc->add_option("--format", scan.format, "jsonl or textdir")->capture_default_str();
  sc->add_option("--lexicon", scan.lexicon, "Lexicon directory")->required();
  sc->add_option("--mode", scan.mode, "sentence or document")->capture_default_str();
  sc->add_option("--cap", scan.cap, "Documents sampled per occupation")->capture_default_str();
  sc->add_option("--seed", scan.seed, "Sampling seed")->capture_default_str();
  sc->add_option("--threads", scan.threads, "Worker threads")->capture_default_str();
  sc->add_flag("--plural-s", scan.plural_s, "Also match occupation+s");
  sc->add_option("--out", scan.out, "Counts JSON")->required();

  GenerateArgs gen;
  auto* gc = app.add_subcommand("generate", "Prompt a model endpoint and optionally classify the responses");
  gc->add_option("--endpoint", gen.endpoint, "API root URL")->envname("BIASLINE_ENDPOINT");
  gc->add_option("--token", gen.token, "Bearer token")->envname("BIASLINE_TOKEN");
  gc->add_option("--model", gen.model, "Model name")->required();
  gc->add_option("--lexicon", gen.lexicon, "Lexicon directory")->required();
  gc->add_option("--prompts", gen.prompts, "Prompt TSV files")->required();
  gc->add_option("--occupations", gen.occupations, "Comma-separated subset (default: all)");
  gc->add_option("--setups", gen.setups, "Comma-separated decoding setups")->capture_default_str();
  gc->add_option("--n-samples", gen.n_samples, "Responses per configuration")->capture_default_str();
  gc->add_option("--concurrency", gen.concurrency, "Requests in flight")->capture_default_str();
  gc->add_option("--max-tokens", gen.max_tokens, "Response length limit")->capture_default_str();
  gc->add_option("--max-attempts", gen.max_attempts, "Attempts per record")->capture_default_str();
  gc->add_option("--seed", gen.seed, "Request seed base")->capture_default_str();
  gc->add_flag("--resume", gen.resume, "Skip records already in --out");
  gc->add_option("--out", gen.out, "Generation JSONL")->required();
  gc->add_option("--counts", gen.counts, "Also write partitioned counts here");

  ClassifyArgs cls;
  auto* cc = app.add_subcommand("classify", "Count genders in an existing generation JSONL");
  cc->add_option("--gens", cls.gens, "Generation JSONL")->required();
  cc->add_option("--lexicon", cls.lexicon, "Lexicon directory")->required();
  cc->add_option("--out", cls.out, "Partitioned counts JSON")->required();

  AnalyzeArgs an;
  auto* ac = app.add_subcommand("analyze", "Compute metrics and emit a report directory");
  ac->add_option("--data", an.data, "Data counts JSON")->required();
  ac->add_option("--gens", an.gens, "Partitioned generation counts JSON")->required();
  ac->add_option("--lexicon", an.lexicon, "Lexicon directory")->required();
  ac->add_option("--reference", an.reference, "uniform or a term,value CSV")->capture_default_str();
  ac->add_option("--weighting", an.weighting, "token or unit")->capture_default_str();
  ac->add_option("--formats", an.formats, "Comma-separated json,csv,svg")->capture_default_str();
  ac->add_option("--out", an.out, "Report directory")->required();

  ReportArgs rep;
  auto* rc = app.add_subcommand("report", "Re-emit a report directory from report.json");
  rc->add_option("--from", rep.from, "report.json")->required();
  rc->add_option("--formats", rep.formats, "Comma-separated json,csv,svg")->capture_default_str();
  rc->add_option("--out", rep.out, "Report directory")->required();

  SynthArgs syn;
  auto* yc = app.add_subcommand("synth", "Write a synthetic corpus with planted proportions");
  yc->add_option("--lexicon", syn.lexicon, "Lexicon directory")->required();
  yc->add_option("--spec", syn.spec, "Plant spec JSON");
  yc->add_option("--docs", syn.docs, "Documents per occupation on a seeded grid");
  yc->add_option("--seed", syn.seed, "Grid seed")->capture_default_str();
  yc->add_option("--noise-docs", syn.noise_docs, "Distractors per occupation")->capture_default_str();
  yc->add_option("--out", syn.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sc) return cmd_scan(scan, out, err);
    if (*gc) return cmd_generate(gen, out, err);
    if (*cc) return cmd_classify(cls, out, err);
    if (*ac) return cmd_analyze(an, out, err);
    if (*rc) return cmd_report(rep, out, err);
    if (*yc) return cmd_synth(syn, out, err);
  } catch (const AuthError& e) {
    err << "auth error: " << e.what() << "\n";
    return kExitAuth;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}

}  // namespace biasline
