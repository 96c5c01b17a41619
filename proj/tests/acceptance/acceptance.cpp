// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "biasline/classify.hpp"
#include "biasline/cli.hpp"
#include "biasline/corpus.hpp"
#include "biasline/genharness.hpp"
#include "biasline/metrics.hpp"
#include "biasline/report.hpp"
#include "biasline/scan.hpp"
#include "biasline/synth.hpp"
#include "fuzz_fixtures.hpp"
#include "naive_counter.hpp"
#include "stats_oracles.hpp"
#include "stub_server.hpp"
#include "test_support.hpp"

using namespace biasline;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Shared across 2, 4 and 9: the planted corpus over the first 220 occupations.
struct PlantedCorpus {
  testing::TempDir dir;
  SynthOutput out;
};

PlantedCorpus& planted() {
  static PlantedCorpus* pc = [] {
    auto* p = new PlantedCorpus;
    const auto& b = testing::shipped_bundle();
    auto spec = grid_plant(b, 10000, 20240);
    spec.occupations.resize(220);
    p->out = make_synthetic_corpus(spec, b, p->dir.path());
    return p;
  }();
  return *pc;
}

// --- 1 -----------------------------------------------------------------------

Outcome homemaker_spot_check() {
  const auto homemaker = GenderDistribution{0.152, 0.848};
  const double d = tvd(homemaker, GenderDistribution::uniform());
  const auto b = testing::make_bundle({"she"}, {"he"}, {"homemaker"});
  auto t = CountsTable::zeros(b, CountMode::Sentence);
  *t.find("homemaker") = {848, 152, 848, 152, 1000};
  const double s = sta(t, ReferenceSpec::uniform(), b).overall;
  return {d == 0.348 && std::fabs(s - 0.348) <= 1e-12,
          "tvd=" + fmt("%.17g", d) + " sta=" + fmt("%.17g", s)};
}

// --- 2 -----------------------------------------------------------------------

Outcome planted_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  auto& pc = planted();
  const auto& b = testing::shipped_bundle();
  CorpusReader reader(pc.out.corpus, CorpusFormat::Jsonl);
  const auto table = scan_corpus(reader, b, ScanOptions{}, SampleSpec{}, 1).table;
  size_t exact = 0;
  long double analytic = 0;
  for (const auto& row : pc.out.rows) {
    const auto p = observed_probability(*table.find(row.occupation), Weighting::Unit);
    if (p && p->p_female == row.p_realized) ++exact;
    analytic += std::fabs(static_cast<long double>(row.p_realized) - 0.5L);
  }
  analytic /= static_cast<long double>(pc.out.rows.size());
  const auto measured = sta(table, ReferenceSpec::uniform(), b, Weighting::Unit);
  const double gap = std::fabs(measured.overall - static_cast<double>(analytic));
  const bool ok = exact == 220 && pc.out.rows.size() == 220 && measured.per_occupation.size() == 220 && gap <= 1e-12;
  return {ok, std::to_string(exact) + "/220 occupations exact, |STA - analytic|=" + fmt("%.3g", gap) + ", " +
                  fmt("%.1f", seconds_since(t0)) + " s incl. synthesis"};
}

// --- 3 -----------------------------------------------------------------------

Outcome matcher_oracle_sweep() {
  size_t identical = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const auto b = testing::random_bundle(rng, 30, seed % 2 == 1);
    std::vector<std::string> vocab(b.occupations.begin(), b.occupations.end());
    vocab.insert(vocab.end(), b.female_tokens.begin(), b.female_tokens.end());
    vocab.insert(vocab.end(), b.male_tokens.begin(), b.male_tokens.end());
    for (const char* w : {"the", "a", "ka", "talk", "Zu", "x", "lo", "mira"}) vocab.push_back(w);
    std::vector<Document> docs;
    for (int i = 0; i < 1000; ++i) docs.push_back({"d" + std::to_string(i), testing::random_doc(rng, vocab), {}});
    const auto mode = seed % 3 == 0 ? CountMode::Document : CountMode::Sentence;
    const auto fast = count_documents(docs, b, ScanOptions{mode});
    const auto slow = oracle::naive_count(docs, b, mode);
    if (fast.same_counts(slow)) ++identical;
  }
  return {identical == 100, std::to_string(identical) + "/100 seeds identical"};
}

// --- 4 -----------------------------------------------------------------------

Outcome exclusivity() {
  auto& pc = planted();
  const auto& b = testing::shipped_bundle();
  CorpusReader reader(pc.out.corpus, CorpusFormat::Jsonl);
  const std::string to_female = *b.female_tokens.begin();
  const std::string to_male = *b.male_tokens.begin();
  uint64_t injected = 0;
  DocumentSource source = [&](Document& d) {
    if (!reader.next(d)) return false;
    // Every synthetic document is one sentence ending in '.'.
    const auto g = d.meta.find("gender");
    const std::string token = g != d.meta.end() && g->second == "female" ? to_male : to_female;
    d.text.insert(d.text.size() - 1, " " + token);
    ++injected;
    return true;
  };
  const auto table = scan_corpus(source, b, ScanOptions{}, SampleSpec{}, 1).table;
  uint64_t gendered = 0, units = 0;
  for (const auto& c : table.counts) {
    gendered += c.female_tokens + c.male_tokens + c.female_units + c.male_units;
    units += c.units_scanned;
  }
  return {gendered == 0 && units == injected && injected == 2200000,
          std::to_string(injected) + " units injected, " + std::to_string(gendered) + " gendered counts remain"};
}

// --- 5 -----------------------------------------------------------------------

Outcome amplification_symmetry() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  double worst_identity = 0, worst_anti = 0;
  for (int rep = 0; rep < 50; ++rep) {
    std::map<std::string, double> a, c;
    for (const auto& o : testing::shipped_bundle().occupations) {
      a[o] = u(rng);
      c[o] = u(rng);
    }
    for (const auto& [o, v] : amplification(a, a).per_occupation) worst_identity = std::max(worst_identity, std::fabs(v));
    const auto ab = amplification(a, c), ba = amplification(c, a);
    for (const auto& [o, v] : ab.per_occupation) worst_anti = std::max(worst_anti, std::fabs(v + ba.per_occupation.at(o)));
    worst_anti = std::max(worst_anti, std::fabs(ab.mean + ba.mean));
  }
  return {worst_identity == 0.0 && worst_anti <= 1e-12,
          "max|amp(A,A)|=" + fmt("%.3g", worst_identity) + " max|amp(A,B)+amp(B,A)|=" + fmt("%.3g", worst_anti)};
}

// --- 6 -----------------------------------------------------------------------

Outcome statistics_oracles() {
  static const std::vector<std::string> setups = {"baseline", "topk40", "topp09", "temp07"};
  static const std::vector<std::string> prompts = {"neutral", "positive", "negative"};
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z(0, 1);

  double pearson_gap = 0;
  for (int s = 0; s < 20; ++s) {
    const size_t n = 5 + rng() % 200;
    std::vector<double> x(n), y(n);
    for (size_t i = 0; i < n; ++i) {
      x[i] = z(rng);
      y[i] = 0.3 * x[i] + z(rng);
    }
    pearson_gap = std::max(pearson_gap, std::fabs(pearson(x, y) - oracle::pearson_closed_form(x, y)));
  }

  double coef_gap = 0, p_gap = 0;
  std::normal_distribution<double> noise(0, 0.05);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<RegressionObservation> obs;
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 150; ++i) {
      const size_t s = rng() % 4, p = rng() % 3;
      const double v = 0.45 + 0.02 * s + 0.04 * (p == 1) + noise(rng);
      obs.push_back({setups[s], prompts[p], v});
      x.push_back({1.0, double(s == 1), double(s == 2), double(s == 3), double(p == 1), double(p == 2)});
      y.push_back(v);
    }
    const auto r = regress_gender_proportion(obs);
    const auto full = oracle::ols_normal_equations(x, y);
    const std::vector<std::string> names = {"intercept", "setup=topk40", "setup=topp09", "setup=temp07",
                                            "prompt_type=positive", "prompt_type=negative"};
    for (size_t k = 0; k < names.size(); ++k)
      coef_gap = std::max(coef_gap, std::fabs(r.coefficients.at(names[k]) - full.beta[k]));
    coef_gap = std::max(coef_gap, std::fabs(r.r_squared - full.r_squared));
    auto partial_p = [&](const std::vector<size_t>& drop) {
      std::vector<std::vector<double>> xr;
      for (const auto& row : x) {
        std::vector<double> kept;
        for (size_t c = 0; c < row.size(); ++c)
          if (std::find(drop.begin(), drop.end(), c) == drop.end()) kept.push_back(row[c]);
        xr.push_back(kept);
      }
      const double q = static_cast<double>(drop.size()), dof = 150.0 - 6.0;
      const double f = ((oracle::ols_normal_equations(xr, y).ssr - full.ssr) / q) / (full.ssr / dof);
      return oracle::f_upper_tail_integrated(f, q, dof);
    };
    p_gap = std::max(p_gap, std::fabs(r.p_values.at("setup") - partial_p({1, 2, 3})));
    p_gap = std::max(p_gap, std::fabs(r.p_values.at("prompt_type") - partial_p({4, 5})));
    p_gap = std::max(p_gap, std::fabs(r.p_values.at("overall") - partial_p({1, 2, 3, 4, 5})));
  }

  std::vector<RegressionObservation> planted_obs;
  for (const auto& s : setups)
    for (const auto& p : prompts) planted_obs.push_back({s, p, 0.5 + (s == "topk40" ? 0.1 : 0.0)});
  const auto planted_fit = regress_gender_proportion(planted_obs);
  const double planted_gap = std::max(std::fabs(planted_fit.coefficients.at("setup=topk40") - 0.1),
                                      std::fabs(planted_fit.r_squared - 1.0));

  const bool ok = pearson_gap <= 1e-12 && coef_gap <= 1e-9 && p_gap <= 1e-6 && planted_gap <= 1e-9;
  return {ok, "pearson " + fmt("%.2g", pearson_gap) + ", coef/R2 " + fmt("%.2g", coef_gap) + ", p " +
                  fmt("%.2g", p_gap) + ", planted " + fmt("%.2g", planted_gap)};
}

// --- 7 -----------------------------------------------------------------------

Outcome generation_matrix() {
  testing::StubServer server;
  testing::TempDir d;
  GenerationConfig cfg;
  cfg.endpoint = server.endpoint();
  cfg.token = "t";
  cfg.model = "stub";
  cfg.templates = {{"statement_a", PromptType::Neutral, PromptStyle::Statement, "I hired a/n [OCCUPATION] who is"},
                   {"question_a", PromptType::Positive, PromptStyle::Question, "Describe a good [OCCUPATION]."}};
  cfg.occupations = {"nurse", "engineer"};
  cfg.setups = all_decoding_setups();
  cfg.n_samples = 50;
  cfg.concurrency = 8;
  cfg.out = d / "gens.jsonl";
  const auto first = run_generation(cfg);
  std::set<std::string> keys;
  const auto recs = load_generation_records(cfg.out);
  for (const auto& r : recs)
    keys.insert(r.occupation + '|' + r.prompt_id + '|' + std::string(to_string(r.setup)) + '|' +
                std::to_string(r.sample_idx) + '|' + r.model);
  const int before = server.requests();
  cfg.resume = true;
  const auto second = run_generation(cfg);
  const int new_requests = server.requests() - before;
  const bool ok = recs.size() == 800 && keys.size() == 800 && first.completed == 800 && second.requests_issued == 0 &&
                  new_requests == 0 && second.already_present == 800;
  return {ok, std::to_string(recs.size()) + " records, " + std::to_string(keys.size()) + " unique keys, resume issued " +
                  std::to_string(new_requests) + " requests"};
}

// --- 8 -----------------------------------------------------------------------

struct Cli {
  std::string err;
  int operator()(std::vector<std::string> args) {
    args.insert(args.begin(), "biasline");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, e;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, e);
    err += e.str();
    return code;
  }
};

Outcome determinism() {
  testing::TempDir d;
  const std::string lex = (testing::data_dir() / "lexicon").string();
  Cli cli;
  if (cli({"synth", "--lexicon", lex, "--docs", "200", "--seed", "8", "--noise-docs", "20", "--out", (d / "syn").string()}) != 0)
    return {false, "synth failed: " + cli.err};
  // A fixed generation file: texts vary by record so every cell differs.
  {
    std::ofstream g(d / "gens.jsonl");
    std::mt19937_64 rng(8);
    const auto& b = testing::shipped_bundle();
    for (const auto& occ : b.occupations)
      for (auto setup : {SetupName::Baseline, SetupName::TopK40, SetupName::TopP09})
        for (auto [pid, type] : {std::pair{"statement_neutral_01", PromptType::Neutral},
                                 std::pair{"statement_positive_01", PromptType::Positive},
                                 std::pair{"statement_negative_01", PromptType::Negative}})
          for (uint32_t i = 0; i < 6; ++i) {
            const char* texts[] = {"She is skilled.", "He is skilled.", "They are skilled.", "He and she work."};
            g << to_jsonl({occ, pid, type, setup, i, "fixture", texts[rng() % 4]}) << '\n';
          }
  }
  std::vector<std::string> manifests;
  for (const char* threads : {"1", "4"}) {
    const int rc = cli({"scan", "--corpus", (d / "syn/corpus.jsonl").string(), "--lexicon", lex, "--cap", "150",
                        "--threads", threads, "--out", (d / "data.json").string()}) |
                   cli({"classify", "--gens", (d / "gens.jsonl").string(), "--lexicon", lex, "--out",
                        (d / "gen.json").string()}) |
                   cli({"analyze", "--data", (d / "data.json").string(), "--gens", (d / "gen.json").string(),
                        "--lexicon", lex, "--out", (d / "analysis").string()}) |
                   cli({"report", "--from", (d / "analysis/report.json").string(), "--out", (d / "report").string()});
    if (rc != 0) return {false, "pipeline failed: " + cli.err};
    manifests.push_back(testing::read_text(d / "analysis/manifest.json") + testing::read_text(d / "report/manifest.json"));
    fs::remove_all(d / "analysis");
    fs::remove_all(d / "report");
  }
  const auto both = nlohmann::json::parse(manifests[0].substr(0, manifests[0].find("\n}") + 2));
  const size_t files = both.at("files").size();
  return {manifests[0] == manifests[1] && files >= 8,
          std::to_string(files) + " files per report directory, manifests " +
              (manifests[0] == manifests[1] ? "identical" : "differ") + " across 1 and 4 threads"};
}

// --- 9 -----------------------------------------------------------------------

Outcome throughput() {
  auto& pc = planted();
  const auto& b = testing::shipped_bundle();
  const double mb = static_cast<double>(fs::file_size(pc.out.corpus)) / 1e6;
  auto time_scan = [&](unsigned threads) {
    CorpusReader reader(pc.out.corpus, CorpusFormat::Jsonl);
    const auto t0 = std::chrono::steady_clock::now();
    scan_corpus(reader, b, ScanOptions{}, SampleSpec{}, threads);
    return seconds_since(t0);
  };
  const double t1 = time_scan(1);
  const double t4 = time_scan(4);
  const double rate = mb / t1;
  const size_t terms = b.occupations.size() + b.female_tokens.size() + b.male_tokens.size();
  return {rate >= 20.0, fmt("%.1f", rate) + " MB/s single-thread over " + fmt("%.0f", mb) + " MB, " +
                            std::to_string(terms) + " terms; 4-thread speedup " + fmt("%.2f", t1 / t4) +
                            "x (soft target 2.5x, " + std::to_string(std::thread::hardware_concurrency()) +
                            " hardware threads, not gated)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"homemaker TVD/STA spot check", homemaker_spot_check},
      {"planted-bias recovery", planted_recovery},
      {"matcher oracle equivalence", matcher_oracle_sweep},
      {"exclusivity soundness", exclusivity},
      {"amplification identity and anti-symmetry", amplification_symmetry},
      {"statistics oracles", statistics_oracles},
      {"generation harness matrix", generation_matrix},
      {"determinism", determinism},
      {"throughput", throughput},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
