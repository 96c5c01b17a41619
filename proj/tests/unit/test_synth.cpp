#include <doctest.h>

#include <cmath>

#include "biasline/corpus.hpp"
#include "biasline/error.hpp"
#include "biasline/metrics.hpp"
#include "biasline/scan.hpp"
#include "biasline/synth.hpp"
#include "test_support.hpp"

using namespace biasline;
using testing::TempDir;

namespace {

CountsTable scan_file(const std::filesystem::path& p, const LexiconBundle& b) {
  CorpusReader r(p, CorpusFormat::Jsonl);
  return scan_corpus(r, b, ScanOptions{}, SampleSpec{}, 1).table;
}

}  // namespace

TEST_CASE("degenerate plants") {
  TempDir d;
  const auto& b = testing::shipped_bundle();
  PlantSpec spec;
  spec.occupations = {{"nurse", 1.0, 50}, {"plumber", 0.0, 50}};
  const auto out = make_synthetic_corpus(spec, b, d.path());
  CHECK(out.rows[0].p_realized == 1.0);
  CHECK(out.rows[1].p_realized == 0.0);
  const auto t = scan_file(out.corpus, b);
  CHECK(t.find("nurse")->female_units == 50);
  CHECK(t.find("plumber")->male_units == 50);
}

TEST_CASE("binomial plant: exact recovery and within 3 sd of nominal") {
  TempDir d;
  const auto& b = testing::shipped_bundle();
  PlantSpec spec;
  spec.seed = 2024;
  spec.occupations = {{"engineer", 0.8, 10000}};
  const auto out = make_synthetic_corpus(spec, b, d.path());
  const auto truth = load_ground_truth(out.ground_truth);
  REQUIRE(truth.size() == 1);
  const auto t = scan_file(out.corpus, b);
  const auto p = observed_probability(*t.find("engineer"), Weighting::Unit);
  REQUIRE(p);
  CHECK(p->p_female == truth[0].p_realized);
  CHECK(observed_probability(*t.find("engineer"), Weighting::Token)->p_female == truth[0].p_realized);
  CHECK(std::fabs(truth[0].p_realized - 0.8) <= 0.012);
  CHECK(t.find("engineer")->units_scanned == 10000);
}

TEST_CASE("every document is one sentence with one gender token") {
  TempDir d;
  const auto& b = testing::shipped_bundle();
  const auto spec = grid_plant(b, 20, 5);
  const auto out = make_synthetic_corpus(spec, b, d.path());
  CorpusReader r(out.corpus, CorpusFormat::Jsonl);
  Document doc;
  const auto gm = make_gender_matcher(b);
  size_t n = 0;
  while (r.next(doc)) {
    ++n;
    CHECK(segment_sentences(doc.text).size() == 1);
    CHECK(find_terms(gm, doc.text).size() == 1);
  }
  CHECK(n == 20 * b.occupations.size());
  // Unit counts recover the truth for every occupation at once.
  const auto t = scan_file(out.corpus, b);
  for (const auto& row : out.rows) {
    const auto* c = t.find(row.occupation);
    CHECK(c->female_units == row.female_docs);
    CHECK(c->female_units + c->male_units == row.docs);
  }
}

TEST_CASE("determinism: same spec and seed give identical bytes") {
  TempDir a, c;
  const auto& b = testing::shipped_bundle();
  auto spec = grid_plant(b, 5, 11);
  spec.noise_docs = 2;
  make_synthetic_corpus(spec, b, a.path());
  make_synthetic_corpus(spec, b, c.path());
  CHECK(testing::read_text(a / "corpus.jsonl") == testing::read_text(c / "corpus.jsonl"));
  CHECK(testing::read_text(a / "ground_truth.csv") == testing::read_text(c / "ground_truth.csv"));
  spec.seed = 12;
  TempDir e;
  make_synthetic_corpus(spec, b, e.path());
  CHECK(testing::read_text(a / "corpus.jsonl") != testing::read_text(e / "corpus.jsonl"));
}

TEST_CASE("noise documents never change the realized proportions") {
  TempDir d;
  const auto& b = testing::shipped_bundle();
  PlantSpec spec;
  spec.occupations = {{"nurse", 0.7, 300}, {"pilot", 0.2, 300}};
  spec.noise_docs = 100;
  const auto out = make_synthetic_corpus(spec, b, d.path());
  const auto t = scan_file(out.corpus, b);
  for (const auto& row : out.rows) {
    const auto* c = t.find(row.occupation);
    CHECK(c->units_scanned == 400);
    CHECK(observed_probability(*c, Weighting::Unit)->p_female == row.p_realized);
  }
}

TEST_CASE("plant validation") {
  const auto& b = testing::shipped_bundle();
  PlantSpec spec;
  spec.occupations = {{"nurse", 0.5, 10}};
  spec.filler = {"river", "his"};
  try {
    validate_plant(spec, b);
    FAIL("expected collision");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("'his'") != std::string::npos);
  }
  spec.filler = {"driver"};  // word of an occupation term
  CHECK_THROWS_AS(validate_plant(spec, b), ConfigError);
  spec.filler = {"river"};
  CHECK_NOTHROW(validate_plant(spec, b));
  spec.occupations = {{"xenolinguist", 0.5, 10}};
  CHECK_THROWS_AS(validate_plant(spec, b), ConfigError);
  spec.occupations = {{"nurse", 1.5, 10}};
  CHECK_THROWS_AS(validate_plant(spec, b), ConfigError);
  spec.occupations = {{"nurse", 0.5, 0}};
  CHECK_THROWS_AS(validate_plant(spec, b), ConfigError);
  PlantSpec defaults;
  defaults.occupations = {{"nurse", 0.5, 1}};
  CHECK_NOTHROW(validate_plant(defaults, b));
}

TEST_CASE("plant spec JSON") {
  TempDir d;
  testing::write_text(d / "plant.json",
                      R"({"seed": 9, "filler": ["river", "stone"], "noise_docs": 1,
                          "occupations": [{"term": "nurse", "p_female": 0.25, "docs": 8}]})");
  const auto spec = PlantSpec::from_json_file(d / "plant.json");
  CHECK(spec.seed == 9);
  CHECK(spec.noise_docs == 1);
  CHECK(spec.filler.size() == 2);
  CHECK(spec.occupations.at(0).p_female == 0.25);
  testing::write_text(d / "bad.json", R"({"occupations": [{"term": "nurse"}]})");
  CHECK_THROWS_AS(PlantSpec::from_json_file(d / "bad.json"), ConfigError);
}

TEST_CASE("grid plant draws from the 0.05 grid") {
  const auto& b = testing::shipped_bundle();
  const auto spec = grid_plant(b, 3, 1);
  CHECK(spec.occupations.size() == b.occupations.size());
  for (const auto& o : spec.occupations) {
    const double k = o.p_female * 20;
    CHECK(k == std::round(k));
  }
  CHECK(grid_plant(b, 3, 1).occupations.at(7).p_female == spec.occupations.at(7).p_female);
}
