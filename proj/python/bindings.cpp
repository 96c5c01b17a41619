#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "biasline/classify.hpp"
#include "biasline/cli.hpp"
#include "biasline/error.hpp"
#include "biasline/genharness.hpp"
#include "biasline/lexicon.hpp"
#include "biasline/metrics.hpp"
#include "biasline/report.hpp"
#include "biasline/scan.hpp"
#include "biasline/synth.hpp"
#include "biasline/textscan.hpp"

namespace py = pybind11;
using namespace biasline;

namespace {

// JSON crosses the boundary as text; the stdlib parser builds the dicts.
py::object to_py(const nlohmann::ordered_json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::ordered_json from_py(const py::object& o) {
  return nlohmann::ordered_json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

CountMode mode_of(const std::string& s) { return parse_count_mode(s); }

py::dict counts_dict(const OccupationCounts& c) {
  py::dict d;
  d["female_tokens"] = c.female_tokens;
  d["male_tokens"] = c.male_tokens;
  d["female_units"] = c.female_units;
  d["male_units"] = c.male_units;
  d["units_scanned"] = c.units_scanned;
  return d;
}

}  // namespace

PYBIND11_MODULE(_biasline, m) {
  m.doc() = "Gender-occupation co-occurrence counting and bias metrics";

  // Translators run newest first, so the base class is registered first.
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<AuthError>(m, "AuthError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::class_<LexiconBundle>(m, "Lexicon")
      .def_readonly("female_tokens", &LexiconBundle::female_tokens)
      .def_readonly("male_tokens", &LexiconBundle::male_tokens)
      .def_readonly("occupations", &LexiconBundle::occupations)
      .def_readonly("sectors", &LexiconBundle::sectors)
      .def_readonly("reference", &LexiconBundle::reference)
      .def_readonly("warnings", &LexiconBundle::warnings)
      .def("digest", &LexiconBundle::digest)
      .def("__repr__", [](const LexiconBundle& b) {
        return "<Lexicon " + std::to_string(b.occupations.size()) + " occupations, " +
               std::to_string(b.female_tokens.size() + b.male_tokens.size()) + " gender tokens>";
      });

  m.def("load_lexicon", [](const std::filesystem::path& dir) { return load_lexicon_dir(dir); }, py::arg("dir"));
  m.def(
      "make_lexicon",
      [](std::vector<std::string> female, std::vector<std::string> male, std::vector<std::string> occupations,
         std::map<std::string, std::string> sectors) {
        LexiconBundle b;
        b.female_tokens.insert(female.begin(), female.end());
        b.male_tokens.insert(male.begin(), male.end());
        b.occupations = std::move(occupations);
        b.sectors = std::move(sectors);
        return b;
      },
      py::arg("female"), py::arg("male"), py::arg("occupations"), py::arg("sectors") = std::map<std::string, std::string>{});

  m.def(
      "find_terms",
      [](std::vector<std::string> terms, const std::string& text) {
        const TermMatcher matcher(terms);
        std::vector<std::tuple<size_t, size_t, std::string>> out;
        for (const auto& h : find_terms(matcher, text)) out.emplace_back(h.start, h.end, matcher.terms()[h.term_id]);
        return out;
      },
      py::arg("terms"), py::arg("text"), "Whole-word, case-folded, leftmost-longest hits as (start, end, term).");

  m.def(
      "segment_sentences",
      [](const std::string& text) {
        std::vector<std::pair<size_t, size_t>> out;
        for (const auto& s : segment_sentences(text)) out.emplace_back(s.start, s.end);
        return out;
      },
      py::arg("text"));

  m.def(
      "classify_unit",
      [](const std::string& text, const LexiconBundle& b) {
        return std::string(to_string(classify_unit(text, b, make_gender_matcher(b))));
      },
      py::arg("text"), py::arg("lexicon"));

  m.def(
      "count_documents",
      [](const std::vector<std::string>& texts, const LexiconBundle& b, const std::string& mode) {
        std::vector<Document> docs;
        for (size_t i = 0; i < texts.size(); ++i) docs.push_back({std::to_string(i), texts[i], {}});
        const auto t = count_documents(docs, b, ScanOptions{mode_of(mode)});
        py::dict out;
        for (size_t i = 0; i < t.occupations.size(); ++i) out[py::str(t.occupations[i])] = counts_dict(t.counts[i]);
        return out;
      },
      py::arg("texts"), py::arg("lexicon"), py::arg("mode") = "sentence");

  m.def(
      "scan",
      [](const std::filesystem::path& corpus, const LexiconBundle& b, const std::string& mode, uint64_t cap,
         uint64_t seed, unsigned threads, const std::string& format) {
        CorpusReader reader(corpus, parse_corpus_format(format));
        ScanResult r;
        {
          py::gil_scoped_release release;
          r = scan_corpus(reader, b, ScanOptions{mode_of(mode)}, SampleSpec{cap, seed}, threads);
        }
        return to_py(r.table.to_json());
      },
      py::arg("corpus"), py::arg("lexicon"), py::arg("mode") = "sentence", py::arg("cap") = 100000,
      py::arg("seed") = 42, py::arg("threads") = 1, py::arg("format") = "jsonl",
      "Counts table as a dict in the same layout as the CLI's counts JSON.");

  m.def(
      "tvd",
      [](double p_female, double q_female) {
        return tvd(GenderDistribution::from_female(p_female), GenderDistribution::from_female(q_female));
      },
      py::arg("p_female"), py::arg("q_female") = 0.5);

  m.def(
      "sta",
      [](const py::object& counts, const LexiconBundle& b, std::optional<std::map<std::string, double>> reference,
         const std::string& weighting) {
        const auto t = CountsTable::from_json(from_py(counts));
        const auto r = sta(t, ReferenceSpec{std::move(reference)}, b, parse_weighting(weighting));
        py::dict out;
        out["overall"] = r.overall;
        out["per_occupation"] = r.per_occupation;
        out["sector_means"] = r.sector_means;
        out["excluded_no_counts"] = r.excluded_no_counts;
        out["excluded_no_reference"] = r.excluded_no_reference;
        return out;
      },
      py::arg("counts"), py::arg("lexicon"), py::arg("reference") = py::none(), py::arg("weighting") = "token");

  m.def(
      "amplification",
      [](const std::map<std::string, double>& generated, const std::map<std::string, double>& training) {
        const auto r = amplification(generated, training);
        py::dict out;
        out["per_occupation"] = r.per_occupation;
        out["mean"] = r.mean;
        out["mean_pp"] = r.mean_pp;
        return out;
      },
      py::arg("generated"), py::arg("training"));

  m.def(
      "pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); },
      py::arg("x"), py::arg("y"));

  m.def(
      "regress",
      [](const std::vector<std::tuple<std::string, std::string, double>>& rows) {
        std::vector<RegressionObservation> obs;
        for (const auto& [s, p, v] : rows) obs.push_back({s, p, v});
        const auto r = regress_gender_proportion(obs);
        py::dict out;
        out["coefficients"] = r.coefficients;
        out["r_squared"] = r.r_squared;
        out["p_values"] = r.p_values;
        out["f_statistics"] = r.f_statistics;
        out["n_observations"] = r.n_observations;
        return out;
      },
      py::arg("observations"), "Rows of (setup, prompt_type, proportion_female).");

  m.def(
      "render_prompt",
      [](const std::string& tmpl, const std::string& occupation) {
        return render_prompt(PromptTemplate{"t", PromptType::Neutral, PromptStyle::Statement, tmpl}, occupation);
      },
      py::arg("template"), py::arg("occupation"));

  m.def(
      "synth",
      [](const LexiconBundle& b, const std::filesystem::path& out, uint64_t docs, uint64_t seed,
         uint64_t noise_docs) {
        auto spec = grid_plant(b, docs, seed);
        spec.noise_docs = noise_docs;
        const auto res = make_synthetic_corpus(spec, b, out);
        py::list rows;
        for (const auto& r : res.rows) {
          py::dict d;
          d["occupation"] = r.occupation;
          d["p_planted"] = r.p_planted;
          d["p_realized"] = r.p_realized;
          d["docs"] = r.docs;
          d["female_docs"] = r.female_docs;
          rows.append(d);
        }
        return rows;
      },
      py::arg("lexicon"), py::arg("out"), py::arg("docs"), py::arg("seed") = 42, py::arg("noise_docs") = 0,
      "Writes corpus.jsonl and ground_truth.csv; returns the ground-truth rows.");

  m.def(
      "analyze",
      [](const std::filesystem::path& data_counts, const std::filesystem::path& gen_counts, const LexiconBundle& b,
         const std::filesystem::path& out) {
        const auto data = CountsTable::from_json(load_json(data_counts));
        const auto gen = PartitionedCounts::from_json(load_json(gen_counts));
        const auto report = build_report(data, gen, b);
        emit_outputs(report, out);
        return to_py(report.to_json());
      },
      py::arg("data_counts"), py::arg("gen_counts"), py::arg("lexicon"), py::arg("out"),
      "Builds the report, writes the report directory and returns report.json as a dict.");

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "biasline");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return std::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a biasline subcommand in-process; returns (exit_code, stdout, stderr).");
}
