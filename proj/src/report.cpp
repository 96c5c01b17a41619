#include "biasline/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "biasline/digest.hpp"
#include "biasline/error.hpp"
#include "biasline/strings.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace biasline {

namespace {

// --- numbers --------------------------------------------------------------

ojson encode(std::optional<double> v, bool round) {
  if (!v || std::isnan(*v)) return nullptr;
  if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
  return round ? round_sig(*v, 6) : *v;
}

std::optional<double> decode(const ojson& v) {
  if (v.is_null()) return std::nullopt;
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ConfigError("report: bad number '" + s + "'");
  }
  return v.get<double>();
}

double decode_required(const ojson& v) {
  auto d = decode(v);
  if (!d) throw ConfigError("report: missing number");
  return *d;
}

void put(ojson& obj, ojson& raw, const char* key, std::optional<double> v) {
  obj[key] = encode(v, true);
  raw[key] = encode(v, false);
}

std::string csv_num(std::optional<double> v) {
  if (!v || std::isnan(*v)) return "";
  if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
  return format_sig(*v, 6);
}

std::optional<double> mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

template <class Map>
std::optional<double> lookup(const Map& m, const std::string& k) {
  auto it = m.find(k);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> strings_of(const ojson& j) { return j.get<std::vector<std::string>>(); }

// --- regression serialization ---------------------------------------------

template <class Map>
std::vector<std::string> ordered_keys(const Map& m, std::vector<std::string> preferred) {
  std::vector<std::string> out;
  for (auto& k : preferred)
    if (m.count(k)) out.push_back(k);
  for (const auto& [k, v] : m)
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  return out;
}

std::vector<std::string> coefficient_order(const RegressionResult& r) {
  std::vector<std::string> pref{"intercept"};
  for (size_t i = 1; i < r.setup_levels.size(); ++i) pref.push_back("setup=" + r.setup_levels[i]);
  for (size_t i = 1; i < r.prompt_type_levels.size(); ++i) pref.push_back("prompt_type=" + r.prompt_type_levels[i]);
  return ordered_keys(r.coefficients, pref);
}

ojson regression_to_json(const RegressionResult& r) {
  ojson j, raw;
  j["n_observations"] = r.n_observations;
  j["n_parameters"] = r.n_parameters;
  j["setup_levels"] = r.setup_levels;
  j["prompt_type_levels"] = r.prompt_type_levels;
  put(j, raw, "r_squared", r.r_squared);
  put(j, raw, "ssr", r.ssr);
  put(j, raw, "sst", r.sst);
  auto section = [&](const char* name, const std::map<std::string, double>& m, std::vector<std::string> keys) {
    ojson a = ojson::object(), b = ojson::object();
    for (const auto& k : keys) put(a, b, k.c_str(), m.at(k));
    j[name] = std::move(a);
    raw[name] = std::move(b);
  };
  section("coefficients", r.coefficients, coefficient_order(r));
  section("p_values", r.p_values, ordered_keys(r.p_values, {"setup", "prompt_type", "overall"}));
  section("f_statistics", r.f_statistics, ordered_keys(r.f_statistics, {"setup", "prompt_type", "overall"}));
  j["raw"] = std::move(raw);
  return j;
}

RegressionResult regression_from_json(const ojson& j) {
  RegressionResult r;
  const ojson& raw = j.at("raw");
  r.n_observations = j.at("n_observations").get<size_t>();
  r.n_parameters = j.at("n_parameters").get<size_t>();
  r.setup_levels = strings_of(j.at("setup_levels"));
  r.prompt_type_levels = strings_of(j.at("prompt_type_levels"));
  r.r_squared = decode_required(raw.at("r_squared"));
  r.ssr = decode_required(raw.at("ssr"));
  r.sst = decode_required(raw.at("sst"));
  for (auto [name, dst] : {std::pair{"coefficients", &r.coefficients}, std::pair{"p_values", &r.p_values},
                           std::pair{"f_statistics", &r.f_statistics}})
    for (auto it = raw.at(name).begin(); it != raw.at(name).end(); ++it) (*dst)[it.key()] = decode_required(*it);
  return r;
}

// --- files ----------------------------------------------------------------

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s == "-0.00" || s == "-0.0" || s == "-0") s.erase(0, 1);
  return s;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string line;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += csv_escape(fields[i]);
  }
  line += '\n';
  return line;
}

}  // namespace

// --- construction ---------------------------------------------------------

AnalysisReport build_report(const CountsTable& data, const PartitionedCounts& gen, const LexiconBundle& bundle,
                            const ReportOptions& options) {
  const std::string digest = bundle.digest();
  if (data.meta.lexicon_digest != digest)
    throw ConfigError("data counts use lexicon " + data.meta.lexicon_digest + ", expected " + digest);
  if (gen.meta.lexicon_digest != digest)
    throw ConfigError("generation counts use lexicon " + gen.meta.lexicon_digest + ", expected " + digest);
  if (gen.cells.empty()) throw ConfigError("generation counts contain no (prompt, setup) cells");

  const Weighting w = options.weighting;
  const ReferenceSpec& ref = options.reference;
  const CountsTable pooled = gen.pooled();
  const auto data_p = proportion_series(data, w);
  const auto gen_p = proportion_series(pooled, w);

  AmplificationResult amp;
  StaResult sd, sg;
  try {
    amp = amplification(gen_p, data_p);
    sd = sta(data, ref, bundle, w);
    sg = sta(pooled, ref, bundle, w);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("cannot compare data and generations: ") + e.what());
  }

  AnalysisReport rep;
  rep.meta["lexicon_digest"] = digest;
  rep.meta["weighting"] = to_string(w);
  if (ref.is_uniform()) {
    rep.meta["reference"] = "uniform";
  } else {
    rep.meta["reference"] = "per-occupation";
    ojson values = ojson::object();
    for (const auto& [k, v] : *ref.per_occupation) values[k] = v;
    rep.meta["reference_values"] = std::move(values);
  }
  rep.meta["data"] = data.to_json().at("meta");
  rep.meta["generated"] = gen.to_json().at("meta");
  rep.meta["decisions"] = {
      "units are labelled female or male only when their gender tokens are all of one gender",
      "generated proportions pool every (prompt, setup) cell",
      "amplification is generated minus data female proportion over shared occupations",
      "correlation cells pair data and cell proportions over shared occupations",
      "regression observations are unit proportions per (occupation, prompt, setup) cell"};
  rep.meta["run"] = options.run;

  rep.summary.sta_data = sd.overall;
  rep.summary.sta_generated = sg.overall;
  rep.summary.mean_amplification = amp.mean;
  rep.summary.mean_amplification_pp = amp.mean_pp;
  rep.summary.n_shared = amp.per_occupation.size();

  for (const auto& occ : bundle.occupations) {
    auto pd = lookup(data_p, occ);
    auto pg = lookup(gen_p, occ);
    if (!pd && !pg) continue;
    OccupationRow row;
    row.occupation = occ;
    if (auto s = bundle.sectors.find(occ); s != bundle.sectors.end()) row.sector = s->second;
    row.p_female_data = pd;
    row.p_female_generated = pg;
    row.tvd_data = lookup(sd.per_occupation, occ);
    row.tvd_generated = lookup(sg.per_occupation, occ);
    row.amplification = lookup(amp.per_occupation, occ);
    rep.occupations.push_back(std::move(row));
  }

  std::map<std::string, std::vector<double>> sector_amp;
  for (const auto& [occ, a] : amp.per_occupation)
    if (auto s = bundle.sectors.find(occ); s != bundle.sectors.end()) sector_amp[s->second].push_back(a);
  std::map<std::string, SectorRow> sectors;
  for (const auto& [s, m] : sd.sector_means) {
    sectors[s].mean_tvd_data = m;
    sectors[s].n_data = sd.sector_sizes.at(s);
  }
  for (const auto& [s, m] : sg.sector_means) {
    sectors[s].mean_tvd_generated = m;
    sectors[s].n_generated = sg.sector_sizes.at(s);
  }
  for (const auto& [s, xs] : sector_amp) {
    auto& row = sectors[s];
    row.n_shared = xs.size();
    row.mean_amplification = mean_of(xs);
    row.mean_amplification_pp = *row.mean_amplification * 100.0;
  }
  for (auto& [s, row] : sectors) {
    row.sector = s;
    rep.sectors.push_back(std::move(row));
  }

  std::vector<RegressionObservation> obs;
  for (const auto& [key, table] : gen.cells) {
    CorrelationCell cell{key.prompt_id, std::string(to_string(key.prompt_type)), std::string(to_string(key.setup)),
                         0, std::nullopt};
    const auto cell_p = proportion_series(table, w);
    std::vector<double> xs, ys;
    for (const auto& [occ, p] : cell_p)
      if (auto d = lookup(data_p, occ)) {
        xs.push_back(*d);
        ys.push_back(p);
      }
    cell.n = xs.size();
    try {
      cell.rho = pearson(xs, ys);
    } catch (const Error&) {
    }
    rep.correlation.push_back(std::move(cell));

    for (size_t i = 0; i < table.occupations.size(); ++i)
      if (auto u = observed_probability(table.counts[i], Weighting::Unit))
        obs.push_back({std::string(to_string(key.setup)), std::string(to_string(key.prompt_type)), u->p_female});
  }
  try {
    rep.regression = regress_gender_proportion(obs);
  } catch (const Error& e) {
    rep.regression_error = e.what();
  }

  rep.exclusions.data_no_counts = sd.excluded_no_counts;
  rep.exclusions.generated_no_counts = sg.excluded_no_counts;
  std::set<std::string> noref(sd.excluded_no_reference.begin(), sd.excluded_no_reference.end());
  noref.insert(sg.excluded_no_reference.begin(), sg.excluded_no_reference.end());
  rep.exclusions.no_reference.assign(noref.begin(), noref.end());
  rep.exclusions.only_data = amp.only_training;
  rep.exclusions.only_generated = amp.only_generated;
  rep.exclusions.unmapped_sector = bundle.unmapped_occupations();
  return rep;
}

// --- JSON -----------------------------------------------------------------

ojson AnalysisReport::to_json() const {
  ojson j;
  j["meta"] = meta;

  ojson s, sraw;
  put(s, sraw, "sta_data", summary.sta_data);
  put(s, sraw, "sta_generated", summary.sta_generated);
  put(s, sraw, "mean_amplification", summary.mean_amplification);
  put(s, sraw, "mean_amplification_pp", summary.mean_amplification_pp);
  s["n_shared"] = summary.n_shared;
  s["raw"] = std::move(sraw);
  j["summary"] = std::move(s);

  ojson occs = ojson::array();
  for (const auto& r : occupations) {
    ojson o, raw;
    o["occupation"] = r.occupation;
    o["sector"] = r.sector;
    put(o, raw, "p_female_data", r.p_female_data);
    put(o, raw, "p_female_generated", r.p_female_generated);
    put(o, raw, "tvd_data", r.tvd_data);
    put(o, raw, "tvd_generated", r.tvd_generated);
    put(o, raw, "amplification", r.amplification);
    o["raw"] = std::move(raw);
    occs.push_back(std::move(o));
  }
  j["occupations"] = std::move(occs);

  ojson secs = ojson::array();
  for (const auto& r : sectors) {
    ojson o, raw;
    o["sector"] = r.sector;
    o["n_data"] = r.n_data;
    o["n_generated"] = r.n_generated;
    o["n_shared"] = r.n_shared;
    put(o, raw, "mean_tvd_data", r.mean_tvd_data);
    put(o, raw, "mean_tvd_generated", r.mean_tvd_generated);
    put(o, raw, "mean_amplification", r.mean_amplification);
    put(o, raw, "mean_amplification_pp", r.mean_amplification_pp);
    o["raw"] = std::move(raw);
    secs.push_back(std::move(o));
  }
  j["sectors"] = std::move(secs);

  ojson cells = ojson::array();
  for (const auto& c : correlation) {
    ojson o, raw;
    o["prompt_id"] = c.prompt_id;
    o["prompt_type"] = c.prompt_type;
    o["setup"] = c.setup;
    o["n"] = c.n;
    put(o, raw, "rho", c.rho);
    o["raw"] = std::move(raw);
    cells.push_back(std::move(o));
  }
  j["correlation"] = std::move(cells);

  j["regression"] = regression ? regression_to_json(*regression) : ojson(nullptr);
  j["regression_error"] = regression_error;

  ojson ex;
  ex["data_no_counts"] = exclusions.data_no_counts;
  ex["generated_no_counts"] = exclusions.generated_no_counts;
  ex["no_reference"] = exclusions.no_reference;
  ex["only_data"] = exclusions.only_data;
  ex["only_generated"] = exclusions.only_generated;
  ex["unmapped_sector"] = exclusions.unmapped_sector;
  j["exclusions"] = std::move(ex);
  return j;
}

AnalysisReport AnalysisReport::from_json(const ojson& j) {
  AnalysisReport r;
  try {
    r.meta = j.at("meta");
    const ojson& s = j.at("summary");
    const ojson& sraw = s.at("raw");
    r.summary.sta_data = decode_required(sraw.at("sta_data"));
    r.summary.sta_generated = decode(sraw.at("sta_generated"));
    r.summary.mean_amplification = decode_required(sraw.at("mean_amplification"));
    r.summary.mean_amplification_pp = decode_required(sraw.at("mean_amplification_pp"));
    r.summary.n_shared = s.at("n_shared").get<size_t>();

    for (const auto& o : j.at("occupations")) {
      const ojson& raw = o.at("raw");
      r.occupations.push_back({o.at("occupation").get<std::string>(), o.at("sector").get<std::string>(),
                               decode(raw.at("p_female_data")), decode(raw.at("p_female_generated")),
                               decode(raw.at("tvd_data")), decode(raw.at("tvd_generated")),
                               decode(raw.at("amplification"))});
    }
    for (const auto& o : j.at("sectors")) {
      const ojson& raw = o.at("raw");
      r.sectors.push_back({o.at("sector").get<std::string>(), o.at("n_data").get<size_t>(),
                           o.at("n_generated").get<size_t>(), o.at("n_shared").get<size_t>(),
                           decode(raw.at("mean_tvd_data")), decode(raw.at("mean_tvd_generated")),
                           decode(raw.at("mean_amplification")), decode(raw.at("mean_amplification_pp"))});
    }
    for (const auto& o : j.at("correlation")) {
      r.correlation.push_back({o.at("prompt_id").get<std::string>(), o.at("prompt_type").get<std::string>(),
                               o.at("setup").get<std::string>(), o.at("n").get<size_t>(),
                               decode(o.at("raw").at("rho"))});
    }
    if (!j.at("regression").is_null()) r.regression = regression_from_json(j.at("regression"));
    r.regression_error = j.at("regression_error").get<std::string>();
    const ojson& ex = j.at("exclusions");
    r.exclusions.data_no_counts = strings_of(ex.at("data_no_counts"));
    r.exclusions.generated_no_counts = strings_of(ex.at("generated_no_counts"));
    r.exclusions.no_reference = strings_of(ex.at("no_reference"));
    r.exclusions.only_data = strings_of(ex.at("only_data"));
    r.exclusions.only_generated = strings_of(ex.at("only_generated"));
    r.exclusions.unmapped_sector = strings_of(ex.at("unmapped_sector"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return r;
}

AnalysisReport load_report(const fs::path& path) { return AnalysisReport::from_json(load_json(path)); }

// --- figures --------------------------------------------------------------

std::string diverging_color(double rho) {
  struct Rgb {
    double r, g, b;
  };
  static constexpr Rgb lo{33, 102, 172}, mid{247, 247, 247}, hi{178, 24, 43};
  if (std::isnan(rho)) return "#cccccc";
  const double v = std::clamp(rho, -1.0, 1.0);
  const Rgb& a = v < 0 ? lo : mid;
  const Rgb& b = v < 0 ? mid : hi;
  const double t = v < 0 ? v + 1.0 : v;
  auto channel = [t](double x, double y) { return static_cast<int>(std::lround(x + (y - x) * t)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", channel(a.r, b.r), channel(a.g, b.g), channel(a.b, b.b));
  return buf;
}

std::string render_amplification_svg(const AnalysisReport& report) {
  constexpr double m = 60, size = 400;
  auto X = [&](double p) { return fixed(m + p * size); };
  auto Y = [&](double p) { return fixed(m + (1.0 - p) * size); };
  std::ostringstream o;
  o << R"(<svg xmlns="http://www.w3.org/2000/svg" width="520" height="520" viewBox="0 0 520 520" font-family="sans-serif" font-size="12">)"
    << "\n";
  o << R"(<rect x="0" y="0" width="520" height="520" fill="#ffffff"/>)" << "\n";
  o << "<polygon class=\"region-amplification\" points=\"" << X(0) << ',' << Y(0) << ' ' << X(0) << ',' << Y(1)
    << ' ' << X(1) << ',' << Y(1) << "\" fill=\"#f4a582\" fill-opacity=\"0.35\"/>\n";
  o << "<polygon class=\"region-deamplification\" points=\"" << X(0) << ',' << Y(0) << ' ' << X(1) << ','
    << Y(0) << ' ' << X(1) << ',' << Y(1) << "\" fill=\"#92c5de\" fill-opacity=\"0.35\"/>\n";
  o << "<line class=\"diagonal\" x1=\"" << X(0) << "\" y1=\"" << Y(0) << "\" x2=\"" << X(1) << "\" y2=\"" << Y(1)
    << "\" stroke=\"#555555\" stroke-dasharray=\"4 3\"/>\n";
  o << "<rect x=\"" << X(0) << "\" y=\"" << Y(1) << "\" width=\"" << fixed(size) << "\" height=\"" << fixed(size)
    << "\" fill=\"none\" stroke=\"#000000\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double p = i / 4.0;
    o << "<text x=\"" << X(p) << "\" y=\"" << fixed(m + size + 18) << "\" text-anchor=\"middle\">" << fixed(p)
      << "</text>\n";
    o << "<text x=\"" << fixed(m - 8) << "\" y=\"" << fixed(m + (1 - p) * size + 4) << "\" text-anchor=\"end\">"
      << fixed(p) << "</text>\n";
  }
  o << "<text x=\"260\" y=\"505\" text-anchor=\"middle\">female proportion in data</text>\n";
  o << "<text x=\"18\" y=\"260\" text-anchor=\"middle\" transform=\"rotate(-90 18 260)\">female proportion in "
       "generations</text>\n";
  o << "<text x=\"" << fixed(m + 10) << "\" y=\"" << fixed(m + 20) << "\">amplification</text>\n";
  o << "<text x=\"" << fixed(m + size - 10) << "\" y=\"" << fixed(m + size - 10)
    << "\" text-anchor=\"end\">de-amplification</text>\n";
  for (const auto& r : report.occupations) {
    if (!r.p_female_data || !r.p_female_generated) continue;
    o << "<circle class=\"point\" cx=\"" << X(*r.p_female_data) << "\" cy=\"" << Y(*r.p_female_generated)
      << "\" r=\"3.5\" fill=\"#333333\" fill-opacity=\"0.8\"><title>" << xml_escape(r.occupation) << ": "
      << format_sig(*r.p_female_data) << " -> " << format_sig(*r.p_female_generated) << "</title></circle>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string render_correlation_svg(const AnalysisReport& report) {
  std::vector<std::string> prompts, setups_raw;
  std::map<std::pair<std::string, std::string>, const CorrelationCell*> grid;
  for (const auto& c : report.correlation) {
    if (std::find(prompts.begin(), prompts.end(), c.prompt_id) == prompts.end()) prompts.push_back(c.prompt_id);
    setups_raw.push_back(c.setup);
    grid[{c.prompt_id, c.setup}] = &c;
  }
  const auto setups = factor_levels(setups_raw);
  constexpr double left = 140, top = 40, cw = 80, ch = 22;
  const double width = left + cw * static_cast<double>(setups.size()) + 120;
  const double height = top + ch * static_cast<double>(prompts.size()) + 40;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width, 0) << "\" height=\""
    << fixed(height, 0) << "\" viewBox=\"0 0 " << fixed(width, 0) << ' ' << fixed(height, 0)
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<defs><linearGradient id=\"scale\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">"
    << "<stop offset=\"0\" stop-color=\"" << diverging_color(-1) << "\"/>"
    << "<stop offset=\"0.5\" stop-color=\"" << diverging_color(0) << "\"/>"
    << "<stop offset=\"1\" stop-color=\"" << diverging_color(1) << "\"/>"
    << "</linearGradient></defs>\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << fixed(width, 0) << "\" height=\"" << fixed(height, 0)
    << "\" fill=\"#ffffff\"/>\n";
  for (size_t c = 0; c < setups.size(); ++c)
    o << "<text x=\"" << fixed(left + cw * (c + 0.5)) << "\" y=\"" << fixed(top - 10)
      << "\" text-anchor=\"middle\">" << xml_escape(setups[c]) << "</text>\n";
  for (size_t r = 0; r < prompts.size(); ++r) {
    const double y = top + ch * r;
    o << "<text x=\"" << fixed(left - 6) << "\" y=\"" << fixed(y + ch / 2 + 4) << "\" text-anchor=\"end\">"
      << xml_escape(prompts[r]) << "</text>\n";
    for (size_t c = 0; c < setups.size(); ++c) {
      const double x = left + cw * c;
      auto it = grid.find({prompts[r], setups[c]});
      const CorrelationCell* cell = it == grid.end() ? nullptr : it->second;
      const bool defined = cell && cell->rho;
      const std::string fill = defined ? diverging_color(*cell->rho) : "#cccccc";
      o << "<rect class=\"cell\" x=\"" << fixed(x) << "\" y=\"" << fixed(y) << "\" width=\"" << fixed(cw)
        << "\" height=\"" << fixed(ch) << "\" fill=\"" << fill << "\" stroke=\"#ffffff\"/>\n";
      o << "<text x=\"" << fixed(x + cw / 2) << "\" y=\"" << fixed(y + ch / 2 + 4) << "\" text-anchor=\"middle\">"
        << (defined ? fixed(std::clamp(*cell->rho, -1.0, 1.0)) : std::string("n/a")) << "</text>\n";
    }
  }
  const double lx = left + cw * setups.size() + 30;
  const double lh = std::max(ch * prompts.size(), 100.0);
  o << "<rect class=\"legend\" x=\"" << fixed(lx) << "\" y=\"" << fixed(top) << "\" width=\"16\" height=\""
    << fixed(lh) << "\" fill=\"url(#scale)\" stroke=\"#000000\"/>\n";
  for (double v : {1.0, 0.0, -1.0})
    o << "<text x=\"" << fixed(lx + 22) << "\" y=\"" << fixed(top + (1 - v) / 2 * lh + 4) << "\">" << fixed(v)
      << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

// --- emission -------------------------------------------------------------

std::vector<ManifestEntry> emit_outputs(const AnalysisReport& report, const fs::path& dir,
                                        const std::set<OutputFormat>& formats) {
  if (report.occupations.empty()) throw Error("empty report: no occupation rows");
  std::vector<std::pair<std::string, std::string>> files;

  if (formats.count(OutputFormat::Json)) files.emplace_back("report.json", report.to_json().dump(2) + "\n");

  if (formats.count(OutputFormat::Csv)) {
    std::string occ = csv_row({"occupation", "sector", "p_female_data", "p_female_generated", "tvd_data",
                               "tvd_generated", "amplification", "amplification_pp"});
    for (const auto& r : report.occupations) {
      std::optional<double> pp;
      if (r.amplification) pp = *r.amplification * 100.0;
      occ += csv_row({r.occupation, r.sector, csv_num(r.p_female_data), csv_num(r.p_female_generated),
                      csv_num(r.tvd_data), csv_num(r.tvd_generated), csv_num(r.amplification), csv_num(pp)});
    }
    files.emplace_back("tables/occupations.csv", occ);

    std::string sec = csv_row({"sector", "n_data", "n_generated", "n_shared", "mean_tvd_data",
                               "mean_tvd_generated", "mean_amplification", "mean_amplification_pp"});
    for (const auto& r : report.sectors)
      sec += csv_row({r.sector, std::to_string(r.n_data), std::to_string(r.n_generated),
                      std::to_string(r.n_shared), csv_num(r.mean_tvd_data), csv_num(r.mean_tvd_generated),
                      csv_num(r.mean_amplification), csv_num(r.mean_amplification_pp)});
    files.emplace_back("tables/sectors.csv", sec);

    std::string cor = csv_row({"prompt_id", "prompt_type", "setup", "n", "rho"});
    for (const auto& c : report.correlation)
      cor += csv_row({c.prompt_id, c.prompt_type, c.setup, std::to_string(c.n), csv_num(c.rho)});
    files.emplace_back("tables/correlation.csv", cor);

    std::string reg = csv_row({"statistic", "term", "value"});
    if (const auto& r = report.regression) {
      for (const auto& k : coefficient_order(*r)) reg += csv_row({"coefficient", k, csv_num(r->coefficients.at(k))});
      reg += csv_row({"r_squared", "", csv_num(r->r_squared)});
      for (const auto& k : ordered_keys(r->p_values, {"setup", "prompt_type", "overall"}))
        reg += csv_row({"p_value", k, csv_num(r->p_values.at(k))});
      for (const auto& k : ordered_keys(r->f_statistics, {"setup", "prompt_type", "overall"}))
        reg += csv_row({"f_statistic", k, csv_num(r->f_statistics.at(k))});
      reg += csv_row({"n_observations", "", std::to_string(r->n_observations)});
    }
    files.emplace_back("tables/regression.csv", reg);

    std::string sum = csv_row({"metric", "value"});
    sum += csv_row({"sta_data", csv_num(report.summary.sta_data)});
    sum += csv_row({"sta_generated", csv_num(report.summary.sta_generated)});
    sum += csv_row({"mean_amplification", csv_num(report.summary.mean_amplification)});
    sum += csv_row({"mean_amplification_pp", csv_num(report.summary.mean_amplification_pp)});
    sum += csv_row({"n_shared", std::to_string(report.summary.n_shared)});
    files.emplace_back("tables/summary.csv", sum);
  }

  if (formats.count(OutputFormat::Svg)) {
    files.emplace_back("figures/amplification.svg", render_amplification_svg(report));
    files.emplace_back("figures/correlation.svg", render_correlation_svg(report));
  }

  std::vector<ManifestEntry> manifest;
  try {
    fs::create_directories(dir);
    for (const auto& [rel, content] : files) {
      const fs::path p = dir / rel;
      fs::create_directories(p.parent_path());
      write_file(p, content);
      manifest.push_back({rel, sha256_hex(content), content.size()});
    }
  } catch (const fs::filesystem_error& e) {
    throw IoError(std::string("cannot write report directory: ") + e.what());
  }
  std::sort(manifest.begin(), manifest.end(), [](const auto& a, const auto& b) { return a.path < b.path; });

  ojson mj;
  ojson entries = ojson::array();
  for (const auto& e : manifest) entries.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
  mj["files"] = std::move(entries);
  write_file(dir / "manifest.json", mj.dump(2) + "\n");
  return manifest;
}

}  // namespace biasline
