#include "biasline/synth.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "biasline/error.hpp"
#include "biasline/strings.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace biasline {

namespace {

// 53 random bits to [0, 1).
double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

size_t index_draw(std::mt19937_64& rng, size_t n) { return static_cast<size_t>(rng() % n); }

std::vector<std::string> words_of(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

void write_json_line(std::ofstream& out, const std::string& id, const std::string& text,
                     const std::string& occupation, std::string_view gender) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["text"] = text;
  j["occupation"] = occupation;
  j["gender"] = gender;
  out << j.dump() << '\n';
}

}  // namespace

const std::vector<std::string>& default_filler() {
  static const std::vector<std::string> words = {
      "river", "table",  "blue",   "quiet",  "window", "garden", "seven", "paper",  "morning",
      "stone", "bright", "yellow", "candle", "forest", "simple", "cloud", "orange", "bridge",
      "silver", "apple", "north",  "gentle", "valley", "copper", "maple", "swift",  "harbor"};
  return words;
}

PlantSpec PlantSpec::from_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open plant spec " + path.string());
  json j = json::parse(in, nullptr, false);
  if (!j.is_object()) throw ConfigError(path.string() + ": plant spec must be a JSON object");
  PlantSpec spec;
  try {
    spec.seed = j.value("seed", uint64_t{42});
    spec.noise_docs = j.value("noise_docs", uint64_t{0});
    if (j.contains("filler")) spec.filler = j.at("filler").get<std::vector<std::string>>();
    for (const auto& o : j.at("occupations")) {
      spec.occupations.push_back(
          {o.at("term").get<std::string>(), o.at("p_female").get<double>(), o.at("docs").get<uint64_t>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return spec;
}

PlantSpec grid_plant(const LexiconBundle& bundle, uint64_t docs, uint64_t seed) {
  std::mt19937_64 rng(seed);
  PlantSpec spec;
  spec.seed = seed;
  for (const auto& occ : bundle.occupations)
    spec.occupations.push_back({occ, static_cast<double>(index_draw(rng, 21)) / 20.0, docs});
  return spec;
}

void validate_plant(const PlantSpec& spec, const LexiconBundle& bundle) {
  std::set<std::string> known(bundle.occupations.begin(), bundle.occupations.end());
  std::set<std::string> seen;
  for (const auto& o : spec.occupations) {
    if (!known.count(o.term)) throw ConfigError("plant: occupation '" + o.term + "' is not in the lexicon");
    if (!seen.insert(o.term).second) throw ConfigError("plant: occupation '" + o.term + "' listed twice");
    if (!(o.p_female >= 0.0 && o.p_female <= 1.0))
      throw ConfigError("plant: p_female for '" + o.term + "' must lie in [0, 1]");
    if (o.docs == 0) throw ConfigError("plant: docs for '" + o.term + "' must be positive");
  }
  if (spec.occupations.empty()) throw ConfigError("plant: no occupations");

  std::set<std::string> reserved(bundle.female_tokens.begin(), bundle.female_tokens.end());
  reserved.insert(bundle.male_tokens.begin(), bundle.male_tokens.end());
  for (const auto& occ : bundle.occupations)
    for (auto& w : words_of(occ)) reserved.insert(std::move(w));
  const auto& filler = spec.filler.empty() ? default_filler() : spec.filler;
  for (const auto& raw : filler) {
    const std::string w = ascii_lower(trim(raw));
    if (w.empty()) throw ConfigError("plant: empty filler word");
    for (char c : w)
      if (!(c >= 'a' && c <= 'z'))
        throw ConfigError("plant: filler word '" + raw + "' must be plain ASCII letters");
    if (reserved.count(w)) throw ConfigError("plant: filler word '" + raw + "' collides with the lexicon");
  }
}

SynthOutput make_synthetic_corpus(const PlantSpec& spec, const LexiconBundle& bundle, const fs::path& out) {
  validate_plant(spec, bundle);
  fs::create_directories(out);
  SynthOutput result;
  result.corpus = out / "corpus.jsonl";
  result.ground_truth = out / "ground_truth.csv";

  const std::vector<std::string> female(bundle.female_tokens.begin(), bundle.female_tokens.end());
  const std::vector<std::string> male(bundle.male_tokens.begin(), bundle.male_tokens.end());
  std::vector<std::string> filler;
  for (const auto& w : spec.filler.empty() ? default_filler() : spec.filler) filler.push_back(ascii_lower(trim(w)));

  std::ofstream corpus(result.corpus, std::ios::binary | std::ios::trunc);
  if (!corpus) throw IoError("cannot write " + result.corpus.string());
  std::mt19937_64 rng(spec.seed);
  std::string text;
  char id[64];

  auto append_filler = [&] {
    const size_t n = 3 + index_draw(rng, 6);
    for (size_t k = 0; k < n; ++k) {
      text += ' ';
      text += filler[index_draw(rng, filler.size())];
    }
  };

  for (size_t oi = 0; oi < spec.occupations.size(); ++oi) {
    const auto& plant = spec.occupations[oi];
    GroundTruthRow row{plant.term, plant.p_female, 0.0, plant.docs, 0};
    for (uint64_t i = 0; i < plant.docs; ++i) {
      const bool is_female = unit_draw(rng) < plant.p_female;
      const auto& pool = is_female ? female : male;
      text = "The " + plant.term + " said " + pool[index_draw(rng, pool.size())];
      append_filler();
      text += '.';
      std::snprintf(id, sizeof id, "synth-%04zu-%06" PRIu64, oi, i);
      write_json_line(corpus, id, text, plant.term, is_female ? "female" : "male");
      result.bytes += text.size();
      row.female_docs += is_female;
    }
    for (uint64_t i = 0; i < spec.noise_docs; ++i) {
      const bool mixed = (rng() & 1) != 0;
      text = "The " + plant.term + " said";
      if (mixed) {
        text += ' ' + female[index_draw(rng, female.size())];
        text += " and " + male[index_draw(rng, male.size())];
      }
      append_filler();
      text += '.';
      std::snprintf(id, sizeof id, "synth-%04zu-noise-%06" PRIu64, oi, i);
      write_json_line(corpus, id, text, plant.term, mixed ? "mixed" : "none");
      result.bytes += text.size();
    }
    row.p_realized = static_cast<double>(row.female_docs) / static_cast<double>(row.docs);
    result.rows.push_back(std::move(row));
  }
  corpus.close();
  if (!corpus) throw IoError("write failed: " + result.corpus.string());

  std::ofstream truth(result.ground_truth, std::ios::binary | std::ios::trunc);
  if (!truth) throw IoError("cannot write " + result.ground_truth.string());
  truth << "occupation,p_planted,p_realized,docs\n";
  for (const auto& r : result.rows)
    truth << csv_escape(r.occupation) << ',' << format_roundtrip(r.p_planted) << ','
          << format_roundtrip(r.p_realized) << ',' << r.docs << '\n';
  truth.close();
  if (!truth) throw IoError("write failed: " + result.ground_truth.string());
  return result;
}

std::vector<GroundTruthRow> load_ground_truth(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::vector<std::string> f;
  if (!std::getline(in, line) || trim(line) != "occupation,p_planted,p_realized,docs")
    throw ConfigError(path.string() + ": expected header occupation,p_planted,p_realized,docs");
  std::vector<GroundTruthRow> rows;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    if (!split_csv_line(line, f) || f.size() != 4)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    GroundTruthRow r;
    r.occupation = f[0];
    try {
      r.p_planted = std::stod(f[1]);
      r.p_realized = std::stod(f[2]);
      r.docs = std::stoull(f[3]);
    } catch (const std::exception&) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
    r.female_docs = static_cast<uint64_t>(std::llround(r.p_realized * static_cast<double>(r.docs)));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace biasline
