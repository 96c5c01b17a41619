#include "biasline/classify.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "biasline/error.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace biasline {

std::string_view to_string(GenderLabel l) {
  switch (l) {
    case GenderLabel::Female: return "female";
    case GenderLabel::Male: return "male";
    case GenderLabel::Mixed: return "mixed";
    case GenderLabel::None: return "none";
  }
  return "none";
}

std::string_view to_string(CountMode m) { return m == CountMode::Sentence ? "sentence" : "document"; }

CountMode parse_count_mode(std::string_view s) {
  if (s == "sentence") return CountMode::Sentence;
  if (s == "document") return CountMode::Document;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected sentence|document)");
}

// ---------------------------------------------------------------------------
// CountsTable

CountsTable CountsTable::zeros(const LexiconBundle& bundle, CountMode mode) {
  CountsTable t;
  t.meta.mode = mode;
  t.meta.lexicon_digest = bundle.digest();
  t.occupations = bundle.occupations;
  t.counts.assign(t.occupations.size(), {});
  return t;
}

const OccupationCounts* CountsTable::find(std::string_view occupation) const {
  auto it = std::find(occupations.begin(), occupations.end(), occupation);
  return it == occupations.end() ? nullptr : &counts[static_cast<size_t>(it - occupations.begin())];
}

OccupationCounts* CountsTable::find(std::string_view occupation) {
  return const_cast<OccupationCounts*>(std::as_const(*this).find(occupation));
}

void CountsTable::merge(const CountsTable& other) {
  if (other.occupations != occupations)
    throw ConfigError("cannot merge counts tables over different occupation lists");
  for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

namespace {

ordered_json counts_to_json(const OccupationCounts& c) {
  ordered_json j;
  j["female_tokens"] = c.female_tokens;
  j["male_tokens"] = c.male_tokens;
  j["female_units"] = c.female_units;
  j["male_units"] = c.male_units;
  j["units_scanned"] = c.units_scanned;
  return j;
}

OccupationCounts counts_from_json(const ordered_json& j) {
  OccupationCounts c;
  c.female_tokens = j.at("female_tokens").get<uint64_t>();
  c.male_tokens = j.at("male_tokens").get<uint64_t>();
  c.female_units = j.at("female_units").get<uint64_t>();
  c.male_units = j.at("male_units").get<uint64_t>();
  c.units_scanned = j.at("units_scanned").get<uint64_t>();
  return c;
}

ordered_json meta_to_json(const CountsMeta& m) {
  ordered_json j;
  j["mode"] = to_string(m.mode);
  j["seed"] = m.seed ? ordered_json(*m.seed) : ordered_json(nullptr);
  j["cap"] = m.cap ? ordered_json(*m.cap) : ordered_json(nullptr);
  j["lexicon_digest"] = m.lexicon_digest;
  for (auto it = m.extra.begin(); it != m.extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

CountsMeta meta_from_json(const ordered_json& j) {
  CountsMeta m;
  m.mode = parse_count_mode(j.at("mode").get<std::string>());
  if (j.contains("seed") && !j["seed"].is_null()) m.seed = j["seed"].get<uint64_t>();
  if (j.contains("cap") && !j["cap"].is_null()) m.cap = j["cap"].get<uint64_t>();
  m.lexicon_digest = j.at("lexicon_digest").get<std::string>();
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k != "mode" && k != "seed" && k != "cap" && k != "lexicon_digest") m.extra[k] = it.value();
  }
  return m;
}

ordered_json occupations_to_json(const CountsTable& t) {
  ordered_json occ = ordered_json::object();
  for (size_t i = 0; i < t.occupations.size(); ++i) occ[t.occupations[i]] = counts_to_json(t.counts[i]);
  return occ;
}

void occupations_from_json(const ordered_json& occ, CountsTable& t) {
  if (!occ.is_object()) throw ConfigError("counts: 'occupations' must be an object");
  for (auto it = occ.begin(); it != occ.end(); ++it) {
    t.occupations.push_back(it.key());
    t.counts.push_back(counts_from_json(it.value()));
  }
}

}  // namespace

ordered_json CountsTable::to_json() const {
  ordered_json j;
  j["meta"] = meta_to_json(meta);
  j["occupations"] = occupations_to_json(*this);
  return j;
}

CountsTable CountsTable::from_json(const ordered_json& j) {
  try {
    CountsTable t;
    t.meta = meta_from_json(j.at("meta"));
    occupations_from_json(j.at("occupations"), t);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed counts table: ") + e.what());
  }
}

CountsTable PartitionedCounts::pooled() const {
  CountsTable out;
  out.meta = meta;
  bool first = true;
  for (const auto& [key, table] : cells) {
    if (first) {
      out.occupations = table.occupations;
      out.counts = table.counts;
      first = false;
    } else {
      out.merge(table);
    }
  }
  return out;
}

ordered_json PartitionedCounts::to_json() const {
  ordered_json j;
  j["meta"] = meta_to_json(meta);
  ordered_json cells_json = ordered_json::array();
  for (const auto& [key, table] : cells) {
    ordered_json c;
    c["prompt_id"] = key.prompt_id;
    c["prompt_type"] = to_string(key.prompt_type);
    c["setup"] = to_string(key.setup);
    c["occupations"] = occupations_to_json(table);
    cells_json.push_back(std::move(c));
  }
  j["cells"] = std::move(cells_json);
  return j;
}

PartitionedCounts PartitionedCounts::from_json(const ordered_json& j) {
  try {
    PartitionedCounts p;
    p.meta = meta_from_json(j.at("meta"));
    for (const auto& c : j.at("cells")) {
      CellKey key{c.at("prompt_id").get<std::string>(),
                  parse_prompt_type(c.at("prompt_type").get<std::string>()),
                  parse_setup_name(c.at("setup").get<std::string>())};
      CountsTable t;
      t.meta = p.meta;
      occupations_from_json(c.at("occupations"), t);
      if (!p.cells.emplace(std::move(key), std::move(t)).second)
        throw ConfigError("duplicate cell in partitioned counts");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed partitioned counts: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Classification

TermMatcher make_gender_matcher(const LexiconBundle& bundle) {
  std::vector<std::string> terms(bundle.female_tokens.begin(), bundle.female_tokens.end());
  terms.insert(terms.end(), bundle.male_tokens.begin(), bundle.male_tokens.end());
  return TermMatcher(std::move(terms));
}

namespace {

GenderLabel label_for(uint64_t female, uint64_t male) {
  if (female > 0 && male > 0) return GenderLabel::Mixed;
  if (female > 0) return GenderLabel::Female;
  if (male > 0) return GenderLabel::Male;
  return GenderLabel::None;
}

}  // namespace

GenderLabel classify_unit(std::string_view unit_text, const LexiconBundle& bundle,
                          const TermMatcher& gender_matcher) {
  uint64_t female = 0;
  uint64_t male = 0;
  for (const auto& h : find_terms(gender_matcher, unit_text)) {
    const std::string& term = gender_matcher.terms()[h.term_id];
    if (bundle.female_tokens.count(term))
      ++female;
    else if (bundle.male_tokens.count(term))
      ++male;
  }
  return label_for(female, male);
}

CooccurrenceCounter::CooccurrenceCounter(const LexiconBundle& bundle, ScanOptions options)
    : options_(options), occupations_(bundle.occupations) {
  std::vector<std::string> terms;
  std::vector<uint32_t> groups;
  std::unordered_map<std::string, bool> used;
  auto add = [&](const std::string& t, uint32_t group, TermInfo info) {
    if (!used.emplace(t, true).second) return false;
    terms.push_back(t);
    groups.push_back(group);
    info_.push_back(info);
    return true;
  };
  for (const auto& t : bundle.female_tokens) used.emplace(t, true);
  for (const auto& t : bundle.male_tokens) used.emplace(t, true);
  for (uint32_t i = 0; i < occupations_.size(); ++i)
    if (!add(occupations_[i], 0, {Kind::Occupation, i}))
      throw ConfigError("occupation '" + occupations_[i] + "' is also a gender token");
  if (options_.plural_s)
    for (uint32_t i = 0; i < occupations_.size(); ++i) add(occupations_[i] + "s", 0, {Kind::Occupation, i});
  used.clear();
  for (const auto& t : bundle.female_tokens) add(t, 1, {Kind::Female, 0});
  for (const auto& t : bundle.male_tokens) add(t, 1, {Kind::Male, 0});
  matcher_ = TermMatcher(std::move(terms), std::move(groups));
  // When no term can straddle a sentence gap, whole-text hits can be
  // bucketed into sentences instead of rescanning each sentence.
  bucket_safe_ = std::none_of(matcher_.terms().begin(), matcher_.terms().end(), [](const std::string& t) {
    return std::any_of(t.begin(), t.end(), [](char c) {
      return static_cast<unsigned char>(c) >= 0x80 || std::string_view(".?!\"')]").find(c) != std::string_view::npos;
    });
  });
}

void CooccurrenceCounter::count_unit(std::span<const TermHit> hits, std::vector<Contribution>& out,
                                     UnitStats* stats) const {
  thread_local std::vector<uint32_t> present;
  present.clear();
  uint64_t female = 0;
  uint64_t male = 0;
  for (const auto& h : hits) {
    const TermInfo& info = info_[h.term_id];
    switch (info.kind) {
      case Kind::Occupation: present.push_back(info.occupation); break;
      case Kind::Female: ++female; break;
      case Kind::Male: ++male; break;
    }
  }
  if (present.empty()) return;
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());

  const GenderLabel label = label_for(female, male);
  if (stats) {
    ++stats->units;
    switch (label) {
      case GenderLabel::Female: ++stats->female; break;
      case GenderLabel::Male: ++stats->male; break;
      case GenderLabel::Mixed: ++stats->mixed; break;
      case GenderLabel::None: ++stats->none; break;
    }
  }
  OccupationCounts unit;
  unit.units_scanned = 1;
  if (label == GenderLabel::Female) {
    unit.female_tokens = female;
    unit.female_units = 1;
  } else if (label == GenderLabel::Male) {
    unit.male_tokens = male;
    unit.male_units = 1;
  }
  for (uint32_t occ : present) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Contribution& c) { return c.occupation == occ; });
    if (it == out.end())
      out.push_back({occ, unit});
    else
      it->counts += unit;
  }
}

void CooccurrenceCounter::scan(std::string_view text, std::vector<Contribution>& out,
                               UnitStats* stats) const {
  out.clear();
  thread_local std::vector<TermHit> hits;
  hits.clear();
  matcher_.find(text, 0, text.size(), hits);
  const bool any_occupation = std::any_of(hits.begin(), hits.end(), [&](const TermHit& h) {
    return info_[h.term_id].kind == Kind::Occupation;
  });
  if (!any_occupation) return;

  if (options_.mode == CountMode::Document) {
    count_unit(hits, out, stats);
  } else {
    const auto spans = segment_sentences(text);
    if (bucket_safe_) {
      size_t h = 0;
      for (const auto& span : spans) {
        while (h < hits.size() && hits[h].start < span.start) ++h;
        size_t e = h;
        while (e < hits.size() && hits[e].start < span.end) ++e;
        count_unit(std::span<const TermHit>(hits.data() + h, e - h), out, stats);
        h = e;
      }
    } else {
      thread_local std::vector<TermHit> window_hits;
      for (const auto& span : spans) {
        window_hits.clear();
        matcher_.find(text, span.start, span.end, window_hits);
        count_unit(window_hits, out, stats);
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Contribution& a, const Contribution& b) { return a.occupation < b.occupation; });
}

CountsTable count_cooccurrences(const std::map<std::string, std::vector<Document>>& docs,
                                const LexiconBundle& bundle, CountMode mode, const ScanOptions& options) {
  ScanOptions opts = options;
  opts.mode = mode;
  CooccurrenceCounter counter(bundle, opts);
  CountsTable table = CountsTable::zeros(bundle, mode);
  std::vector<CooccurrenceCounter::Contribution> contrib;
  for (const auto& [occupation, list] : docs) {
    auto it = std::find(table.occupations.begin(), table.occupations.end(), occupation);
    if (it == table.occupations.end()) continue;
    const auto idx = static_cast<uint32_t>(it - table.occupations.begin());
    for (const auto& doc : list) {
      counter.scan(doc.text, contrib);
      for (const auto& c : contrib)
        if (c.occupation == idx) table.counts[idx] += c.counts;
    }
  }
  return table;
}

CountsTable count_documents(std::span<const Document> docs, const LexiconBundle& bundle,
                            const ScanOptions& options) {
  CooccurrenceCounter counter(bundle, options);
  CountsTable table = CountsTable::zeros(bundle, options.mode);
  std::vector<CooccurrenceCounter::Contribution> contrib;
  for (const auto& doc : docs) {
    counter.scan(doc.text, contrib);
    for (const auto& c : contrib) table.counts[c.occupation] += c.counts;
  }
  return table;
}

PartitionedCounts count_generations(std::span<const GenerationRecord> records,
                                    const LexiconBundle& bundle, GenerationCountStats* stats) {
  PartitionedCounts out;
  out.meta.mode = CountMode::Document;
  out.meta.lexicon_digest = bundle.digest();
  std::unordered_map<std::string, uint32_t> index;
  for (uint32_t i = 0; i < bundle.occupations.size(); ++i) index.emplace(bundle.occupations[i], i);

  const TermMatcher gender = make_gender_matcher(bundle);
  std::vector<uint8_t> is_female(gender.size());
  for (uint32_t i = 0; i < gender.size(); ++i) is_female[i] = bundle.female_tokens.count(gender.terms()[i]) > 0;

  const CountsTable empty = CountsTable::zeros(bundle, CountMode::Document);
  std::vector<TermHit> hits;
  for (const auto& r : records) {
    if (stats) ++stats->records;
    auto it = index.find(r.occupation);
    if (it == index.end()) {
      if (stats) ++stats->unknown_occupation;
      continue;
    }
    hits.clear();
    gender.find(r.text, 0, r.text.size(), hits);
    uint64_t female = 0;
    uint64_t male = 0;
    for (const auto& h : hits) (is_female[h.term_id] ? female : male)++;

    CellKey key{r.prompt_id, r.prompt_type, r.setup};
    auto cell = out.cells.find(key);
    if (cell == out.cells.end()) {
      cell = out.cells.emplace(key, empty).first;
      cell->second.meta = out.meta;
    }
    OccupationCounts& c = cell->second.counts[it->second];
    ++c.units_scanned;
    switch (label_for(female, male)) {
      case GenderLabel::Female:
        c.female_tokens += female;
        ++c.female_units;
        break;
      case GenderLabel::Male:
        c.male_tokens += male;
        ++c.male_units;
        break;
      default: break;
    }
  }
  return out;
}

void save_json(const ordered_json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + path.string());
    }
  }
  fs::rename(tmp, path);
}

ordered_json load_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  ordered_json j = ordered_json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("invalid JSON in " + path.string());
  return j;
}

}  // namespace biasline
