#include "biasline/lexicon.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "biasline/digest.hpp"
#include "biasline/error.hpp"
#include "biasline/strings.hpp"

namespace fs = std::filesystem;

namespace biasline {
namespace {

struct Entry {
  std::string text;
  size_t line;
};

std::ifstream open_or_throw(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

// One term per line; '#' starts a comment.
std::vector<Entry> read_term_file(const fs::path& path) {
  auto in = open_or_throw(path);
  std::vector<Entry> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view v(line);
    if (auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    std::string term = ascii_lower(collapse_spaces(v));
    if (!term.empty()) out.push_back({std::move(term), lineno});
  }
  return out;
}

struct CsvRow {
  std::string term;
  std::string value;
  size_t line;
};

std::vector<CsvRow> read_two_column_csv(const fs::path& path) {
  auto in = open_or_throw(path);
  std::vector<CsvRow> rows;
  std::string line;
  std::vector<std::string> fields;
  size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view v = trim(line);
    if (v.empty() || v.front() == '#') continue;
    if (!split_csv_line(v, fields))
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": unterminated quote");
    if (!header_seen) {
      header_seen = true;
      if (fields.size() == 2 && trim(fields[0]) == "term" && trim(fields[1]) == "value") continue;
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected header 'term,value'");
    }
    if (fields.size() != 2)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 2 columns, got " +
                        std::to_string(fields.size()));
    rows.push_back({ascii_lower(collapse_spaces(fields[0])), std::string(trim(fields[1])), lineno});
  }
  return rows;
}

std::string where(const fs::path& path, size_t line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace

std::map<std::string, double> load_reference_csv(const fs::path& path) {
  std::map<std::string, double> ref;
  for (const auto& row : read_two_column_csv(path)) {
    double v = 0.0;
    const char* b = row.value.data();
    const char* e = b + row.value.size();
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e)
      throw ConfigError(where(path, row.line) + ": reference value for '" + row.term +
                        "' is not a number: " + row.value);
    if (!(v >= 0.0 && v <= 1.0))
      throw ConfigError(where(path, row.line) + ": reference value for '" + row.term +
                        "' outside [0,1]: " + row.value);
    if (!ref.emplace(row.term, v).second)
      throw ConfigError(where(path, row.line) + ": duplicate reference term '" + row.term + "'");
  }
  return ref;
}

LexiconBundle load_lexicon_bundle(const fs::path& gender_dir, const fs::path& occupations_file,
                                  const fs::path& sectors_file,
                                  const std::optional<fs::path>& reference_file) {
  if (!fs::is_directory(gender_dir))
    throw IoError("gender token directory not found: " + gender_dir.string());

  LexiconBundle b;
  const fs::path female_path = gender_dir / "female.txt";
  const fs::path male_path = gender_dir / "male.txt";
  for (auto& e : read_term_file(female_path)) b.female_tokens.insert(std::move(e.text));
  for (auto& e : read_term_file(male_path)) {
    if (b.female_tokens.count(e.text))
      throw ConfigError(where(male_path, e.line) + ": token '" + e.text +
                        "' appears in both female and male sets");
    b.male_tokens.insert(std::move(e.text));
  }

  std::unordered_map<std::string, size_t> first_line;
  for (auto& e : read_term_file(occupations_file)) {
    auto [it, inserted] = first_line.emplace(e.text, e.line);
    if (!inserted)
      throw ConfigError(where(occupations_file, e.line) + ": duplicate occupation '" + e.text +
                        "' (first seen on line " + std::to_string(it->second) + ")");
    b.occupations.push_back(std::move(e.text));
  }

  for (auto& row : read_two_column_csv(sectors_file)) {
    if (!first_line.count(row.term))
      throw ConfigError(where(sectors_file, row.line) + ": sector entry for unknown occupation '" +
                        row.term + "'");
    if (row.value.empty())
      throw ConfigError(where(sectors_file, row.line) + ": empty sector for '" + row.term + "'");
    if (!b.sectors.emplace(row.term, row.value).second)
      throw ConfigError(where(sectors_file, row.line) + ": duplicate sector entry for '" +
                        row.term + "'");
  }

  if (reference_file) b.reference = load_reference_csv(*reference_file);

  for (const auto& o : b.unmapped_occupations())
    b.warnings.push_back("occupation without sector: " + o);
  return b;
}

LexiconBundle load_lexicon_dir(const fs::path& dir, const std::optional<fs::path>& reference_file) {
  if (!fs::is_directory(dir)) throw IoError("lexicon directory not found: " + dir.string());
  return load_lexicon_bundle(dir, dir / "occupations.txt", dir / "sectors.csv", reference_file);
}

std::vector<std::string> LexiconBundle::unmapped_occupations() const {
  std::vector<std::string> out;
  for (const auto& o : occupations)
    if (!sectors.count(o)) out.push_back(o);
  return out;
}

std::string LexiconBundle::digest() const {
  std::ostringstream os;
  os << "female\n";
  for (const auto& t : female_tokens) os << t << '\n';
  os << "male\n";
  for (const auto& t : male_tokens) os << t << '\n';
  os << "occupations\n";
  for (const auto& t : occupations) os << t << '\n';
  os << "sectors\n";
  for (const auto& [k, v] : sectors) os << k << '\t' << v << '\n';
  if (reference) {
    os << "reference\n";
    for (const auto& [k, v] : *reference) os << k << '\t' << format_roundtrip(v) << '\n';
  }
  return sha256_hex(os.str());
}

void save_lexicon_bundle(const LexiconBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  auto write = [&](const fs::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    out << body;
  };
  std::string f, m, o, s = "term,value\n";
  for (const auto& t : bundle.female_tokens) f += t + '\n';
  for (const auto& t : bundle.male_tokens) m += t + '\n';
  for (const auto& t : bundle.occupations) o += t + '\n';
  for (const auto& [k, v] : bundle.sectors) s += csv_escape(k) + ',' + csv_escape(v) + '\n';
  write(dir / "female.txt", f);
  write(dir / "male.txt", m);
  write(dir / "occupations.txt", o);
  write(dir / "sectors.csv", s);
  if (bundle.reference) {
    std::string r = "term,value\n";
    for (const auto& [k, v] : *bundle.reference) r += csv_escape(k) + ',' + format_roundtrip(v) + '\n';
    write(dir / "reference.csv", r);
  }
}

}  // namespace biasline
