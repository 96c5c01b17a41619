#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biasline/classify.hpp"
#include "biasline/lexicon.hpp"
#include "biasline/metrics.hpp"

namespace biasline {

struct OccupationRow {
  std::string occupation;
  std::string sector;  // empty when unmapped
  std::optional<double> p_female_data;
  std::optional<double> p_female_generated;
  std::optional<double> tvd_data;
  std::optional<double> tvd_generated;
  std::optional<double> amplification;  // generated - data, fraction
};

struct SectorRow {
  std::string sector;
  size_t n_data = 0;       // occupations with a data TVD
  size_t n_generated = 0;  // occupations with a generated TVD
  size_t n_shared = 0;     // occupations with an amplification value
  std::optional<double> mean_tvd_data;
  std::optional<double> mean_tvd_generated;
  std::optional<double> mean_amplification;
  std::optional<double> mean_amplification_pp;
};

/// Correlation between data and generated proportions across occupations
/// for one (prompt, setup) cell. `rho` is empty when undefined.
struct CorrelationCell {
  std::string prompt_id;
  std::string prompt_type;
  std::string setup;
  size_t n = 0;
  std::optional<double> rho;
};

struct ReportSummary {
  double sta_data = 0.0;
  std::optional<double> sta_generated;
  double mean_amplification = 0.0;
  double mean_amplification_pp = 0.0;
  size_t n_shared = 0;
};

struct ReportExclusions {
  std::vector<std::string> data_no_counts;
  std::vector<std::string> generated_no_counts;
  std::vector<std::string> no_reference;
  std::vector<std::string> only_data;
  std::vector<std::string> only_generated;
  std::vector<std::string> unmapped_sector;
};

struct AnalysisReport {
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  ReportSummary summary;
  std::vector<OccupationRow> occupations;  // bundle order
  std::vector<SectorRow> sectors;          // alphabetical
  std::vector<CorrelationCell> correlation;
  std::optional<RegressionResult> regression;
  std::string regression_error;
  ReportExclusions exclusions;

  nlohmann::ordered_json to_json() const;
  static AnalysisReport from_json(const nlohmann::ordered_json& j);
};

struct ReportOptions {
  ReferenceSpec reference;
  Weighting weighting = Weighting::Token;
  /// Copied into report meta under "run".
  nlohmann::ordered_json run = nlohmann::ordered_json::object();
};

/// Computes every analysis over training counts and partitioned generation
/// counts. Throws ConfigError when either table was built with a different
/// lexicon than `bundle`, or when no occupation has counts on both sides.
AnalysisReport build_report(const CountsTable& data_counts, const PartitionedCounts& gen_counts,
                            const LexiconBundle& bundle, const ReportOptions& options = {});

enum class OutputFormat { Json, Csv, Svg };

struct ManifestEntry {
  std::string path;  // relative to the report directory
  std::string sha256;
  uint64_t bytes = 0;
};

/// Diverging blue-white-red scale over [-1, 1]; values are clamped.
std::string diverging_color(double rho);

std::string render_amplification_svg(const AnalysisReport& report);
std::string render_correlation_svg(const AnalysisReport& report);

/// Writes the requested formats plus manifest.json into `dir` and returns
/// the manifest (sorted by path). Throws Error on an empty report and
/// IoError when `dir` cannot be written.
std::vector<ManifestEntry> emit_outputs(const AnalysisReport& report, const std::filesystem::path& dir,
                                        const std::set<OutputFormat>& formats = {OutputFormat::Json,
                                                                                 OutputFormat::Csv,
                                                                                 OutputFormat::Svg});

AnalysisReport load_report(const std::filesystem::path& report_json);

}  // namespace biasline
