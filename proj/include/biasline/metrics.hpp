#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biasline/classify.hpp"
#include "biasline/lexicon.hpp"

namespace biasline {

/// Binary gender distribution; p_male + p_female = 1.
struct GenderDistribution {
  double p_male = 0.5;
  double p_female = 0.5;

  static GenderDistribution uniform() { return {0.5, 0.5}; }
  static GenderDistribution from_female(double p_female) { return {1.0 - p_female, p_female}; }
  bool operator==(const GenderDistribution&) const = default;
};

enum class Weighting { Token, Unit };
std::string_view to_string(Weighting w);
Weighting parse_weighting(std::string_view s);

/// Normalized (male, female) pair, or nullopt when both counts are zero.
std::optional<GenderDistribution> observed_probability(const OccupationCounts& counts, Weighting weighting);

/// Total variation distance, 0.5 * L1.
double tvd(const GenderDistribution& p, const GenderDistribution& q);

/// Comparison distribution for STA: uniform, or per-occupation fraction female.
struct ReferenceSpec {
  std::optional<std::map<std::string, double>> per_occupation;

  static ReferenceSpec uniform() { return {}; }
  bool is_uniform() const { return !per_occupation.has_value(); }
};

struct StaResult {
  std::map<std::string, double> per_occupation;  // TVD per included occupation
  std::map<std::string, double> sector_means;
  std::map<std::string, size_t> sector_sizes;
  double overall = 0.0;
  std::vector<std::string> excluded_no_counts;     // zero gendered counts
  std::vector<std::string> excluded_no_reference;  // absent from a per-occupation reference
};

/// Per-occupation TVD against the reference, per-sector and overall means.
/// Throws Error("no occupations with counts") when nothing is included.
StaResult sta(const CountsTable& table, const ReferenceSpec& reference, const LexiconBundle& bundle,
              Weighting weighting = Weighting::Token);

/// Occupation -> fraction female, the observed proportion of each occupation
/// with nonzero counts.
std::map<std::string, double> proportion_series(const CountsTable& table, Weighting weighting);

struct AmplificationResult {
  std::map<std::string, double> per_occupation;  // generated - training
  double mean = 0.0;
  double mean_pp = 0.0;                          // percentage points
  std::vector<std::string> only_generated;
  std::vector<std::string> only_training;
};

/// GP_o - TS_o over shared occupations and its mean. Throws Error when the
/// series share no occupation.
AmplificationResult amplification(const std::map<std::string, double>& generated,
                                  const std::map<std::string, double>& training);

/// Product-moment correlation. Throws Error on length mismatch, fewer than
/// two points, or zero variance ("undefined correlation").
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);

/// Upper tail P(F > f) of the F distribution with (d1, d2) degrees of freedom.
double f_distribution_sf(double f, double d1, double d2);

struct RegressionObservation {
  std::string setup;
  std::string prompt_type;
  double proportion_female = 0.0;
};

struct RegressionResult {
  std::map<std::string, double> coefficients;  // "intercept", "setup=topk40", ...
  double r_squared = 0.0;
  std::map<std::string, double> p_values;      // "setup", "prompt_type", "overall"
  std::map<std::string, double> f_statistics;
  size_t n_observations = 0;
  size_t n_parameters = 0;
  double ssr = 0.0;
  double sst = 0.0;
  std::vector<std::string> setup_levels;       // first is the reference level
  std::vector<std::string> prompt_type_levels;
};

/// Level order used for dummy coding: known names in canonical order
/// (baseline, topk40, topp09, temp07 / neutral, positive, negative), then
/// any others sorted.
std::vector<std::string> factor_levels(std::vector<std::string> values);

/// OLS of proportion_female on dummy-coded setup and prompt type. Per-factor
/// p-values come from partial F-tests. Throws Error on rank deficiency
/// (naming the collinear levels) or too few observations.
RegressionResult regress_gender_proportion(std::span<const RegressionObservation> observations);

}  // namespace biasline
