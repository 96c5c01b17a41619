#include "biasline/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "biasline/error.hpp"

namespace biasline {

std::string_view to_string(Weighting w) { return w == Weighting::Token ? "token" : "unit"; }

Weighting parse_weighting(std::string_view s) {
  if (s == "token") return Weighting::Token;
  if (s == "unit") return Weighting::Unit;
  throw ConfigError("unknown weighting '" + std::string(s) + "' (expected token|unit)");
}

std::optional<GenderDistribution> observed_probability(const OccupationCounts& c, Weighting w) {
  const uint64_t female = w == Weighting::Token ? c.female_tokens : c.female_units;
  const uint64_t male = w == Weighting::Token ? c.male_tokens : c.male_units;
  const uint64_t total = female + male;
  if (total == 0) return std::nullopt;
  const double t = static_cast<double>(total);
  return GenderDistribution{static_cast<double>(male) / t, static_cast<double>(female) / t};
}

double tvd(const GenderDistribution& p, const GenderDistribution& q) {
  return 0.5 * (std::abs(p.p_male - q.p_male) + std::abs(p.p_female - q.p_female));
}

namespace {

// Mean over values visited in key order, so the result never depends on
// insertion order.
double ordered_mean(const std::map<std::string, double>& values) {
  double sum = 0.0;
  for (const auto& [k, v] : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

StaResult sta(const CountsTable& table, const ReferenceSpec& reference, const LexiconBundle& bundle,
              Weighting weighting) {
  StaResult r;
  for (size_t i = 0; i < table.occupations.size(); ++i) {
    const std::string& occ = table.occupations[i];
    auto p_obs = observed_probability(table.counts[i], weighting);
    if (!p_obs) {
      r.excluded_no_counts.push_back(occ);
      continue;
    }
    GenderDistribution p_ref = GenderDistribution::uniform();
    if (reference.per_occupation) {
      auto it = reference.per_occupation->find(occ);
      if (it == reference.per_occupation->end()) {
        r.excluded_no_reference.push_back(occ);
        continue;
      }
      p_ref = GenderDistribution::from_female(it->second);
    }
    r.per_occupation[occ] = tvd(*p_obs, p_ref);
  }
  if (r.per_occupation.empty()) throw Error("no occupations with counts");

  std::map<std::string, std::map<std::string, double>> by_sector;
  for (const auto& [occ, value] : r.per_occupation) {
    auto it = bundle.sectors.find(occ);
    if (it != bundle.sectors.end()) by_sector[it->second][occ] = value;
  }
  for (const auto& [sector, members] : by_sector) {
    r.sector_means[sector] = ordered_mean(members);
    r.sector_sizes[sector] = members.size();
  }
  r.overall = ordered_mean(r.per_occupation);
  return r;
}

std::map<std::string, double> proportion_series(const CountsTable& table, Weighting weighting) {
  std::map<std::string, double> out;
  for (size_t i = 0; i < table.occupations.size(); ++i)
    if (auto p = observed_probability(table.counts[i], weighting)) out[table.occupations[i]] = p->p_female;
  return out;
}

AmplificationResult amplification(const std::map<std::string, double>& generated,
                                  const std::map<std::string, double>& training) {
  AmplificationResult r;
  for (const auto& [occ, gp] : generated) {
    auto it = training.find(occ);
    if (it == training.end())
      r.only_generated.push_back(occ);
    else
      r.per_occupation[occ] = gp - it->second;
  }
  for (const auto& [occ, ts] : training)
    if (!generated.count(occ)) r.only_training.push_back(occ);
  if (r.per_occupation.empty()) throw Error("amplification: no occupations shared by both series");
  r.mean = ordered_mean(r.per_occupation);
  r.mean_pp = 100.0 * r.mean;
  return r;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error("pearson: series lengths differ");
  const size_t n = xs.size();
  if (n < 2) throw Error("pearson: need at least two points");
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw Error("undefined correlation");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Incomplete beta and F distribution

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta: continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error("incomplete beta: a and b must be positive");
  if (std::isnan(x)) throw Error("incomplete beta: x is NaN");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_distribution_sf(double f, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw Error("F distribution: degrees of freedom must be positive");
  if (std::isnan(f)) throw Error("F distribution: statistic is NaN");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

// ---------------------------------------------------------------------------
// Regression

std::vector<std::string> factor_levels(std::vector<std::string> values) {
  static const std::vector<std::string> kCanonical = {"baseline", "topk40",   "topp09",  "temp07",
                                                      "neutral",  "positive", "negative"};
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  auto rank = [&](const std::string& v) {
    auto it = std::find(kCanonical.begin(), kCanonical.end(), v);
    return static_cast<size_t>(it - kCanonical.begin());
  };
  std::stable_sort(values.begin(), values.end(),
                   [&](const std::string& a, const std::string& b) { return rank(a) < rank(b); });
  return values;
}

namespace {

struct Fit {
  Eigen::VectorXd beta;
  double ssr = 0.0;
};

Fit least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<std::string>& names) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols()) {
    // Express each dropped column through the kept ones to name the dependency.
    const auto& perm = qr.colsPermutation().indices();
    const Eigen::Index rank = qr.rank();
    Eigen::MatrixXd kept(X.rows(), rank);
    for (Eigen::Index k = 0; k < rank; ++k) kept.col(k) = X.col(perm[k]);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> sub(kept);
    std::string msg = "rank-deficient design; collinear levels:";
    for (Eigen::Index k = rank; k < X.cols(); ++k) {
      const Eigen::VectorXd c = sub.solve(X.col(perm[k]));
      msg += " {" + names[static_cast<size_t>(perm[k])];
      for (Eigen::Index j = 0; j < rank; ++j)
        if (std::fabs(c[j]) > 1e-8) msg += ", " + names[static_cast<size_t>(perm[j])];
      msg += "}";
    }
    throw Error(msg);
  }
  Fit fit;
  fit.beta = qr.solve(y);
  fit.ssr = (y - X * fit.beta).squaredNorm();
  return fit;
}

}  // namespace

RegressionResult regress_gender_proportion(std::span<const RegressionObservation> observations) {
  RegressionResult r;
  std::vector<std::string> setups, prompts;
  for (const auto& o : observations) {
    setups.push_back(o.setup);
    prompts.push_back(o.prompt_type);
  }
  r.setup_levels = factor_levels(setups);
  r.prompt_type_levels = factor_levels(prompts);
  if (r.setup_levels.size() < 2 && r.prompt_type_levels.size() < 2)
    throw Error("regression: need at least two levels in one factor");

  auto index_of = [](const std::vector<std::string>& levels, const std::string& v) {
    return static_cast<size_t>(std::find(levels.begin(), levels.end(), v) - levels.begin());
  };
  // Canonical row order makes the fit independent of input order.
  std::vector<std::tuple<size_t, size_t, double>> rows;
  rows.reserve(observations.size());
  for (const auto& o : observations) {
    if (!std::isfinite(o.proportion_female)) throw Error("regression: non-finite proportion");
    rows.emplace_back(index_of(r.setup_levels, o.setup), index_of(r.prompt_type_levels, o.prompt_type),
                      o.proportion_female);
  }
  std::sort(rows.begin(), rows.end());

  const size_t n = rows.size();
  const size_t q_setup = r.setup_levels.size() - 1;
  const size_t q_prompt = r.prompt_type_levels.size() - 1;
  const size_t p = 1 + q_setup + q_prompt;
  r.n_observations = n;
  r.n_parameters = p;
  if (n <= p)
    throw Error("regression: " + std::to_string(n) + " observations for " + std::to_string(p) +
                " coefficients");

  std::vector<std::string> names = {"intercept"};
  for (size_t k = 1; k < r.setup_levels.size(); ++k) names.push_back("setup=" + r.setup_levels[k]);
  for (size_t k = 1; k < r.prompt_type_levels.size(); ++k) names.push_back("prompt_type=" + r.prompt_type_levels[k]);

  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i) {
    const auto& [s, t, v] = rows[i];
    const auto row = static_cast<Eigen::Index>(i);
    X(row, 0) = 1.0;
    if (s > 0) X(row, static_cast<Eigen::Index>(s)) = 1.0;
    if (t > 0) X(row, static_cast<Eigen::Index>(q_setup + t)) = 1.0;
    y(row) = v;
  }

  const Fit full = least_squares(X, y, names);
  for (size_t k = 0; k < p; ++k) r.coefficients[names[k]] = full.beta(static_cast<Eigen::Index>(k));

  const double mean = y.mean();
  r.sst = (y.array() - mean).square().sum();
  r.ssr = full.ssr;
  // Sums of squares below this are rounding noise.
  const double tol = 1e-22 * std::max(y.squaredNorm(), 1e-300);
  const bool perfect_fit = r.ssr <= tol;
  if (r.sst <= tol) {
    r.r_squared = 0.0;
  } else {
    r.r_squared = std::clamp(1.0 - r.ssr / r.sst, 0.0, 1.0);
  }

  const double df_resid = static_cast<double>(n - p);
  auto f_test = [&](double ssr_reduced, size_t q, const std::string& label) {
    const double extra = std::max(ssr_reduced - r.ssr, 0.0);
    double f, pv;
    if (perfect_fit) {
      const bool no_effect = extra <= tol;
      f = no_effect ? 0.0 : std::numeric_limits<double>::infinity();
      pv = no_effect ? 1.0 : 0.0;
    } else {
      f = (extra / static_cast<double>(q)) / (r.ssr / df_resid);
      pv = f_distribution_sf(f, static_cast<double>(q), df_resid);
    }
    r.f_statistics[label] = f;
    r.p_values[label] = std::clamp(pv, 0.0, 1.0);
  };

  auto drop_columns = [&](size_t first, size_t count) {
    Eigen::MatrixXd Xr(X.rows(), X.cols() - static_cast<Eigen::Index>(count));
    std::vector<std::string> kept;
    Eigen::Index c = 0;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (static_cast<size_t>(j) >= first && static_cast<size_t>(j) < first + count) continue;
      Xr.col(c++) = X.col(j);
      kept.push_back(names[static_cast<size_t>(j)]);
    }
    return least_squares(Xr, y, kept).ssr;
  };
  if (q_setup > 0) f_test(drop_columns(1, q_setup), q_setup, "setup");
  if (q_prompt > 0) f_test(drop_columns(1 + q_setup, q_prompt), q_prompt, "prompt_type");
  f_test(r.sst, p - 1, "overall");
  return r;
}

}  // namespace biasline
