#include <doctest.h>

#include <random>

#include "biasline/error.hpp"
#include "biasline/metrics.hpp"
#include "stats_oracles.hpp"
#include "test_support.hpp"

using namespace biasline;
using testing::make_bundle;

namespace {

OccupationCounts counts(uint64_t female, uint64_t male) {
  OccupationCounts c;
  c.female_tokens = female;
  c.male_tokens = male;
  c.female_units = female;
  c.male_units = male;
  c.units_scanned = female + male;
  return c;
}

CountsTable planted_table(const std::vector<std::pair<std::string, double>>& plants, const LexiconBundle& b) {
  CountsTable t = CountsTable::zeros(b, CountMode::Sentence);
  for (const auto& [occ, p] : plants) {
    const auto f = static_cast<uint64_t>(std::llround(p * 1000));
    *t.find(occ) = counts(f, 1000 - f);
  }
  return t;
}

const std::vector<std::string> kSetups = {"baseline", "topk40", "topp09", "temp07"};
const std::vector<std::string> kPrompts = {"neutral", "positive", "negative"};

}  // namespace

TEST_CASE("observed probability") {
  auto p = observed_probability(counts(1, 3), Weighting::Token);
  REQUIRE(p);
  CHECK(p->p_male == 0.75);
  CHECK(p->p_female == 0.25);
  p = observed_probability(counts(7, 0), Weighting::Unit);
  CHECK(p->p_male == 0.0);
  CHECK(p->p_female == 1.0);
  CHECK(!observed_probability(counts(0, 0), Weighting::Token));

  OccupationCounts mixed;
  mixed.female_tokens = 6;
  mixed.female_units = 2;
  mixed.male_tokens = 2;
  mixed.male_units = 2;
  CHECK(observed_probability(mixed, Weighting::Token)->p_female == 0.75);
  CHECK(observed_probability(mixed, Weighting::Unit)->p_female == 0.5);
}

TEST_CASE("tvd examples") {
  const auto u = GenderDistribution::uniform();
  CHECK(tvd(u, u) == 0.0);
  CHECK(tvd({0.0, 1.0}, u) == 0.5);
  CHECK(tvd({0.152, 0.848}, u) == 0.348);
}

TEST_CASE("tvd is a metric on random pairs and triples") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0, 1);
  for (int i = 0; i < 2000; ++i) {
    const auto a = GenderDistribution::from_female(U(rng));
    const auto b = GenderDistribution::from_female(U(rng));
    const auto c = GenderDistribution::from_female(U(rng));
    CHECK(tvd(a, b) == tvd(b, a));
    CHECK(tvd(a, a) == 0.0);
    CHECK(tvd(a, b) <= tvd(a, c) + tvd(c, b) + 1e-15);
    CHECK(tvd(a, b) >= 0.0);
    CHECK(tvd(a, b) <= 1.0);
    CHECK(std::fabs(tvd(a, b) - std::fabs(a.p_female - b.p_female)) <= 1e-15);
    if (a.p_female != b.p_female) CHECK(tvd(a, b) > 0.0);
  }
}

TEST_CASE("sta examples") {
  const auto b = make_bundle({"she"}, {"he"}, {"a", "b", "c", "d"}, {{"a", "S1"}, {"b", "S1"}, {"c", "S2"}});
  CHECK(sta(planted_table({{"a", 0.5}}, b), ReferenceSpec::uniform(), b).overall == 0.0);
  CHECK(sta(planted_table({{"a", 1.0}, {"b", 0.0}}, b), ReferenceSpec::uniform(), b).overall == 0.5);

  const auto r = sta(planted_table({{"a", 0.9}, {"b", 0.7}, {"c", 0.5}, {"d", 0.3}}, b), ReferenceSpec::uniform(), b);
  CHECK(std::fabs(r.overall - 0.2) <= 1e-12);
  CHECK(std::fabs(r.sector_means.at("S1") - 0.3) <= 1e-12);
  CHECK(r.sector_means.at("S2") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.sector_sizes.at("S1") == 2);
  CHECK(r.sector_means.count("d") == 0);

  const auto partial = sta(planted_table({{"a", 0.9}}, b), ReferenceSpec::uniform(), b);
  CHECK(partial.excluded_no_counts == std::vector<std::string>{"b", "c", "d"});
  CHECK_THROWS_WITH_AS(sta(CountsTable::zeros(b, CountMode::Sentence), ReferenceSpec::uniform(), b),
                       "no occupations with counts", Error);
}

TEST_CASE("sta of the homemaker spot value") {
  const auto b = make_bundle({"she"}, {"he"}, {"homemaker"});
  CountsTable t = CountsTable::zeros(b, CountMode::Sentence);
  *t.find("homemaker") = counts(848, 152);
  CHECK(std::fabs(sta(t, ReferenceSpec::uniform(), b).overall - 0.348) <= 1e-12);
}

TEST_CASE("sta against a per-occupation reference") {
  const auto b = make_bundle({"she"}, {"he"}, {"a", "b", "c"});
  const auto t = planted_table({{"a", 0.9}, {"b", 0.2}, {"c", 0.5}}, b);
  ReferenceSpec ref{std::map<std::string, double>{{"a", 0.8}, {"b", 0.2}}};
  const auto r = sta(t, ref, b);
  CHECK(r.per_occupation.at("a") == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.per_occupation.at("b") == 0.0);
  CHECK(r.excluded_no_reference == std::vector<std::string>{"c"});

  // Against its own observed proportions every TVD is exactly zero.
  std::map<std::string, double> own = proportion_series(t, Weighting::Token);
  const auto self = sta(t, ReferenceSpec{own}, b);
  for (const auto& [occ, v] : self.per_occupation) CHECK(v <= 1e-15);
  CHECK(self.overall <= 1e-15);
}

TEST_CASE("sta is independent of occupation order") {
  std::mt19937_64 rng(4);
  std::vector<std::string> occ;
  for (int i = 0; i < 50; ++i) occ.push_back("o" + std::to_string(i));
  const auto b = make_bundle({"she"}, {"he"}, occ);
  CountsTable t = CountsTable::zeros(b, CountMode::Sentence);
  for (auto& c : t.counts) c = counts(rng() % 1000, rng() % 1000 + 1);
  const double base = sta(t, ReferenceSpec::uniform(), b).overall;
  for (int k = 0; k < 5; ++k) {
    std::vector<size_t> perm(occ.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    LexiconBundle pb = b;
    CountsTable pt = t;
    for (size_t i = 0; i < perm.size(); ++i) {
      pb.occupations[i] = b.occupations[perm[i]];
      pt.occupations[i] = t.occupations[perm[i]];
      pt.counts[i] = t.counts[perm[i]];
    }
    CHECK(sta(pt, ReferenceSpec::uniform(), pb).overall == base);
  }
}

TEST_CASE("amplification examples") {
  const std::map<std::string, double> same{{"x", 0.3}, {"y", 0.8}};
  CHECK(amplification(same, same).mean == 0.0);
  auto r = amplification({{"x", 0.60}}, {{"x", 0.50}});
  CHECK(r.mean == doctest::Approx(0.10).epsilon(1e-12));
  CHECK(r.mean_pp == doctest::Approx(10.0).epsilon(1e-12));
  r = amplification({{"a", 0.2}, {"b", 0.9}}, {{"a", 0.4}, {"b", 0.5}});
  CHECK(r.per_occupation.at("a") == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(r.per_occupation.at("b") == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(r.mean == doctest::Approx(0.1).epsilon(1e-12));
  r = amplification({{"a", 0.2}, {"g", 0.1}}, {{"a", 0.4}, {"t", 0.5}});
  CHECK(r.only_generated == std::vector<std::string>{"g"});
  CHECK(r.only_training == std::vector<std::string>{"t"});
  CHECK_THROWS_AS(amplification({{"a", 0.1}}, {{"b", 0.1}}), Error);
}

TEST_CASE("amplification anti-symmetry") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(0, 1);
  std::map<std::string, double> a, b;
  for (int i = 0; i < 100; ++i) {
    a["o" + std::to_string(i)] = U(rng);
    b["o" + std::to_string(i)] = U(rng);
  }
  const auto ab = amplification(a, b), ba = amplification(b, a);
  for (const auto& [k, v] : ab.per_occupation) CHECK(v == -ba.per_occupation.at(k));
  CHECK(std::fabs(ab.mean + ba.mean) <= 1e-12);
}

TEST_CASE("pearson examples") {
  const std::vector<double> x{1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 1);
  CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  CHECK(pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 1, 4, 3, 5};
  CHECK(std::fabs(pearson(a, b) - 0.8) <= 1e-12);
  CHECK_THROWS_WITH_AS(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}),
                       "undefined correlation", Error);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), Error);
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), Error);
}

TEST_CASE("pearson affine invariance and oracle agreement") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> U(0, 1);
  for (int s = 0; s < 50; ++s) {
    std::vector<double> x(30), y(30), xt(30), yn(30);
    for (size_t i = 0; i < x.size(); ++i) {
      x[i] = U(rng);
      y[i] = 0.5 * x[i] + U(rng);
      xt[i] = 3.0 * x[i] + 7.0;
      yn[i] = -y[i];
    }
    const double r = pearson(x, y);
    CHECK(std::fabs(r - oracle::pearson_closed_form(x, y)) <= 1e-12);
    CHECK(std::fabs(pearson(xt, y) - r) <= 1e-12);
    CHECK(std::fabs(pearson(x, yn) + r) <= 1e-12);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("incomplete beta and F tail") {
  CHECK(regularized_incomplete_beta(1, 1, 0.3) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(regularized_incomplete_beta(2, 3, 0.0) == 0.0);
  CHECK(regularized_incomplete_beta(2, 3, 1.0) == 1.0);
  // I_x(a, 1) = x^a
  CHECK(regularized_incomplete_beta(2.5, 1, 0.4) == doctest::Approx(std::pow(0.4, 2.5)).epsilon(1e-13));
  CHECK(regularized_incomplete_beta(3, 4, 0.35) + regularized_incomplete_beta(4, 3, 0.65) ==
        doctest::Approx(1.0).epsilon(1e-13));
  for (double f : {0.1, 0.5, 1.0, 2.5, 7.0, 30.0})
    for (auto [d1, d2] : {std::pair{1.0, 10.0}, {3.0, 20.0}, {5.0, 100.0}, {2.0, 7.0}})
      CHECK(std::fabs(f_distribution_sf(f, d1, d2) - oracle::f_upper_tail_integrated(f, d1, d2)) <= 1e-8);
  CHECK(f_distribution_sf(0.0, 2, 5) == 1.0);
}

TEST_CASE("factor levels: canonical order then sorted") {
  CHECK(factor_levels({"temp07", "baseline", "topk40", "baseline"}) ==
        std::vector<std::string>{"baseline", "topk40", "temp07"});
  CHECK(factor_levels({"negative", "zeta", "neutral", "alpha"}) ==
        std::vector<std::string>{"neutral", "negative", "alpha", "zeta"});
}

TEST_CASE("regression: noiseless planted prompt effect") {
  std::vector<RegressionObservation> obs;
  for (const auto& s : kSetups)
    for (const auto& p : kPrompts) obs.push_back({s, p, 0.5 + (p == "positive" ? 0.1 : 0.0)});
  REQUIRE(obs.size() == 12);
  const auto r = regress_gender_proportion(obs);
  CHECK(std::fabs(r.coefficients.at("prompt_type=positive") - 0.1) <= 1e-9);
  CHECK(std::fabs(r.coefficients.at("prompt_type=negative")) <= 1e-9);
  CHECK(std::fabs(r.coefficients.at("intercept") - 0.5) <= 1e-9);
  CHECK(std::fabs(r.r_squared - 1.0) <= 1e-9);
  CHECK(r.p_values.at("setup") == 1.0);
  CHECK(r.p_values.at("prompt_type") == 0.0);
  CHECK(r.n_observations == 12);
  CHECK(r.n_parameters == 6);
}

TEST_CASE("regression: constant response") {
  std::vector<RegressionObservation> obs;
  for (const auto& s : kSetups)
    for (const auto& p : kPrompts) obs.push_back({s, p, 0.4});
  const auto r = regress_gender_proportion(obs);
  for (const auto& [k, v] : r.coefficients)
    if (k != "intercept") CHECK(std::fabs(v) <= 1e-9);
  CHECK(std::fabs(r.r_squared) <= 1e-9);
  for (const auto& [k, v] : r.p_values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("regression: matches the normal-equations and integrated-F oracles") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> noise(0, 0.05);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<RegressionObservation> obs;
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 120; ++i) {
      const size_t s = rng() % 4, p = rng() % 3;
      const double v = 0.4 + 0.03 * s - 0.05 * (p == 2) + noise(rng);
      obs.push_back({kSetups[s], kPrompts[p], v});
      x.push_back({1.0, double(s == 1), double(s == 2), double(s == 3), double(p == 1), double(p == 2)});
      y.push_back(v);
    }
    const auto r = regress_gender_proportion(obs);
    const auto full = oracle::ols_normal_equations(x, y);
    const std::vector<std::string> names = {"intercept", "setup=topk40", "setup=topp09", "setup=temp07",
                                            "prompt_type=positive", "prompt_type=negative"};
    for (size_t k = 0; k < names.size(); ++k) CHECK(std::fabs(r.coefficients.at(names[k]) - full.beta[k]) <= 1e-9);
    CHECK(std::fabs(r.r_squared - full.r_squared) <= 1e-9);

    const double n = 120, p = 6;
    auto partial_p = [&](std::vector<size_t> drop) {
      std::vector<std::vector<double>> xr;
      for (const auto& row : x) {
        std::vector<double> kept;
        for (size_t c = 0; c < row.size(); ++c)
          if (std::find(drop.begin(), drop.end(), c) == drop.end()) kept.push_back(row[c]);
        xr.push_back(kept);
      }
      const auto reduced = oracle::ols_normal_equations(xr, y);
      const double q = static_cast<double>(drop.size());
      const double f = ((reduced.ssr - full.ssr) / q) / (full.ssr / (n - p));
      return oracle::f_upper_tail_integrated(f, q, n - p);
    };
    CHECK(std::fabs(r.p_values.at("setup") - partial_p({1, 2, 3})) <= 1e-6);
    CHECK(std::fabs(r.p_values.at("prompt_type") - partial_p({4, 5})) <= 1e-6);
    CHECK(std::fabs(r.p_values.at("overall") - partial_p({1, 2, 3, 4, 5})) <= 1e-6);
  }
}

TEST_CASE("regression: permutation of observations gives identical results") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0, 1);
  std::vector<RegressionObservation> obs;
  for (int i = 0; i < 60; ++i) obs.push_back({kSetups[rng() % 4], kPrompts[rng() % 3], U(rng)});
  const auto base = regress_gender_proportion(obs);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(obs.begin(), obs.end(), rng);
    const auto r = regress_gender_proportion(obs);
    CHECK(r.coefficients == base.coefficients);
    CHECK(r.r_squared == base.r_squared);
    CHECK(r.p_values == base.p_values);
  }
}

TEST_CASE("regression: error paths") {
  std::vector<RegressionObservation> one_level = {{"baseline", "neutral", 0.1}, {"baseline", "neutral", 0.2}};
  CHECK_THROWS_AS(regress_gender_proportion(one_level), Error);
  std::vector<RegressionObservation> few = {{"baseline", "neutral", 0.1}, {"topk40", "positive", 0.2}};
  CHECK_THROWS_AS(regress_gender_proportion(few), Error);
  // setup and prompt type always move together: collinear.
  std::vector<RegressionObservation> collinear;
  for (int i = 0; i < 10; ++i) {
    collinear.push_back({"baseline", "neutral", 0.1 * (i % 3)});
    collinear.push_back({"topk40", "positive", 0.2 + 0.01 * i});
  }
  try {
    regress_gender_proportion(collinear);
    FAIL("expected rank deficiency");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("topk40") != std::string::npos);
    CHECK(msg.find("positive") != std::string::npos);
  }
}
