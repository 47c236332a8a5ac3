// SPDX-License-Identifier: Apache-2.0
#include "neuroflow/analysis/cohort.hpp"
#include "neuroflow/analysis/figures.hpp"
#include "neuroflow/analysis/pipeline.hpp"
#include "neuroflow/analysis/stats.hpp"
#include "neuroflow/common/csv.hpp"
#include "neuroflow/common/io.hpp"
#include "neuroflow/common/random.hpp"
#include "support/cohort_fixture.hpp"
#include "support/stats_oracle.hpp"
#include "support/temp_dir.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>

using namespace neuroflow;
using namespace neuroflow::analysis;

namespace {

Eigen::MatrixXd to_eigen(const testing::Matrix& m) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m.front().size()));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m[i][j];
  return out;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

LabelRow label(std::string subject, std::string date, Diagnosis dx = Diagnosis::CN, double age = 70.0,
               Sex sex = Sex::F) {
  return {std::move(subject), std::move(date), dx, age, sex};
}

}  // namespace

TEST_CASE("t_cdf: symmetry point, tails and closed forms") {
  for (double df : {1.0, 2.0, 3.0, 7.0, 10.0, 48.0, 1000.0}) CHECK(t_cdf(0.0, df) == 0.5);
  CHECK(std::fabs(t_cdf(1e6, 10) - 1.0) < 1e-12);
  CHECK(t_cdf(-1e6, 10) < 1e-12);
  CHECK(t_cdf(std::numeric_limits<double>::infinity(), 5) == 1.0);

  // df=1 is Cauchy, df=2 has an algebraic CDF.
  for (double x : {-30.0, -2.5, -0.3, 0.1, 1.0, 4.0, 50.0}) {
    CHECK(std::fabs(t_cdf(x, 1) - (0.5 + std::atan(x) / std::numbers::pi)) < 1e-13);
    CHECK(std::fabs(t_cdf(x, 2) - (0.5 + x / (2.0 * std::sqrt(2.0 + x * x)))) < 1e-13);
  }
  CHECK_THROWS_AS(t_cdf(1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(t_cdf(1.0, -3.0), ConfigError);
}

TEST_CASE("t_cdf agrees with quadrature of the density") {
  // Frozen: t_cdf(2, 10) = 0.9633059826146297.
  CHECK(std::fabs(t_cdf(2.0, 10) - 0.9633059826146297) < 1e-12);
  CHECK(std::fabs(testing::quadrature_t_cdf(2.0, 10) - 0.9633059826146297) < 1e-8);

  double worst = 0.0;
  for (double df : {1.0, 2.0, 3.0, 5.0, 10.0, 25.0, 46.0, 100.0, 196.0})
    for (double x = -8.0; x <= 8.0; x += 0.37) worst = std::max(worst, std::fabs(t_cdf(x, df) - testing::quadrature_t_cdf(x, df)));
  CHECK_MESSAGE(worst < 1e-10, "max |error| ", worst);

  // Upper tail keeps precision where 1 - cdf would cancel.
  CHECK(std::fabs(t_sf(8.0, 40) / 3.952542055052272e-10 - 1.0) < 1e-9);
}

TEST_CASE("incomplete beta edges") {
  CHECK(incomplete_beta(0.0, 2.0, 3.0) == 0.0);
  CHECK(incomplete_beta(1.0, 2.0, 3.0) == 1.0);
  // I_x(1, 1) = x and I_x(a, 1) = x^a.
  for (double x : {0.1, 0.5, 0.9}) {
    CHECK(std::fabs(incomplete_beta(x, 1.0, 1.0) - x) < 1e-14);
    CHECK(std::fabs(incomplete_beta(x, 3.0, 1.0) - x * x * x) < 1e-14);
  }
  CHECK_THROWS_AS(incomplete_beta(1.5, 1.0, 1.0), ConfigError);
}

TEST_CASE("ols_fit matches the normal-equations oracle on 20 seeded fixtures") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto fx = testing::ols_fixture(seed);
    const auto got = ols_fit(to_eigen(fx.x), to_eigen(fx.y), {"Intercept", "a", "b", "c"});
    const auto want = testing::oracle_ols(fx.x, fx.y);
    REQUIRE(got.beta.size() == 4);
    CHECK(got.df_resid == 46);
    CHECK_FALSE(got.degenerate);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK_MESSAGE(std::fabs(got.beta[j] - want.beta[j]) < 1e-8, "seed ", seed, " beta ", j);
      CHECK_MESSAGE(std::fabs(got.se[j] - want.se[j]) < 1e-8, "seed ", seed, " se ", j);
      CHECK_MESSAGE(std::fabs(got.t[j] - want.t[j]) < 1e-8, "seed ", seed, " t ", j);
      CHECK_MESSAGE(std::fabs(got.p[j] - want.p[j]) < 1e-8, "seed ", seed, " p ", j);
      CHECK(got.p[j] >= 0.0);
      CHECK(got.p[j] <= 1.0);
    }
    CHECK(std::fabs(got.r2 - want.r2) < 1e-10);
  }
}

TEST_CASE("ols_fit residuals are orthogonal to the design") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto fx = testing::ols_fixture(seed);
    const auto x = to_eigen(fx.x);
    const auto y = to_eigen(fx.y);
    const auto fit = ols_fit(x, y);
    const Eigen::VectorXd beta = to_eigen(fit.beta);
    CHECK((x.transpose() * (y - x * beta)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("ols_fit is scale equivariant in y") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto fx = testing::ols_fixture(seed);
    const auto x = to_eigen(fx.x);
    const auto base = ols_fit(x, to_eigen(fx.y));
    for (double c : {-3.0, 1e-3, 250.0}) {
      const auto scaled = ols_fit(x, c * to_eigen(fx.y));
      for (std::size_t j = 0; j < base.beta.size(); ++j) {
        CHECK(std::fabs(scaled.beta[j] - c * base.beta[j]) <= 1e-10 * std::max(1.0, std::fabs(c * base.beta[j])));
        CHECK(std::fabs(scaled.t[j] - std::copysign(1.0, c) * base.t[j]) < 1e-10);
        CHECK(std::fabs(scaled.p[j] - base.p[j]) < 1e-10);
      }
      CHECK(std::fabs(scaled.r2 - base.r2) < 1e-10);
    }
  }
}

TEST_CASE("ols_fit exact fit, intercept-only model and errors") {
  Eigen::MatrixXd x(5, 2);
  Eigen::VectorXd y(5);
  for (int i = 0; i < 5; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = i;
    y(i) = 1.0 + 2.0 * i;
  }
  const auto exact = ols_fit(x, y, {"Intercept", "x"});
  CHECK(std::fabs(exact.beta[0] - 1.0) < 1e-12);
  CHECK(std::fabs(exact.beta[1] - 2.0) < 1e-12);
  CHECK(exact.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exact.rss < 1e-20);
  CHECK(exact.degenerate);
  CHECK(exact.p == std::vector<double>{0.0, 0.0});

  const Eigen::VectorXd yy = (Eigen::VectorXd(4) << 2.0, 4.0, 9.0, 1.0).finished();
  const auto mean_only = ols_fit(Eigen::MatrixXd::Ones(4, 1), yy, {"Intercept"});
  CHECK(mean_only.beta[0] == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(mean_only.r2 == doctest::Approx(0.0));

  Eigen::MatrixXd collinear(6, 3);
  for (int i = 0; i < 6; ++i) collinear.row(i) << 1.0, i, 2.0 * i;
  const Eigen::VectorXd y6 = Eigen::VectorXd::LinSpaced(6, 0.0, 1.0) + Eigen::VectorXd::Constant(6, 0.3);
  try {
    ols_fit(collinear, y6, {"Intercept", "age", "age_twice"});
    FAIL("expected RankDeficientError");
  } catch (const RankDeficientError& e) {
    REQUIRE(e.columns().size() == 1);
    CHECK((e.columns()[0] == "age" || e.columns()[0] == "age_twice"));
    CHECK(std::string(e.what()).find(e.columns()[0]) != std::string::npos);
  }
  CHECK_THROWS_AS(ols_fit(Eigen::MatrixXd::Ones(2, 2), Eigen::VectorXd::Ones(2)), ConfigError);
  CHECK_THROWS_AS(ols_fit(Eigen::MatrixXd::Ones(4, 1), Eigen::VectorXd::Ones(3)), ConfigError);
}

TEST_CASE("bh_fdr worked examples") {
  const auto a = bh_fdr({0.01, 0.02, 0.03, 0.04});
  for (double v : a.adjusted_p) CHECK(v == doctest::Approx(0.04).epsilon(1e-15));
  CHECK(a.method == "BH");
  const auto b = bh_fdr({0.005, 0.5});
  CHECK(b.adjusted_p[0] == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(b.adjusted_p[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(bh_fdr({0.2}).adjusted_p == std::vector<double>{0.2});
  // Input order is preserved.
  const auto c = bh_fdr({0.04, 0.5, 0.01});
  CHECK(c.adjusted_p[0] == doctest::Approx(0.06));
  CHECK(c.adjusted_p[1] == doctest::Approx(0.5));
  CHECK(c.adjusted_p[2] == doctest::Approx(0.03));
  CHECK(bh_fdr({}).adjusted_p.empty());
  CHECK_THROWS_AS(bh_fdr({0.1, 1.5}), ConfigError);
  CHECK_THROWS_AS(bh_fdr({std::nan("")}), ConfigError);
}

TEST_CASE("bh_fdr matches the rejection-rule oracle on 1000 random vectors") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto m = 1 + rng.index(40);
    std::vector<double> p;
    for (std::size_t i = 0; i < m; ++i) {
      double v = rng.uniform();
      if (trial % 3 == 0) v = std::round(v * 20) / 20;  // ties
      if (trial % 5 == 0) v *= 1e-4;
      p.push_back(v);
    }
    const auto got = bh_fdr(p);
    const auto want = testing::brute_bh(p);
    for (std::size_t i = 0; i < m; ++i) {
      CHECK_MESSAGE(std::fabs(got.adjusted_p[i] - want[i]) < 1e-15, "trial ", trial, " index ", i);
      CHECK(got.adjusted_p[i] >= p[i]);
      CHECK(got.adjusted_p[i] <= 1.0);
      for (std::size_t j = 0; j < m; ++j)
        if (p[i] < p[j]) CHECK(got.adjusted_p[i] <= got.adjusted_p[j]);
    }
    // Re-adjusting never lowers a value.
    const auto again = bh_fdr(got.adjusted_p);
    for (std::size_t i = 0; i < m; ++i) CHECK(again.adjusted_p[i] >= got.adjusted_p[i]);
  }
}

TEST_CASE("bh_fdr is not idempotent in general") {
  // Re-adjusting [0.01, 0.5] multiplies the smaller value by m/rank again.
  const auto once = bh_fdr({0.005, 0.5});
  const auto twice = bh_fdr(once.adjusted_p);
  CHECK(twice.adjusted_p[0] == doctest::Approx(0.02));
  // A vector already at its fixed point stays there.
  const auto flat = bh_fdr({0.04, 0.04, 0.04, 0.04});
  CHECK(flat.adjusted_p == std::vector<double>(4, 0.04));
}

TEST_CASE("match_visits examples") {
  CHECK(days_between("2020-01-15", "2020-03-01") == 46);
  CHECK(days_between("2020-02-28", "2020-03-01") == 2);
  CHECK(days_between("2021-02-28", "2021-03-01") == 1);

  auto r = match_visits({label("A", "2020-01-15")}, {{"A", "2020-01-20"}, {"A", "2020-03-01"}}, 30);
  REQUIRE(r.matched.size() == 1);
  CHECK(r.matched[0].scan_date == "2020-01-20");
  CHECK(r.matched[0].mismatch_days == 5);

  r = match_visits({label("A", "2020-01-15")}, {{"A", "2020-03-01"}}, 30);
  CHECK(r.matched.empty());
  CHECK(r.unmatched.size() == 1);

  r = match_visits({label("A", "2020-01-15")}, {{"A", "2020-01-22"}, {"A", "2020-01-08"}}, 30);
  REQUIRE(r.matched.size() == 1);
  CHECK(r.matched[0].scan_date == "2020-01-08");
  CHECK(r.matched[0].mismatch_days == 7);

  // The window is inclusive; other subjects' scans never match.
  r = match_visits({label("A", "2020-01-15"), label("B", "2020-01-15")}, {{"A", "2020-02-14"}}, 30);
  CHECK(r.matched.size() == 1);
  CHECK(r.unmatched.size() == 1);
  CHECK(r.unmatched[0].subject_id == "B");
  CHECK_THROWS_AS(match_visits({}, {}, 0), ConfigError);
  CHECK_THROWS_AS(match_visits({label("A", "2020-02-30")}, {}, 30), ConfigError);
}

TEST_CASE("match_visits is optimal against brute force") {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<LabelRow> labels;
    std::vector<Scan> scans;
    const std::chrono::sys_days base = std::chrono::year{2020} / 1 / 1;
    for (int s = 0; s < 4; ++s) {
      const auto id = "S" + std::to_string(s);
      for (std::size_t i = rng.index(3); i > 0; --i)
        labels.push_back(label(id, testing::iso_date(base + std::chrono::days{static_cast<int>(rng.index(200))})));
      for (std::size_t i = rng.index(5); i > 0; --i)
        scans.push_back({id, testing::iso_date(base + std::chrono::days{static_cast<int>(rng.index(200))})});
    }
    const int window = 1 + static_cast<int>(rng.index(40));
    const auto r = match_visits(labels, scans, window);
    CHECK(r.matched.size() + r.unmatched.size() == labels.size());

    for (const auto& u : r.unmatched)
      for (const auto& s : scans)
        if (s.subject_id == u.subject_id) CHECK(std::abs(days_between(u.reference_date, s.date)) > window);
    for (const auto& m : r.matched) {
      std::optional<std::string> best;
      int gap = 0;
      for (const auto& s : scans) {
        if (s.subject_id != m.label.subject_id) continue;
        const int g = std::abs(days_between(m.label.reference_date, s.date));
        if (g > window) continue;
        if (!best || g < gap || (g == gap && s.date < *best)) {
          best = s.date;
          gap = g;
        }
      }
      REQUIRE(best);
      CHECK(m.scan_date == *best);
      CHECK(m.mismatch_days == gap);
    }
  }
}

TEST_CASE("encode_design coding and formula parsing") {
  const std::vector<MatchedVisit> rows{{label("A", "2020-01-01", Diagnosis::CN, 61.0, Sex::F), "2020-01-01", 0},
                                       {label("B", "2020-01-01", Diagnosis::MCI, 72.5, Sex::M), "2020-01-01", 0},
                                       {label("C", "2020-01-01", Diagnosis::AD, 80.0, Sex::M), "2020-01-01", 0}};
  const auto d = encode_design(rows, parse_formula("y ~ age + sex + diagnosis"));
  CHECK(d.terms == std::vector<std::string>{"Intercept", "age", "sex[M]", "dx[MCI]", "dx[AD]"});
  Eigen::MatrixXd want(3, 5);
  want << 1, 61.0, 0, 0, 0,  //
      1, 72.5, 1, 1, 0,      //
      1, 80.0, 1, 0, 1;
  CHECK(d.x == want);

  const auto f = parse_formula(" thickness_* ~ dx + age ");
  CHECK(f.response == "thickness_*");
  CHECK(f.covariates == std::vector<std::string>{"diagnosis", "age"});
  CHECK(encode_design(rows, f).terms == std::vector<std::string>{"Intercept", "dx[MCI]", "dx[AD]", "age"});
  CHECK(parse_formula("y ~ 1").covariates.empty());
  CHECK_THROWS_AS(parse_formula("y age"), ConfigError);
  CHECK_THROWS_AS(parse_formula("~ age"), ConfigError);
  CHECK_THROWS_AS(parse_formula("y ~ age + apoe"), ConfigError);
  CHECK_THROWS_AS(parse_formula("y ~ age + age"), ConfigError);
}

TEST_CASE("synthetic cohort recovers the planted age slopes") {
  const auto c = testing::synthetic_cohort(
      11, 200, {{Diagnosis::CN, 0.0}, {Diagnosis::MCI, -0.006}, {Diagnosis::AD, -0.02}});
  const auto match = match_visits(c.labels, c.features.scans());
  REQUIRE(match.matched.size() == 600);
  const auto fits = group_age_regressions(c.features, match.matched, "thickness");
  REQUIRE(fits.size() == 3);
  for (const auto& g : fits) {
    CHECK(g.fit.n == 200);
    CHECK(g.fit.terms == std::vector<std::string>{"Intercept", "age"});
  }
  const auto& ad = fits[2].fit;
  CHECK(fits[2].group == Diagnosis::AD);
  CHECK(ad.beta[1] < 0.0);
  CHECK(ad.p[1] < 0.01);
  CHECK(std::fabs(ad.beta[1] + 0.02) < 0.005);
  CHECK(std::fabs(fits[0].fit.beta[1]) < 0.005);

  // The covariate-adjusted model sees the AD effect as lower thickness in older AD subjects on average.
  const auto report = fit_feature_models(c.features, match.matched, parse_formula("thickness ~ age + sex + diagnosis"));
  REQUIRE(report.models.size() == 1);
  const auto& fit = report.models[0].fit;
  CHECK(fit.terms.size() == 5);
  CHECK(fit.beta[fit.index("sex[M]")] > 0.0);
}

TEST_CASE("label and feature tables parse with aliases and missing cells") {
  const auto labels = parse_labels(
      "PTID,RefDate,DX,Age,PTGENDER\n"
      "002_S_0413,2020-01-15,CN,71.5,Female\n"
      "003_S_1000,20200302,ad,80,M\n");
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].subject_id == "002_S_0413");
  CHECK(labels[1].reference_date == "2020-03-02");
  CHECK(labels[1].diagnosis == Diagnosis::AD);
  CHECK(labels[0].sex == Sex::F);

  const auto t = parse_features("SubjectID,Date,lh_a,rh_b\nB,2020-01-01,1.5,NA\nA,2020-01-02,,2e-1\n");
  CHECK(t.features == std::vector<std::string>{"lh_a", "rh_b"});
  REQUIRE(t.keys.size() == 2);
  CHECK(t.keys[0].subject_id == "A");
  CHECK_FALSE(t.values[0][0]);
  CHECK(*t.values[0][1] == 0.2);
  CHECK(*t.values[1][0] == 1.5);
  CHECK_FALSE(t.values[1][1]);
  CHECK(t.row({"B", "2020-01-01"}) == std::optional<std::size_t>(1));
  CHECK_FALSE(t.row({"B", "2020-01-02"}));

  CHECK_THROWS_AS(parse_labels("SubjectID,RefDate,Diagnosis,Age,Sex\nA,2020-01-01,XX,70,F\n"), ConfigError);
  CHECK_THROWS_AS(parse_labels("SubjectID,RefDate,Diagnosis,Age,Sex\nA,2020-01-01,CN,-1,F\n"), ConfigError);
  CHECK_THROWS_AS(parse_labels("SubjectID,RefDate,Diagnosis,Sex\nA,2020-01-01,CN,F\n"), ConfigError);
  CHECK_THROWS_AS(parse_features("SubjectID,Date,f\nA,2020-01-01,inf\n"), ConfigError);
  CHECK_THROWS_AS(parse_features("SubjectID,Date,f\nA,2020-01-01,abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_features("SubjectID,Date,f\nA,2020-01-01,1\nA,2020-01-01,2\n"), ConfigError);
}

TEST_CASE("per-feature models are complete-case and FDR-corrected per term") {
  auto c = testing::synthetic_cohort(5, 30, {{Diagnosis::CN, 0.0}, {Diagnosis::MCI, -0.01}, {Diagnosis::AD, -0.02}});
  // Second feature: pure noise with five missing cells.
  Rng rng(9);
  c.features.features.push_back("noise");
  for (std::size_t i = 0; i < c.features.values.size(); ++i)
    c.features.values[i].push_back(i < 5 ? std::nullopt : std::optional<double>(rng.normal()));
  const auto match = match_visits(c.labels, c.features.scans());
  const auto report = fit_feature_models(c.features, match.matched, parse_formula("* ~ age + sex + diagnosis"));
  REQUIRE(report.models.size() == 2);
  CHECK(report.models[0].fit.n == 90);
  CHECK(report.models[1].fit.n == 85);
  for (const auto& term : report.models[0].fit.terms) {
    const auto want = bh_fdr({report.models[0].fit.p[report.models[0].fit.index(term)],
                              report.models[1].fit.p[report.models[1].fit.index(term)]});
    CHECK(report.p_fdr(0, term) == want.adjusted_p[0]);
    CHECK(report.p_fdr(1, term) == want.adjusted_p[1]);
  }

  const auto table = csv::parse_table(stats_report_csv(report));
  CHECK(table.header == csv::Row{"feature", "term", "n", "beta", "se", "t", "p", "p_fdr", "degenerate"});
  CHECK(table.rows.size() == 10);

  CHECK_THROWS_AS(fit_feature_models(c.features, match.matched, parse_formula("missing ~ age")), ConfigError);
  const auto few = fit_feature_models(c.features, {match.matched.begin(), match.matched.begin() + 4},
                                      parse_formula("thickness ~ age + sex + diagnosis"));
  CHECK(few.models.empty());
  CHECK(few.skipped.size() == 1);
}

TEST_CASE("box summary quartiles and whiskers") {
  const auto b = box_summary({9, 1, 2, 3, 4, 5, 6, 7, 8, 100});
  CHECK(b.n == 10);
  CHECK(b.median == doctest::Approx(5.5));
  CHECK(b.q1 == doctest::Approx(3.25));
  CHECK(b.q3 == doctest::Approx(7.75));
  CHECK(b.whisker_low == 1.0);
  CHECK(b.whisker_high == 9.0);
  CHECK(b.outliers == std::vector<double>{100.0});
  const auto one = box_summary({4.0});
  CHECK(one.median == 4.0);
  CHECK(one.whisker_low == 4.0);
  CHECK_THROWS_AS(box_summary({}), ConfigError);
}

TEST_CASE("figure data carries points, fits and group summaries") {
  const auto c = testing::synthetic_cohort(3, 40, {{Diagnosis::CN, 0.0}, {Diagnosis::AD, -0.02}});
  const auto match = match_visits(c.labels, c.features.scans());
  const auto data = collect_feature(c.features, match.matched, "thickness");
  CHECK(data.points.size() == 80);

  const auto scatter = emit_figure_data(data, FigureKind::SCATTER_FIT);
  CHECK(scatter.data["kind"] == "SCATTER_FIT");
  REQUIRE(scatter.data["groups"].size() == 2);
  CHECK(scatter.data["groups"][0]["group"] == "CN");
  CHECK(scatter.data["groups"][1]["points"].size() == 40);
  CHECK(scatter.data["groups"][1]["fit"]["slope"].get<double>() == data.fits[1].fit.beta[1]);
  CHECK(scatter.svg.rfind("<svg", 0) == 0);
  CHECK(scatter.svg.find("</svg>") != std::string::npos);

  const auto box = emit_figure_data(data, FigureKind::GROUP_BOX);
  CHECK(box.data["kind"] == "GROUP_BOX");
  const auto& ad = box.data["groups"][1];
  std::vector<double> values;
  for (const auto& p : ad["points"]) values.push_back(p["y"].get<double>());
  const auto want = box_summary(values);
  CHECK(ad["median"].get<double>() == want.median);
  CHECK(ad["whisker_high"].get<double>() == want.whisker_high);
  CHECK(box.svg.find("AD (n=40)") != std::string::npos);
  CHECK(parse_figure_kind("GROUP_BOX") == FigureKind::GROUP_BOX);
  CHECK_THROWS_AS(parse_figure_kind("PIE"), ConfigError);
}

TEST_CASE("run_stats writes the report, matching summary and figures") {
  testing::TempDir tmp;
  const auto c = testing::synthetic_cohort(21, 25, {{Diagnosis::CN, 0.0}, {Diagnosis::MCI, -0.01}, {Diagnosis::AD, -0.02}});
  std::vector<csv::Row> labels{{"SubjectID", "RefDate", "Diagnosis", "Age", "Sex"}};
  for (const auto& l : c.labels)
    labels.push_back({l.subject_id, l.reference_date, std::string(to_string(l.diagnosis)), std::to_string(l.age),
                      std::string(to_string(l.sex))});
  labels.push_back({"S9999", "2020-06-01", "CN", "70", "F"});  // no scan
  std::vector<csv::Row> features{{"SubjectID", "Date", "thickness"}};
  for (std::size_t i = 0; i < c.features.keys.size(); ++i)
    features.push_back({c.features.keys[i].subject_id, c.features.keys[i].date, std::to_string(*c.features.values[i][0])});
  write_file(tmp / "labels.csv", csv::emit(labels));
  write_file(tmp / "features.csv", csv::emit(features));

  StatsOptions opts;
  opts.labels_csv = tmp / "labels.csv";
  opts.features_csv = tmp / "features.csv";
  opts.out_dir = tmp / "out";
  const auto run = run_stats(opts);
  CHECK(run.labels == 76);
  CHECK(run.matched == 75);
  CHECK(run.unmatched == 1);
  CHECK(fs::exists(tmp / "out" / "stats_report.csv"));
  CHECK(fs::exists(tmp / "out" / "group_regressions.csv"));
  CHECK(fs::exists(tmp / "out" / "figures" / "thickness.scatter.json"));
  CHECK(fs::exists(tmp / "out" / "figures" / "thickness.box.svg"));
  const auto matching = nlohmann::json::parse(read_file(tmp / "out" / "matching.json"));
  CHECK(matching["unmatched"].size() == 1);
  CHECK(matching["unmatched"][0]["subject_id"] == "S9999");
  CHECK(csv::parse_table(read_file(tmp / "out" / "group_regressions.csv")).rows.size() == 3);
}
