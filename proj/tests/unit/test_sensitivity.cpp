#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "drest/errors.hpp"
#include "drest/random.hpp"
#include "drest/sensitivity.hpp"

using namespace drest;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

ModelSpec propensity(std::vector<std::size_t> cols, std::string label,
                     PropensityKind kind = PropensityKind::logistic_mle) {
  ModelSpec s;
  s.role = ModelRole::propensity;
  s.covariates = std::move(cols);
  s.propensity_kind = kind;
  s.label = std::move(label);
  return s;
}

ModelSpec outcome(std::vector<std::size_t> cols, std::string label) {
  ModelSpec s;
  s.role = ModelRole::outcome;
  s.covariates = std::move(cols);
  s.label = std::move(label);
  return s;
}

const std::vector<std::size_t> kZ{0, 1, 2, 3};
const std::vector<std::size_t> kX{4, 5, 6, 7};

// Chi-square upper tail for 1 and 2 degrees of freedom in closed form.
double chi2_sf_df1(double w) { return std::erfc(std::sqrt(w / 2)); }
double chi2_sf_df2(double w) { return std::exp(-w / 2); }

}  // namespace

TEST_CASE("model spec validation") {
  CHECK_THROWS_AS(propensity({}, "empty").validate(8), InvalidArgument);
  CHECK_THROWS_AS(propensity({9}, "range").validate(8), InvalidArgument);
  CHECK_THROWS_AS(propensity({1}, "ext", PropensityKind::logistic_extended).validate(8), InvalidArgument);
  CHECK_NOTHROW(outcome({0, 7}, "ok").validate(8));
}

TEST_CASE("sensitivity data layout") {
  const FullSample f = generate_sample(30, 2);
  const SensitivityData d = sensitivity_data(f);
  CHECK(d.covariates.cols() == 8);
  CHECK(d.covariates.leftCols(4) == f.z);
  CHECK(d.covariates.rightCols(4) == f.x);
  CHECK(std::isnan(d.y[static_cast<Eigen::Index>(std::find(f.t.data(), f.t.data() + 30, 0.0) - f.t.data())]));
  const std::vector<std::size_t> rows{3, 3, 0};
  const SensitivityData r = d.resample(rows);
  CHECK(r.size() == 3);
  CHECK(r.covariates.row(0) == d.covariates.row(3));
  CHECK(r.covariates.row(2) == d.covariates.row(0));
  CHECK(design_for(d, outcome({5, 1}, "o")).col(0).isOnes());
  CHECK(design_for(d, outcome({5, 1}, "o")).col(1) == f.x.col(1));
}

TEST_CASE("1 x 1 matrix agrees with estimate_all") {
  const FullSample f = generate_sample(500, 5);
  const SensitivityData d = sensitivity_data(f);
  const std::vector<ModelSpec> p{propensity(kX, "px")};
  const std::vector<ModelSpec> o{outcome(kZ, "oz")};
  const AnalysisView v = make_view(f, false, true);
  for (auto e : {EstimatorName::dr_reg, EstimatorName::dr_wls, EstimatorName::dr_ipw_nr, EstimatorName::dr_ext_reg,
                 EstimatorName::b_dr_reg, EstimatorName::b_dr_ext}) {
    CAPTURE(to_string(e));
    const Eigen::MatrixXd m = build_matrix(d, p, o, e);
    const std::vector<EstimatorName> which{e};
    CHECK(m(0, 0) == doctest::Approx(*estimate_all(v, which).value(e)).epsilon(1e-12));
  }
}

TEST_CASE("duplicate specs give identical columns") {
  const SensitivityData d = sensitivity_data(generate_sample(400, 6));
  const std::vector<ModelSpec> p{propensity(kZ, "pz"), propensity(kX, "px")};
  const std::vector<ModelSpec> o{outcome(kX, "a"), outcome(kZ, "b"), outcome(kX, "a again")};
  const Eigen::MatrixXd m = build_matrix(d, p, o, EstimatorName::dr_wls);
  CHECK(m.col(0) == m.col(2));
  CHECK(m.col(0) != m.col(1));
}

TEST_CASE("non-DR estimators and bad spec lists are rejected") {
  const SensitivityData d = sensitivity_data(generate_sample(100, 6));
  const std::vector<ModelSpec> p{propensity(kZ, "pz")};
  const std::vector<ModelSpec> o{outcome(kZ, "oz")};
  CHECK_THROWS_AS(build_matrix(d, p, o, EstimatorName::ols), InvalidArgument);
  CHECK_THROWS_AS(build_matrix(d, p, o, EstimatorName::ht), InvalidArgument);
  CHECK_THROWS_AS(build_matrix(d, p, o, EstimatorName::full), InvalidArgument);
  CHECK_THROWS_AS(build_matrix(d, {}, o, EstimatorName::dr_reg), InvalidArgument);
  CHECK_THROWS_AS(build_matrix(d, o, o, EstimatorName::dr_reg), InvalidArgument);
}

TEST_CASE("failed fits leave NaN entries") {
  SensitivityData d;
  d.covariates = Eigen::MatrixXd(6, 1);
  d.covariates << 0.1, 0.5, 0.9, 1.4, 2.2, 3.0;
  d.t = Eigen::VectorXd(6);
  d.t << 1, 1, 1, 0, 0, 0;
  d.y = Eigen::VectorXd(6);
  d.y << 1, 2, 3, kNaN, kNaN, kNaN;
  const std::vector<ModelSpec> p{propensity({0}, "separated")};
  const std::vector<ModelSpec> o{outcome({0}, "o")};
  CHECK(std::isnan(build_matrix(d, p, o, EstimatorName::dr_reg)(0, 0)));
}

TEST_CASE("inverse-linear propensity specs") {
  // Seed 7 gives positive unconstrained weights for every respondent; seed 8
  // does not.
  for (std::uint64_t seed : {7, 8}) {
    CAPTURE(seed);
    const FullSample f = generate_sample(300, seed);
    const SensitivityData d = sensitivity_data(f);
    const std::vector<ModelSpec> p{propensity(kX, "ml", PropensityKind::inv_linear_ml),
                                   propensity(kX, "mom", PropensityKind::inv_linear_moment),
                                   propensity(kX, "free", PropensityKind::inv_linear_unconstrained)};
    const std::vector<ModelSpec> o{outcome(kX, "ox")};
    const Eigen::MatrixXd m = build_matrix(d, p, o, EstimatorName::dr_reg);
    CHECK(std::isfinite(m(0, 0)));
    CHECK(std::isfinite(m(1, 0)));

    // With a linear outcome fit on the same design, AIPW under the
    // unconstrained fit reduces to the regression mean.
    const AnalysisView v = make_view(f, false, false);
    const PropensityFit u = fit_inverse_linear(v.design_pi, v.t, InverseLinearMethod::unconstrained_moment);
    bool usable = true;
    for (Eigen::Index i = 0; i < v.t.size(); ++i) usable = usable && (v.t[i] == 0 || u.pi_hat[i] > 0);
    CHECK(usable == (seed == 7));
    if (usable) CHECK(m(2, 0) == doctest::Approx(fit_outcome_reg(v).m_hat.mean()).epsilon(1e-9));
    else CHECK(std::isnan(m(2, 0)));
  }
}

TEST_CASE("Wald homogeneity: degenerate lines") {
  const Eigen::VectorXd one = Eigen::VectorXd::Constant(1, 3.0);
  CHECK(wald_homogeneity(one, Eigen::MatrixXd::Random(10, 1)).p_value == 1.0);

  const Eigen::VectorXd flat = Eigen::VectorXd::Constant(3, 2.5);
  const Eigen::MatrixXd same = Eigen::MatrixXd::Constant(20, 3, 2.5);
  const HomogeneityResult r = wald_homogeneity(flat, same);
  CHECK(r.statistic == 0);
  CHECK(r.p_value == 1.0);

  Eigen::VectorXd bad = flat;
  bad[1] = kNaN;
  CHECK_FALSE(wald_homogeneity(bad, same).defined);

  Eigen::VectorXd apart = flat;
  apart[2] = 4;
  const HomogeneityResult z = wald_homogeneity(apart, same);
  CHECK(z.p_value == 0.0);
  CHECK_FALSE(z.note.empty());
}

TEST_CASE("Wald homogeneity: closed-form chi-square tails") {
  Rng rng(3);
  const int b = 400;
  Eigen::MatrixXd draws(b, 3);
  for (int k = 0; k < b; ++k) {
    const double common = rng.normal();
    draws(k, 0) = common + 0.5 * rng.normal();
    draws(k, 1) = common + 0.3 * rng.normal();
    draws(k, 2) = common + 0.8 * rng.normal();
  }
  const Eigen::Vector3d line(1.0, 1.4, 0.2);

  SUBCASE("two models") {
    const HomogeneityResult r = wald_homogeneity(line.head(2), draws.leftCols(2));
    const Eigen::VectorXd c = draws.col(0) - draws.col(1);
    const double var = (c.array() - c.mean()).square().sum() / (b - 1);
    const double w = 0.4 * 0.4 / var;
    CHECK(r.df == 1);
    CHECK(r.statistic == doctest::Approx(w).epsilon(1e-10));
    CHECK(r.p_value == doctest::Approx(chi2_sf_df1(w)).epsilon(1e-10));
  }

  SUBCASE("three models") {
    const HomogeneityResult r = wald_homogeneity(line, draws);
    Eigen::MatrixXd c(b, 2);
    c.col(0) = draws.col(0) - draws.col(1);
    c.col(1) = draws.col(0) - draws.col(2);
    const Eigen::RowVector2d mean = c.colwise().mean();
    const Eigen::MatrixXd centred = c.rowwise() - mean;
    const Eigen::Matrix2d cov = centred.transpose() * centred / (b - 1);
    const Eigen::Vector2d d(line[0] - line[1], line[0] - line[2]);
    const double w = d.dot(cov.inverse() * d);
    CHECK(r.df == 2);
    CHECK(r.statistic == doctest::Approx(w).epsilon(1e-9));
    CHECK(r.p_value == doctest::Approx(chi2_sf_df2(w)).epsilon(1e-9));

    // Re-anchoring on another model spans the same contrasts.
    const Eigen::Vector3d perm(line[1], line[0], line[2]);
    Eigen::MatrixXd pd(b, 3);
    pd << draws.col(1), draws.col(0), draws.col(2);
    CHECK(wald_homogeneity(perm, pd).statistic == doctest::Approx(r.statistic).epsilon(1e-9));
  }

  SUBCASE("rank deficiency reduces the degrees of freedom") {
    Eigen::MatrixXd dd = draws;
    dd.col(2) = dd.col(1);  // contrasts 0-1 and 0-2 coincide
    const Eigen::Vector3d l(1.0, 1.4, 1.4);
    const HomogeneityResult r = wald_homogeneity(l, dd);
    CHECK(r.reduced_rank);
    CHECK(r.df == 1);
    const Eigen::VectorXd c = dd.col(0) - dd.col(1);
    const double var = (c.array() - c.mean()).square().sum() / (b - 1);
    // The pseudo-inverse splits the contrast across the repeated direction.
    CHECK(r.statistic == doctest::Approx(0.4 * 0.4 / var).epsilon(1e-8));
    CHECK(r.p_value >= 0);
    CHECK(r.p_value <= 1);
  }

  SUBCASE("draws with a failed entry are dropped") {
    Eigen::MatrixXd dd = draws;
    dd(0, 1) = kNaN;
    CHECK(wald_homogeneity(line, dd).draws == static_cast<std::size_t>(b - 1));
  }
}

TEST_CASE("model selection") {
  const std::vector<double> p{0.1, 0.9}, s{1.0, 1.0};
  CHECK(select_models(p, s, p, s).i_star == 1);

  const std::vector<double> tied{0.5, 0.5}, spread{5.0, 0.2};
  CHECK(select_models(tied, spread, tied, spread).j_star == 1);

  const std::vector<double> same{0.5, 0.5}, even{1.0, 1.0};
  CHECK(select_models(same, even, same, even).i_star == 0);

  const std::vector<double> with_nan{kNaN, 0.01};
  CHECK(select_models(with_nan, even, with_nan, even).i_star == 1);
}

TEST_CASE("bootstrap is reproducible and independent of workers") {
  const SensitivityData d = sensitivity_data(generate_sample(300, 12));
  const std::vector<ModelSpec> p{propensity(kZ, "pz"), propensity(kX, "px")};
  const std::vector<ModelSpec> o{outcome(kZ, "oz"), outcome(kX, "ox")};
  const auto a = bootstrap_matrices(d, p, o, EstimatorName::dr_wls, 20, 99, 1);
  const auto b = bootstrap_matrices(d, p, o, EstimatorName::dr_wls, 20, 99, 4);
  const auto c = bootstrap_matrices(d, p, o, EstimatorName::dr_wls, 20, 100, 1);
  REQUIRE(a.size() == 20);
  bool differs = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k] == b[k]);
    differs = differs || a[k] != c[k];
  }
  CHECK(differs);

  const SensitivityMatrix m1 = analyze_sensitivity(d, p, o, EstimatorName::dr_wls, {50, 7, 1});
  const SensitivityMatrix m2 = analyze_sensitivity(d, p, o, EstimatorName::dr_wls, {50, 7, 3});
  CHECK(m1.estimates == m2.estimates);
  CHECK(m1.row_p_values == m2.row_p_values);
  CHECK(m1.col_p_values == m2.col_p_values);
  for (double v : m1.row_p_values) {
    CHECK(v >= 0);
    CHECK(v <= 1);
  }
  CHECK(m1.selection.i_star < 2);
  CHECK(m1.selection.j_star < 2);
  CHECK(m1.row_spread[0] == doctest::Approx(std::abs(m1.estimates(0, 0) - m1.estimates(0, 1))));
}

TEST_CASE("single-model lines have p = 1") {
  const SensitivityData d = sensitivity_data(generate_sample(300, 13));
  const std::vector<ModelSpec> p{propensity(kZ, "pz"), propensity(kX, "px")};
  const std::vector<ModelSpec> o{outcome(kX, "ox")};
  const SensitivityMatrix m = analyze_sensitivity(d, p, o, EstimatorName::dr_wls, {30, 1, 1});
  REQUIRE(m.row_p_values.size() == 2);
  CHECK(m.row_p_values[0] == 1.0);
  CHECK(m.row_p_values[1] == 1.0);
  CHECK(homogeneity_test(d, o[0], std::span<const ModelSpec>(p).first(1), EstimatorName::dr_wls, 30, 1).p_value ==
        1.0);
}

TEST_CASE("homogeneity test power grows with n") {
  // Outcome model wrong; propensity lines compare the wrong and the correct
  // propensity model, whose DR_WLS limits differ by about three units.
  const auto rejection_rate = [](std::size_t n) {
    int rejected = 0;
    const int datasets = 12;
    for (int k = 0; k < datasets; ++k) {
      const SensitivityData d = sensitivity_data(generate_sample(n, derive_seed(555, static_cast<std::uint64_t>(k))));
      const std::vector<ModelSpec> p{propensity(kX, "px"), propensity(kZ, "pz")};
      const HomogeneityResult r =
          homogeneity_test(d, outcome(kX, "ox"), p, EstimatorName::dr_wls, 100, static_cast<std::uint64_t>(k));
      rejected += r.p_value < 0.05;
    }
    return static_cast<double>(rejected) / datasets;
  };
  const double small = rejection_rate(200);
  const double large = rejection_rate(1000);
  MESSAGE("rejection rate n=200: " << small << ", n=1000: " << large);
  CHECK(large >= small);
  CHECK(large >= 0.5);
}
