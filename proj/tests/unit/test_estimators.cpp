#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "drest/dgp.hpp"
#include "drest/errors.hpp"
#include "drest/estimators.hpp"
#include "drest/random.hpp"

using namespace drest;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Eigen::MatrixXd line_design(std::initializer_list<double> xs) {
  Eigen::MatrixXd d(static_cast<Eigen::Index>(xs.size()), 2);
  Eigen::Index i = 0;
  for (double x : xs) d.row(i++) << 1.0, x;
  return d;
}

struct Adversarial {
  Eigen::VectorXd pi, m, t, y;
};

// Random inputs with propensities spread down to 1e-8 and heavy-tailed outcomes.
Adversarial adversarial(std::uint64_t seed, Eigen::Index n) {
  Rng rng(seed);
  Adversarial a{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    a.pi[i] = std::pow(10.0, -8.0 * rng.uniform());
    a.t[i] = rng.uniform() < 0.6 ? 1 : 0;
    a.y[i] = a.t[i] == 1 ? 100 * rng.normal() * std::exp(2 * rng.normal()) : kNaN;
    a.m[i] = 50 * rng.normal();
  }
  a.t[0] = 1;
  a.y[0] = 3;
  return a;
}

double observed_min(const Eigen::VectorXd& t, const Eigen::VectorXd& y) {
  double v = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < t.size(); ++i) if (t[i] == 1) v = std::min(v, y[i]);
  return v;
}
double observed_max(const Eigen::VectorXd& t, const Eigen::VectorXd& y) {
  double v = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < t.size(); ++i) if (t[i] == 1) v = std::max(v, y[i]);
  return v;
}

}  // namespace

TEST_CASE("estimator names round-trip") {
  for (auto e : kAllEstimators) CHECK(parse_estimator_name(to_string(e)) == e);
  CHECK(to_string(EstimatorName::b_dr_ext) == "B_DR_EXT");
  CHECK(to_string(EstimatorName::dr_ipw_nr) == "DR_IPW_NR");
  CHECK_FALSE(parse_estimator_name("dr_reg").has_value());
  CHECK(is_dr_estimator(EstimatorName::dr_wls));
  CHECK_FALSE(is_dr_estimator(EstimatorName::ols));
  CHECK_FALSE(is_dr_estimator(EstimatorName::ht));
  CHECK_FALSE(is_dr_estimator(EstimatorName::full));
}

TEST_CASE("Horvitz-Thompson") {
  CHECK(mu_ht(vec({0.25, 0.5, 1, 0.5}), vec({1, 1, 1, 0}), vec({1, 2, 4, kNaN})) == doctest::Approx(3.0));
  CHECK(mu_ht(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(3), vec({1, 2, 6})) == doctest::Approx(3.0));

  // One respondent with Y = 1 and a weight above 17000 among 1000 units.
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(1000, 0.5);
  Eigen::VectorXd t = Eigen::VectorXd::Zero(1000);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(1000, kNaN);
  pi[0] = 1.0 / 17001;
  t[0] = 1;
  y[0] = 1;
  CHECK(mu_ht(pi, t, y) > 17);

  CHECK_THROWS_AS(mu_ht(vec({0.5, 0}), vec({1, 1}), vec({1, 2})), InvalidWeight);
  CHECK_THROWS_AS(mu_ht(vec({0.5, kNaN}), vec({1, 1}), vec({1, 2})), InvalidWeight);
  // A bad weight on a nonrespondent is never read.
  CHECK(mu_ht(vec({0.5, 0}), vec({1, 0}), vec({1, kNaN})) == doctest::Approx(1.0));
}

TEST_CASE("ratio-form IPW") {
  CHECK(mu_ipw_pop(vec({0.8, 0.5, 0.5, 0.4}), vec({1, 1, 1, 0}), vec({1, 2, 3, kNaN})) ==
        doctest::Approx(15.0 / 7).epsilon(1e-14));
  CHECK(mu_ipw_pop(Eigen::VectorXd::Constant(4, 0.3), vec({1, 1, 1, 0}), vec({1, 2, 6, kNaN})) ==
        doctest::Approx(3.0));
  const double v = mu_ipw_pop(vec({1e-6, 0.5, 0.5}), vec({1, 1, 1}), vec({10, 2, 3}));
  CHECK(v <= 10);
  CHECK(v >= 2);
  CHECK_THROWS_AS(mu_ipw_pop(vec({0.5, 0.5}), vec({0, 0}), vec({kNaN, kNaN})), UndefinedEstimator);
}

TEST_CASE("AIPW") {
  const Eigen::VectorXd pi = vec({0.25, 0.5, 1, 0.5});
  const Eigen::VectorXd t = vec({1, 1, 1, 0});
  const Eigen::VectorXd y = vec({1, 2, 4, kNaN});
  const Eigen::VectorXd m = vec({5.0 / 6, 7.0 / 3, 23.0 / 6, 16.0 / 3});
  CHECK(mu_aipw(pi, m, t, y) == doctest::Approx(25.0 / 8).epsilon(1e-14));
  CHECK(mu_aipw(pi, Eigen::VectorXd::Zero(4), t, y) == doctest::Approx(mu_ht(pi, t, y)).epsilon(1e-14));
  const Eigen::VectorXd exact = vec({1, 2, 4, 9});
  CHECK(mu_aipw(pi, exact, t, y) == doctest::Approx(exact.mean()).epsilon(1e-15));
}

TEST_CASE("bounded AIPW") {
  const Eigen::VectorXd pi = vec({0.25, 0.5, 1, 0.5});
  const Eigen::VectorXd t = vec({1, 1, 1, 0});
  const Eigen::VectorXd y = vec({1, 2, 4, kNaN});
  const Eigen::VectorXd m = vec({5.0 / 6, 7.0 / 3, 23.0 / 6, 16.0 / 3});
  CHECK(mu_b_dr(pi, m, t, y) == doctest::Approx(87.0 / 28).epsilon(1e-14));

  // P_n[T / pi] = (4 + 4 + 4) / 12 = 1 with pi = (0.25, 0.25, 0.25) over 12 units.
  Eigen::VectorXd pi1 = Eigen::VectorXd::Constant(12, 0.5);
  Eigen::VectorXd t1 = Eigen::VectorXd::Zero(12);
  Eigen::VectorXd y1 = Eigen::VectorXd::Constant(12, kNaN);
  Eigen::VectorXd m1 = Eigen::VectorXd::LinSpaced(12, 0, 11);
  for (int i = 0; i < 3; ++i) pi1[i] = 0.25, t1[i] = 1, y1[i] = 3.0 * i + 1;
  CHECK((t1.array() / pi1.array()).mean() == doctest::Approx(1.0));
  CHECK(mu_b_dr(pi1, m1, t1, y1) == doctest::Approx(mu_aipw(pi1, m1, t1, y1)).epsilon(1e-14));

  const Eigen::VectorXd exact = vec({1, 2, 4, 9});
  CHECK(mu_b_dr(pi, exact, t, y) == doctest::Approx(exact.mean()).epsilon(1e-15));
}

TEST_CASE("regression form and complete-data mean") {
  CHECK(mu_from_regression(vec({1, 2, 3, 4})) == doctest::Approx(2.5));
  CHECK(mu_from_regression(vec({12.0 / 13, 30.0 / 13, 48.0 / 13, 66.0 / 13})) == doctest::Approx(3.0));
  CHECK(mu_from_regression(Eigen::VectorXd::Constant(5, 7.25)) == 7.25);
  CHECK(mu_full(vec({1, 2, 3, 10})) == doctest::Approx(4.0));

  const Eigen::VectorXd y = vec({3, -1, 8, 2.5});
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(4);
  CHECK(mu_aipw(one, vec({100, -7, 0.5, 2}), one, y) == doctest::Approx(mu_full(y)).epsilon(1e-14));
}

TEST_CASE("boundedness on adversarial inputs") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const Adversarial a = adversarial(seed, 40);
    const double lo = observed_min(a.t, a.y), hi = observed_max(a.t, a.y);
    const double ipw = mu_ipw_pop(a.pi, a.t, a.y);
    CHECK(ipw >= lo - 1e-9 * std::abs(lo));
    CHECK(ipw <= hi + 1e-9 * std::abs(hi));

    const double reg = mu_from_regression(a.m);
    CHECK(reg >= a.m.minCoeff());
    CHECK(reg <= a.m.maxCoeff());

    double max_resid = 0;
    for (Eigen::Index i = 0; i < a.t.size(); ++i) {
      if (a.t[i] == 1) max_resid = std::max(max_resid, std::abs(a.y[i] - a.m[i]));
    }
    CHECK(std::abs(mu_b_dr(a.pi, a.m, a.t, a.y)) < max_resid + a.m.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("estimate_all on toy data") {
  AnalysisView v;
  v.design_pi = Eigen::MatrixXd::Ones(4, 1);
  v.design_m = line_design({0, 1, 2, 3});
  v.t = vec({1, 1, 1, 0});
  v.y_observed = vec({1, 2, 4, kNaN});
  const EstimateSet s = estimate_all(v, kAllEstimators);
  // Intercept-only propensity: pi_hat = 3/4 for everyone.
  CHECK(*s.value(EstimatorName::ht) == doctest::Approx(7.0 / 3).epsilon(1e-10));
  CHECK(*s.value(EstimatorName::ipw_pop) == doctest::Approx(7.0 / 3).epsilon(1e-10));
  CHECK(*s.value(EstimatorName::ols) == doctest::Approx(37.0 / 12).epsilon(1e-14));
  CHECK(*s.value(EstimatorName::dr_reg) == doctest::Approx(37.0 / 12).epsilon(1e-10));
  CHECK(*s.value(EstimatorName::dr_wls) == doctest::Approx(37.0 / 12).epsilon(1e-10));
  CHECK(s.flags.at(EstimatorName::full) == EstimateStatus::unavailable);
  CHECK_FALSE(s.value(EstimatorName::full).has_value());
  // Constant pi_hat makes the appended covariate collinear with the intercept.
  CHECK(s.flags.at(EstimatorName::dr_ext_reg) == EstimateStatus::fit_failed);
  CHECK(s.flags.at(EstimatorName::dr_ipw_nr) == EstimateStatus::fit_failed);
  CHECK(s.flags.at(EstimatorName::ols) == EstimateStatus::ok);
  CHECK(s.diagnostics.min_pi == doctest::Approx(0.75));
}

TEST_CASE("failed propensity fit flags only its dependants") {
  AnalysisView v;
  v.design_pi = line_design({0, 1, 2, 3});
  v.design_m = v.design_pi;
  v.t = vec({1, 1, 1, 0});
  v.y_observed = vec({1, 2, 4, kNaN});
  const EstimateSet s = estimate_all(v, kStudyEstimators);
  CHECK(s.flags.at(EstimatorName::ols) == EstimateStatus::ok);
  for (auto e : {EstimatorName::ht, EstimatorName::ipw_pop, EstimatorName::dr_reg, EstimatorName::b_dr_ext}) {
    CHECK(s.flags.at(e) == EstimateStatus::fit_failed);
    CHECK_FALSE(s.notes.at(e).empty());
  }
  CHECK(s.values.size() == 1);
}

TEST_CASE("no missingness") {
  const FullSample f = generate_sample(50, 6);
  AnalysisView v = make_view(f, false, false);
  v.t.setOnes();
  v.y_observed = f.y;
  const EstimateSet s = estimate_all(v, kAllEstimators, &f);
  const double mean = f.y.mean();
  for (auto e : {EstimatorName::ols, EstimatorName::ht, EstimatorName::ipw_pop, EstimatorName::full,
                 EstimatorName::dr_reg, EstimatorName::b_dr_reg, EstimatorName::b_dr_ext}) {
    CAPTURE(to_string(e));
    CHECK(*s.value(e) == doctest::Approx(mean).epsilon(1e-12));
  }
  CHECK(*s.phi_ext == 0.0);
}

TEST_CASE("respondent-exact-fit data: every DR estimator is the regression mean") {
  FullSample f = generate_sample(300, 14);
  // Outcome exactly linear in the observed design.
  const Eigen::MatrixXd d = with_intercept(f.x);
  const Eigen::VectorXd beta = vec({3, -2, 0.5, 7, 0.01});
  f.y = d * beta;
  const AnalysisView v = make_view(f, false, false);
  const EstimateSet s = estimate_all(v, kAllEstimators, &f);
  const double target = mu_from_regression(d * beta);
  for (auto e : kAllEstimators) {
    if (!is_dr_estimator(e) && e != EstimatorName::ols) continue;
    CAPTURE(to_string(e));
    REQUIRE(s.value(e).has_value());
    CHECK(std::abs(*s.value(e) - target) <= 1e-9 * std::abs(target));
  }
}

TEST_CASE("regression-form identities on simulated data") {
  const FullSample f = generate_sample(1000, 77);
  const AnalysisView v = make_view(f, false, false);
  const PropensityFit p = fit_logistic_propensity(v.design_pi, v.t);
  const auto tol = [](double a) { return 1e-8 * std::max(1.0, std::abs(a)); };

  const OutcomeFit wls = fit_outcome_wls(v, p.pi_hat);
  CHECK(std::abs(mu_aipw(p.pi_hat, wls.m_hat, v.t, v.y_observed) - mu_from_regression(wls.m_hat)) <=
        tol(mu_from_regression(wls.m_hat)));

  const OutcomeFit ext = fit_outcome_ext_reg(v, p.pi_hat);
  CHECK(std::abs(mu_aipw(p.pi_hat, ext.m_hat, v.t, v.y_observed) - mu_from_regression(ext.m_hat)) <=
        tol(mu_from_regression(ext.m_hat)));

  const OutcomeFit nr = fit_outcome_ipw_nr(v, p.pi_hat);
  const double mu_nr = mu_from_regression(nr.m_hat);
  CHECK(std::abs(mu_aipw(p.pi_hat, nr.m_hat, v.t, v.y_observed) - mu_nr) <= tol(mu_nr));
  double alt = 0;
  for (Eigen::Index i = 0; i < v.t.size(); ++i) alt += v.t[i] == 1 ? v.y_observed[i] : nr.m_hat[i];
  alt /= static_cast<double>(v.t.size());
  CHECK(std::abs(alt - mu_nr) <= tol(mu_nr));

  const OutcomeFit reg = fit_outcome_reg(v);
  const double mu_ols = mu_from_regression(reg.m_hat);
  const PropensityFit e = fit_extended_propensity(p, Eigen::VectorXd(), reg, mu_ols, v.t);
  const double bdr = mu_b_dr(e.pi_hat, reg.m_hat, v.t, v.y_observed);
  CHECK(std::abs(bdr - mu_ipw_pop(e.pi_hat, v.t, v.y_observed)) <= tol(bdr));

  const EstimateSet s = estimate_all(v, kAllEstimators, &f);
  CHECK(*s.value(EstimatorName::b_dr_ext) == doctest::Approx(bdr).epsilon(1e-12));
  CHECK(*s.value(EstimatorName::dr_wls) == doctest::Approx(mu_from_regression(wls.m_hat)).epsilon(1e-12));
  CHECK(*s.value(EstimatorName::full) == doctest::Approx(f.y.mean()).epsilon(1e-14));
}

TEST_CASE("OLS is doubly robust under the inverse-linear propensity") {
  SUBCASE("toy design") {
    AnalysisView v;
    v.design_m = line_design({0, 1, 2, 3});
    v.design_pi = v.design_m;
    v.t = vec({1, 1, 1, 0});
    v.y_observed = vec({1, 2, 4, kNaN});
    const IdentityReport r = mu_ols_identities_check(v);
    REQUIRE(r.checked);
    CHECK(r.alpha_inv[0] == doctest::Approx(1.0 / 3));
    CHECK(r.alpha_inv[1] == doctest::Approx(1.0));
    CHECK(r.bounded_ht == doctest::Approx(37.0 / 12).epsilon(1e-14));
    CHECK(r.mu_ols == doctest::Approx(37.0 / 12).epsilon(1e-14));
    CHECK(r.weighted_count == doctest::Approx(1.0));
    CHECK(r.passed());
  }
  SUBCASE("simulated, both models wrong") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const FullSample f = generate_sample(200, seed);
      const IdentityReport r = mu_ols_identities_check(make_view(f, false, false));
      CHECK(r.passed(1e-8));
      CHECK(r.max_weighted_residual <= 1e-8);
    }
  }
  SUBCASE("singular system is skipped with a reason") {
    AnalysisView v;
    v.design_m = line_design({0, 1, 2});
    v.design_pi = v.design_m;
    v.t = vec({1, 0, 0});
    v.y_observed = vec({1, kNaN, kNaN});
    const IdentityReport r = mu_ols_identities_check(v);
    CHECK_FALSE(r.checked);
    CHECK_FALSE(r.skipped_reason.empty());
    CHECK_FALSE(r.passed());
  }
}
