#include "drest/sensitivity.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>

#include "drest/errors.hpp"
#include "drest/parallel.hpp"
#include "drest/random.hpp"

namespace drest {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double spread_of(const Eigen::VectorXd& v) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (std::isnan(v[k])) continue;
    lo = std::min(lo, v[k]);
    hi = std::max(hi, v[k]);
  }
  return hi >= lo ? hi - lo : kNaN;
}

void validate_specs(const SensitivityData& data, std::span<const ModelSpec> p_specs,
                    std::span<const ModelSpec> o_specs, EstimatorName estimator) {
  if (!is_dr_estimator(estimator)) {
    throw InvalidArgument("sensitivity: " + std::string(to_string(estimator)) + " is not a DR estimator");
  }
  if (p_specs.empty() || o_specs.empty()) throw InvalidArgument("sensitivity: need at least one model per role");
  const auto available = static_cast<std::size_t>(data.covariates.cols());
  for (const auto& s : p_specs) {
    if (s.role != ModelRole::propensity) throw InvalidArgument("sensitivity: outcome spec in propensity list");
    s.validate(available);
  }
  for (const auto& s : o_specs) {
    if (s.role != ModelRole::outcome) throw InvalidArgument("sensitivity: propensity spec in outcome list");
    s.validate(available);
  }
}

Eigen::MatrixXd compute_matrix(const SensitivityData& data, std::span<const ModelSpec> p_specs,
                               std::span<const ModelSpec> o_specs, EstimatorName estimator) {
  const auto rows = static_cast<Eigen::Index>(p_specs.size());
  const auto cols = static_cast<Eigen::Index>(o_specs.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(rows, cols, kNaN);

  std::vector<AnalysisView> views;
  views.reserve(o_specs.size());
  for (const auto& o : o_specs) {
    AnalysisView v;
    v.design_m = design_for(data, o);
    v.t = data.t;
    v.y_observed = mask_outcomes(data.t, data.y);
    views.push_back(std::move(v));
  }

  for (Eigen::Index i = 0; i < rows; ++i) {
    PropensityFit pi;
    try {
      pi = fit_propensity_spec(data, p_specs[static_cast<std::size_t>(i)]);
    } catch (const Error&) {
      continue;
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      try {
        const auto& view = views[static_cast<std::size_t>(j)];
        const double v = evaluate_dr_estimator(estimator, view, pi, o_specs[static_cast<std::size_t>(j)].link);
        if (std::isfinite(v)) out(i, j) = v;
      } catch (const Error&) {
      }
    }
  }
  return out;
}

}  // namespace

void ModelSpec::validate(std::size_t available_covariates) const {
  if (covariates.empty()) throw InvalidArgument("model spec: covariate subset is empty");
  for (std::size_t c : covariates) {
    if (c >= available_covariates) {
      throw InvalidArgument("model spec: covariate index " + std::to_string(c) + " out of range");
    }
  }
  if (role == ModelRole::propensity && propensity_kind == PropensityKind::logistic_extended) {
    throw InvalidArgument("model spec: the extended propensity depends on an outcome fit; use B_DR_EXT instead");
  }
}

SensitivityData SensitivityData::resample(std::span<const std::size_t> rows) const {
  SensitivityData out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.covariates.resize(m, covariates.cols());
  out.t.resize(m);
  out.y.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(k)]);
    out.covariates.row(k) = covariates.row(r);
    out.t[k] = t[r];
    out.y[k] = y[r];
  }
  return out;
}

SensitivityData sensitivity_data(const FullSample& sample) {
  SensitivityData d;
  d.covariates.resize(sample.z.rows(), 8);
  d.covariates.leftCols(4) = sample.z;
  d.covariates.rightCols(4) = sample.x;
  d.t = sample.t;
  d.y = mask_outcomes(sample.t, sample.y);
  return d;
}

Eigen::MatrixXd design_for(const SensitivityData& data, const ModelSpec& spec) {
  Eigen::MatrixXd d(data.covariates.rows(), static_cast<Eigen::Index>(spec.covariates.size()) + 1);
  d.col(0).setOnes();
  for (std::size_t k = 0; k < spec.covariates.size(); ++k) {
    d.col(static_cast<Eigen::Index>(k) + 1) = data.covariates.col(static_cast<Eigen::Index>(spec.covariates[k]));
  }
  return d;
}

PropensityFit fit_propensity_spec(const SensitivityData& data, const ModelSpec& spec) {
  const Eigen::MatrixXd design = design_for(data, spec);
  switch (spec.propensity_kind) {
    case PropensityKind::logistic_mle: return fit_logistic_propensity(design, data.t);
    case PropensityKind::inv_linear_ml:
      return fit_inverse_linear(design, data.t, InverseLinearMethod::likelihood);
    case PropensityKind::inv_linear_moment:
      return fit_inverse_linear(design, data.t, InverseLinearMethod::moment);
    case PropensityKind::inv_linear_unconstrained:
      return fit_inverse_linear(design, data.t, InverseLinearMethod::unconstrained_moment);
    case PropensityKind::logistic_extended: break;
  }
  throw InvalidArgument("fit_propensity_spec: unsupported propensity kind");
}

Eigen::MatrixXd build_matrix(const SensitivityData& data, std::span<const ModelSpec> p_specs,
                             std::span<const ModelSpec> o_specs, EstimatorName estimator) {
  validate_specs(data, p_specs, o_specs, estimator);
  return compute_matrix(data, p_specs, o_specs, estimator);
}

std::vector<Eigen::MatrixXd> bootstrap_matrices(const SensitivityData& data, std::span<const ModelSpec> p_specs,
                                                std::span<const ModelSpec> o_specs, EstimatorName estimator,
                                                std::size_t boot_reps, std::uint64_t seed, unsigned workers) {
  validate_specs(data, p_specs, o_specs, estimator);
  const std::size_t n = data.size();
  if (n == 0) throw InvalidArgument("bootstrap_matrices: no units");
  std::vector<Eigen::MatrixXd> draws(boot_reps);
  parallel_for(boot_reps, workers, [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
    draws[b] = compute_matrix(data.resample(rows), p_specs, o_specs, estimator);
  });
  return draws;
}

HomogeneityResult wald_homogeneity(const Eigen::VectorXd& line, const Eigen::MatrixXd& draws) {
  HomogeneityResult res;
  const Eigen::Index m = line.size();
  if (m < 1) throw InvalidArgument("wald_homogeneity: empty line");
  if (m == 1) {
    res.draws = static_cast<std::size_t>(draws.rows());
    return res;
  }
  if (!line.allFinite()) {
    res.defined = false;
    res.p_value = kNaN;
    res.statistic = kNaN;
    res.note = "line has a failed entry";
    return res;
  }
  if (draws.cols() != m) throw InvalidArgument("wald_homogeneity: draws have the wrong width");

  Eigen::VectorXd d(m - 1);
  for (Eigen::Index j = 1; j < m; ++j) d[j - 1] = line[0] - line[j];

  std::vector<Eigen::VectorXd> contrasts;
  for (Eigen::Index b = 0; b < draws.rows(); ++b) {
    if (!draws.row(b).allFinite()) continue;
    Eigen::VectorXd c(m - 1);
    for (Eigen::Index j = 1; j < m; ++j) c[j - 1] = draws(b, 0) - draws(b, j);
    contrasts.push_back(std::move(c));
  }
  res.draws = contrasts.size();
  res.df = static_cast<std::size_t>(m - 1);

  const bool zero_contrast = (d.array() == 0.0).all();
  if (contrasts.size() < 2) {
    if (zero_contrast) return res;
    res.defined = false;
    res.p_value = kNaN;
    res.statistic = kNaN;
    res.note = "fewer than two usable bootstrap draws";
    return res;
  }

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m - 1);
  for (const auto& c : contrasts) mean += c;
  mean /= static_cast<double>(contrasts.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m - 1, m - 1);
  for (const auto& c : contrasts) cov += (c - mean) * (c - mean).transpose();
  cov /= static_cast<double>(contrasts.size() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double largest = ev.maxCoeff();

  if (!(largest > 0)) {
    res.df = 0;
    res.reduced_rank = true;
    if (zero_contrast) return res;
    res.statistic = std::numeric_limits<double>::infinity();
    res.p_value = 0.0;
    res.note = "nonzero contrast with zero bootstrap variance";
    return res;
  }

  const double threshold = 1e-10 * largest;
  const Eigen::VectorXd proj = eig.eigenvectors().transpose() * d;
  double w = 0;
  std::size_t rank = 0;
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (ev[k] > threshold) {
      w += proj[k] * proj[k] / ev[k];
      ++rank;
    }
  }
  res.df = rank;
  res.reduced_rank = rank < static_cast<std::size_t>(m - 1);
  if (res.reduced_rank) res.note = "contrast covariance rank deficient; degrees of freedom reduced";
  res.statistic = w;
  res.p_value = w == 0 ? 1.0
                       : boost::math::cdf(boost::math::complement(
                             boost::math::chi_squared(static_cast<double>(rank)), w));
  return res;
}

HomogeneityResult homogeneity_test(const SensitivityData& data, const ModelSpec& fixed,
                                   std::span<const ModelSpec> varying, EstimatorName estimator,
                                   std::size_t boot_reps, std::uint64_t seed, unsigned workers) {
  if (varying.empty()) throw InvalidArgument("homogeneity_test: empty line");
  const bool fixed_is_propensity = fixed.role == ModelRole::propensity;
  std::vector<ModelSpec> one{fixed};
  std::span<const ModelSpec> p = fixed_is_propensity ? std::span<const ModelSpec>(one) : varying;
  std::span<const ModelSpec> o = fixed_is_propensity ? varying : std::span<const ModelSpec>(one);

  const Eigen::MatrixXd point = build_matrix(data, p, o, estimator);
  const Eigen::VectorXd line = fixed_is_propensity ? Eigen::VectorXd(point.row(0).transpose())
                                                   : Eigen::VectorXd(point.col(0));
  if (line.size() == 1) {
    HomogeneityResult res;
    return res;
  }
  const auto boots = bootstrap_matrices(data, p, o, estimator, boot_reps, seed, workers);
  Eigen::MatrixXd draws(static_cast<Eigen::Index>(boots.size()), line.size());
  for (std::size_t b = 0; b < boots.size(); ++b) {
    draws.row(static_cast<Eigen::Index>(b)) =
        fixed_is_propensity ? Eigen::RowVectorXd(boots[b].row(0)) : Eigen::RowVectorXd(boots[b].col(0).transpose());
  }
  return wald_homogeneity(line, draws);
}

Selection select_models(std::span<const double> row_p, std::span<const double> row_spread,
                        std::span<const double> col_p, std::span<const double> col_spread) {
  auto pick = [](std::span<const double> p, std::span<const double> spread) {
    if (p.empty()) throw InvalidArgument("select_models: no p-values");
    std::size_t best = 0;
    auto key_p = [&](std::size_t k) { return std::isnan(p[k]) ? -1.0 : p[k]; };
    auto key_s = [&](std::size_t k) {
      const double s = k < spread.size() ? spread[k] : kNaN;
      return std::isnan(s) ? std::numeric_limits<double>::infinity() : s;
    };
    for (std::size_t k = 1; k < p.size(); ++k) {
      if (key_p(k) > key_p(best) || (key_p(k) == key_p(best) && key_s(k) < key_s(best))) best = k;
    }
    return best;
  };
  return Selection{pick(row_p, row_spread), pick(col_p, col_spread)};
}

SensitivityMatrix analyze_sensitivity(const SensitivityData& data, std::span<const ModelSpec> p_specs,
                                      std::span<const ModelSpec> o_specs, EstimatorName estimator,
                                      const SensitivityOptions& options) {
  SensitivityMatrix out;
  out.estimator = estimator;
  out.estimates = build_matrix(data, p_specs, o_specs, estimator);
  const Eigen::Index rows = out.estimates.rows();
  const Eigen::Index cols = out.estimates.cols();

  std::vector<Eigen::MatrixXd> boots;
  if (rows > 1 || cols > 1) {
    boots = bootstrap_matrices(data, p_specs, o_specs, estimator, options.boot_reps, options.seed, options.workers);
  }
  const auto b_count = static_cast<Eigen::Index>(boots.size());

  for (Eigen::Index i = 0; i < rows; ++i) {
    Eigen::MatrixXd draws(b_count, cols);
    for (Eigen::Index b = 0; b < b_count; ++b) draws.row(b) = boots[static_cast<std::size_t>(b)].row(i);
    out.row_tests.push_back(wald_homogeneity(out.estimates.row(i).transpose(), draws));
    out.row_spread.push_back(spread_of(out.estimates.row(i).transpose()));
  }
  for (Eigen::Index j = 0; j < cols; ++j) {
    Eigen::MatrixXd draws(b_count, rows);
    for (Eigen::Index b = 0; b < b_count; ++b) draws.row(b) = boots[static_cast<std::size_t>(b)].col(j).transpose();
    out.col_tests.push_back(wald_homogeneity(out.estimates.col(j), draws));
    out.col_spread.push_back(spread_of(out.estimates.col(j)));
  }
  for (const auto& r : out.row_tests) out.row_p_values.push_back(r.p_value);
  for (const auto& c : out.col_tests) out.col_p_values.push_back(c.p_value);

  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (std::isnan(out.estimates(i, j))) {
        out.flags.push_back("entry (" + std::to_string(i) + ", " + std::to_string(j) + ") failed");
      }
    }
  }
  for (std::size_t k = 0; k < out.row_tests.size(); ++k) {
    if (!out.row_tests[k].note.empty()) out.flags.push_back("row " + std::to_string(k) + ": " + out.row_tests[k].note);
  }
  for (std::size_t k = 0; k < out.col_tests.size(); ++k) {
    if (!out.col_tests[k].note.empty()) out.flags.push_back("column " + std::to_string(k) + ": " + out.col_tests[k].note);
  }

  out.selection = select_models(out.row_p_values, out.row_spread, out.col_p_values, out.col_spread);
  return out;
}

}  // namespace drest
