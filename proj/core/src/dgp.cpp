#include "drest/dgp.hpp"

#include <cmath>
#include <limits>

#include "drest/errors.hpp"
#include "drest/random.hpp"

namespace drest {

namespace {

double expit(double u) noexcept {
  return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

}  // namespace

void DgpConfig::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(intercept) || !finite(slope) || !finite(noise_sd)) {
    throw InvalidArgument("dgp: non-finite parameter");
  }
  for (double w : z_star_weights) {
    if (!finite(w)) throw InvalidArgument("dgp: non-finite z_star weight");
  }
  for (double c : propensity_coefficients) {
    if (!finite(c)) throw InvalidArgument("dgp: non-finite propensity coefficient");
  }
  if (!(noise_sd > 0)) throw InvalidArgument("dgp: noise_sd must be positive");
}

double DgpConfig::outcome_variance() const noexcept {
  double s = 0;
  for (double w : z_star_weights) s += w * w;
  return slope * slope * s + noise_sd * noise_sd;
}

std::size_t AnalysisView::respondents() const noexcept {
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < t.size(); ++i) k += t[i] != 0;
  return k;
}

Eigen::RowVector4d transform_covariates(const Eigen::RowVector4d& z) noexcept {
  Eigen::RowVector4d x;
  x[0] = std::exp(z[0] / 2.0);
  x[1] = z[1] / (1.0 + std::exp(z[0])) + 10.0;
  x[2] = std::pow(z[0] * z[2] / 25.0 + 0.6, 3);
  x[3] = std::pow(z[1] + z[3] + 20.0, 2);
  return x;
}

FullSample generate_sample(std::size_t n, std::uint64_t seed, const DgpConfig& cfg) {
  if (n == 0) throw InvalidArgument("generate_sample: n must be at least 1");
  cfg.validate();

  const auto rows = static_cast<Eigen::Index>(n);
  FullSample s;
  s.z.resize(rows, 4);
  s.x.resize(rows, 4);
  s.pi_true.resize(rows);
  s.t.resize(rows);
  s.y.resize(rows);

  Rng rng(seed);
  const auto& c = cfg.propensity_coefficients;
  const auto& w = cfg.z_star_weights;
  for (Eigen::Index i = 0; i < rows; ++i) {
    Eigen::RowVector4d z;
    for (int j = 0; j < 4; ++j) z[j] = rng.normal();
    const double eps = rng.normal();
    const double u = rng.uniform();

    const double z_star = w[0] * z[0] + w[1] * z[1] + w[2] * z[2] + w[3] * z[3];
    const double pi = expit(c[0] + c[1] * z[0] + c[2] * z[1] + c[3] * z[2] + c[4] * z[3]);

    s.z.row(i) = z;
    s.x.row(i) = transform_covariates(z);
    s.pi_true[i] = pi;
    s.t[i] = u < pi ? 1.0 : 0.0;
    s.y[i] = cfg.intercept + cfg.slope * z_star + cfg.noise_sd * eps;
  }
  return s;
}

FullSample reverse_roles(FullSample sample) {
  sample.t = (1.0 - sample.t.array()).matrix();
  sample.pi_true = (1.0 - sample.pi_true.array()).matrix();
  return sample;
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& covariates) {
  Eigen::MatrixXd d(covariates.rows(), covariates.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(covariates.cols()) = covariates;
  return d;
}

Eigen::VectorXd mask_outcomes(const Eigen::VectorXd& t, const Eigen::VectorXd& y) {
  Eigen::VectorXd out = y;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (t[i] == 0) out[i] = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

AnalysisView make_view(const FullSample& sample, bool pi_model_correct, bool m_model_correct) {
  AnalysisView v;
  v.design_pi = with_intercept(pi_model_correct ? sample.z : sample.x);
  v.design_m = with_intercept(m_model_correct ? sample.z : sample.x);
  v.t = sample.t;
  v.y_observed = mask_outcomes(sample.t, sample.y);
  return v;
}

}  // namespace drest
