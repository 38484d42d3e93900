#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "drest/dgp.hpp"

namespace drest::cli {

// Malformed or unusable data; `row` is the 1-based line of the file, 0 when
// the problem is not tied to a line.
class DataError : public std::runtime_error {
 public:
  DataError(std::size_t row, const std::string& message);
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// Header names columns t, y and the covariates, in any order. y is left
// empty where t = 0.
struct Dataset {
  std::vector<std::string> covariate_names;
  Eigen::MatrixXd x;
  Eigen::VectorXd t;
  Eigen::VectorXd y;  // NaN where t == 0
  std::vector<std::string> warnings;

  // Column indices of `names`; throws DataError for an unknown name.
  std::vector<std::size_t> columns(const std::vector<std::string>& names) const;
};

Dataset read_dataset(std::istream& in);
Dataset read_dataset_file(const std::string& path);

enum class CovariateView { observed, latent, both };

// t,y then covariates: `observed` writes x1..x4, `latent` z1..z4, `both` z1..z4,x1..x4.
void write_dataset(std::ostream& out, const FullSample& sample, CovariateView view);

// Values for `density`: either a single numeric column (optionally headed
// "value") or a values file written by `simulate`, in which case `select`
// ("scenario:n:ESTIMATOR") picks the series.
std::vector<double> read_values(std::istream& in, const std::optional<std::string>& select);

}  // namespace drest::cli
