#include <algorithm>
#include <cmath>
#include <numbers>

#include "drest/errors.hpp"
#include "drest/mc.hpp"

namespace drest {

double silverman_bandwidth(std::span<const double> values) {
  const auto n = static_cast<double>(values.size());
  if (values.size() < 2) throw DegenerateInput("silverman_bandwidth: need at least two values");
  double mean = 0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  const double spread = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

DensitySeries density_points(std::span<const double> values, const DensityOptions& options) {
  std::vector<double> kept(values.begin(), values.end());
  for (double v : kept) {
    if (!std::isfinite(v)) throw InvalidArgument("density_points: non-finite value");
  }
  std::sort(kept.begin(), kept.end());

  DensitySeries out;
  if (options.clip_quantile) {
    const double q = *options.clip_quantile;
    if (!(q >= 0 && q < 0.5)) throw InvalidArgument("density_points: clip quantile must be in [0, 0.5)");
    if (kept.empty()) throw DegenerateInput("density_points: no values");
    const double lo = quantile_sorted(kept, q);
    const double hi = quantile_sorted(kept, 1.0 - q);
    const std::size_t before = kept.size();
    std::erase_if(kept, [&](double v) { return v < lo || v > hi; });
    out.clipped = before - kept.size();
  }
  if (kept.size() < 2 || kept.front() == kept.back()) {
    throw DegenerateInput("density_points: need at least two distinct values");
  }
  if (options.grid_points < 2) throw InvalidArgument("density_points: grid needs at least two points");

  const double h = options.bandwidth ? *options.bandwidth : silverman_bandwidth(kept);
  if (!(h > 0) || !std::isfinite(h)) throw InvalidArgument("density_points: bandwidth must be positive");

  out.bandwidth = h;
  out.used = kept.size();
  const double lo = kept.front() - options.pad_bandwidths * h;
  const double hi = kept.back() + options.pad_bandwidths * h;
  const std::size_t g = options.grid_points;
  out.grid.resize(g);
  out.density.assign(g, 0.0);

  const double norm = 1.0 / (static_cast<double>(kept.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t j = 0; j < g; ++j) {
    const double x = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(g - 1);
    out.grid[j] = x;
    double s = 0;
    for (double v : kept) {
      const double z = (x - v) / h;
      s += std::exp(-0.5 * z * z);
    }
    out.density[j] = s * norm;
  }
  return out;
}

double trapezoid_integral(const DensitySeries& series) {
  double s = 0;
  for (std::size_t j = 1; j < series.grid.size(); ++j) {
    s += 0.5 * (series.density[j] + series.density[j - 1]) * (series.grid[j] - series.grid[j - 1]);
  }
  return s;
}

}  // namespace drest
