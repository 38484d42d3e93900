#include "drest/random.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <limits>
#include <numbers>

namespace drest {

std::uint64_t splitmix64_mix(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index) noexcept {
  return splitmix64_mix(base_seed + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

double Rng::uniform() {
  const std::uint64_t bits = engine_() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  const double u = uniform();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  // Rejection sampling on the largest multiple of `bound`.
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % bound;
}

}  // namespace drest
