#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace drest {

inline constexpr std::string_view kPrngName = "mt19937_64";
inline constexpr std::string_view kNormalTransform =
    "inverse-CDF: -sqrt(2) * erfc_inv(2u), u = (k + 0.5) / 2^53 from the top 53 bits";
inline constexpr std::string_view kSeedDerivation =
    "splitmix64_mix(base_seed + (index + 1) * 0x9E3779B97F4A7C15)";

// SplitMix64 finalizer; a bijection on 64-bit words.
std::uint64_t splitmix64_mix(std::uint64_t x) noexcept;

// Per-replication (or per-bootstrap-draw) seed. Injective in `index` for a
// fixed base seed.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index) noexcept;

// Platform-stable random source. The standard distributions are not
// reproducible across standard-library implementations, so every variate is
// derived here from raw engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on the open interval (0, 1).
  double uniform();

  // Standard normal by inversion of a single uniform.
  double normal();

  // Uniform integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

}  // namespace drest
