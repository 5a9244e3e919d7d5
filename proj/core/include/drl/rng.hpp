#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace drl {

// SplitMix64 finalizer. Used for seeding and for deriving child seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Seed for an independent stream identified by `stream` under `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

// 64-bit FNV-1a; stable across platforms.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// xoshiro256** with SplitMix64 seeding. All derived quantities (doubles,
// bounded integers) are computed here rather than through <random>
// distributions, whose outputs differ between standard libraries.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept { return next(); }
  std::uint64_t next() noexcept;

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;

  // Uniform in [0, n); n must be positive.
  std::uint64_t uniform_int(std::uint64_t n) noexcept;

  // Child generator whose stream is independent of this one's future output.
  Rng split(std::uint64_t stream) const noexcept;

 private:
  std::array<std::uint64_t, 4> s_;
  std::uint64_t seed_;
};

}  // namespace drl
