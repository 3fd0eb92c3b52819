#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace fedcore {

/// SplitMix64 output function applied to `x + 0x9E3779B97F4A7C15`.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// 64-bit FNV-1a over the bytes of `text`.
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// Seed for one module/round/client stream:
///   h = mix64(master ^ fnv1a64(module)); h = mix64(h ^ round); seed = mix64(h ^ client)
std::uint64_t derive_seed(std::uint64_t master, std::string_view module,
                          std::uint64_t round = 0, std::uint64_t client = 0) noexcept;

/// xoshiro256** seeded through SplitMix64. The stream is fully specified so
/// fixtures are reproducible in any language.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  result_type operator()() noexcept { return next_u64(); }

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 bits: (next >> 11) * 2^-53.
  double uniform() noexcept;
  /// Uniform in (0, 1).
  double uniform_open() noexcept;
  /// Uniform integer in [0, bound), Lemire's nearly-divisionless method.
  std::uint64_t below(std::uint64_t bound) noexcept;
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() noexcept;
  /// log of a Gamma(shape, 1) draw (Marsaglia-Tsang, with the U^(1/a) boost for a < 1).
  double log_gamma_variate(double shape) noexcept;

 private:
  std::array<std::uint64_t, 4> state_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

template <class T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace fedcore
