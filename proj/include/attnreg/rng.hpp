#pragma once

#include <cstdint>
#include <initializer_list>

namespace attnreg {

/// Counter-based generator "splitmix64-ctr/1".
///
/// Draw k of a stream with key K is splitmix64_mix(K + (k+1)·0x9E3779B97F4A7C15),
/// the SplitMix64 finalizer applied to a Weyl sequence. Uniforms take the top
/// 53 bits; normals use Box-Muller on two consecutive uniforms. The output is
/// defined entirely by integer arithmetic plus std::log/std::sqrt/std::cos,
/// so streams do not depend on the standard library's distributions.
class CounterRng {
 public:
  static constexpr int kVersion = 1;

  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1).
  double uniform() noexcept;
  /// Standard normal.
  double normal() noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64_mix(std::uint64_t z) noexcept;

/// Folds a list of integers into one stream key, order-sensitive.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept;

}  // namespace attnreg
