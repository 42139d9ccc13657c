#pragma once

// Counter-based random streams. Every draw is a pure function of
// (seed, domain, stream id, counter), so results never depend on thread
// scheduling or on how many other streams exist.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mvsde {

/// Separates the random numbers used for different purposes under one seed.
enum class Domain : std::uint32_t {
  wiener = 1,
  jumps = 2,
  initial = 3,
  chain = 4,
  sliced = 5,
  sampling = 6,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent child seed, e.g. one per replication or iterate.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(tag + 0x632BE59BD9B4E019ULL));
}

/// Philox4x32-10 block function.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) noexcept {
  constexpr std::uint32_t m0 = 0xD2511F53U;
  constexpr std::uint32_t m1 = 0xCD9E8D57U;
  constexpr std::uint32_t w0 = 0x9E3779B9U;
  constexpr std::uint32_t w1 = 0xBB67AE85U;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += w0;
    key[1] += w1;
  }
  return ctr;
}

/// A sequential stream that can also be addressed at arbitrary positions.
/// Each draw consumes exactly one 128-bit Philox block.
class Stream {
 public:
  Stream(std::uint64_t seed, Domain domain, std::uint64_t id) noexcept
      : key_(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(domain)))), id_(id) {}

  [[nodiscard]] double uniform() noexcept { return uniform_at(counter_++); }
  [[nodiscard]] double normal() noexcept { return normal_at(counter_++); }
  [[nodiscard]] double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }
  [[nodiscard]] double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform on the open interval (0, 1).
  [[nodiscard]] double uniform_at(std::uint64_t index) const noexcept {
    return to_open_unit(block(index)[0]);
  }

  /// Standard normal via Box-Muller on the two halves of one block.
  [[nodiscard]] double normal_at(std::uint64_t index) const noexcept {
    const auto b = block(index);
    const double u1 = to_open_unit(b[0]);
    const double u2 = to_open_unit(b[1]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  [[nodiscard]] std::uint64_t position() const noexcept { return counter_; }

 private:
  [[nodiscard]] std::array<std::uint64_t, 2> block(std::uint64_t index) const noexcept {
    const auto out = philox4x32(
        {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
         static_cast<std::uint32_t>(id_), static_cast<std::uint32_t>(id_ >> 32)},
        {static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)});
    return {(static_cast<std::uint64_t>(out[0]) << 32) | out[1],
            (static_cast<std::uint64_t>(out[2]) << 32) | out[3]};
  }

  static double to_open_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t key_;
  std::uint64_t id_;
  std::uint64_t counter_ = 0;
};

}  // namespace mvsde
