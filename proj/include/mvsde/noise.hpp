#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvsde/model.hpp"
#include "mvsde/parallel.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {

/// One Poisson jump event.
struct JumpEvent {
  double time;
  std::span<const double> mark;
};

/// Driving noise for N particles at the finest resolution n_max: Gaussian
/// increments with variance T/n_max per component, plus explicit jump events
/// that every coarser resolution reuses. Immutable after construction.
class NoiseBundle {
 public:
  NoiseBundle() = default;

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::size_t particles() const noexcept { return particles_; }
  [[nodiscard]] std::size_t wiener_dim() const noexcept { return wiener_dim_; }
  [[nodiscard]] std::size_t n_max() const noexcept { return n_max_; }
  [[nodiscard]] std::size_t mark_dim() const noexcept { return mark_dim_; }
  [[nodiscard]] double horizon() const noexcept { return horizon_; }

  /// increments of particle i: n_max rows of wiener_dim entries
  [[nodiscard]] std::span<const double> increments(std::size_t i) const {
    return {increments_.data() + i * n_max_ * wiener_dim_, n_max_ * wiener_dim_};
  }
  [[nodiscard]] std::size_t event_count(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }
  [[nodiscard]] std::span<const double> event_times(std::size_t i) const {
    return {times_.data() + offsets_[i], event_count(i)};
  }
  [[nodiscard]] JumpEvent event(std::size_t i, std::size_t j) const {
    const std::size_t e = offsets_[i] + j;
    return {times_[e], {marks_.data() + e * mark_dim_, mark_dim_}};
  }

  friend NoiseBundle generate_noise(std::uint64_t, std::size_t, std::size_t, std::size_t, const LevySpec&, double,
                                    int);
  friend NoiseBundle load_noise(std::istream&);
  friend bool operator==(const NoiseBundle&, const NoiseBundle&) = default;

 private:
  std::uint64_t seed_ = 0;
  std::size_t particles_ = 0;
  std::size_t wiener_dim_ = 0;
  std::size_t n_max_ = 0;
  std::size_t mark_dim_ = 1;
  double horizon_ = 0.0;
  std::vector<double> increments_;
  std::vector<std::size_t> offsets_{0};
  std::vector<double> times_;
  std::vector<double> marks_;
};

[[nodiscard]] constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

/// Builds the bundle. Particle i's increments and jumps come from its own
/// counter-based streams, so they do not depend on N or on the thread count.
[[nodiscard]] inline NoiseBundle generate_noise(std::uint64_t seed, std::size_t particles, std::size_t wiener_dim,
                                                std::size_t n_max, const LevySpec& levy, double horizon,
                                                int threads = 0) {
  if (!is_power_of_two(n_max)) throw std::invalid_argument("generate_noise: n_max must be a power of two");
  if (!(horizon > 0.0)) throw std::invalid_argument("generate_noise: horizon must be positive");
  if (particles == 0 || wiener_dim == 0) throw std::invalid_argument("generate_noise: empty bundle");
  levy.validate();
  NoiseBundle b;
  b.seed_ = seed;
  b.particles_ = particles;
  b.wiener_dim_ = wiener_dim;
  b.n_max_ = n_max;
  b.mark_dim_ = levy.mark_dim;
  b.horizon_ = horizon;
  const std::size_t per = n_max * wiener_dim;
  b.increments_.resize(particles * per);
  const double sd = std::sqrt(horizon / static_cast<double>(n_max));
  parallel_for(particles, threads, [&](std::size_t i) {
    const Stream w(seed, Domain::wiener, i);
    double* row = b.increments_.data() + i * per;
    for (std::size_t c = 0; c < per; ++c) row[c] = sd * w.normal_at(c);
  });

  if (levy.has_jumps()) {
    // exponential inter-arrival times give Poisson(lambda T) counts with
    // sorted uniform times
    std::vector<std::vector<double>> times(particles), marks(particles);
    parallel_for(particles, threads, [&](std::size_t i) {
      Stream s(seed, Domain::jumps, i);
      std::vector<double> mark(levy.mark_dim);
      double t = 0.0;
      for (;;) {
        const double next = t + s.exponential(levy.intensity);
        if (!(next < horizon)) break;
        t = next > t ? next : std::nextafter(t, horizon);
        levy.sampler(s, mark);
        times[i].push_back(t);
        marks[i].insert(marks[i].end(), mark.begin(), mark.end());
      }
    });
    b.offsets_.resize(particles + 1);
    for (std::size_t i = 0; i < particles; ++i) {
      b.offsets_[i + 1] = b.offsets_[i] + times[i].size();
      b.times_.insert(b.times_.end(), times[i].begin(), times[i].end());
      b.marks_.insert(b.marks_.end(), marks[i].begin(), marks[i].end());
    }
  } else {
    b.offsets_.assign(particles + 1, 0);
  }
  return b;
}

/// The bundle seen at resolution n: each coarse increment is the sum of the
/// n_max / n fine increments it covers, added in index order. Jump events are
/// shared with the bundle and land in the coarse cell containing their time.
class NoiseView {
 public:
  NoiseView(const NoiseBundle& bundle, std::size_t n) : bundle_(&bundle), n_(n) {
    if (n == 0 || bundle.n_max() % n != 0)
      throw std::invalid_argument("coarsen: n = " + std::to_string(n) + " does not divide n_max = " +
                                  std::to_string(bundle.n_max()));
    factor_ = bundle.n_max() / n;
  }

  [[nodiscard]] const NoiseBundle& bundle() const noexcept { return *bundle_; }
  [[nodiscard]] std::size_t n() const noexcept { return n_; }
  [[nodiscard]] double dt() const noexcept { return bundle_->horizon() / static_cast<double>(n_); }
  [[nodiscard]] std::size_t particles() const noexcept { return bundle_->particles(); }
  [[nodiscard]] std::size_t wiener_dim() const noexcept { return bundle_->wiener_dim(); }

  /// Brownian increment of particle i over coarse cell k, written into out.
  void increment(std::size_t i, std::size_t k, std::span<double> out) const {
    const std::size_t m = bundle_->wiener_dim();
    const auto inc = bundle_->increments(i);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t f = k * factor_; f < (k + 1) * factor_; ++f)
      for (std::size_t j = 0; j < m; ++j) out[j] += inc[f * m + j];
  }

  [[nodiscard]] std::size_t cell_of(double t) const noexcept {
    const auto c = static_cast<std::size_t>(std::floor(t * static_cast<double>(n_) / bundle_->horizon()));
    return std::min(c, n_ - 1);
  }

  /// Index range [first, last) of particle i's events that fall in cell k.
  [[nodiscard]] std::pair<std::size_t, std::size_t> events_in_cell(std::size_t i, std::size_t k) const {
    const auto times = bundle_->event_times(i);
    const auto lo = std::partition_point(times.begin(), times.end(), [&](double t) { return cell_of(t) < k; });
    const auto hi = std::partition_point(lo, times.end(), [&](double t) { return cell_of(t) <= k; });
    return {static_cast<std::size_t>(lo - times.begin()), static_cast<std::size_t>(hi - times.begin())};
  }

 private:
  const NoiseBundle* bundle_;
  std::size_t n_;
  std::size_t factor_ = 1;
};

[[nodiscard]] inline NoiseView coarsen(const NoiseBundle& bundle, std::size_t n) { return {bundle, n}; }

// Binary layout, all little-endian:
//   char[4] "MVNB" | u32 version = 1 | u64 seed | u64 particles | u64 wiener_dim
//   | u64 n_max | u64 mark_dim | f64 horizon
//   | f64 increments[particles * n_max * wiener_dim]   (particle-major)
//   | per particle: u64 count, then count x (f64 time, f64 mark[mark_dim])
inline constexpr std::uint32_t kNoiseFormatVersion = 1;

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((v >> (8 * b)) & 0xFF);
  os.write(buf, 8);
}
inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }
inline std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw std::runtime_error("load_noise: truncated input");
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | buf[b];
  return v;
}
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace detail

inline void save_noise(const NoiseBundle& b, std::ostream& os) {
  os.write("MVNB", 4);
  const std::uint32_t version = kNoiseFormatVersion;
  for (int k = 0; k < 4; ++k) os.put(static_cast<char>((version >> (8 * k)) & 0xFF));
  detail::put_u64(os, b.seed());
  detail::put_u64(os, b.particles());
  detail::put_u64(os, b.wiener_dim());
  detail::put_u64(os, b.n_max());
  detail::put_u64(os, b.mark_dim());
  detail::put_f64(os, b.horizon());
  for (std::size_t i = 0; i < b.particles(); ++i)
    for (double v : b.increments(i)) detail::put_f64(os, v);
  for (std::size_t i = 0; i < b.particles(); ++i) {
    detail::put_u64(os, b.event_count(i));
    for (std::size_t j = 0; j < b.event_count(i); ++j) {
      const auto e = b.event(i, j);
      detail::put_f64(os, e.time);
      for (double z : e.mark) detail::put_f64(os, z);
    }
  }
  if (!os) throw std::runtime_error("save_noise: write failed");
}

[[nodiscard]] inline NoiseBundle load_noise(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "MVNB", 4) != 0) throw std::runtime_error("load_noise: bad magic");
  unsigned char vb[4];
  if (!is.read(reinterpret_cast<char*>(vb), 4)) throw std::runtime_error("load_noise: truncated input");
  const std::uint32_t version = vb[0] | (vb[1] << 8) | (vb[2] << 16) | (static_cast<std::uint32_t>(vb[3]) << 24);
  if (version != kNoiseFormatVersion)
    throw std::runtime_error("load_noise: unsupported version " + std::to_string(version));
  NoiseBundle b;
  b.seed_ = detail::get_u64(is);
  b.particles_ = detail::get_u64(is);
  b.wiener_dim_ = detail::get_u64(is);
  b.n_max_ = detail::get_u64(is);
  b.mark_dim_ = detail::get_u64(is);
  b.horizon_ = detail::get_f64(is);
  b.increments_.resize(b.particles_ * b.n_max_ * b.wiener_dim_);
  for (double& v : b.increments_) v = detail::get_f64(is);
  b.offsets_.assign(b.particles_ + 1, 0);
  for (std::size_t i = 0; i < b.particles_; ++i) {
    const std::size_t count = detail::get_u64(is);
    b.offsets_[i + 1] = b.offsets_[i] + count;
    for (std::size_t j = 0; j < count; ++j) {
      b.times_.push_back(detail::get_f64(is));
      for (std::size_t k = 0; k < b.mark_dim_; ++k) b.marks_.push_back(detail::get_f64(is));
    }
  }
  return b;
}

}  // namespace mvsde
