#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "mvsde/noise.hpp"
#include "mvsde/presets.hpp"

using namespace mvsde;

namespace {

LevySpec unit_marks(double lambda) {
  return LevySpec::finite_activity(lambda, 1, [](Stream& s, std::span<double> z) { z[0] = s.uniform(); });
}

}  // namespace

TEST_CASE("zero intensity produces no jump events", "[noise]") {
  const auto b = generate_noise(1, 50, 1, 16, LevySpec::none(), 1.0);
  for (std::size_t i = 0; i < b.particles(); ++i) CHECK(b.event_count(i) == 0);
}

TEST_CASE("increments have variance T / n_max", "[noise]") {
  // N = 1, n_max = 2^10, T = 1; pool 10^5 draws over 98 independent seeds
  const std::size_t n_max = 1024;
  double sum = 0.0, sq = 0.0, fourth = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; count < 100000; ++seed) {
    const auto b = generate_noise(seed, 1, 1, n_max, LevySpec::none(), 1.0);
    for (double v : b.increments(0)) {
      sum += v;
      sq += v * v;
      fourth += v * v * v * v;
      ++count;
    }
  }
  const double c = static_cast<double>(count);
  const double var = sq / c - (sum / c) * (sum / c);
  const double se = std::sqrt((fourth / c - (sq / c) * (sq / c)) / c);
  CHECK(std::abs(var - 1.0 / 1024.0) < 3.0 * se);
}

TEST_CASE("jump counts are Poisson(lambda T) with sorted times in [0, T]", "[noise]") {
  const auto b = generate_noise(7, 10000, 1, 8, unit_marks(2.0), 1.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < b.particles(); ++i) {
    sum += static_cast<double>(b.event_count(i));
    const auto t = b.event_times(i);
    for (std::size_t j = 0; j < t.size(); ++j) {
      REQUIRE(t[j] >= 0.0);
      REQUIRE(t[j] <= 1.0);
      if (j > 0) REQUIRE(t[j] > t[j - 1]);
    }
  }
  const double mean = sum / 10000.0;
  CHECK(std::abs(mean - 2.0) < 3.0 * std::sqrt(2.0 / 10000.0));
}

TEST_CASE("bundle generation rejects bad arguments", "[noise]") {
  CHECK_THROWS_AS(generate_noise(1, 4, 1, 12, LevySpec::none(), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(generate_noise(1, 4, 1, 16, LevySpec::none(), 0.0), std::invalid_argument);
  const auto b = generate_noise(1, 4, 1, 16, LevySpec::none(), 1.0);
  CHECK_THROWS_AS(coarsen(b, 3), std::invalid_argument);
  CHECK_THROWS_AS(coarsen(b, 32), std::invalid_argument);
}

TEST_CASE("coarsening sums fine increments exactly", "[noise]") {
  const auto b = generate_noise(3, 5, 2, 8, LevySpec::none(), 1.0);
  const auto full = coarsen(b, 8);
  const auto half = coarsen(b, 4);
  std::vector<double> out(2), f0(2), f1(2);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto inc = b.increments(i);
    for (std::size_t k = 0; k < 8; ++k) {
      full.increment(i, k, out);
      REQUIRE(out[0] == inc[2 * k]);
      REQUIRE(out[1] == inc[2 * k + 1]);
    }
    for (std::size_t k = 0; k < 4; ++k) {
      half.increment(i, k, out);
      for (std::size_t j = 0; j < 2; ++j) REQUIRE(out[j] == inc[(2 * k) * 2 + j] + inc[(2 * k + 1) * 2 + j]);
    }
    // total displacement is the same at every resolution
    for (std::size_t n : {1, 2, 4, 8}) {
      const auto v = coarsen(b, n);
      double total = 0.0, fine_total = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        v.increment(i, k, out);
        total += out[0];
      }
      for (std::size_t k = 0; k < 8; ++k) fine_total += inc[2 * k];
      REQUIRE(std::abs(total - fine_total) < 1e-14);
    }
  }
}

TEST_CASE("events land in the coarse cell containing their time", "[noise]") {
  const auto b = generate_noise(4, 200, 1, 64, unit_marks(5.0), 2.0);
  for (std::size_t n : {1, 4, 64}) {
    const auto v = coarsen(b, n);
    for (std::size_t i = 0; i < b.particles(); ++i) {
      std::size_t seen = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const auto [first, last] = v.events_in_cell(i, k);
        REQUIRE(first == seen);
        for (std::size_t e = first; e < last; ++e) {
          const double t = b.event(i, e).time;
          REQUIRE(t >= 2.0 * static_cast<double>(k) / static_cast<double>(n));
          REQUIRE(t < 2.0 * static_cast<double>(k + 1) / static_cast<double>(n));
        }
        seen = last;
      }
      REQUIRE(seen == b.event_count(i));
    }
  }
}

TEST_CASE("particle noise does not depend on N or on the worker count", "[noise]") {
  const auto levy = unit_marks(3.0);
  const auto small = generate_noise(9, 10, 2, 32, levy, 1.0, 1);
  const auto large = generate_noise(9, 40, 2, 32, levy, 1.0, 4);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto a = small.increments(i);
    const auto c = large.increments(i);
    REQUIRE(std::equal(a.begin(), a.end(), c.begin()));
    REQUIRE(small.event_count(i) == large.event_count(i));
    for (std::size_t e = 0; e < small.event_count(i); ++e) {
      REQUIRE(small.event(i, e).time == large.event(i, e).time);
      REQUIRE(small.event(i, e).mark[0] == large.event(i, e).mark[0]);
    }
  }
  CHECK(generate_noise(9, 40, 2, 32, levy, 1.0, 1) == large);
}

TEST_CASE("increments of different particles are uncorrelated", "[noise]") {
  const auto b = generate_noise(12, 2, 1, 1 << 15, LevySpec::none(), 1.0);
  const auto x = b.increments(0);
  const auto y = b.increments(1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += x[k] * y[k];
    sxx += x[k] * x[k];
    syy += y[k] * y[k];
  }
  const double corr = sxy / std::sqrt(sxx * syy);
  CHECK(std::abs(corr) < 4.0 / std::sqrt(static_cast<double>(x.size())));
}

TEST_CASE("binary dump round-trips and rejects foreign data", "[noise]") {
  const auto b = generate_noise(21, 6, 2, 16, preset("cubic_interaction", {{"dim", 2.0}}).levy, 1.5);
  std::stringstream ss;
  save_noise(b, ss);
  const auto raw = ss.str();
  CHECK(raw.substr(0, 4) == "MVNB");
  CHECK(static_cast<unsigned char>(raw[4]) == 1);
  std::stringstream in(raw);
  CHECK(load_noise(in) == b);
  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(load_noise(bad), std::runtime_error);
  std::stringstream truncated(raw.substr(0, raw.size() - 3));
  CHECK_THROWS_AS(load_noise(truncated), std::runtime_error);
}
