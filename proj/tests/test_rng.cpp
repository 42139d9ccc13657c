#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "mvsde/parallel.hpp"
#include "mvsde/rng.hpp"

using namespace mvsde;

TEST_CASE("philox matches the published known-answer vectors", "[rng]") {
  // Random123 kat_vectors, philox4x32 with 10 rounds
  const auto zero = philox4x32({0, 0, 0, 0}, {0, 0});
  CHECK(zero == std::array<std::uint32_t, 4>{0x6627e8d5U, 0xe169c58dU, 0xbc57ac4cU, 0x9b00dbd8U});
  const auto ones = philox4x32({0xffffffffU, 0xffffffffU, 0xffffffffU, 0xffffffffU}, {0xffffffffU, 0xffffffffU});
  CHECK(ones == std::array<std::uint32_t, 4>{0x408f276dU, 0x41c83b0eU, 0xa20bc7c6U, 0x6d5451fdU});
  const auto pi = philox4x32({0x243f6a88U, 0x85a308d3U, 0x13198a2eU, 0x03707344U}, {0xa4093822U, 0x299f31d0U});
  CHECK(pi == std::array<std::uint32_t, 4>{0xd16cfe09U, 0x94fdccebU, 0x5001e420U, 0x24126ea1U});
}

TEST_CASE("streams are reproducible and random-access", "[rng]") {
  Stream a(42, Domain::wiener, 7);
  Stream b(42, Domain::wiener, 7);
  for (int i = 0; i < 100; ++i) REQUIRE(a.normal() == b.normal());
  const Stream c(42, Domain::wiener, 7);
  Stream d(42, Domain::wiener, 7);
  for (std::uint64_t i = 0; i < 50; ++i) REQUIRE(d.normal() == c.normal_at(i));
  CHECK(d.position() == 50);
}

TEST_CASE("domains, ids and seeds separate streams", "[rng]") {
  Stream base(1, Domain::wiener, 0);
  Stream other_domain(1, Domain::jumps, 0);
  Stream other_id(1, Domain::wiener, 1);
  Stream other_seed(2, Domain::wiener, 0);
  const double x = base.uniform();
  CHECK(x != other_domain.uniform());
  CHECK(x != other_id.uniform());
  CHECK(x != other_seed.uniform());
  CHECK(derive_seed(5, 0) != derive_seed(5, 1));
  CHECK(derive_seed(5, 0) != derive_seed(6, 0));
}

TEST_CASE("uniforms lie in the open unit interval", "[rng]") {
  Stream s(9, Domain::sampling, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = s.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("normal and exponential draws have the right first two moments", "[rng]") {
  constexpr int n = 200000;
  Stream s(3, Domain::sampling, 0);
  double sum = 0.0, sq = 0.0, esum = 0.0, esq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    sum += z;
    sq += z * z;
    const double e = s.exponential(2.0);
    esum += e;
    esq += e * e;
  }
  // standard errors: mean 1/sqrt(n), variance sqrt(2/n); exponential(2) mean 0.5 with sd 0.5
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(sq / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(esum / n - 0.5) < 4.0 * 0.5 / std::sqrt(n));
  CHECK(std::abs(esq / n - 0.5) < 4.0 * std::sqrt((24.0 / 16.0 - 0.25) / n));
}

TEST_CASE("parallel_for visits every index once and rethrows failures", "[rng]") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::set<int>(hits.begin(), hits.end()) == std::set<int>{1});
  CHECK_THROWS_AS(parallel_for(100, 4,
                               [](std::size_t i) {
                                 if (i == 57) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}
