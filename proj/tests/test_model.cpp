#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mvsde/checks.hpp"
#include "mvsde/model.hpp"
#include "mvsde/presets.hpp"

using namespace mvsde;
using Catch::Approx;

namespace {

ModelSpec cubic_drift_only() {
  ModelSpec m;
  m.name = "cubic";
  m.chi = 4.0;
  m.drift = [](const CoefficientArgs& a, std::span<double> out) { out[0] = -a.x[0] * a.x[0] * a.x[0]; };
  return m;
}

double tamed_drift_at(const TamedModel& t, double x, double y = NAN) {
  const std::vector<double> xs{x};
  const std::vector<double> ys{y};
  const auto mu = EmpiricalMeasure::dirac(xs);
  CoefficientArgs a{0.0, xs, &mu};
  if (!std::isnan(y)) {
    a.x_delayed = ys;
    a.mu_delayed = &mu;
  }
  std::vector<double> out(1);
  t.drift(a, out);
  return out[0];
}

}  // namespace

TEST_CASE("plain taming divides by 1 + n^-1/2 |x|^chi", "[model]") {
  const auto t = tame(cubic_drift_only(), 16);
  CHECK(tamed_drift_at(t, 2.0) == Approx(-1.6).epsilon(1e-15));
  CHECK(tamed_drift_at(t, 0.0) == 0.0);
  CHECK(t.denominator(std::vector<double>{0.0}) == 1.0);
}

TEST_CASE("tamed drift recovers the raw drift monotonically in n", "[model]") {
  double previous = 0.0;
  for (std::size_t n : {4, 16, 64, 256, 1 << 20}) {
    const double v = std::abs(tamed_drift_at(tame(cubic_drift_only(), n), 3.0));
    CHECK(v >= previous);
    CHECK(v <= 27.0);
    previous = v;
  }
  CHECK(previous == Approx(27.0).epsilon(0.1));
  CHECK(std::abs(tamed_drift_at(untamed(cubic_drift_only(), 4), 3.0)) == 27.0);
}

TEST_CASE("delay taming adds n^-1/2 |y|^(2 chi)", "[model]") {
  ModelSpec m;
  m.chi = 1.0;
  m.horizon = 1.0;
  m.drift = [](const CoefficientArgs&, std::span<double> out) { out[0] = 1.0; };
  m.delay = DelaySpec{0.25, true, {}};
  const auto t = tame_delay(m, 4);
  CHECK(tamed_drift_at(t, 1.0, 2.0) == Approx(1.0 / 3.5).epsilon(1e-15));
  CHECK(tamed_drift_at(t, 0.0, 0.0) == 1.0);
  // the delay term only ever enlarges the denominator
  const auto plain = tame(m, 4);
  Stream s(4, Domain::sampling, 0);
  for (int i = 0; i < 200; ++i) {
    const double x = s.uniform(-5.0, 5.0);
    const double y = s.uniform(-5.0, 5.0);
    REQUIRE(std::abs(tamed_drift_at(t, x, y)) <= std::abs(tamed_drift_at(plain, x, y)));
  }
  m.delay->tame_delayed = false;
  CHECK(tamed_drift_at(tame_delay(m, 4), 1.0, 2.0) == Approx(1.0 / 1.5).epsilon(1e-15));
}

TEST_CASE("delay grid alignment", "[model]") {
  ModelSpec m;
  m.horizon = 2.0;
  m.delay = DelaySpec{0.5, true, {}};
  CHECK(delay_lag_steps(m, 64) == 16);
  CHECK_THROWS_AS(delay_lag_steps(m, 2), std::invalid_argument);
  CHECK_THROWS_AS(tame_delay(m, 6), std::invalid_argument);
  CHECK_THROWS_AS(delay_lag_steps(ModelSpec{}, 4), std::invalid_argument);
}

TEST_CASE("model validation", "[model]") {
  ModelSpec m;
  CHECK_NOTHROW(m.validate());
  m.chi = -1.0;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m.chi = 0.0;
  m.levy = LevySpec::finite_activity(1.0, 1, {});
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m.levy = LevySpec::truncated(0.0, 1.0, 1, [](Stream&, std::span<double> z) { z[0] = 1.0; });
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m.levy = LevySpec::finite_activity(1.0, 1, [](Stream&, std::span<double> z) { z[0] = 1.0; });
  m.jump = [](const CoefficientArgs&, std::span<const double>, std::span<double> out) { out[0] = 1.0; };
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  CHECK_THROWS_AS(tame(ModelSpec{}, 0), std::invalid_argument);
}

TEST_CASE("presets build and reject unknown names or parameters", "[model]") {
  for (const auto& name : preset_names()) {
    const auto m = preset(name);
    CHECK(m.name == name);
    CHECK(check_finite(m));
  }
  CHECK_THROWS_AS(preset("nope"), std::invalid_argument);
  CHECK_THROWS_AS(preset("mean_field_ou", {{"alpha", 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(preset("cubic_interaction", {{"dim", 1.5}}), std::invalid_argument);
  const auto m = preset("cubic_interaction", {{"dim", 3.0}});
  CHECK(m.dim == 3);
  CHECK(m.wiener_dim == 3);
  CHECK(m.levy.mark_dim == 3);
  CHECK(preset("switching_cubic").chain->states == 2);
  CHECK(preset("delay_cubic").delay->tau == 0.5);
}

TEST_CASE("mean_field_ou coefficients follow the documented formulas", "[model]") {
  const auto m = preset("mean_field_ou");
  const std::vector<double> x{2.0};
  const EmpiricalMeasure mu(1, {1.0, 3.0, 5.0});
  const CoefficientArgs a{0.3, x, &mu};
  std::vector<double> out(1);
  m.drift(a, out);
  CHECK(out[0] == Approx(-1.0 * 2.0 + 0.5 * 3.0));
  m.diffusion(a, out);
  CHECK(out[0] == 0.2);
  m.jump_compensator(a, out);
  CHECK(out[0] == Approx(1.0 * 0.1 * 1.0));
}

TEST_CASE("closed-form compensators match Monte Carlo on every preset", "[model]") {
  for (const auto& name : preset_names()) {
    for (double mark_shift : {0.0, 0.3}) {
      PresetParams p;
      if (name == "pure_jump_linear") p["mark_mean"] = mark_shift;
      const auto m = preset(name, p);
      const std::vector<double> x{1.7};
      const std::vector<double> y{0.4};
      const EmpiricalMeasure mu(1, {0.5, -0.2, 1.1});
      CoefficientArgs a{0.1, x, &mu};
      if (m.delay) {
        a.x_delayed = y;
        a.mu_delayed = &mu;
      }
      for (std::size_t regime = 0; regime < m.regimes; ++regime) {
        a.regime = regime;
        const auto c = check_compensator(m, a, 200000, 17 + regime);
        INFO(name << " regime " << regime << " exact " << c.exact[0] << " estimate " << c.estimate[0]);
        CHECK(c.passed);
      }
    }
  }
}

TEST_CASE("zero model passes the taming bound check trivially", "[model]") {
  ModelSpec m;
  const auto rep = check_taming_bounds(tame(m, 16), {.samples = 500});
  CHECK(rep.passed);
  CHECK(rep.drift_ratio == 0.0);
  CHECK(rep.diffusion_ratio == 0.0);
  CHECK(rep.jump_ratio == 0.0);
}

TEST_CASE("tamed cubic passes the bound check, raw cubic does not", "[model]") {
  const auto m = preset("cubic_interaction");
  for (std::size_t n : {16, 64, 256}) {
    const auto rep = check_taming_bounds(tame(m, n), {.samples = 10000, .max_abs_x = 10.0});
    INFO("n = " << n << " drift " << rep.drift_ratio << " diffusion " << rep.diffusion_ratio << " jump "
                << rep.jump_ratio);
    CHECK(rep.passed);
    CHECK(std::isfinite(rep.drift_ratio));
  }
  // growth of the worst ratio with the sampling range exposes the missing taming
  double previous = 0.0;
  for (double range : {10.0, 100.0, 1000.0}) {
    const auto rep = check_taming_bounds(untamed(m, 64), {.samples = 2000, .max_abs_x = range});
    CHECK(rep.drift_ratio > previous);
    previous = rep.drift_ratio;
  }
  CHECK_FALSE(check_taming_bounds(untamed(m, 64), {.samples = 2000, .max_abs_x = 1000.0}).passed);
}
