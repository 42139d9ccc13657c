// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion plus
// the measured quantities, and exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "mvsde/mvsde.hpp"

using namespace mvsde;

namespace {

// pinned thresholds
constexpr double kStrongSlopeCubic = -0.7;
constexpr double kStrongR2 = 0.95;
constexpr double kStrongSlopeLipschitz = -0.85;
constexpr double kOneStepSlopeQ2 = -0.85;
constexpr double kOneStepSlopeQ1 = -0.4;
constexpr double kPocSlopeLowDim = -0.35;
constexpr double kPocBandLo = -0.6;
constexpr double kPocBandHi = -0.2;
constexpr double kMomentSpread = 2.0;
constexpr double kBlowUp = 1e10;
constexpr double kW2Tol = 1e-12;
constexpr double kOracleSe = 4.0;
constexpr double kCalibrationSd = 4.0;
constexpr double kBoundConstant = 10.0;
constexpr double kMartingaleSe = 4.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

void note(Outcome& o, const char* fmt, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, fmt, v);
  if (!o.detail.empty()) o.detail += ' ';
  o.detail += buf;
}

const RateFit& require_fit(const RateReport& r) {
  if (!r.fit) throw std::runtime_error(r.kind + ": no slope fitted");
  return *r.fit;
}

Outcome strong_rate_cubic() {
  Outcome o;
  StrongRateOptions opt;
  opt.seed = 101;
  const auto& f = require_fit(strong_rate(preset("cubic_interaction"), opt));
  o.pass = f.slope <= kStrongSlopeCubic && f.r2 >= kStrongR2;
  note(o, "slope=%.3f", f.slope);
  note(o, "r2=%.4f", f.r2);
  return o;
}

Outcome strong_rate_lipschitz() {
  Outcome o;
  StrongRateOptions opt;
  opt.seed = 102;
  const auto& f = require_fit(strong_rate(preset("mean_field_ou"), opt));
  o.pass = f.slope <= kStrongSlopeLipschitz;
  note(o, "slope=%.3f", f.slope);
  note(o, "r2=%.4f", f.r2);
  return o;
}

Outcome one_step() {
  Outcome o;
  OneStepOptions opt;
  opt.particles = 10000;
  opt.seed = 103;
  opt.q = 2.0;
  const auto q2 = require_fit(one_step_rate(preset("mean_field_ou"), opt));
  opt.q = 1.0;
  const auto q1 = require_fit(one_step_rate(preset("mean_field_ou"), opt));
  o.pass = q2.slope <= kOneStepSlopeQ2 && q1.slope <= kOneStepSlopeQ1;
  note(o, "q2_slope=%.3f", q2.slope);
  note(o, "q1_slope=%.3f", q1.slope);
  return o;
}

Outcome propagation_of_chaos() {
  Outcome o;
  PocOptions opt;
  opt.n_particles = {32, 64, 128, 256, 512, 1024};
  opt.steps = 512;
  opt.law_particles = 8192;
  opt.replications = 32;
  opt.seed = 104;
  const auto low = require_fit(poc_experiment(preset("cubic_interaction"), opt));
  const auto high = require_fit(poc_experiment(preset("cubic_interaction", {{"dim", 5.0}}), opt));
  const bool low_ok = low.slope <= kPocSlopeLowDim;
  const bool high_ok = high.slope >= kPocBandLo && high.slope <= kPocBandHi;
  o.pass = low_ok && high_ok;
  note(o, "d1_slope=%.3f", low.slope);
  o.detail += low_ok ? "(ok)" : "(fail)";
  note(o, "d5_slope=%.3f", high.slope);
  o.detail += high_ok ? "(ok)" : "(fail)";
  return o;
}

Outcome moment_bounds() {
  Outcome o;
  MomentSweepOptions opt;
  opt.n_list = {16, 32, 64, 128, 256};
  opt.particles = 1000;
  opt.p = 6.0;
  opt.seed = 105;
  const auto tamed = moment_sweep(preset("cubic_interaction"), opt);
  double lo = INFINITY, hi = 0.0;
  for (const auto& p : tamed) {
    lo = std::min(lo, p.sup_moment);
    hi = std::max(hi, p.sup_moment);
  }
  opt.n_list = {16};
  opt.taming = Taming::none;
  const auto raw = moment_sweep(preset("cubic_interaction", {{"x0", 5.0}}), opt);
  o.pass = std::isfinite(hi) && hi / lo <= kMomentSpread && raw[0].sup_moment > kBlowUp;
  note(o, "tamed_spread=%.4f", hi / lo);
  note(o, "untamed_sup=%.3g", raw[0].sup_moment);
  return o;
}

double brute_force_w2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  std::vector<std::size_t> perm(mu.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i)
      for (std::size_t k = 0; k < mu.dim(); ++k) {
        const double diff = mu.atom(i)[k] - nu.atom(perm[i])[k];
        c += diff * diff;
      }
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(mu.size()));
}

Outcome w2_oracle() {
  Outcome o;
  Stream s(106, Domain::sampling, 0);
  double worst_bf = 0.0, worst_1d = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + static_cast<std::size_t>(s.uniform() * 3.0);
    const std::size_t n = 2 + static_cast<std::size_t>(s.uniform() * 7.0);
    std::vector<double> a(d * n), b(d * n);
    for (double& v : a) v = s.normal();
    for (double& v : b) v = 0.5 + 2.0 * s.normal();
    const EmpiricalMeasure mu(d, a), nu(d, b);
    const double assign = w2_assignment(mu, nu);
    worst_bf = std::max(worst_bf, std::abs(assign - brute_force_w2(mu, nu)));
    if (d == 1) worst_1d = std::max(worst_1d, std::abs(w2_exact1d(mu, nu) - assign));
  }
  o.pass = worst_bf <= kW2Tol && worst_1d <= kW2Tol;
  note(o, "max|assign-brute|=%.2e", worst_bf);
  note(o, "max|exact1d-assign|=%.2e", worst_1d);
  return o;
}

double rk4_linear(double r, double m0, double t, int steps) {
  const double h = t / steps;
  double m = m0;
  for (int i = 0; i < steps; ++i) {
    const double k1 = r * m;
    const double k2 = r * (m + 0.5 * h * k1);
    const double k3 = r * (m + 0.5 * h * k2);
    const double k4 = r * (m + h * k3);
    m += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return m;
}

Outcome picard_agreement() {
  Outcome o;
  // (a) mean curve of the fixed point against the moment ODE m' = (a + c) m
  PicardOptions po;
  po.steps = 256;
  po.particles = 10000;
  po.tol = 0.05;
  po.max_iter = 20;
  po.seed = 107;
  const auto ou = solve_measure_flow(preset("mean_field_ou"), po);
  double worst_z = 0.0;
  for (std::size_t k = 0; k < ou.flow.size(); ++k) {
    const auto& mu = ou.flow.at(k);
    const double mean = mu.mean()[0];
    const double se = std::sqrt((mu.second_moment() - mean * mean) / static_cast<double>(mu.size()));
    const double oracle = rk4_linear(-0.5, 1.0, ou.flow.times()[k], 200);
    if (se > 0.0) worst_z = std::max(worst_z, std::abs(mean - oracle) / se);
  }
  const bool ode_ok = worst_z <= kOracleSe;

  // (b) fixed point against a direct interacting run, tolerance from repeated seeds
  const auto cubic = preset("cubic_interaction");
  const std::size_t n = 256, particles = 2000;
  auto interacting = [&](std::uint64_t seed) {
    const auto b = generate_noise(seed, particles, 1, n, cubic.levy, cubic.horizon);
    SimulationOptions so;
    so.steps = n;
    so.record = Recording::grid;
    so.initial_seed = seed;
    return simulate(cubic, b, so).flow;
  };
  std::vector<double> pair_distances;
  for (std::uint64_t j = 0; j < 8; ++j)
    pair_distances.push_back(flow_distance(interacting(1000 + 2 * j), interacting(1001 + 2 * j)));
  const double mean = std::accumulate(pair_distances.begin(), pair_distances.end(), 0.0) / 8.0;
  double var = 0.0;
  for (double d : pair_distances) var += (d - mean) * (d - mean);
  const double tol = mean + kCalibrationSd * std::sqrt(var / 7.0);
  po.steps = n;
  po.particles = particles;
  po.tol = tol;
  po.seed = 108;
  MeasureFlow fixed;
  bool converged = true;
  try {
    fixed = solve_measure_flow(cubic, po).flow;
  } catch (const NonConvergence& e) {
    fixed = e.result().flow;
    converged = false;
  }
  const double gap = flow_distance(fixed, interacting(2024));
  const bool flow_ok = gap < tol;
  o.pass = ode_ok && flow_ok;
  note(o, "ou_max_z=%.2f", worst_z);
  note(o, "cubic_gap=%.4f", gap);
  note(o, "calibrated_tol=%.4f", tol);
  if (!converged) o.detail += " (fixed point stopped at max_iter)";
  return o;
}

Outcome taming_bounds() {
  Outcome o;
  double worst = 0.0;
  for (const auto& name : preset_names()) {
    const auto m = preset(name);
    for (std::size_t n : {16, 256, 4096}) {
      const auto tamed = m.delay ? tame_delay(m, n) : tame(m, n);
      BoundCheckOptions bo;
      bo.samples = 10000;
      bo.max_abs_x = 1e3;
      bo.constant = kBoundConstant;
      bo.seed = 109 + n;
      const auto rep = check_taming_bounds(tamed, bo);
      worst = std::max({worst, rep.drift_ratio, rep.diffusion_ratio, rep.jump_ratio});
      if (!rep.passed) {
        o.pass = false;
        o.detail += name + "@n=" + std::to_string(n) + " ";
      }
    }
  }
  note(o, "max_ratio=%.4f", worst);
  return o;
}

bool same_flow(const MeasureFlow& a, const MeasureFlow& b) {
  if (a.times() != b.times()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto x = a.at(k).atoms();
    const auto y = b.at(k).atoms();
    if (!std::equal(x.begin(), x.end(), y.begin(), y.end())) return false;
  }
  return true;
}

Outcome noise_invariants() {
  Outcome o;
  // coarsening: every divisor's increments equal the in-order fine sums
  const auto b = generate_noise(110, 64, 2, 2048, LevySpec::none(), 1.0);
  bool sums_ok = true;
  std::vector<double> out(2);
  for (std::size_t n = 1; n <= 2048; n *= 2) {
    const auto v = coarsen(b, n);
    const std::size_t f = 2048 / n;
    for (std::size_t i = 0; i < 64; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        v.increment(i, k, out);
        for (std::size_t j = 0; j < 2; ++j) {
          double s = 0.0;
          for (std::size_t c = k * f; c < (k + 1) * f; ++c) s += b.increments(i)[c * 2 + j];
          sums_ok = sums_ok && out[j] == s;
        }
      }
  }

  // compensated jump part of pure_jump_linear has mean zero
  const auto pj = preset("pure_jump_linear");
  const auto jb = generate_noise(111, 20000, 1, 64, pj.levy, pj.horizon);
  SimulationOptions so;
  so.steps = 64;
  so.initial_seed = 111;
  so.track_jump_term = true;
  const auto r = simulate(pj, jb, so);
  double sum = 0.0, sq = 0.0;
  for (double v : r.jump_term) {
    sum += v;
    sq += v * v;
  }
  const double nn = static_cast<double>(r.jump_term.size());
  const double mean = sum / nn;
  const double z = std::abs(mean) / std::sqrt((sq / nn - mean * mean) / nn);

  // thread count never changes values
  const auto cubic = preset("cubic_interaction");
  const auto one = generate_noise(112, 800, 1, 256, cubic.levy, 1.0, 1);
  const auto many = generate_noise(112, 800, 1, 256, cubic.levy, 1.0, 4);
  SimulationOptions to;
  to.steps = 128;
  to.record = Recording::grid;
  to.threads = 1;
  const auto f1 = simulate(cubic, one, to).flow;
  to.threads = 4;
  const bool det_ok = one == many && same_flow(f1, simulate(cubic, many, to).flow);

  o.pass = sums_ok && z <= kMartingaleSe && det_ok;
  o.detail = std::string("coarsen_exact=") + (sums_ok ? "yes" : "no");
  note(o, "jump_mean_z=%.2f", z);
  o.detail += std::string(" thread_bitexact=") + (det_ok ? "yes" : "no");
  return o;
}

Outcome reductions() {
  Outcome o;
  const auto plain = preset("cubic_interaction");
  const auto b = generate_noise(113, 500, 1, 256, plain.levy, 1.0);
  SimulationOptions so;
  so.steps = 128;
  so.record = Recording::grid;
  so.initial_seed = 113;
  const auto reference = simulate(plain, b, so).flow;

  auto single = plain;
  single.chain = ChainSpec::single_state();
  Stream cs(113, Domain::chain, 0);
  const bool switch_ok =
      same_flow(simulate_switching(single, sample_ctmc(*single.chain, 1.0, cs), b, so).flow, reference);

  auto delayed = plain;
  delayed.delay = DelaySpec{0.25, false, {}};
  const bool delay_ok = same_flow(simulate_delay(delayed, b, so).flow, reference);

  o.pass = switch_ok && delay_ok;
  o.detail = std::string("single_state_switching=") + (switch_ok ? "bitexact" : "differs") +
             " unused_delay=" + (delay_ok ? "bitexact" : "differs");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"strong rate, cubic interaction", strong_rate_cubic},
      {"strong rate, Lipschitz mean-field OU", strong_rate_lipschitz},
      {"one-step rate, q = 2 and q = 1", one_step},
      {"propagation of chaos, d = 1 and d = 5", propagation_of_chaos},
      {"scheme moment bound and untamed blow-up", moment_bounds},
      {"W2 assignment vs brute force and exact1d", w2_oracle},
      {"fixed-point flow vs ODE and interacting run", picard_agreement},
      {"taming growth bounds on all presets", taming_bounds},
      {"noise coarsening, jump martingale, thread determinism", noise_invariants},
      {"switching and delay reductions", reductions},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += out.pass ? 0 : 1;
    std::printf("[%s] %2zu %s: %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
