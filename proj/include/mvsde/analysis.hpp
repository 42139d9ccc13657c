#pragma once

// Convergence experiments: strong rate in n, propagation of chaos in N,
// one-step increments, and scheme moment sweeps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvsde/engine.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/model.hpp"
#include "mvsde/noise.hpp"
#include "mvsde/picard.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares of log2 y on log2 x. Needs >= 3 points, positive
/// values, and at least two distinct abscissae.
[[nodiscard]] inline RateFit fit_rate(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_rate: length mismatch");
  if (x.size() < 3) throw std::invalid_argument("fit_rate: need at least 3 points");
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(y[i]))
      throw std::invalid_argument("fit_rate: values must be positive and finite");
    lx[i] = std::log2(x[i]);
    ly[i] = std::log2(y[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_rate: degenerate abscissae (all equal)");
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (f.intercept + f.slope * lx[i]);
    sse += r * r;
  }
  f.slope_stderr = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return f;
}

struct RatePoint {
  /// n or N
  double resolution = 0.0;
  double mse = 0.0;
  double std_error = 0.0;
};

struct RateReport {
  std::string kind;
  std::vector<RatePoint> points;
  /// absent when fewer than 3 points or any value is zero
  std::optional<RateFit> fit;
  std::vector<std::string> notes;
};

namespace detail {

inline void fit_report(RateReport& r) {
  if (r.points.size() < 3) {
    r.notes.push_back("fewer than 3 points; no slope fitted");
    return;
  }
  std::vector<double> x, y;
  for (const auto& p : r.points) {
    if (!(p.mse > 0.0) || !std::isfinite(p.mse)) {
      r.notes.push_back("non-positive or non-finite value; no slope fitted");
      return;
    }
    x.push_back(p.resolution);
    y.push_back(p.mse);
  }
  r.fit = fit_rate(x, y);
}

// Running mean and variance of per-particle samples, combined in a fixed order.
struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;
  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++count;
  }
  [[nodiscard]] RatePoint point(double resolution) const {
    const double c = static_cast<double>(count);
    const double mean = sum / c;
    const double var = count > 1 ? std::max(0.0, (sum_sq - c * mean * mean) / (c - 1.0)) : 0.0;
    return {resolution, mean, std::sqrt(var / c)};
  }
};

inline double squared_gap(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

inline void check_resolution(std::size_t n, std::size_t n_max, const char* who) {
  if (n == 0 || n_max % n != 0)
    throw std::invalid_argument(std::string(who) + ": n = " + std::to_string(n) + " does not divide " +
                                std::to_string(n_max));
}

}  // namespace detail

struct StrongRateOptions {
  std::vector<std::size_t> n_list{16, 32, 64, 128, 256};
  std::size_t n_ref = 2048;
  std::size_t particles = 1000;
  std::size_t replications = 8;
  std::uint64_t seed = 0;
  int threads = 0;
};

/// E|X_ref^i(T) - X_n^i(T)|^2 for each n, where X_ref runs on the finest
/// grid n_ref from the same noise. Averages over particles and replications.
[[nodiscard]] inline RateReport strong_rate(const ModelSpec& model, const StrongRateOptions& opt) {
  if (opt.replications == 0 || opt.particles == 0) throw std::invalid_argument("strong_rate: empty experiment");
  for (std::size_t n : opt.n_list) detail::check_resolution(n, opt.n_ref, "strong_rate");
  std::vector<detail::Moments> acc(opt.n_list.size());
  for (std::size_t r = 0; r < opt.replications; ++r) {
    const std::uint64_t s = derive_seed(opt.seed, r);
    const auto bundle =
        generate_noise(s, opt.particles, model.wiener_dim, opt.n_ref, model.levy, model.horizon, opt.threads);
    SimulationOptions so;
    so.initial_seed = s;
    so.threads = opt.threads;
    so.steps = opt.n_ref;
    const auto ref = simulate_auto(model, bundle, so, s).flow.back();
    for (std::size_t j = 0; j < opt.n_list.size(); ++j) {
      so.steps = opt.n_list[j];
      const auto xn = simulate_auto(model, bundle, so, s).flow.back();
      for (std::size_t i = 0; i < opt.particles; ++i) acc[j].add(detail::squared_gap(ref.atom(i), xn.atom(i)));
    }
  }
  RateReport rep;
  rep.kind = "strong-rate";
  for (std::size_t j = 0; j < opt.n_list.size(); ++j)
    rep.points.push_back(acc[j].point(static_cast<double>(opt.n_list[j])));
  rep.notes.push_back("reference: coupled run at n_ref = " + std::to_string(opt.n_ref));
  detail::fit_report(rep);
  return rep;
}

enum class LawProxy {
  /// fixed point of the measure-flow iteration with M independent particles
  picard,
  /// one interacting run with M particles
  interacting,
};

struct PocOptions {
  std::vector<std::size_t> n_particles{32, 64, 128, 256, 512, 1024};
  /// time steps; must be a power of two
  std::size_t steps = 512;
  /// M, the particle count behind the law proxy; must exceed max(N)
  std::size_t law_particles = 8192;
  LawProxy proxy = LawProxy::picard;
  std::size_t replications = 4;
  std::uint64_t seed = 0;
  int threads = 0;
  double picard_tol = 0.05;
  std::size_t picard_max_iter = 10;
  W2Method w2 = W2Method::automatic();
};

/// E|x^i_T - x^{i,N}_T|^2 for each N: the interacting system against the
/// non-interacting system driven by a proxy of the true law, both on the
/// same noise for particles 1..N.
[[nodiscard]] inline RateReport poc_experiment(const ModelSpec& model, const PocOptions& opt) {
  if (opt.n_particles.empty()) throw std::invalid_argument("poc: empty N list");
  const std::size_t n_max = *std::max_element(opt.n_particles.begin(), opt.n_particles.end());
  if (opt.law_particles <= n_max)
    throw std::invalid_argument("poc: law proxy particles M = " + std::to_string(opt.law_particles) +
                                " must exceed max N = " + std::to_string(n_max));
  if (opt.replications == 0) throw std::invalid_argument("poc: replications must be >= 1");

  RateReport rep;
  rep.kind = "poc";
  const std::uint64_t law_seed = derive_seed(opt.seed, 0x1A3F);
  MeasureFlow law;
  if (opt.proxy == LawProxy::picard) {
    PicardOptions po;
    po.steps = opt.steps;
    po.particles = opt.law_particles;
    po.tol = opt.picard_tol;
    po.max_iter = opt.picard_max_iter;
    po.seed = law_seed;
    po.threads = opt.threads;
    po.w2 = opt.w2;
    try {
      auto pr = solve_measure_flow(model, po);
      law = std::move(pr.flow);
      rep.notes.push_back("law proxy: fixed-point flow, M = " + std::to_string(opt.law_particles) + ", " +
                          std::to_string(pr.iterations) + " iterates");
    } catch (const NonConvergence& e) {
      law = e.result().flow;
      rep.notes.push_back("law proxy: fixed-point flow did not reach tol; last iterate used");
    }
  } else {
    const auto bundle = generate_noise(law_seed, opt.law_particles, model.wiener_dim, opt.steps, model.levy,
                                       model.horizon, opt.threads);
    SimulationOptions so;
    so.steps = opt.steps;
    so.record = Recording::grid;
    so.initial_seed = law_seed;
    so.threads = opt.threads;
    law = simulate(model, bundle, so).flow;
    rep.notes.push_back("law proxy: interacting run, M = " + std::to_string(opt.law_particles));
  }
  rep.notes.push_back("proxy bias: the non-interacting reference carries an O(1/M) law error");

  std::vector<detail::Moments> acc(opt.n_particles.size());
  for (std::size_t r = 0; r < opt.replications; ++r) {
    const std::uint64_t s = derive_seed(opt.seed, r);
    const auto bundle =
        generate_noise(s, n_max, model.wiener_dim, opt.steps, model.levy, model.horizon, opt.threads);
    SimulationOptions so;
    so.steps = opt.steps;
    so.initial_seed = s;
    so.threads = opt.threads;
    so.frozen_flow = &law;
    const auto independent = simulate(model, bundle, so).flow.back();
    so.frozen_flow = nullptr;
    for (std::size_t j = 0; j < opt.n_particles.size(); ++j) {
      so.particles = opt.n_particles[j];
      const auto inter = simulate(model, bundle, so).flow.back();
      for (std::size_t i = 0; i < opt.n_particles[j]; ++i)
        acc[j].add(detail::squared_gap(inter.atom(i), independent.atom(i)));
    }
  }
  for (std::size_t j = 0; j < opt.n_particles.size(); ++j)
    rep.points.push_back(acc[j].point(static_cast<double>(opt.n_particles[j])));
  detail::fit_report(rep);
  return rep;
}

struct OneStepOptions {
  std::vector<std::size_t> n_list{16, 32, 64, 128, 256};
  std::size_t particles = 1000;
  double q = 2.0;
  std::uint64_t seed = 0;
  int threads = 0;
};

/// max over cells k of E|x_t - x_{t_k}|^q at the midpoint t = t_k + dt/2 of
/// the continuous-time scheme, for each n.
[[nodiscard]] inline RateReport one_step_rate(const ModelSpec& model, const OneStepOptions& opt) {
  if (opt.n_list.empty()) throw std::invalid_argument("one_step_rate: empty n list");
  if (!(opt.q > 0.0)) throw std::invalid_argument("one_step_rate: q must be positive");
  std::size_t fine = 1;
  const std::size_t n_top = *std::max_element(opt.n_list.begin(), opt.n_list.end());
  while (fine < 2 * n_top) fine *= 2;
  for (std::size_t n : opt.n_list) detail::check_resolution(2 * n, fine, "one_step_rate");
  const auto bundle = generate_noise(opt.seed, opt.particles, model.wiener_dim, fine, model.levy, model.horizon,
                                     opt.threads);
  RateReport rep;
  rep.kind = "one-step";
  for (std::size_t n : opt.n_list) {
    SimulationOptions so;
    so.steps = n;
    so.initial_seed = opt.seed;
    so.threads = opt.threads;
    so.midpoint_q = opt.q;
    const auto res = simulate_auto(model, bundle, so, opt.seed);
    const auto it = std::max_element(res.midpoint_moments.begin(), res.midpoint_moments.end());
    const auto k = static_cast<std::size_t>(it - res.midpoint_moments.begin());
    rep.points.push_back({static_cast<double>(n), *it, res.midpoint_stderr[k]});
  }
  rep.notes.push_back("q = " + std::to_string(opt.q));
  detail::fit_report(rep);
  return rep;
}

struct MomentPoint {
  std::size_t n = 0;
  /// sup over grid times of (1/N) sum |x^i_t|^p; +inf if the run blew up
  double sup_moment = 0.0;
  bool finite = true;
};

struct MomentSweepOptions {
  std::vector<std::size_t> n_list{16, 32, 64, 128, 256};
  std::size_t particles = 1000;
  double p = 6.0;
  Taming taming = Taming::plain;
  std::uint64_t seed = 0;
  int threads = 0;
};

/// Sup-in-time empirical p-moments for each n, all resolutions coupled.
[[nodiscard]] inline std::vector<MomentPoint> moment_sweep(const ModelSpec& model, const MomentSweepOptions& opt) {
  if (opt.n_list.empty()) throw std::invalid_argument("moment_sweep: empty n list");
  std::size_t fine = 1;
  const std::size_t n_top = *std::max_element(opt.n_list.begin(), opt.n_list.end());
  while (fine < n_top) fine *= 2;
  for (std::size_t n : opt.n_list) detail::check_resolution(n, fine, "moment_sweep");
  const auto bundle = generate_noise(opt.seed, opt.particles, model.wiener_dim, fine, model.levy, model.horizon,
                                     opt.threads);
  std::vector<MomentPoint> out;
  for (std::size_t n : opt.n_list) {
    SimulationOptions so;
    so.steps = n;
    so.record = Recording::grid;
    so.initial_seed = opt.seed;
    so.threads = opt.threads;
    so.taming = opt.taming;
    MomentPoint pt{n, 0.0, true};
    try {
      const auto m = moment_tracker(simulate_auto(model, bundle, so, opt.seed).flow, opt.p);
      pt.sup_moment = *std::max_element(m.begin(), m.end());
      pt.finite = std::isfinite(pt.sup_moment);
    } catch (const NonFinite&) {
      pt.sup_moment = std::numeric_limits<double>::infinity();
      pt.finite = false;
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace mvsde
