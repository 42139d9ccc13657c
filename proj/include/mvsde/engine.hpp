#pragma once

// Tamed Euler stepper for the interacting particle system, with regime
// switching and delay variants sharing one runner.

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mvsde/ctmc.hpp"
#include "mvsde/errors.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/model.hpp"
#include "mvsde/noise.hpp"
#include "mvsde/parallel.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {

enum class Recording {
  /// only the ensemble at T
  endpoint,
  /// the ensemble at every grid time k T / n, k = 0..n
  grid,
};

struct SimulationOptions {
  std::size_t steps = 0;
  /// 0 uses every particle in the bundle
  std::size_t particles = 0;
  Recording record = Recording::endpoint;
  std::uint64_t initial_seed = 0;
  int threads = 0;
  /// plain or none; delay models switch plain to delay taming automatically
  Taming taming = Taming::plain;
  /// If set, the coefficients see frozen_flow->at(k) instead of the
  /// ensemble's own empirical measure: the particles no longer interact.
  const MeasureFlow* frozen_flow = nullptr;
  /// accumulate sum of gamma^n over events minus compensator^n dt per particle
  bool track_jump_term = false;
  /// If set, mean |x_t - x_{t_k}|^q at the cell midpoint t = t_k + dt/2 is
  /// recorded for every cell. Needs n_max >= 2 n.
  std::optional<double> midpoint_q;
  /// N x d initial values overriding the initial law
  std::optional<std::vector<double>> initial;
};

struct SimulationResult {
  MeasureFlow flow;
  /// time steps n of the run
  std::size_t steps = 0;
  /// chain state used in each cell (switching runs only)
  std::vector<std::size_t> chain_states;
  /// N x d, when track_jump_term is set
  std::vector<double> jump_term;
  /// one entry per cell, when midpoint_q is set
  std::vector<double> midpoint_moments;
  /// standard error of each midpoint moment over particles
  std::vector<double> midpoint_stderr;

  [[nodiscard]] const EmpiricalMeasure& final_ensemble() const { return flow.back(); }
};

/// Inputs of one step of the scheme.
struct StepInput {
  std::size_t k = 0;
  /// N x d ensemble at t_k
  std::span<const double> ensemble;
  /// measure the coefficients see; usually the empirical measure of ensemble
  const EmpiricalMeasure* mu = nullptr;
  std::size_t regime = 0;
  /// N x d delayed values, empty for non-delay models
  std::span<const double> delayed{};
  const EmpiricalMeasure* mu_delayed = nullptr;
};

namespace detail {

struct Scratch {
  std::vector<double> drift, diffusion, dw, jump, comp;
  void fit(std::size_t d, std::size_t m) {
    drift.resize(d);
    diffusion.resize(d * m);
    dw.resize(m);
    jump.resize(d);
    comp.resize(d);
  }
};

inline Scratch& scratch(std::size_t d, std::size_t m) {
  thread_local Scratch s;
  s.fit(d, m);
  return s;
}

// x' = x + b h + sigma dW + sum gamma(z) - comp h over one (sub)cell; all
// coefficients at the left grid point. Returns the increment in `out`.
inline void euler_increment(const TamedModel& tamed, const NoiseView& view, std::size_t cell, double h,
                            std::size_t i, const CoefficientArgs& args, std::span<double> out,
                            std::span<double> jump_term) {
  const ModelSpec& m = tamed.model();
  const std::size_t d = m.dim;
  const std::size_t wd = m.wiener_dim;
  Scratch& s = scratch(d, wd);
  std::fill(out.begin(), out.end(), 0.0);
  if (m.drift) {
    tamed.drift(args, s.drift);
    for (std::size_t a = 0; a < d; ++a) out[a] += s.drift[a] * h;
  }
  if (m.diffusion) {
    tamed.diffusion(args, s.diffusion);
    view.increment(i, cell, s.dw);
    for (std::size_t a = 0; a < d; ++a) {
      double acc = 0.0;
      for (std::size_t b = 0; b < wd; ++b) acc += s.diffusion[a * wd + b] * s.dw[b];
      out[a] += acc;
    }
  }
  if (m.jump && m.levy.has_jumps()) {
    const auto [first, last] = view.events_in_cell(i, cell);
    for (std::size_t e = first; e < last; ++e) {
      tamed.jump(args, view.bundle().event(i, e).mark, s.jump);
      for (std::size_t a = 0; a < d; ++a) {
        out[a] += s.jump[a];
        if (!jump_term.empty()) jump_term[a] += s.jump[a];
      }
    }
  }
  if (m.jump_compensator && m.levy.has_jumps()) {
    tamed.jump_compensator(args, s.comp);
    for (std::size_t a = 0; a < d; ++a) {
      out[a] -= s.comp[a] * h;
      if (!jump_term.empty()) jump_term[a] -= s.comp[a] * h;
    }
  }
}

inline CoefficientArgs args_for(const StepInput& in, std::size_t i, std::size_t d, double t) {
  CoefficientArgs a;
  a.t = t;
  a.x = in.ensemble.subspan(i * d, d);
  a.mu = in.mu;
  a.regime = in.regime;
  if (!in.delayed.empty()) a.x_delayed = in.delayed.subspan(i * d, d);
  a.mu_delayed = in.mu_delayed;
  return a;
}

}  // namespace detail

/// One step of the scheme from t_k to t_{k+1} for every particle. Returns the
/// new N x d ensemble; throws NonFinite naming the lowest bad particle.
/// jump_term, if non-empty (N x d), accumulates the compensated jump part.
[[nodiscard]] inline std::vector<double> step(const TamedModel& tamed, const NoiseView& view, const StepInput& in,
                                              int threads = 0, std::span<double> jump_term = {}) {
  const std::size_t d = tamed.model().dim;
  if (view.n() != tamed.n()) throw std::invalid_argument("step: noise view resolution differs from the scheme");
  if (in.ensemble.size() % d != 0 || in.mu == nullptr) throw std::invalid_argument("step: malformed input");
  const std::size_t particles = in.ensemble.size() / d;
  if (particles > view.particles()) throw std::invalid_argument("step: more particles than noise streams");
  const double dt = view.dt();
  const double t = static_cast<double>(in.k) * dt;
  std::vector<double> next(in.ensemble.begin(), in.ensemble.end());
  parallel_for(particles, threads, [&](std::size_t i) {
    const auto args = detail::args_for(in, i, d, t);
    thread_local std::vector<double> delta;
    delta.resize(d);
    detail::euler_increment(tamed, view, in.k, dt, i, args, delta,
                            jump_term.empty() ? std::span<double>{} : jump_term.subspan(i * d, d));
    for (std::size_t a = 0; a < d; ++a) next[i * d + a] += delta[a];
  });
  for (std::size_t i = 0; i < particles; ++i)
    for (std::size_t a = 0; a < d; ++a)
      if (!std::isfinite(next[i * d + a])) throw NonFinite(i, in.k);
  return next;
}

namespace detail {

inline std::vector<double> initial_ensemble(const ModelSpec& m, std::size_t particles, const SimulationOptions& opt) {
  const std::size_t d = m.dim;
  if (opt.initial) {
    if (opt.initial->size() != particles * d)
      throw std::invalid_argument("simulate: initial override must hold N x d values");
    return *opt.initial;
  }
  std::vector<double> x(particles * d);
  parallel_for(particles, opt.threads, [&](std::size_t i) {
    Stream s(opt.initial_seed, Domain::initial, i);
    m.initial.sample(s, {x.data() + i * d, d});
  });
  return x;
}

// Mean |x_{t_k + dt/2} - x_{t_k}|^q over particles, using the fine view at
// resolution 2n: its cell 2k is the first half of coarse cell k.
inline std::pair<double, double> midpoint_moment(const TamedModel& tamed, const NoiseView& half,
                                                const StepInput& in, double q, int threads) {
  const std::size_t d = tamed.model().dim;
  const std::size_t particles = in.ensemble.size() / d;
  const double t = static_cast<double>(in.k) * 2.0 * half.dt();
  std::vector<double> norms(particles);
  parallel_for(particles, threads, [&](std::size_t i) {
    const auto args = args_for(in, i, d, t);
    thread_local std::vector<double> delta;
    delta.resize(d);
    euler_increment(tamed, half, 2 * in.k, half.dt(), i, args, delta, {});
    double sq = 0.0;
    for (double v : delta) sq += v * v;
    norms[i] = std::pow(std::sqrt(sq), q);
  });
  const double np = static_cast<double>(particles);
  double acc = 0.0;
  for (double v : norms) acc += v;
  const double mean = acc / np;
  if (particles < 2) return {mean, 0.0};
  double var = 0.0;
  for (double v : norms) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / (np - 1.0) / np)};
}

struct DelayState {
  std::size_t lag = 0;
  // ensembles for grid indices k - lag .. k, oldest first
  std::deque<std::vector<double>> values;
  std::deque<EmpiricalMeasure> measures;
};

inline DelayState seed_delay(const ModelSpec& m, std::size_t n, std::span<const double> x0, std::size_t particles,
                             int threads) {
  DelayState h;
  h.lag = delay_lag_steps(m, n);
  const std::size_t d = m.dim;
  const double dt = m.horizon / static_cast<double>(n);
  for (std::size_t back = h.lag; back >= 1; --back) {
    const double s = -static_cast<double>(back) * dt;
    std::vector<double> y(particles * d);
    parallel_for(particles, threads, [&](std::size_t i) {
      const auto xi = x0.subspan(i * d, d);
      std::span<double> out{y.data() + i * d, d};
      if (m.delay->segment)
        m.delay->segment(s, xi, out);
      else
        std::copy(xi.begin(), xi.end(), out.begin());
    });
    h.measures.emplace_back(d, y);
    h.values.push_back(std::move(y));
  }
  return h;
}

enum class RunKind { plain, switching, delay };

inline SimulationResult run(const ModelSpec& model, const NoiseBundle& bundle, const SimulationOptions& opt,
                            RunKind kind, const CtmcPath* path) {
  const std::size_t n = opt.steps;
  const std::size_t d = model.dim;
  if (n == 0) throw std::invalid_argument("simulate: steps must be >= 1");
  if (bundle.wiener_dim() != model.wiener_dim) throw std::invalid_argument("simulate: bundle Wiener dimension mismatch");
  if (std::abs(bundle.horizon() - model.horizon) > 1e-12 * model.horizon)
    throw std::invalid_argument("simulate: bundle horizon differs from the model horizon");
  const std::size_t particles = opt.particles == 0 ? bundle.particles() : opt.particles;
  if (particles > bundle.particles())
    throw std::invalid_argument("simulate: N = " + std::to_string(particles) + " exceeds the bundle's " +
                                std::to_string(bundle.particles()) + " particles");
  if (opt.taming == Taming::delay) throw std::invalid_argument("simulate: choose plain or none taming");
  if (opt.frozen_flow && opt.frozen_flow->size() != n + 1)
    throw std::invalid_argument("simulate: frozen flow must hold n + 1 grid measures");
  if (opt.frozen_flow && kind == RunKind::delay)
    throw std::invalid_argument("simulate: frozen flows are not supported for delay models");

  const Taming mode = (kind == RunKind::delay && opt.taming == Taming::plain) ? Taming::delay : opt.taming;
  const TamedModel tamed(model, n, mode);
  const NoiseView view(bundle, n);
  std::optional<NoiseView> half;
  if (opt.midpoint_q) half.emplace(bundle, 2 * n);

  const double dt = model.horizon / static_cast<double>(n);
  std::vector<double> x = initial_ensemble(model, particles, opt);

  SimulationResult res;
  res.steps = n;
  if (opt.track_jump_term) res.jump_term.assign(particles * d, 0.0);
  std::vector<double> times;
  std::vector<EmpiricalMeasure> recorded;
  std::optional<DelayState> history;
  if (kind == RunKind::delay) history = seed_delay(model, n, x, particles, opt.threads);

  for (std::size_t k = 0;; ++k) {
    EmpiricalMeasure mu(d, x);
    if (opt.record == Recording::grid || k == n) {
      times.push_back(static_cast<double>(k) * dt);
      recorded.push_back(mu);
    }
    if (k == n) break;
    if (history) {
      history->values.push_back(x);
      history->measures.push_back(mu);
    }

    StepInput in;
    in.k = k;
    in.ensemble = x;
    in.mu = opt.frozen_flow ? &opt.frozen_flow->at(k) : &mu;
    if (kind == RunKind::switching) {
      in.regime = path->state_at(static_cast<double>(k) * dt);
      res.chain_states.push_back(in.regime);
    }
    if (history) {
      in.delayed = history->values.front();
      in.mu_delayed = &history->measures.front();
    }
    if (half) {
      const auto [value, se] = midpoint_moment(tamed, *half, in, *opt.midpoint_q, opt.threads);
      res.midpoint_moments.push_back(value);
      res.midpoint_stderr.push_back(se);
    }
    std::vector<double> next = step(tamed, view, in, opt.threads, res.jump_term);
    if (history) {
      history->values.pop_front();
      history->measures.pop_front();
    }
    x = std::move(next);
  }
  // the endpoint time is exactly T, not the accumulated n * dt
  times.back() = model.horizon;
  res.flow = MeasureFlow(std::move(times), std::move(recorded));
  return res;
}

}  // namespace detail

/// Interacting particle system driven by the bundle coarsened to opt.steps.
[[nodiscard]] inline SimulationResult simulate(const ModelSpec& model, const NoiseBundle& bundle,
                                               const SimulationOptions& opt) {
  if (model.delay) throw std::invalid_argument("simulate: model has a delay; use simulate_delay");
  return detail::run(model, bundle, opt, detail::RunKind::plain, nullptr);
}

/// Regime switching: one chain path shared by every particle, read at the
/// left grid point of each cell.
[[nodiscard]] inline SimulationResult simulate_switching(const ModelSpec& model, const CtmcPath& path,
                                                         const NoiseBundle& bundle, const SimulationOptions& opt) {
  if (model.delay) throw std::invalid_argument("simulate_switching: delay models are not supported");
  if (path.states.empty()) throw std::invalid_argument("simulate_switching: empty chain path");
  for (std::size_t s : path.states)
    if (s >= model.regimes) throw std::invalid_argument("simulate_switching: chain state outside model regimes");
  return detail::run(model, bundle, opt, detail::RunKind::switching, &path);
}

/// Delay model: needs tau n / T to be a whole number of steps.
[[nodiscard]] inline SimulationResult simulate_delay(const ModelSpec& model, const NoiseBundle& bundle,
                                                     const SimulationOptions& opt) {
  if (!model.delay) throw std::invalid_argument("simulate_delay: model has no delay");
  return detail::run(model, bundle, opt, detail::RunKind::delay, nullptr);
}

/// Samples the model's chain path from `chain_seed` when it has one, then
/// dispatches on the model kind.
[[nodiscard]] inline SimulationResult simulate_auto(const ModelSpec& model, const NoiseBundle& bundle,
                                                    const SimulationOptions& opt, std::uint64_t chain_seed = 0) {
  if (model.delay) return simulate_delay(model, bundle, opt);
  if (model.chain) {
    Stream s(chain_seed, Domain::chain, 0);
    return simulate_switching(model, sample_ctmc(*model.chain, model.horizon, s), bundle, opt);
  }
  return simulate(model, bundle, opt);
}

/// Empirical p-th moment (1/N) sum |x^i_t|^p at every time of the flow.
[[nodiscard]] inline std::vector<double> moment_tracker(const MeasureFlow& flow, double p) {
  std::vector<double> out;
  out.reserve(flow.size());
  for (const auto& mu : flow.measures()) out.push_back(moment(mu, p));
  return out;
}

}  // namespace mvsde
