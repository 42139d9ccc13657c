#pragma once

// Fixed-point iteration on measure flows: freeze the flow, solve the
// resulting ordinary SDE for M independent particles, replace the flow by
// their empirical flow, repeat.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvsde/engine.hpp"
#include "mvsde/errors.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/model.hpp"
#include "mvsde/noise.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {

struct PicardOptions {
  /// time steps n; must be a power of two (it is also the noise resolution)
  std::size_t steps = 256;
  /// independent particles M per iterate
  std::size_t particles = 2000;
  double tol = 0.05;
  std::size_t max_iter = 20;
  std::uint64_t seed = 0;
  int threads = 0;
  W2Method w2 = W2Method::automatic();
  /// reuse iterate 0's noise in every iterate instead of fresh noise
  bool common_random_numbers = false;
};

struct PicardResult {
  MeasureFlow flow;
  /// distances[k] = flow_distance(mu^{k+1}, mu^k)
  std::vector<double> distances;
  std::size_t iterations = 0;
  bool converged = false;
  bool common_random_numbers = false;
};

/// max_iter reached with every distance >= tol. Usually tol sits below the
/// Monte Carlo floor of the distance estimate for this M.
class NonConvergence : public NumericalError {
 public:
  explicit NonConvergence(PicardResult result)
      : NumericalError("measure flow iteration did not reach tol after " + std::to_string(result.iterations) +
                       " iterates (last distance " +
                       (result.distances.empty() ? std::string("n/a") : std::to_string(result.distances.back())) +
                       ")"),
        result_(std::move(result)) {}

  [[nodiscard]] const PicardResult& result() const noexcept { return result_; }

 private:
  PicardResult result_;
};

namespace detail {

inline std::vector<double> initial_mean(const ModelSpec& m, std::size_t samples, std::uint64_t seed) {
  if (m.initial.kind != InitialLaw::Kind::custom) return m.initial.location;
  std::vector<double> mean(m.dim, 0.0), x(m.dim);
  for (std::size_t i = 0; i < samples; ++i) {
    Stream s(seed, Domain::initial, i);
    m.initial.sample(s, x);
    for (std::size_t k = 0; k < m.dim; ++k) mean[k] += x[k];
  }
  for (double& v : mean) v /= static_cast<double>(samples);
  return mean;
}

}  // namespace detail

/// Constant-in-time flow delta_point on the grid k T / n, k = 0..n, stored as
/// `copies` identical atoms so it is comparable with M-particle flows.
[[nodiscard]] inline MeasureFlow constant_flow(std::span<const double> point, std::size_t copies, std::size_t n,
                                               double horizon) {
  std::vector<double> times(n + 1);
  for (std::size_t k = 0; k <= n; ++k) times[k] = static_cast<double>(k) * horizon / static_cast<double>(n);
  times.back() = horizon;
  std::vector<EmpiricalMeasure> ms(n + 1, EmpiricalMeasure::dirac(point, copies));
  return {std::move(times), std::move(ms)};
}

/// Iterates from mu^0 = delta_{E x_0}. Returns on the first distance below
/// tol; throws NonConvergence (holding the full history) otherwise.
[[nodiscard]] inline PicardResult solve_measure_flow(const ModelSpec& model, const PicardOptions& opt) {
  if (model.delay || model.chain) throw std::invalid_argument("picard: delay and switching models are not supported");
  if (opt.steps == 0) throw std::invalid_argument("picard: n must be >= 1");
  if (opt.particles < 2) throw std::invalid_argument("picard: need M >= 2 particles");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("picard: tol must be positive");
  if (opt.max_iter == 0) throw std::invalid_argument("picard: max_iter must be >= 1");
  model.validate();

  const auto x_bar = detail::initial_mean(model, opt.particles, opt.seed);
  PicardResult res;
  res.common_random_numbers = opt.common_random_numbers;
  res.flow = constant_flow(x_bar, opt.particles, opt.steps, model.horizon);

  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    const std::uint64_t s = derive_seed(opt.seed, opt.common_random_numbers ? 0 : it);
    const auto bundle =
        generate_noise(s, opt.particles, model.wiener_dim, opt.steps, model.levy, model.horizon, opt.threads);
    SimulationOptions so;
    so.steps = opt.steps;
    so.record = Recording::grid;
    so.initial_seed = s;
    so.threads = opt.threads;
    so.frozen_flow = &res.flow;
    auto next = simulate(model, bundle, so).flow;
    res.distances.push_back(flow_distance(next, res.flow, opt.w2));
    res.flow = std::move(next);
    res.iterations = it + 1;
    if (res.distances.back() < opt.tol) {
      res.converged = true;
      return res;
    }
  }
  throw NonConvergence(std::move(res));
}

}  // namespace mvsde
