#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvsde/ctmc.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {

/// Everything a coefficient may look at. The regime and the delayed
/// arguments are only meaningful for switching and delay models.
struct CoefficientArgs {
  double t = 0.0;
  std::span<const double> x;
  const EmpiricalMeasure* mu = nullptr;
  std::size_t regime = 0;
  std::span<const double> x_delayed{};
  const EmpiricalMeasure* mu_delayed = nullptr;
};

/// Writes a vector in R^d (drift, compensator) into out.
using VectorField = std::function<void(const CoefficientArgs&, std::span<double> out)>;
/// Writes a d x m matrix, row-major, into out.
using MatrixField = std::function<void(const CoefficientArgs&, std::span<double> out)>;
/// Writes gamma(t, x, mu, z) in R^d into out.
using JumpField = std::function<void(const CoefficientArgs&, std::span<const double> mark, std::span<double> out)>;
using MarkSampler = std::function<void(Stream&, std::span<double> mark)>;

/// Jump intensity measure nu. Only finitely many jumps are ever simulated:
/// a truncated infinite-activity measure drops marks with |z| <= epsilon and
/// the user folds the small-jump compensator into jump_compensator.
struct LevySpec {
  enum class Kind { finite_activity, truncated_infinite };
  Kind kind = Kind::finite_activity;
  /// nu(Z), or nu({|z| > epsilon}) when truncated. Zero means no jumps.
  double intensity = 0.0;
  double epsilon = 0.0;
  std::size_t mark_dim = 1;
  MarkSampler sampler;
  std::optional<double> second_moment_bound;

  static LevySpec none() { return {}; }
  static LevySpec finite_activity(double lambda, std::size_t mark_dim, MarkSampler sampler) {
    return {Kind::finite_activity, lambda, 0.0, mark_dim, std::move(sampler), std::nullopt};
  }
  static LevySpec truncated(double epsilon, double lambda_eps, std::size_t mark_dim, MarkSampler sampler) {
    return {Kind::truncated_infinite, lambda_eps, epsilon, mark_dim, std::move(sampler), std::nullopt};
  }

  [[nodiscard]] bool has_jumps() const noexcept { return intensity > 0.0; }

  void validate() const {
    if (!(intensity >= 0.0) || !std::isfinite(intensity))
      throw std::invalid_argument("LevySpec: intensity must be finite and non-negative");
    if (kind == Kind::truncated_infinite && !(epsilon > 0.0))
      throw std::invalid_argument("LevySpec: truncation epsilon must be positive");
    if (has_jumps() && !sampler) throw std::invalid_argument("LevySpec: mark sampler required when intensity > 0");
    if (mark_dim == 0) throw std::invalid_argument("LevySpec: mark dimension must be positive");
  }
};

/// Law of x_0: a constant, an isotropic Gaussian, or a user sampler.
struct InitialLaw {
  enum class Kind { constant, gaussian, custom };
  Kind kind = Kind::constant;
  std::vector<double> location;
  double scale = 0.0;
  std::function<void(Stream&, std::span<double>)> sampler;

  static InitialLaw constant(std::vector<double> point) { return {Kind::constant, std::move(point), 0.0, {}}; }
  static InitialLaw gaussian(std::vector<double> mean, double sd) { return {Kind::gaussian, std::move(mean), sd, {}}; }
  static InitialLaw custom(std::function<void(Stream&, std::span<double>)> fn) {
    return {Kind::custom, {}, 0.0, std::move(fn)};
  }

  void sample(Stream& stream, std::span<double> out) const {
    switch (kind) {
      case Kind::constant:
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = location.at(k);
        return;
      case Kind::gaussian:
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = location.at(k) + scale * stream.normal();
        return;
      case Kind::custom:
        sampler(stream, out);
        return;
    }
  }
};

/// Single delay tau. The initial segment maps (s in [-tau, 0), x_0) to
/// y_s; when empty the segment is constant at x_0.
struct DelaySpec {
  double tau = 0.0;
  /// include n^{-1/2}|y_delayed|^{2 chi} in the taming denominator
  bool tame_delayed = true;
  std::function<void(double s, std::span<const double> x0, std::span<double> out)> segment;
};

/// Coefficients of a McKean-Vlasov SDE with compensated Poisson jumps.
/// Empty coefficient functions mean zero. Functions must be pure: they are
/// called concurrently from many workers.
struct ModelSpec {
  std::string name;
  std::size_t dim = 1;
  std::size_t wiener_dim = 1;
  VectorField drift;
  MatrixField diffusion;
  JumpField jump;
  /// exact value of the integral of jump(t, x, mu, z) against nu(dz)
  VectorField jump_compensator;
  LevySpec levy;
  double chi = 0.0;
  double p0 = 6.0;
  double horizon = 1.0;
  InitialLaw initial = InitialLaw::constant({0.0});
  /// number of chain states the coefficients understand
  std::size_t regimes = 1;
  std::optional<ChainSpec> chain;
  std::optional<DelaySpec> delay;

  void validate() const {
    if (dim == 0 || wiener_dim == 0) throw std::invalid_argument("ModelSpec: dimensions must be positive");
    if (!(chi >= 0.0)) throw std::invalid_argument("ModelSpec: chi must be >= 0");
    if (!(horizon > 0.0)) throw std::invalid_argument("ModelSpec: horizon must be positive");
    if (regimes == 0) throw std::invalid_argument("ModelSpec: regimes must be positive");
    levy.validate();
    if (levy.has_jumps() && jump && !jump_compensator)
      throw std::invalid_argument("ModelSpec: jump coefficient needs a closed-form compensator");
    if (chain) {
      chain->validate();
      if (chain->states > regimes) throw std::invalid_argument("ModelSpec: chain has more states than regimes");
    }
    if (delay && !(delay->tau > 0.0)) throw std::invalid_argument("ModelSpec: delay tau must be positive");
    if (initial.kind != InitialLaw::Kind::custom && initial.location.size() != dim)
      throw std::invalid_argument("ModelSpec: initial law dimension mismatch");
  }
};

enum class Taming {
  /// divide by 1 + n^{-1/2}|x|^chi
  plain,
  /// divide by 1 + n^{-1/2}|x|^chi + n^{-1/2}|y_delayed|^{2 chi}
  delay,
  /// diagnostic: no taming at all
  none,
};

/// Coefficients divided by the step-dependent taming denominator.
class TamedModel {
 public:
  TamedModel(ModelSpec model, std::size_t n, Taming mode)
      : model_(std::move(model)), n_(n), mode_(mode), inv_sqrt_n_(1.0 / std::sqrt(static_cast<double>(n))) {
    if (n_ == 0) throw std::invalid_argument("tame: n must be >= 1");
    model_.validate();
  }

  [[nodiscard]] const ModelSpec& model() const noexcept { return model_; }
  [[nodiscard]] std::size_t n() const noexcept { return n_; }
  [[nodiscard]] Taming mode() const noexcept { return mode_; }

  [[nodiscard]] double denominator(std::span<const double> x, std::span<const double> x_delayed = {}) const {
    if (mode_ == Taming::none) return 1.0;
    double den = 1.0 + inv_sqrt_n_ * growth(x, model_.chi);
    if (mode_ == Taming::delay && model_.delay && model_.delay->tame_delayed && !x_delayed.empty())
      den += inv_sqrt_n_ * growth(x_delayed, 2.0 * model_.chi);
    return den;
  }

  void drift(const CoefficientArgs& a, std::span<double> out) const {
    apply(model_.drift, a, out);
  }
  void diffusion(const CoefficientArgs& a, std::span<double> out) const {
    apply(model_.diffusion, a, out);
  }
  void jump_compensator(const CoefficientArgs& a, std::span<double> out) const {
    apply(model_.jump_compensator, a, out);
  }
  void jump(const CoefficientArgs& a, std::span<const double> mark, std::span<double> out) const {
    if (!model_.jump) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    model_.jump(a, mark, out);
    const double den = denominator(a.x, a.x_delayed);
    for (double& v : out) v /= den;
  }

 private:
  static double growth(std::span<const double> x, double exponent) {
    if (exponent == 0.0) return 0.0;
    double sq = 0.0;
    for (double v : x) sq += v * v;
    return sq == 0.0 ? 0.0 : std::pow(std::sqrt(sq), exponent);
  }

  void apply(const VectorField& f, const CoefficientArgs& a, std::span<double> out) const {
    if (!f) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    f(a, out);
    const double den = denominator(a.x, a.x_delayed);
    for (double& v : out) v /= den;
  }

  ModelSpec model_;
  std::size_t n_;
  Taming mode_;
  double inv_sqrt_n_;
};

[[nodiscard]] inline TamedModel tame(ModelSpec model, std::size_t n) { return {std::move(model), n, Taming::plain}; }

/// Number of grid steps per delay interval, tau * n / T; throws if the
/// delay is not aligned with the grid.
[[nodiscard]] inline std::size_t delay_lag_steps(const ModelSpec& model, std::size_t n) {
  if (!model.delay) throw std::invalid_argument("model has no delay");
  const double lag = model.delay->tau * static_cast<double>(n) / model.horizon;
  const double rounded = std::round(lag);
  if (rounded < 1.0 || std::abs(lag - rounded) > 1e-9 * std::max(1.0, lag))
    throw std::invalid_argument("delay tau = " + std::to_string(model.delay->tau) +
                                " is not a whole number of steps at n = " + std::to_string(n));
  return static_cast<std::size_t>(rounded);
}

[[nodiscard]] inline TamedModel tame_delay(ModelSpec model, std::size_t n) {
  (void)delay_lag_steps(model, n);
  return {std::move(model), n, Taming::delay};
}

/// Diagnostic mode: the raw coefficients behind the TamedModel interface.
[[nodiscard]] inline TamedModel untamed(ModelSpec model, std::size_t n) { return {std::move(model), n, Taming::none}; }

}  // namespace mvsde
