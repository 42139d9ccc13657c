#pragma once

// Built-in models. All presets extend coordinatewise to any dimension via
// the "dim" parameter (Wiener dimension and mark dimension equal dim).

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvsde/model.hpp"

namespace mvsde {

using PresetParams = std::map<std::string, double>;

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"mean_field_ou", "cubic_interaction", "switching_cubic",
                                              "delay_cubic", "pure_jump_linear"};
  return names;
}

namespace detail {

class ParamReader {
 public:
  ParamReader(std::string preset, const PresetParams& params) : preset_(std::move(preset)), params_(params) {}

  double get(const std::string& key, double fallback) {
    used_.insert(key);
    const auto it = params_.find(key);
    return it == params_.end() ? fallback : it->second;
  }

  std::size_t get_count(const std::string& key, std::size_t fallback) {
    const double v = get(key, static_cast<double>(fallback));
    if (!(v >= 1.0) || v != std::floor(v))
      throw std::invalid_argument(preset_ + ": parameter '" + key + "' must be a positive integer");
    return static_cast<std::size_t>(v);
  }

  void finish() const {
    for (const auto& [key, value] : params_)
      if (!used_.count(key)) throw std::invalid_argument(preset_ + ": unknown parameter '" + key + "'");
  }

 private:
  std::string preset_;
  const PresetParams& params_;
  std::set<std::string> used_;
};

inline MarkSampler gaussian_marks(double mean, double sd) {
  return [mean, sd](Stream& s, std::span<double> z) {
    for (double& v : z) v = mean + sd * s.normal();
  };
}

struct CubicParams {
  double kappa, s, g;
};

// b_k = -x_k^3 + kappa mean_k(mu), sigma = diag(s x_k), gamma_k = g x_k z_k
inline void fill_cubic(ModelSpec& m, std::vector<CubicParams> regimes, double lambda, double mark_mean) {
  const std::size_t d = m.dim;
  m.drift = [regimes, d](const CoefficientArgs& a, std::span<double> out) {
    const auto& p = regimes[a.regime];
    const auto mean = a.mu->mean();
    for (std::size_t k = 0; k < d; ++k) out[k] = -a.x[k] * a.x[k] * a.x[k] + p.kappa * mean[k];
  };
  m.diffusion = [regimes, d](const CoefficientArgs& a, std::span<double> out) {
    const auto& p = regimes[a.regime];
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < d; ++k) out[k * d + k] = p.s * a.x[k];
  };
  m.jump = [regimes, d](const CoefficientArgs& a, std::span<const double> z, std::span<double> out) {
    const auto& p = regimes[a.regime];
    for (std::size_t k = 0; k < d; ++k) out[k] = p.g * a.x[k] * z[k];
  };
  m.jump_compensator = [regimes, d, lambda, mark_mean](const CoefficientArgs& a, std::span<double> out) {
    const auto& p = regimes[a.regime];
    for (std::size_t k = 0; k < d; ++k) out[k] = lambda * p.g * a.x[k] * mark_mean;
  };
  m.regimes = regimes.size();
}

inline ModelSpec make_mean_field_ou(ParamReader& r) {
  ModelSpec m;
  m.name = "mean_field_ou";
  m.dim = m.wiener_dim = r.get_count("dim", 1);
  const std::size_t d = m.dim;
  const double a = r.get("a", -1.0);
  const double c = r.get("c", 0.5);
  const double sigma = r.get("sigma", 0.2);
  const double jump = r.get("jump", 0.1);
  const double lambda = r.get("lambda", 1.0);
  const double mark_mean = r.get("mark_mean", 1.0);
  const double mark_sd = r.get("mark_sd", 0.5);
  m.horizon = r.get("horizon", 1.0);
  m.initial = InitialLaw::gaussian(std::vector<double>(d, r.get("x0", 1.0)), r.get("x0_sd", 0.5));
  m.chi = 0.0;
  m.p0 = r.get("p0", 6.0);
  m.drift = [a, c, d](const CoefficientArgs& args, std::span<double> out) {
    const auto mean = args.mu->mean();
    for (std::size_t k = 0; k < d; ++k) out[k] = a * args.x[k] + c * mean[k];
  };
  m.diffusion = [sigma, d](const CoefficientArgs&, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < d; ++k) out[k * d + k] = sigma;
  };
  m.jump = [jump, d](const CoefficientArgs&, std::span<const double> z, std::span<double> out) {
    for (std::size_t k = 0; k < d; ++k) out[k] = jump * z[k];
  };
  m.jump_compensator = [jump, lambda, mark_mean, d](const CoefficientArgs&, std::span<double> out) {
    for (std::size_t k = 0; k < d; ++k) out[k] = lambda * jump * mark_mean;
  };
  m.levy = LevySpec::finite_activity(lambda, d, gaussian_marks(mark_mean, mark_sd));
  m.levy.second_moment_bound = lambda * jump * jump * (mark_mean * mark_mean + mark_sd * mark_sd);
  return m;
}

inline ModelSpec make_cubic(ParamReader& r, const std::string& name) {
  ModelSpec m;
  m.name = name;
  m.dim = m.wiener_dim = r.get_count("dim", 1);
  const double lambda = r.get("lambda", 1.0);
  const double mark_mean = r.get("mark_mean", 0.2);
  const double mark_sd = r.get("mark_sd", 0.5);
  m.horizon = r.get("horizon", 1.0);
  m.initial = InitialLaw::gaussian(std::vector<double>(m.dim, r.get("x0", 1.0)), r.get("x0_sd", 0.5));
  m.chi = 4.0;
  m.p0 = r.get("p0", 6.0);
  std::vector<CubicParams> regimes{{r.get("kappa", 0.5), r.get("s", 0.5), r.get("g", 0.5)}};
  if (name == "switching_cubic") {
    regimes.push_back({r.get("kappa1", -0.5), r.get("s1", 1.0), r.get("g1", 0.25)});
    const double q01 = r.get("q01", 1.0);
    const double q10 = r.get("q10", 2.0);
    m.chain = ChainSpec{2, {-q01, q01, q10, -q10}, 0};
  }
  fill_cubic(m, regimes, lambda, mark_mean);
  m.levy = LevySpec::finite_activity(lambda, m.dim, gaussian_marks(mark_mean, mark_sd));
  return m;
}

// f = -x^3 + kappa mean(mu) + beta y + kappa_d mean(mu_delayed)
inline ModelSpec make_delay_cubic(ParamReader& r) {
  ModelSpec m = make_cubic(r, "delay_cubic");
  const double beta = r.get("beta", 0.5);
  const double kappa_d = r.get("kappa_d", 0.25);
  const double kappa = r.get("kappa", 0.5);
  const std::size_t d = m.dim;
  m.drift = [beta, kappa, kappa_d, d](const CoefficientArgs& a, std::span<double> out) {
    const auto mean = a.mu->mean();
    const auto mean_d = a.mu_delayed->mean();
    for (std::size_t k = 0; k < d; ++k)
      out[k] = -a.x[k] * a.x[k] * a.x[k] + kappa * mean[k] + beta * a.x_delayed[k] + kappa_d * mean_d[k];
  };
  m.delay = DelaySpec{r.get("tau", 0.5), true, {}};
  return m;
}

inline ModelSpec make_pure_jump_linear(ParamReader& r) {
  ModelSpec m;
  m.name = "pure_jump_linear";
  m.dim = m.wiener_dim = r.get_count("dim", 1);
  const std::size_t d = m.dim;
  const double lambda = r.get("lambda", 2.0);
  const double half_width = r.get("mark_half_width", 0.5);
  const double mark_shift = r.get("mark_mean", 0.0);
  m.horizon = r.get("horizon", 1.0);
  m.initial = InitialLaw::gaussian(std::vector<double>(d, r.get("x0", 1.0)), r.get("x0_sd", 0.2));
  m.chi = 0.0;
  m.p0 = r.get("p0", 6.0);
  m.jump = [d](const CoefficientArgs& a, std::span<const double> z, std::span<double> out) {
    for (std::size_t k = 0; k < d; ++k) out[k] = a.x[k] * z[k];
  };
  m.jump_compensator = [d, lambda, mark_shift](const CoefficientArgs& a, std::span<double> out) {
    for (std::size_t k = 0; k < d; ++k) out[k] = lambda * a.x[k] * mark_shift;
  };
  m.levy = LevySpec::finite_activity(lambda, d, [half_width, mark_shift](Stream& s, std::span<double> z) {
    for (double& v : z) v = mark_shift + s.uniform(-half_width, half_width);
  });
  return m;
}

}  // namespace detail

/// Built-in model by name, with optional parameter overrides. Unknown names
/// and unknown parameters are rejected.
[[nodiscard]] inline ModelSpec preset(const std::string& name, const PresetParams& params = {}) {
  detail::ParamReader reader(name, params);
  ModelSpec m;
  if (name == "mean_field_ou") {
    m = detail::make_mean_field_ou(reader);
  } else if (name == "cubic_interaction" || name == "switching_cubic") {
    m = detail::make_cubic(reader, name);
  } else if (name == "delay_cubic") {
    m = detail::make_delay_cubic(reader);
  } else if (name == "pure_jump_linear") {
    m = detail::make_pure_jump_linear(reader);
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  reader.finish();
  m.validate();
  return m;
}

}  // namespace mvsde
