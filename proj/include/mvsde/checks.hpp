#pragma once

// Numerical spot checks of model assumptions on randomly sampled inputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mvsde/model.hpp"

namespace mvsde {

/// Growth exponents for the tamed drift, diffusion and jump second moment.
struct TamingExponents {
  double drift = 0.25;
  double diffusion = 1.0 / 6.0;
  double jump = 1.0 / 3.0;
};

struct BoundCheckOptions {
  std::size_t samples = 10000;
  /// |x| is drawn log-uniformly from [min_abs_x, max_abs_x]
  double min_abs_x = 1e-3;
  double max_abs_x = 1e3;
  /// violation threshold for every ratio
  double constant = 10.0;
  std::size_t atoms = 4;
  /// marks per sample for the Monte Carlo jump second moment
  std::size_t marks = 32;
  std::uint64_t seed = 0xB0B0;
  TamingExponents exponents{};
};

struct BoundReport {
  double drift_ratio = 0.0;
  double diffusion_ratio = 0.0;
  double jump_ratio = 0.0;
  std::size_t samples = 0;
  bool passed = true;
};

namespace detail {

inline double norm(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

inline void sample_point(Stream& s, std::span<double> out, double lo, double hi) {
  double r = 0.0;
  for (double& v : out) {
    v = s.normal();
    r += v * v;
  }
  r = std::sqrt(r);
  const double mag = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * s.uniform());
  for (double& v : out) v = r > 0.0 ? v / r * mag : mag;
}

inline EmpiricalMeasure sample_measure(Stream& s, std::size_t dim, std::size_t atoms, double lo, double hi) {
  std::vector<double> pts(dim * atoms);
  for (std::size_t i = 0; i < atoms; ++i) sample_point(s, {pts.data() + i * dim, dim}, lo, hi);
  return EmpiricalMeasure(dim, std::move(pts));
}

}  // namespace detail

/// Largest observed ratios
///   |b^n| / (n^{1/4} (Mbar + |x| + W2(mu, delta_0)))
///   |sigma^n| / (n^{1/6} (Mbar + |x| + W2(mu, delta_0)))
///   int |gamma^n|^2 nu(dz) / (n^{1/3} (Mbar + |x| + W2(mu, delta_0))^2)
/// over random (t, x, mu). Mbar = 1 for ordinary models; for delay models
/// it is 1 + |y_delayed| + W2(mu_delayed, delta_0). Exceeding the constant
/// is a report outcome, not an error.
[[nodiscard]] inline BoundReport check_taming_bounds(const TamedModel& tamed, const BoundCheckOptions& opt = {}) {
  const ModelSpec& m = tamed.model();
  const std::size_t d = m.dim;
  const double n = static_cast<double>(tamed.n());
  Stream s(opt.seed, Domain::sampling, 0);
  std::vector<double> x(d), xd(d), out(d), mat(d * m.wiener_dim), mark(m.levy.mark_dim);
  BoundReport rep;
  rep.samples = opt.samples;
  for (std::size_t i = 0; i < opt.samples; ++i) {
    detail::sample_point(s, x, opt.min_abs_x, opt.max_abs_x);
    const auto mu = detail::sample_measure(s, d, opt.atoms, opt.min_abs_x, opt.max_abs_x);
    CoefficientArgs args{s.uniform() * m.horizon, x, &mu, 0, {}, nullptr};
    if (m.regimes > 1) args.regime = std::min(m.regimes - 1, static_cast<std::size_t>(s.uniform() * m.regimes));
    double mbar = 1.0;
    std::optional<EmpiricalMeasure> mu_d;
    if (m.delay) {
      detail::sample_point(s, xd, opt.min_abs_x, opt.max_abs_x);
      mu_d = detail::sample_measure(s, d, opt.atoms, opt.min_abs_x, opt.max_abs_x);
      args.x_delayed = xd;
      args.mu_delayed = &*mu_d;
      mbar += detail::norm(xd) + w2_to_dirac0(*mu_d);
    }
    const double base = mbar + detail::norm(x) + w2_to_dirac0(mu);

    tamed.drift(args, out);
    rep.drift_ratio = std::max(rep.drift_ratio, detail::norm(out) / (std::pow(n, opt.exponents.drift) * base));
    tamed.diffusion(args, mat);
    rep.diffusion_ratio =
        std::max(rep.diffusion_ratio, detail::norm(mat) / (std::pow(n, opt.exponents.diffusion) * base));
    if (m.levy.has_jumps() && m.jump) {
      double acc = 0.0;
      for (std::size_t j = 0; j < opt.marks; ++j) {
        m.levy.sampler(s, mark);
        tamed.jump(args, mark, out);
        const double g = detail::norm(out);
        acc += g * g;
      }
      const double second = m.levy.intensity * acc / static_cast<double>(opt.marks);
      rep.jump_ratio = std::max(rep.jump_ratio, second / (std::pow(n, opt.exponents.jump) * base * base));
    }
  }
  rep.passed = std::isfinite(rep.drift_ratio) && std::isfinite(rep.diffusion_ratio) &&
               std::isfinite(rep.jump_ratio) && rep.drift_ratio <= opt.constant &&
               rep.diffusion_ratio <= opt.constant && rep.jump_ratio <= opt.constant;
  return rep;
}

struct CompensatorCheck {
  std::vector<double> exact;
  std::vector<double> estimate;
  std::vector<double> std_error;
  /// every coordinate within `tolerance_se` standard errors
  bool passed = true;
};

/// Compares jump_compensator(t, x, mu) with the Monte Carlo average of
/// lambda * jump(t, x, mu, Z), Z ~ mark sampler, at one evaluation point.
[[nodiscard]] inline CompensatorCheck check_compensator(const ModelSpec& m, const CoefficientArgs& args,
                                                        std::size_t samples = 100000, std::uint64_t seed = 0xC0FFEE,
                                                        double tolerance_se = 4.0) {
  const std::size_t d = m.dim;
  CompensatorCheck out;
  out.exact.assign(d, 0.0);
  out.estimate.assign(d, 0.0);
  out.std_error.assign(d, 0.0);
  if (m.jump_compensator) m.jump_compensator(args, out.exact);
  if (!m.levy.has_jumps() || !m.jump) {
    for (double e : out.exact) out.passed = out.passed && e == 0.0;
    return out;
  }
  Stream s(seed, Domain::sampling, 1);
  std::vector<double> mark(m.levy.mark_dim), val(d), sum(d, 0.0), sum_sq(d, 0.0);
  for (std::size_t i = 0; i < samples; ++i) {
    m.levy.sampler(s, mark);
    m.jump(args, mark, val);
    for (std::size_t k = 0; k < d; ++k) {
      sum[k] += val[k];
      sum_sq[k] += val[k] * val[k];
    }
  }
  const double ns = static_cast<double>(samples);
  const double lambda = m.levy.intensity;
  for (std::size_t k = 0; k < d; ++k) {
    const double mean = sum[k] / ns;
    const double var = std::max(0.0, sum_sq[k] / ns - mean * mean) * ns / (ns - 1.0);
    out.estimate[k] = lambda * mean;
    out.std_error[k] = lambda * std::sqrt(var / ns);
    const double diff = std::abs(out.estimate[k] - out.exact[k]);
    out.passed = out.passed && (out.std_error[k] > 0.0 ? diff <= tolerance_se * out.std_error[k]
                                                       : diff <= 1e-12 * std::max(1.0, std::abs(out.exact[k])));
  }
  return out;
}

/// True if every coefficient returns finite values on `samples` random inputs.
[[nodiscard]] inline bool check_finite(const ModelSpec& m, std::size_t samples = 1000, double max_abs_x = 1e2,
                                       std::uint64_t seed = 0xF1F1) {
  const std::size_t d = m.dim;
  Stream s(seed, Domain::sampling, 2);
  std::vector<double> x(d), xd(d), out(d), mat(d * m.wiener_dim), mark(m.levy.mark_dim);
  auto finite = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
  };
  for (std::size_t i = 0; i < samples; ++i) {
    detail::sample_point(s, x, 1e-3, max_abs_x);
    const auto mu = detail::sample_measure(s, d, 4, 1e-3, max_abs_x);
    CoefficientArgs args{s.uniform() * m.horizon, x, &mu, i % m.regimes, {}, nullptr};
    std::optional<EmpiricalMeasure> mu_d;
    if (m.delay) {
      detail::sample_point(s, xd, 1e-3, max_abs_x);
      mu_d = detail::sample_measure(s, d, 4, 1e-3, max_abs_x);
      args.x_delayed = xd;
      args.mu_delayed = &*mu_d;
    }
    if (m.drift) {
      m.drift(args, out);
      if (!finite(out)) return false;
    }
    if (m.diffusion) {
      m.diffusion(args, mat);
      if (!finite(mat)) return false;
    }
    if (m.jump && m.levy.has_jumps()) {
      m.levy.sampler(s, mark);
      m.jump(args, mark, out);
      if (!finite(out)) return false;
    }
    if (m.jump_compensator) {
      m.jump_compensator(args, out);
      if (!finite(out)) return false;
    }
  }
  return true;
}

}  // namespace mvsde
