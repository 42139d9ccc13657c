#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvsde/rng.hpp"

namespace mvsde {

/// N equally weighted atoms in R^d, stored row-major. Immutable; the mean
/// and the second moment are computed once at construction so coefficient
/// functions can read them in O(d).
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(std::size_t dim, std::vector<double> atoms) : dim_(dim), atoms_(std::move(atoms)) {
    if (dim_ == 0) throw std::invalid_argument("EmpiricalMeasure: dimension must be positive");
    if (atoms_.empty() || atoms_.size() % dim_ != 0)
      throw std::invalid_argument("EmpiricalMeasure: need a positive whole number of atoms");
    for (double v : atoms_)
      if (!std::isfinite(v)) throw std::invalid_argument("EmpiricalMeasure: non-finite atom");
    const std::size_t n = size();
    mean_.assign(dim_, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double sq = 0.0;
      for (std::size_t k = 0; k < dim_; ++k) {
        const double v = atoms_[i * dim_ + k];
        mean_[k] += v;
        sq += v * v;
      }
      second_moment_ += sq;
    }
    for (double& m : mean_) m /= static_cast<double>(n);
    second_moment_ /= static_cast<double>(n);
  }

  /// copies atoms of the point repeated `copies` times
  static EmpiricalMeasure dirac(std::span<const double> point, std::size_t copies = 1) {
    std::vector<double> atoms;
    atoms.reserve(point.size() * copies);
    for (std::size_t i = 0; i < copies; ++i) atoms.insert(atoms.end(), point.begin(), point.end());
    return EmpiricalMeasure(point.size(), std::move(atoms));
  }

  [[nodiscard]] std::size_t size() const noexcept { return atoms_.size() / dim_; }
  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::span<const double> atom(std::size_t i) const noexcept {
    return {atoms_.data() + i * dim_, dim_};
  }
  [[nodiscard]] std::span<const double> atoms() const noexcept { return atoms_; }
  [[nodiscard]] std::span<const double> mean() const noexcept { return mean_; }
  /// (1/N) sum |x^j|^2
  [[nodiscard]] double second_moment() const noexcept { return second_moment_; }

 private:
  std::size_t dim_;
  std::vector<double> atoms_;
  std::vector<double> mean_;
  double second_moment_ = 0.0;
};

/// Empirical measures on a time grid: an element of D([0,T]; P_2) sampled
/// at grid resolution.
class MeasureFlow {
 public:
  MeasureFlow() = default;
  MeasureFlow(std::vector<double> times, std::vector<EmpiricalMeasure> measures)
      : times_(std::move(times)), measures_(std::move(measures)) {
    if (times_.size() != measures_.size())
      throw std::invalid_argument("MeasureFlow: one measure per grid time required");
    for (std::size_t k = 1; k < times_.size(); ++k) {
      if (!(times_[k] > times_[k - 1])) throw std::invalid_argument("MeasureFlow: times must increase");
      if (measures_[k].size() != measures_[0].size() || measures_[k].dim() != measures_[0].dim())
        throw std::invalid_argument("MeasureFlow: atom counts differ across times");
    }
  }

  [[nodiscard]] std::size_t size() const noexcept { return times_.size(); }
  [[nodiscard]] bool empty() const noexcept { return times_.empty(); }
  [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }
  [[nodiscard]] const EmpiricalMeasure& at(std::size_t k) const { return measures_.at(k); }
  [[nodiscard]] const EmpiricalMeasure& back() const { return measures_.back(); }
  [[nodiscard]] const std::vector<EmpiricalMeasure>& measures() const noexcept { return measures_; }

 private:
  std::vector<double> times_;
  std::vector<EmpiricalMeasure> measures_;
};

struct W2Method {
  enum class Kind { automatic, exact1d, assignment, sliced };
  Kind kind = Kind::automatic;
  std::size_t projections = 64;
  std::uint64_t seed = 0x5EED5EEDULL;

  static W2Method exact1d() { return {Kind::exact1d}; }
  static W2Method assignment() { return {Kind::assignment}; }
  static W2Method sliced(std::size_t p, std::uint64_t seed = 0x5EED5EEDULL) {
    return {Kind::sliced, p, seed};
  }
  /// exact1d for d = 1, sliced(64) otherwise
  static W2Method automatic() { return {Kind::automatic}; }
};

inline constexpr std::size_t kAssignmentCap = 512;

/// W2(mu, delta_0) = sqrt((1/N) sum |x^j|^2)
[[nodiscard]] inline double w2_to_dirac0(const EmpiricalMeasure& mu) { return std::sqrt(mu.second_moment()); }

/// (1/N) sum |x^j|^p
[[nodiscard]] inline double moment(const EmpiricalMeasure& mu, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("moment: p must be >= 1");
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double sq = 0.0;
    for (double v : mu.atom(i)) sq += v * v;
    acc += std::pow(std::sqrt(sq), p);
  }
  return acc / static_cast<double>(mu.size());
}

namespace detail {

inline void require_same_shape(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.size() != nu.size())
    throw std::invalid_argument("w2: unequal atom counts (" + std::to_string(mu.size()) + " vs " +
                                std::to_string(nu.size()) + ")");
  if (mu.dim() != nu.dim()) throw std::invalid_argument("w2: dimension mismatch");
}

inline double sorted_w2_squared(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) acc += (x[k] - y[k]) * (x[k] - y[k]);
  return acc;
}

}  // namespace detail

/// Minimum-cost perfect matching on a dense n x n cost matrix (row-major),
/// shortest augmenting paths with potentials, O(n^3). Returns column of each row.
[[nodiscard]] inline std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw std::invalid_argument("solve_assignment: cost must be n x n");
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; index 0 is the virtual source column
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> row_of(n + 1, 0), way(n + 1, 0);
  std::vector<double> min_slack(n + 1);
  std::vector<char> used(n + 1);
  for (std::size_t row = 1; row <= n; ++row) {
    row_of[0] = row;
    std::size_t col0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const std::size_t i0 = row_of[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < min_slack[j]) {
          min_slack[j] = cur;
          way[j] = col0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          col1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      col0 = col1;
    } while (row_of[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      row_of[col0] = row_of[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<std::size_t> col_of_row(n);
  for (std::size_t j = 1; j <= n; ++j) col_of_row[row_of[j] - 1] = j - 1;
  return col_of_row;
}

/// Exact W2 in d = 1: root-mean-square of sorted differences.
[[nodiscard]] inline double w2_exact1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  detail::require_same_shape(mu, nu);
  if (mu.dim() != 1) throw std::invalid_argument("w2 exact1d: requires d = 1");
  const auto a = mu.atoms();
  const auto b = nu.atoms();
  return std::sqrt(detail::sorted_w2_squared({a.begin(), a.end()}, {b.begin(), b.end()}));
}

/// Exact W2 by optimal assignment on squared Euclidean costs.
[[nodiscard]] inline double w2_assignment(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  detail::require_same_shape(mu, nu);
  const std::size_t n = mu.size();
  if (n > kAssignmentCap)
    throw std::invalid_argument("w2 assignment: N = " + std::to_string(n) + " exceeds cap " +
                                std::to_string(kAssignmentCap) + "; use sliced");
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = detail::squared_distance(mu.atom(i), nu.atom(j));
  const auto match = solve_assignment(cost, n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += cost[i * n + match[i]];
  return std::sqrt(acc / static_cast<double>(n));
}

struct SlicedEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Sliced W2: sqrt of the mean over random unit directions of the squared
/// exact 1-d W2 between projections. A different quantity from W2 (it is
/// never larger in expectation); the standard error is over directions.
[[nodiscard]] inline SlicedEstimate w2_sliced(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                              std::size_t projections, std::uint64_t seed) {
  detail::require_same_shape(mu, nu);
  if (projections == 0) throw std::invalid_argument("w2 sliced: need at least one projection");
  const std::size_t n = mu.size();
  const std::size_t d = mu.dim();
  Stream stream(seed, Domain::sliced, 0);
  std::vector<double> dir(d), a(n), b(n), sq(projections);
  for (std::size_t p = 0; p < projections; ++p) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& c : dir) {
        c = stream.normal();
        norm += c * c;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& c : dir) c /= norm;
    for (std::size_t i = 0; i < n; ++i) {
      double pa = 0.0, pb = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        pa += dir[k] * mu.atom(i)[k];
        pb += dir[k] * nu.atom(i)[k];
      }
      a[i] = pa;
      b[i] = pb;
    }
    sq[p] = detail::sorted_w2_squared(a, b);
  }
  const double mean_sq = std::accumulate(sq.begin(), sq.end(), 0.0) / static_cast<double>(projections);
  SlicedEstimate out;
  out.value = std::sqrt(mean_sq);
  if (projections > 1 && out.value > 0.0) {
    double var = 0.0;
    for (double s : sq) var += (s - mean_sq) * (s - mean_sq);
    var /= static_cast<double>(projections - 1);
    // delta method for the square root
    out.std_error = std::sqrt(var / static_cast<double>(projections)) / (2.0 * out.value);
  }
  return out;
}

[[nodiscard]] inline W2Method resolve(W2Method method, std::size_t dim) {
  if (method.kind != W2Method::Kind::automatic) return method;
  return dim == 1 ? W2Method::exact1d() : W2Method::sliced(64, method.seed);
}

/// W2 between equal-size empirical measures with the chosen method.
[[nodiscard]] inline double w2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                               W2Method method = W2Method::automatic()) {
  detail::require_same_shape(mu, nu);
  method = resolve(method, mu.dim());
  switch (method.kind) {
    case W2Method::Kind::exact1d:
      return w2_exact1d(mu, nu);
    case W2Method::Kind::assignment:
      return w2_assignment(mu, nu);
    case W2Method::Kind::sliced:
      return w2_sliced(mu, nu, method.projections, method.seed).value;
    case W2Method::Kind::automatic:
      break;
  }
  throw std::logic_error("w2: unresolved method");
}

/// rho_T(f, g) = max over grid times of W2(f_t, g_t)
[[nodiscard]] inline double flow_distance(const MeasureFlow& f, const MeasureFlow& g,
                                          W2Method method = W2Method::automatic()) {
  if (f.times() != g.times()) throw std::invalid_argument("flow_distance: grid mismatch");
  double out = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) out = std::max(out, w2(f.at(k), g.at(k), method));
  return out;
}

}  // namespace mvsde
