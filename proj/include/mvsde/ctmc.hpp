#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvsde/rng.hpp"

namespace mvsde {

/// Continuous-time Markov chain on {0, ..., states-1} with generator Q
/// (row-major). Off-diagonal entries are jump rates; each row sums to zero.
struct ChainSpec {
  std::size_t states = 1;
  std::vector<double> generator{0.0};
  std::size_t initial = 0;

  [[nodiscard]] double rate(std::size_t from, std::size_t to) const { return generator.at(from * states + to); }

  void validate() const {
    if (states == 0) throw std::invalid_argument("ChainSpec: need at least one state");
    if (generator.size() != states * states) throw std::invalid_argument("ChainSpec: generator must be m0 x m0");
    if (initial >= states) throw std::invalid_argument("ChainSpec: initial state out of range");
    for (std::size_t i = 0; i < states; ++i) {
      double row = 0.0;
      double scale = 0.0;
      for (std::size_t j = 0; j < states; ++j) {
        const double q = rate(i, j);
        if (!std::isfinite(q)) throw std::invalid_argument("ChainSpec: non-finite rate");
        if (i != j && q < 0.0)
          throw std::invalid_argument("ChainSpec: negative off-diagonal rate in row " + std::to_string(i));
        row += q;
        scale += std::abs(q);
      }
      if (std::abs(row) > 1e-12 * std::max(1.0, scale))
        throw std::invalid_argument("ChainSpec: row " + std::to_string(i) + " does not sum to zero");
    }
  }

  static ChainSpec single_state() { return {}; }
};

/// Right-continuous piecewise-constant path: states[0] holds on
/// [0, jump_times[0]), states[k] on [jump_times[k-1], jump_times[k]).
struct CtmcPath {
  std::vector<double> jump_times;
  std::vector<std::size_t> states;

  [[nodiscard]] std::size_t state_at(double t) const {
    const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    return states[static_cast<std::size_t>(it - jump_times.begin())];
  }
  [[nodiscard]] std::size_t switches() const noexcept { return jump_times.size(); }

  static CtmcPath constant(std::size_t state) { return {{}, {state}}; }
};

/// Exact simulation on [0, horizon]: Exponential(-q_ii) holding times and
/// jumps to j with probability q_ij / (-q_ii). Absorbing rows hold forever.
[[nodiscard]] inline CtmcPath sample_ctmc(const ChainSpec& chain, double horizon, Stream& stream) {
  chain.validate();
  CtmcPath path{{}, {chain.initial}};
  double t = 0.0;
  std::size_t current = chain.initial;
  for (;;) {
    const double exit_rate = -chain.rate(current, current);
    if (!(exit_rate > 0.0)) break;
    t += stream.exponential(exit_rate);
    if (t > horizon) break;
    double pick = stream.uniform() * exit_rate;
    std::size_t next = current;
    for (std::size_t j = 0; j < chain.states; ++j) {
      if (j == current) continue;
      const double q = chain.rate(current, j);
      if (q <= 0.0) continue;
      next = j;
      if (pick < q) break;
      pick -= q;
    }
    current = next;
    path.jump_times.push_back(t);
    path.states.push_back(current);
  }
  return path;
}

}  // namespace mvsde
