#pragma once

// CSV writers for trajectories and reports, plus gnuplot script emission.
// Doubles are written with 17 significant digits so files round-trip.

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "mvsde/analysis.hpp"
#include "mvsde/engine.hpp"
#include "mvsde/measure.hpp"

namespace mvsde {

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// step,time,particle,x_1..x_d[,chain_state]
inline void write_trajectory_csv(std::ostream& os, const SimulationResult& res) {
  const auto& flow = res.flow;
  if (flow.empty()) return;
  const std::size_t d = flow.at(0).dim();
  const bool chain = !res.chain_states.empty();
  os << "step,time,particle";
  for (std::size_t k = 1; k <= d; ++k) os << ",x_" << k;
  if (chain) os << ",chain_state";
  os << '\n';
  // an endpoint-only flow holds just the final step
  const std::size_t first_step = flow.size() == 1 ? res.steps : 0;
  for (std::size_t s = 0; s < flow.size(); ++s) {
    const auto& mu = flow.at(s);
    const std::size_t step = first_step + s;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      os << step << ',' << detail::fmt(flow.times()[s]) << ',' << i;
      for (double v : mu.atom(i)) os << ',' << detail::fmt(v);
      // the state at t_k drives cell k; the last grid time reuses the last cell's state
      if (chain) os << ',' << res.chain_states[std::min(step, res.chain_states.size() - 1)];
      os << '\n';
    }
  }
}

/// resolution,mse,stderr rows, then summary,<slope>,<slope_stderr>,<r2>.
/// Without a fit the summary row carries "nan".
inline void write_rate_csv(std::ostream& os, const RateReport& rep) {
  os << "resolution,mse,stderr\n";
  for (const auto& p : rep.points)
    os << detail::fmt(p.resolution) << ',' << detail::fmt(p.mse) << ',' << detail::fmt(p.std_error) << '\n';
  if (rep.fit)
    os << "summary," << detail::fmt(rep.fit->slope) << ',' << detail::fmt(rep.fit->slope_stderr) << ','
       << detail::fmt(rep.fit->r2) << '\n';
  else
    os << "summary,nan,nan,nan\n";
}

/// iteration,distance
inline void write_distances_csv(std::ostream& os, const std::vector<double>& distances) {
  os << "iteration,distance\n";
  for (std::size_t k = 0; k < distances.size(); ++k) os << k + 1 << ',' << detail::fmt(distances[k]) << '\n';
}

/// n,sup_moment,finite
inline void write_moments_csv(std::ostream& os, const std::vector<MomentPoint>& points) {
  os << "n,sup_moment,finite\n";
  for (const auto& p : points) os << p.n << ',' << detail::fmt(p.sup_moment) << ',' << (p.finite ? 1 : 0) << '\n';
}

/// time,moment
inline void write_series_csv(std::ostream& os, const std::vector<double>& times, const std::vector<double>& values,
                             const std::string& name) {
  os << "time," << name << '\n';
  for (std::size_t k = 0; k < times.size(); ++k) os << detail::fmt(times[k]) << ',' << detail::fmt(values[k]) << '\n';
}

/// Log-log plot of a rate CSV written by write_rate_csv, with the fitted line.
inline void write_gnuplot_script(std::ostream& os, const RateReport& rep, const std::string& csv_name,
                                 const std::string& png_name) {
  os << "set terminal pngcairo size 800,600\n"
     << "set output '" << png_name << "'\n"
     << "set datafile separator ','\n"
     << "set logscale xy 2\n"
     << "set xlabel 'resolution'\nset ylabel 'mse'\n"
     << "set title '" << rep.kind << "'\n"
     // the header and summary rows are not numeric, so gnuplot skips them
     << "set key top right\n";
  if (rep.fit) {
    os << "f(x) = 2**(" << detail::fmt(rep.fit->intercept) << ") * x**(" << detail::fmt(rep.fit->slope) << ")\n"
       << "plot '" << csv_name << "' using 1:2:3 with yerrorbars title 'mse', f(x) title sprintf('slope %.3f', " << detail::fmt(rep.fit->slope)
       << ")\n";
  } else {
    os << "plot '" << csv_name << "' using 1:2:3 with yerrorbars title 'mse'\n";
  }
}

}  // namespace mvsde
