#pragma once

// Real-valued uniformly sampled series and resampling onto the coarse
// acquisition grid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace negdelay {

struct Trace {
  double dt = 0.0;
  double t0 = 0.0;
  std::vector<double> values;

  [[nodiscard]] std::size_t size() const { return values.size(); }
  [[nodiscard]] double time(std::size_t i) const { return t0 + dt * static_cast<double>(i); }

  /// Trapezoidal integral over the full support.
  [[nodiscard]] double integral() const {
    if (values.size() < 2) return 0.0;
    double s = 0.5 * (values.front() + values.back());
    for (std::size_t i = 1; i + 1 < values.size(); ++i) s += values[i];
    return s * dt;
  }

  [[nodiscard]] double peak_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }

  Trace& operator*=(double a) {
    for (double& v : values) v *= a;
    return *this;
  }
};

/// Contiguous bins of equal width; bin j covers [t_start + j w, t_start + (j+1) w).
struct BinGrid {
  double t_start = -192e-9;
  double width = 16e-9;
  std::size_t n = 36;

  [[nodiscard]] double center(std::size_t j) const {
    return t_start + width * (static_cast<double>(j) + 0.5);
  }
  [[nodiscard]] double t_end() const { return t_start + width * static_cast<double>(n); }
};

namespace detail {
/// Integral of the piecewise-linear interpolant of `tr` from its first
/// sample to x (clamped to the support).
inline double cumulative_linear(const Trace& tr, const std::vector<double>& cum, double x) {
  if (tr.size() < 2) return 0.0;
  const double last = tr.time(tr.size() - 1);
  if (x <= tr.t0) return 0.0;
  if (x >= last) return cum.back();
  const double u = (x - tr.t0) / tr.dt;
  auto i = static_cast<std::size_t>(std::floor(u));
  i = std::min(i, tr.size() - 2);
  const double frac = u - static_cast<double>(i);
  const double vx = tr.values[i] + frac * (tr.values[i + 1] - tr.values[i]);
  return cum[i] + 0.5 * frac * tr.dt * (tr.values[i] + vx);
}
}  // namespace detail

/// Bin averages of the linear interpolant; zero outside the trace support,
/// so sum(result) * width equals the integral of the trace over the grid span.
inline std::vector<double> bin_average(const Trace& tr, const BinGrid& bins) {
  std::vector<double> cum(tr.size(), 0.0);
  for (std::size_t i = 1; i < tr.size(); ++i)
    cum[i] = cum[i - 1] + 0.5 * tr.dt * (tr.values[i - 1] + tr.values[i]);
  std::vector<double> out(bins.n);
  for (std::size_t j = 0; j < bins.n; ++j) {
    const double a = bins.t_start + bins.width * static_cast<double>(j);
    out[j] = (detail::cumulative_linear(tr, cum, a + bins.width) -
              detail::cumulative_linear(tr, cum, a)) /
             bins.width;
  }
  return out;
}

}  // namespace negdelay
