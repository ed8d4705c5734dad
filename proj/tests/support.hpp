#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "negdelay/medium.hpp"
#include "negdelay/pulse.hpp"

namespace negdelay::test {

inline constexpr double ns = 1e-9;

inline MediumSpec medium_od(double od) {
  MediumSpec m;
  m.od = od;
  return m;
}

inline PulseSpec pulse_ns(double sigma_ns) {
  PulseSpec p;
  p.sigma_rms = sigma_ns * ns;
  return p;
}

inline SampledSignal default_signal(double sigma_ns, const MediumSpec& m = MediumSpec{}) {
  const PulseSpec p = pulse_ns(sigma_ns);
  return gaussian_field(p, default_grid(p, m.gamma), m.gamma);
}

/// Textbook O(n^2) DFT with the same sign convention as fft::transform.
inline std::vector<std::complex<double>> brute_dft(const std::vector<std::complex<double>>& x, int sign) {
  const auto n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      out[k] += x[j] * std::polar(1.0, sign * kTwoPi * static_cast<double>(j * k % n) / static_cast<double>(n));
  return out;
}

/// Spectrum-weighted mean of f(delta) with Gaussian intensity spectrum of
/// rms 1/(2 sigma_t), by direct quadrature (no FFT).
template <class F>
double gaussian_spectrum_average(double sigma_t, F&& f) {
  const double s = 1.0 / (2.0 * sigma_t);
  const int n = 20001;
  const double lim = 12.0 * s, h = 2.0 * lim / (n - 1);
  double w = 0.0, wf = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = -lim + h * i;
    const double g = std::exp(-0.5 * d * d / (s * s));
    w += g;
    wf += g * f(d);
  }
  return wf / w;
}

}  // namespace negdelay::test
