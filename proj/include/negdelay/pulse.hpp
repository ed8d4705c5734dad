#pragma once

// Gaussian signal pulses on uniform time grids, the continuous-normalised
// discrete Fourier pair, and propagation through the medium.
//
// Conventions: E(t) = int d(delta)/2pi exp(-i delta t) E~(delta), so a
// component at detuning delta delayed by T picks up exp(+i delta T).

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "negdelay/errors.hpp"
#include "negdelay/fft.hpp"
#include "negdelay/medium.hpp"

namespace negdelay {

using cplx = std::complex<double>;

struct PulseSpec {
  double sigma_rms = 10e-9;     ///< rms width of the intensity envelope [s]
  double mean_photons = 100.0;  ///< |alpha|^2
  double center_detuning = 0.0; ///< carrier offset from resonance [rad/s]
  double center_time = 0.0;     ///< time of the intensity peak [s]

  void validate() const {
    if (!(sigma_rms > 0.0) || !std::isfinite(sigma_rms))
      throw ConfigError("pulse.sigma_rms must be > 0");
    if (!(mean_photons >= 0.0)) throw ConfigError("pulse.mean_photons must be >= 0");
  }
};

struct TimeGrid {
  double dt = 0.0;
  double t0 = 0.0;
  std::size_t n = 0;

  [[nodiscard]] double time(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
  [[nodiscard]] double span() const { return dt * static_cast<double>(n); }
};

/// Uniformly sampled complex envelope, photon-flux normalised.
struct SampledSignal {
  double dt = 0.0;
  double t0 = 0.0;
  std::vector<cplx> samples;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] double time(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
  [[nodiscard]] TimeGrid grid() const { return {dt, t0, samples.size()}; }
  /// sum |E|^2 dt
  [[nodiscard]] double energy() const {
    double s = 0.0;
    for (const auto& v : samples) s += std::norm(v);
    return s * dt;
  }
};

/// Spectrum in FFT order: bin k holds detuning k*d_omega for k < n/2 and
/// (k-n)*d_omega above. `t0` keeps the time origin for the inverse.
struct Spectrum {
  double d_omega = 0.0;
  double t0 = 0.0;
  std::vector<cplx> samples;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] double omega(std::size_t k) const {
    const auto n = samples.size();
    const auto kk = static_cast<double>(k);
    return (k < n / 2 ? kk : kk - static_cast<double>(n)) * d_omega;
  }
  /// sum |E~|^2 d_omega / 2pi
  [[nodiscard]] double energy() const {
    double s = 0.0;
    for (const auto& v : samples) s += std::norm(v);
    return s * d_omega / kTwoPi;
  }
};

inline bool is_power_of_two(std::size_t n) { return n >= 2 && std::has_single_bit(n); }

namespace detail {
inline constexpr double kLeadingSigmas = 9.0;
inline constexpr double kTrailingLifetimes = 15.0;

inline double default_span(const PulseSpec& p, double gamma) {
  return 2.0 * kLeadingSigmas * p.sigma_rms + kTrailingLifetimes / gamma;
}
}  // namespace detail

/// Grid of `n` samples from center - 9 sigma to center + 9 sigma + 15/Gamma.
/// At +-9 sigma the field is below 1e-8 of its peak.
inline TimeGrid default_grid(const PulseSpec& pulse, double gamma, std::size_t n = 4096) {
  pulse.validate();
  if (!is_power_of_two(n)) throw ConfigError("grid size must be a power of two >= 2");
  const double span = detail::default_span(pulse, gamma);
  return {span / static_cast<double>(n), pulse.center_time - detail::kLeadingSigmas * pulse.sigma_rms, n};
}

/// Same span as default_grid, with the smallest power-of-two size (>= min_n)
/// whose step does not exceed `max_dt`.
inline TimeGrid resolved_grid(const PulseSpec& pulse, double gamma, double max_dt,
                              std::size_t min_n = 4096) {
  const double span = detail::default_span(pulse, gamma);
  auto n = std::bit_ceil(std::max<std::size_t>(
      min_n, static_cast<std::size_t>(std::ceil(span / max_dt))));
  return default_grid(pulse, gamma, n);
}

/// Unit-normalised Gaussian field envelope exp(-(t-tc)^2 / (4 sigma^2)).
inline SampledSignal gaussian_field(const PulseSpec& pulse, const TimeGrid& grid, double gamma) {
  pulse.validate();
  if (!is_power_of_two(grid.n)) throw ConfigError("grid size must be a power of two >= 2");
  if (!(grid.dt > 0.0)) throw ConfigError("grid step must be > 0");
  const double lead = pulse.center_time - grid.t0;
  const double trail = grid.t0 + grid.span() - pulse.center_time;
  if (lead < 6.0 * pulse.sigma_rms || trail < 6.0 * pulse.sigma_rms + 10.0 / gamma)
    throw ConfigError("grid too short: need +-6 sigma around the pulse and 10/Gamma of trailing time");

  SampledSignal sig{grid.dt, grid.t0, std::vector<cplx>(grid.n)};
  const double s2 = pulse.sigma_rms * pulse.sigma_rms;
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double tau = grid.time(i) - pulse.center_time;
    const double amp = std::exp(-tau * tau / (4.0 * s2));
    sig.samples[i] = amp * std::polar(1.0, -pulse.center_detuning * tau);
  }
  const double scale = 1.0 / std::sqrt(sig.energy());
  for (auto& v : sig.samples) v *= scale;
  return sig;
}

inline Spectrum to_spectrum(const SampledSignal& sig) {
  const auto n = sig.size();
  Spectrum spec{kTwoPi / (static_cast<double>(n) * sig.dt), sig.t0, sig.samples};
  fft::transform(spec.samples, fft::Direction::backward);
  for (std::size_t k = 0; k < n; ++k)
    spec.samples[k] *= sig.dt * std::polar(1.0, spec.omega(k) * sig.t0);
  return spec;
}

inline SampledSignal to_time(const Spectrum& spec) {
  const auto n = spec.size();
  const double dt = kTwoPi / (static_cast<double>(n) * spec.d_omega);
  SampledSignal sig{dt, spec.t0, spec.samples};
  for (std::size_t k = 0; k < n; ++k) sig.samples[k] *= std::polar(1.0, -spec.omega(k) * spec.t0);
  fft::transform(sig.samples, fft::Direction::forward);
  const double norm = 1.0 / (static_cast<double>(n) * dt);
  for (auto& v : sig.samples) v *= norm;
  return sig;
}

/// Multiply every spectral bin by the medium transfer function.
inline Spectrum propagate(Spectrum spec, const MediumSpec& medium) {
  for (std::size_t k = 0; k < spec.size(); ++k)
    spec.samples[k] *= transfer_function(spec.omega(k), medium.od, medium);
  return spec;
}

inline SampledSignal propagate(const SampledSignal& sig, const MediumSpec& medium) {
  return to_time(propagate(to_spectrum(sig), medium));
}

inline double transmission_probability(const Spectrum& spec, const MediumSpec& medium) {
  double in = 0.0, out = 0.0;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double p = std::norm(spec.samples[k]);
    in += p;
    out += p * std::norm(transfer_function(spec.omega(k), medium.od, medium));
  }
  return in > 0.0 ? out / in : 1.0;
}

inline double transmission_probability(const SampledSignal& sig, const MediumSpec& medium) {
  return transmission_probability(to_spectrum(sig), medium);
}

}  // namespace negdelay
