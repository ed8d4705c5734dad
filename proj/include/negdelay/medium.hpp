#pragma once

// Two-level Lorentzian atomic medium: lineshape, Beer-Lambert transfer
// function, group delay, AC Stark shift and the probe phase conversion
// constant. All detunings are angular frequencies (rad/s).

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "negdelay/errors.hpp"

namespace negdelay {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct MediumSpec {
  double od = 4.0;                                ///< resonant optical depth
  double gamma = 1.0 / 26e-9;                     ///< population decay rate 1/tau_sp [rad/s]
  double probe_detuning = -kTwoPi * 20e6;         ///< probe detuning Delta [rad/s]
  double omega_atom = kTwoPi * 384.2304844685e12; ///< atomic resonance [rad/s]
  double omega_probe = kTwoPi * 384.2304844685e12 - kTwoPi * 20e6;
  double sigma0_over_area = 3.54e-4;              ///< resonant cross-section per beam area
  int n_slabs = 128;                              ///< spatial discretisation of the sample

  void validate() const {
    if (!(od >= 0.0) || !std::isfinite(od)) throw ConfigError("medium.od must be >= 0");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("medium.gamma must be > 0");
    if (n_slabs < 1) throw ConfigError("medium.n_slabs must be >= 1");
    if (!(sigma0_over_area > 0.0 && sigma0_over_area <= 1.0))
      throw ConfigError("medium.sigma0_over_area must lie in (0, 1]");
    if (!(omega_atom > 0.0) || !(omega_probe > 0.0))
      throw ConfigError("medium optical frequencies must be > 0");
    const double r = omega_probe / omega_atom;
    if (r < 0.9 || r > 1.1)
      throw ConfigError("medium.omega_probe / omega_atom must lie in [0.9, 1.1]");
    if (!std::isfinite(probe_detuning)) throw ConfigError("medium.probe_detuning must be finite");
  }

  /// Copy with a different optical depth.
  [[nodiscard]] MediumSpec with_od(double new_od) const {
    MediumSpec m = *this;
    m.od = new_od;
    return m;
  }
};

/// Intensity of the probe in units of the saturation intensity (2 Omega^2 / Gamma^2).
struct StarkParams {
  double intensity_ratio = 0.0;
};

/// Normalised complex Lorentzian 1 / (1 - 2i delta / Gamma).
inline std::complex<double> lorentzian_response(double delta, const MediumSpec& spec) {
  const double x = 2.0 * delta / spec.gamma;
  // 1/(1 - ix) = (1 + ix)/(1 + x^2); written out to stay exact at large |x|.
  const double d = 1.0 + x * x;
  return {1.0 / d, x / d};
}

/// Amplitude transmission exp(-(od/2) L(delta)); |t(0)|^2 = exp(-od).
inline std::complex<double> transfer_function(double delta, double od, const MediumSpec& spec) {
  return std::exp(-0.5 * od * lorentzian_response(delta, spec));
}

/// d arg t / d delta, closed form.
inline double group_delay(double delta, double od, const MediumSpec& spec) {
  const double x = 2.0 * delta / spec.gamma;
  const double d = 1.0 + x * x;
  return -(od / spec.gamma) * (1.0 - x * x) / (d * d);
}

/// Probability that a quasi-monochromatic resonant photon is scattered.
inline double scattering_probability_narrowband(double od) { return -std::expm1(-od); }

/// Light shift of the atomic resonance produced by a probe at detuning `delta`.
inline double ac_stark_shift(StarkParams p, double delta, const MediumSpec& spec) {
  const double x = 2.0 * delta / spec.gamma;
  return -p.intensity_ratio * delta / (1.0 + x * x);
}

/// Factor C in  integral(phi dt) = C * integral(N_e dt); also the instantaneous
/// phase per excited atom.
inline double conversion_factor(const MediumSpec& spec) {
  const double delta = spec.probe_detuning;
  const double x = 2.0 * delta / spec.gamma;
  return (2.0 / spec.gamma) * delta / (1.0 + x * x) * spec.sigma0_over_area;
}

inline double tau_T_from_group_delay(double tau_g, const MediumSpec& spec) {
  return spec.omega_probe / spec.omega_atom * tau_g;
}

/// Time-integrated AC Stark shift of the atomic line caused by a single
/// probe photon crossing the beam area (radians per probe photon).
///
/// One photon of energy hbar*omega_p spread over area A gives a fluence
/// hbar*omega_p / A; dividing by I_sat and using sigma0 = hbar*omega_0*Gamma / (2 I_sat)
/// gives fluence / I_sat = 2 (sigma0/A) (omega_p/omega_0) / Gamma.
inline double stark_shift_per_probe_photon(const MediumSpec& spec) {
  const double fluence_over_isat =
      2.0 * spec.sigma0_over_area * (spec.omega_probe / spec.omega_atom) / spec.gamma;
  return ac_stark_shift(StarkParams{1.0}, spec.probe_detuning, spec) * fluence_over_isat;
}

}  // namespace negdelay
