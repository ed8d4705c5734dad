#pragma once

// Semiclassical single-photon observables of the slab medium: the mean
// excited-atom number N_e(t), tau_0, the transmitted-spectrum estimator of
// tau_T and the average probe phase trace.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "negdelay/errors.hpp"
#include "negdelay/medium.hpp"
#include "negdelay/pulse.hpp"
#include "negdelay/trace.hpp"

namespace negdelay {

enum class EstimatorMethod { spectral, oracle };

inline const char* to_string(EstimatorMethod m) {
  return m == EstimatorMethod::spectral ? "spectral" : "oracle";
}

struct ExcitationTrace {
  Trace population;              ///< N_e(t), excited atoms per incident photon
  double integral = 0.0;         ///< sum N_e dt at n_slabs
  double integral_refined = 0.0; ///< same quantity at 2 n_slabs
  int n_slabs = 0;
};

struct ExcitationReport {
  double tau0 = 0.0;
  double tauT = 0.0;
  std::optional<double> ratio;  ///< empty when tau0 == 0
  EstimatorMethod method = EstimatorMethod::spectral;
};

namespace detail {

/// Slab sum of  Gamma * int N_e dt  evaluated directly in the frequency domain.
inline double slab_excitation_integral(const Spectrum& spec, const MediumSpec& medium, int n_slabs) {
  if (medium.od == 0.0) return 0.0;
  const double dz = medium.od / n_slabs;
  double total = 0.0;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double p = std::norm(spec.samples[k]);
    if (p == 0.0) continue;
    const double re_l = lorentzian_response(spec.omega(k), medium).real();
    double s = 0.0;
    for (int j = 0; j < n_slabs; ++j) s += std::exp(-(j + 0.5) * dz * re_l);
    total += p * re_l * s * dz;
  }
  return total * spec.d_omega / kTwoPi / medium.gamma;
}

}  // namespace detail

/// N_e(t) = sum_k dz |c_k(t)|^2 over slabs at depth od_k = (k + 1/2) dz, with
/// c_k = IFT[ E~ exp(-(od_k/2) L) (sqrt(Gamma)/2) / (Gamma/2 - i delta) ].
inline ExcitationTrace excited_population_trace(const SampledSignal& sig, const MediumSpec& medium) {
  medium.validate();
  if (medium.n_slabs < 32) throw ConfigError("medium.n_slabs must be >= 32 for excitation traces");
  const Spectrum spec = to_spectrum(sig);
  const int n_slabs = medium.n_slabs;
  const std::size_t n = spec.size();

  ExcitationTrace out;
  out.n_slabs = n_slabs;
  out.population = Trace{sig.dt, sig.t0, std::vector<double>(n, 0.0)};
  if (medium.od == 0.0) return out;

  const double dz = medium.od / n_slabs;
  const double half_gamma = 0.5 * medium.gamma;
  const double kernel_num = 0.5 * std::sqrt(medium.gamma);
  std::vector<cplx> kernel(n), lineshape(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double d = spec.omega(k);
    kernel[k] = spec.samples[k] * kernel_num / cplx(half_gamma, -d);
    lineshape[k] = lorentzian_response(d, medium);
  }

  Spectrum slab{spec.d_omega, spec.t0, std::vector<cplx>(n)};
  for (int j = 0; j < n_slabs; ++j) {
    const double depth = (j + 0.5) * dz;
    for (std::size_t k = 0; k < n; ++k) slab.samples[k] = kernel[k] * std::exp(-0.5 * depth * lineshape[k]);
    const SampledSignal amp = to_time(slab);
    for (std::size_t i = 0; i < n; ++i) out.population.values[i] += dz * std::norm(amp.samples[i]);
  }

  double sum = 0.0;
  for (double v : out.population.values) sum += v;
  out.integral = sum * sig.dt;
  const double coarse = detail::slab_excitation_integral(spec, medium, n_slabs);
  out.integral_refined = detail::slab_excitation_integral(spec, medium, 2 * n_slabs);
  if (std::abs(out.integral_refined - coarse) > 1e-3 * std::abs(out.integral_refined))
    throw ConvergenceError("excitation integral not converged in slab count (n_slabs = " +
                           std::to_string(n_slabs) + ")");
  return out;
}

inline double tau0(const SampledSignal& sig, const MediumSpec& medium) {
  return (1.0 - transmission_probability(sig, medium)) / medium.gamma;
}

/// Transmitted-power-weighted group delay.
inline double tauT_spectral(const SampledSignal& sig, const MediumSpec& medium) {
  const Spectrum spec = to_spectrum(sig);
  double w = 0.0, wt = 0.0;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double d = spec.omega(k);
    const double p = std::norm(spec.samples[k] * transfer_function(d, medium.od, medium));
    w += p;
    wt += p * group_delay(d, medium.od, medium);
  }
  return w > 0.0 ? wt / w : 0.0;
}

inline ExcitationReport spectral_report(const SampledSignal& sig, const MediumSpec& medium) {
  ExcitationReport r;
  r.tau0 = tau0(sig, medium);
  r.tauT = tauT_spectral(sig, medium);
  if (r.tau0 > 0.0) r.ratio = r.tauT / r.tau0;
  r.method = EstimatorMethod::spectral;
  return r;
}

/// Average probe phase per incident photon, phi_0(t) = C N_e(t).
inline Trace phi0_trace(const SampledSignal& sig, const MediumSpec& medium) {
  const double c = conversion_factor(medium);
  if (!std::isfinite(c)) throw ConfigError("conversion factor is not finite");
  Trace tr = excited_population_trace(sig, medium).population;
  tr *= c;
  return tr;
}

/// sigma0/A for which max |phi_0| equals `target_peak` (radians).
inline double calibrate_sigma0_over_area(const SampledSignal& sig, const MediumSpec& medium,
                                         double target_peak) {
  const double peak = phi0_trace(sig, medium).peak_abs();
  if (!(peak > 0.0)) throw AnalysisError("phi_0 vanishes; cannot calibrate sigma0/A");
  const double value = target_peak / peak * medium.sigma0_over_area;
  if (!(value > 0.0 && value <= 1.0)) throw AnalysisError("calibrated sigma0/A outside (0, 1]");
  return value;
}

struct MixedPartials {
  Eigen::MatrixXd d_mn;  ///< d/dm (d phi / dn)
  Eigen::MatrixXd d_nm;  ///< d/dn (d phi / dm)
};

/// Both orderings of the mixed second central difference on the interior of
/// a phase surface phi(m, n) sampled with steps (dm, dn).
inline MixedPartials mixed_partial_reciprocity(const Eigen::MatrixXd& phi, double dm = 1.0,
                                               double dn = 1.0) {
  const Eigen::Index rows = phi.rows(), cols = phi.cols();
  if (rows < 3 || cols < 3) throw ConfigError("phase surface must be at least 3x3");
  const Eigen::MatrixXd dphi_dn =
      (phi.rightCols(cols - 2) - phi.leftCols(cols - 2)) / (2.0 * dn);
  const Eigen::MatrixXd dphi_dm =
      (phi.bottomRows(rows - 2) - phi.topRows(rows - 2)) / (2.0 * dm);
  MixedPartials out;
  out.d_mn = (dphi_dn.bottomRows(rows - 2) - dphi_dn.topRows(rows - 2)) / (2.0 * dm);
  out.d_nm = (dphi_dm.rightCols(cols - 2) - dphi_dm.leftCols(cols - 2)) / (2.0 * dn);
  return out;
}

/// Integrated post-selected probe phase predicted from the signal group
/// delay:  int phi_T dt = -tau_g * (time-integrated Stark shift per probe photon).
inline double phiT_integral_prediction(double tau_g, double stark_shift_per_photon) {
  return -tau_g * stark_shift_per_photon;
}

}  // namespace negdelay
