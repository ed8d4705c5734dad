#pragma once

// Brute-force single-excitation model: one photon in a unidirectional
// channel crossing a chain of lossy two-level emitters (cascaded, no
// retardation between emitters). Produces the time-resolved weak value of
// the excited-atom number post-selected on forward transmission.
//
// Amplitude equations, input flux amplitude s(t) = b_0(t):
//   dc_k/dt = -(Gamma/2 + i eps) c_k - sqrt(g_k) b_{k-1}(t)
//   b_k     = b_{k-1} + sqrt(g_k) c_k
// with forward decay g_k and side loss Gamma - g_k treated as pure
// non-Hermitian decay. A monochromatic wave is multiplied by
// 1 - (2 g_k / Gamma) L(delta) per emitter.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "negdelay/errors.hpp"
#include "negdelay/medium.hpp"
#include "negdelay/pulse.hpp"
#include "negdelay/trace.hpp"

namespace negdelay {

inline constexpr double kMaxOdPerAtom = 0.25;

struct WaveguideModel {
  int n_atoms = 0;
  double od = 0.0;
  double gamma = 1.0 / 26e-9;
  std::vector<double> od_per_atom;     ///< resonant power extinction of each emitter
  std::vector<double> gamma_forward;   ///< forward-channel decay g_k [rad/s]
  std::vector<double> atom_positions;  ///< fractional depth of each emitter, ordered
  double atom_detuning = 0.0;          ///< common shift of every emitter [rad/s]
  int checkpoint_interval = 64;

  [[nodiscard]] double gamma_side(std::size_t k) const { return gamma - gamma_forward[k]; }
};

/// Forward decay for which one emitter transmits exp(-od_atom) of resonant power:
/// |1 - 2g/Gamma|^2 = exp(-od_atom).
inline double forward_coupling_for(double od_atom, double gamma) {
  return -0.5 * gamma * std::expm1(-0.5 * od_atom);
}

/// Chain with arbitrary per-emitter extinctions, emitters placed in order.
inline WaveguideModel build_model_from_extinctions(std::vector<double> od_per_atom, double gamma,
                                                   int checkpoint_interval = 64) {
  if (!(gamma > 0.0)) throw ConfigError("oracle gamma must be > 0");
  if (checkpoint_interval < 1) throw ConfigError("oracle.checkpoint_interval must be >= 1");
  WaveguideModel m;
  m.n_atoms = static_cast<int>(od_per_atom.size());
  m.gamma = gamma;
  m.checkpoint_interval = checkpoint_interval;
  for (std::size_t k = 0; k < od_per_atom.size(); ++k) {
    const double x = od_per_atom[k];
    if (!(x >= 0.0) || x > kMaxOdPerAtom)
      throw ConfigError("oracle: od per emitter must lie in [0, 0.25]; increase oracle.n_atoms");
    m.od += x;
    m.gamma_forward.push_back(forward_coupling_for(x, gamma));
    m.atom_positions.push_back((static_cast<double>(k) + 0.5) / static_cast<double>(od_per_atom.size()));
  }
  m.od_per_atom = std::move(od_per_atom);
  return m;
}

/// Homogeneous chain of `n_atoms` emitters with total optical depth `od`.
inline WaveguideModel build_model(double od, double gamma, int n_atoms, int checkpoint_interval = 64) {
  if (!(od >= 0.0)) throw ConfigError("oracle: od must be >= 0");
  if (n_atoms < 0) throw ConfigError("oracle.n_atoms must be >= 0");
  if (n_atoms == 0 && od > 0.0) throw ConfigError("oracle: od > 0 requires n_atoms >= 1");
  const double per = n_atoms > 0 ? od / n_atoms : 0.0;
  return build_model_from_extinctions(std::vector<double>(static_cast<std::size_t>(n_atoms), per),
                                      gamma, checkpoint_interval);
}

/// Same emitters in reverse order.
inline WaveguideModel reversed(WaveguideModel m) {
  std::reverse(m.od_per_atom.begin(), m.od_per_atom.end());
  std::reverse(m.gamma_forward.begin(), m.gamma_forward.end());
  return m;
}

struct SingleExcitationState {
  double t = 0.0;
  /// Photon amplitude per retarded-time cell (scaled by sqrt(dt)): cells
  /// j > n still incoming, cells j <= n already transmitted.
  std::vector<cplx> photon_amplitude;
  Eigen::VectorXcd atom_amplitudes;
  double norm = 0.0;
};

namespace detail {

/// Exact one-step map for dc/dt = M c + v s(t) with s linear over the step:
///   c_{n+1} = A c_n + p s_n + q (s_{n+1} - s_n) / h.
struct StepPropagator {
  Eigen::MatrixXcd A;
  Eigen::VectorXcd p;
  Eigen::VectorXcd q;
  Eigen::VectorXd out;  ///< sqrt(g_k): b_N = s + out . c
  double h = 0.0;
};

inline StepPropagator make_propagator(const WaveguideModel& m, double h, double extra_detuning = 0.0) {
  const auto n = static_cast<Eigen::Index>(m.n_atoms);
  StepPropagator prop;
  prop.h = h;
  prop.out.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) prop.out[k] = std::sqrt(m.gamma_forward[static_cast<std::size_t>(k)]);

  Eigen::MatrixXcd aug = Eigen::MatrixXcd::Zero(n + 2, n + 2);
  const cplx diag(-0.5 * m.gamma, -(m.atom_detuning + extra_detuning));
  for (Eigen::Index k = 0; k < n; ++k) {
    aug(k, k) = diag * h;
    for (Eigen::Index j = 0; j < k; ++j) aug(k, j) = -prop.out[k] * prop.out[j] * h;
    aug(k, n) = -prop.out[k] * h;
  }
  aug(n, n + 1) = h;
  const Eigen::MatrixXcd e = aug.exp();
  prop.A = e.topLeftCorner(n, n);
  prop.p = e.col(n).head(n);
  prop.q = e.col(n + 1).head(n);
  return prop;
}

inline void step(const StepPropagator& prop, Eigen::VectorXcd& c, cplx s0, cplx s1) {
  if (c.size() == 0) return;
  Eigen::VectorXcd next = prop.A.triangularView<Eigen::Lower>() * c;
  next += prop.p * s0 + prop.q * ((s1 - s0) / prop.h);
  c.swap(next);
}

inline double rms_duration(const SampledSignal& sig) {
  double w = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < sig.size(); ++i) {
    const double p = std::norm(sig.samples[i]);
    const double t = sig.time(i);
    w += p;
    m1 += p * t;
    m2 += p * t * t;
  }
  if (!(w > 0.0)) return 0.0;
  m1 /= w;
  return std::sqrt(std::max(0.0, m2 / w - m1 * m1));
}

inline std::vector<double> trapz_weights(std::size_t n, double h) {
  std::vector<double> w(n, h);
  if (n > 0) {
    w.front() *= 0.5;
    w.back() *= 0.5;
  }
  return w;
}

}  // namespace detail

struct EvolveOptions {
  /// Fixed number of time points; default runs past the input until the
  /// emitters have decayed.
  std::optional<std::size_t> steps;
  double extra_detuning = 0.0;
};

class Trajectory;

/// Integrate from the first input sample until the emitters have decayed.
/// Steps must resolve the lifetime (dt <= 0.02/Gamma) and the pulse (dt <= 0.05 sigma_t).
inline Trajectory evolve(const WaveguideModel& model, const SampledSignal& input,
                  const EvolveOptions& options = {});

/// Forward solution of the single-excitation problem with checkpointed
/// atom amplitudes; intermediate states are recomputed on demand.
class Trajectory {
 public:
  Trajectory(WaveguideModel model, detail::StepPropagator prop, double t0, std::vector<cplx> input)
      : model_(std::move(model)), prop_(std::move(prop)), t0_(t0), input_(std::move(input)) {}

  [[nodiscard]] const WaveguideModel& model() const { return model_; }
  [[nodiscard]] double dt() const { return prop_.h; }
  [[nodiscard]] double t0() const { return t0_; }
  [[nodiscard]] std::size_t size() const { return input_.size(); }
  [[nodiscard]] double time(std::size_t n) const { return t0_ + prop_.h * static_cast<double>(n); }
  [[nodiscard]] const std::vector<cplx>& input() const { return input_; }
  /// Transmitted flux amplitude b_N(t_n).
  [[nodiscard]] const std::vector<cplx>& output() const { return output_; }
  /// Excited-atom number sum_k |c_k|^2.
  [[nodiscard]] const std::vector<double>& population() const { return population_; }
  [[nodiscard]] const std::vector<double>& norm() const { return norm_; }
  [[nodiscard]] const detail::StepPropagator& propagator() const { return prop_; }

  /// Final photon-sector norm: probability of forward transmission.
  [[nodiscard]] double transmission() const { return transmission_; }

  [[nodiscard]] Eigen::VectorXcd atoms_at(std::size_t n) const {
    const auto k = static_cast<std::size_t>(model_.checkpoint_interval);
    const std::size_t base = n / k;
    Eigen::VectorXcd c = checkpoints_.at(base);
    for (std::size_t i = base * k; i < n; ++i) detail::step(prop_, c, input_[i], input_[i + 1]);
    return c;
  }

  [[nodiscard]] SingleExcitationState state_at(std::size_t n) const {
    SingleExcitationState s;
    s.t = time(n);
    s.atom_amplitudes = atoms_at(n);
    s.photon_amplitude.resize(size());
    const double sq = std::sqrt(dt());
    for (std::size_t j = 0; j < size(); ++j) s.photon_amplitude[j] = sq * (j <= n ? output_[j] : input_[j]);
    s.norm = norm_.at(n);
    return s;
  }

 private:
  friend Trajectory evolve(const WaveguideModel&, const SampledSignal&, const EvolveOptions&);

  WaveguideModel model_;
  detail::StepPropagator prop_;
  double t0_;
  std::vector<cplx> input_;
  std::vector<cplx> output_;
  std::vector<double> population_;
  std::vector<double> norm_;
  std::vector<Eigen::VectorXcd> checkpoints_;
  double transmission_ = 0.0;
};

inline Trajectory evolve(const WaveguideModel& model, const SampledSignal& input,
                         const EvolveOptions& options) {
  if (input.size() < 2) throw ConfigError("oracle input must have at least two samples");
  if (std::abs(input.energy() - 1.0) > 1e-6) throw ConfigError("oracle input must be unit normalised");
  const double h = input.dt;
  const double sigma_t = detail::rms_duration(input);
  if (h > 0.02 / model.gamma * (1.0 + 1e-12) || h > 0.05 * sigma_t * (1.0 + 1e-12))
    throw ConfigError("oracle step too coarse: need dt <= 0.02/Gamma and dt <= 0.05 sigma_t");

  const auto n_atoms = static_cast<Eigen::Index>(model.n_atoms);
  const auto k_chk = static_cast<std::size_t>(model.checkpoint_interval);
  const std::size_t max_extra = static_cast<std::size_t>(std::ceil(40.0 / (model.gamma * h)));

  std::vector<cplx> in(input.samples);
  Trajectory tr(model, detail::make_propagator(model, h, options.extra_detuning), input.t0, {});

  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(n_atoms);
  double peak_pop = 0.0;
  std::size_t n = 0;
  auto record = [&](std::size_t idx) {
    if (idx % k_chk == 0) tr.checkpoints_.push_back(c);
    const cplx s = idx < in.size() ? in[idx] : cplx{};
    tr.output_.push_back(s + (n_atoms > 0 ? cplx(tr.prop_.out.dot(c.real()), tr.prop_.out.dot(c.imag())) : cplx{}));
    const double pop = c.squaredNorm();
    tr.population_.push_back(pop);
    peak_pop = std::max(peak_pop, pop);
  };
  record(0);
  for (;;) {
    const bool done = options.steps ? n + 1 >= *options.steps
                                    : (n + 1 >= in.size() &&
                                       (tr.population_.back() <= 1e-14 * std::max(peak_pop, 1e-300) ||
                                        n + 1 >= in.size() + max_extra));
    if (done) break;
    const cplx s0 = n < in.size() ? in[n] : cplx{};
    const cplx s1 = n + 1 < in.size() ? in[n + 1] : cplx{};
    detail::step(tr.prop_, c, s0, s1);
    ++n;
    record(n);
  }
  in.resize(n + 1, cplx{});
  tr.input_ = std::move(in);

  // Trapezoidal photon bookkeeping: incoming flux not yet arrived plus
  // outgoing flux already emitted forward.
  const std::size_t steps = tr.input_.size();
  std::vector<double> remaining(steps, 0.0);
  for (std::size_t j = steps - 1; j-- > 0;)
    remaining[j] = remaining[j + 1] + 0.5 * h * (std::norm(tr.input_[j]) + std::norm(tr.input_[j + 1]));
  double emitted = 0.0;
  tr.norm_.resize(steps);
  for (std::size_t j = 0; j < steps; ++j) {
    if (j > 0) emitted += 0.5 * h * (std::norm(tr.output_[j - 1]) + std::norm(tr.output_[j]));
    tr.norm_[j] = remaining[j] + emitted + tr.population_[j];
  }
  tr.transmission_ = emitted;
  return tr;
}

struct WeakValueResult {
  Trace weak;          ///< Re W(t), excited atoms given forward transmission
  Trace population;    ///< unconditioned N_e(t)
  double transmission = 0.0;
  double tauT = 0.0;   ///< integral of Re W
  double tau0 = 0.0;   ///< integral of N_e
};

inline constexpr double kMinPostselectionProbability = 1e-6;

/// Weak value of the excited-atom number, post-selected on the photon being
/// in the forward channel at the final time. One adjoint sweep backwards
/// from the final time, recomputing atom amplitudes between checkpoints.
inline WeakValueResult weak_excitation_trace(const Trajectory& tr) {
  const double tbar = tr.transmission();
  if (tbar < kMinPostselectionProbability)
    throw AnalysisError("post-selection degenerate: transmission probability below 1e-6");
  const std::size_t steps = tr.size();
  const double h = tr.dt();
  const auto& prop = tr.propagator();
  const auto n_atoms = static_cast<Eigen::Index>(tr.model().n_atoms);
  const auto k_chk = static_cast<std::size_t>(tr.model().checkpoint_interval);

  WeakValueResult res;
  res.transmission = tbar;
  res.weak = Trace{h, tr.t0(), std::vector<double>(steps, 0.0)};
  res.population = Trace{h, tr.t0(), tr.population()};

  if (n_atoms > 0) {
    const Eigen::VectorXcd u = prop.out.cast<cplx>();
    const Eigen::MatrixXcd at = prop.A.transpose();
    Eigen::VectorXcd adj = Eigen::VectorXcd::Zero(n_atoms);
    std::vector<Eigen::VectorXcd> segment;
    const std::size_t last = steps - 1;
    for (std::size_t seg_start = (last / k_chk) * k_chk + k_chk; seg_start >= k_chk;) {
      seg_start -= k_chk;
      const std::size_t seg_end = std::min(last, seg_start + k_chk - 1);
      segment.assign(1, tr.atoms_at(seg_start));
      for (std::size_t i = seg_start; i < seg_end; ++i) {
        Eigen::VectorXcd c = segment.back();
        detail::step(prop, c, tr.input()[i], tr.input()[i + 1]);
        segment.push_back(std::move(c));
      }
      for (std::size_t i = seg_end + 1; i-- > seg_start;) {
        if (i < last) {
          // E_i = A^T E_{i+1} + h/2 [conj(b_i) u + A^T conj(b_{i+1}) u]
          Eigen::VectorXcd next = adj + 0.5 * h * std::conj(tr.output()[i + 1]) * u;
          adj = at.triangularView<Eigen::Upper>() * next;
          adj += 0.5 * h * std::conj(tr.output()[i]) * u;
        }
        res.weak.values[i] = adj.cwiseProduct(segment[i - seg_start]).sum().real() / tbar;
      }
      if (seg_start == 0) break;
    }
  }
  res.tauT = res.weak.integral();
  res.tau0 = res.population.integral();
  return res;
}

inline WeakValueResult weak_excitation_trace(const WaveguideModel& model, const SampledSignal& input) {
  return weak_excitation_trace(evolve(model, input));
}

/// tau_T from the response of the post-selected overlap to a common shift
/// eps of every emitter's frequency:  tau_T = Re[i dS/d eps] / T,
/// S(eps) = <psi_f(0)| Pi_f |psi_f(eps)>. Independent of the adjoint sweep.
inline double tauT_perturbative(const WaveguideModel& model, const SampledSignal& input,
                                double relative_shift = 1e-4) {
  const Trajectory ref = evolve(model, input);
  const double tbar = ref.transmission();
  if (tbar < kMinPostselectionProbability)
    throw AnalysisError("post-selection degenerate: transmission probability below 1e-6");
  const double eps = relative_shift * model.gamma;
  const auto w = detail::trapz_weights(ref.size(), ref.dt());
  auto overlap = [&](double shift) {
    const Trajectory tr = evolve(model, input, EvolveOptions{ref.size(), shift});
    cplx s{};
    for (std::size_t i = 0; i < ref.size(); ++i) s += w[i] * std::conj(ref.output()[i]) * tr.output()[i];
    return s;
  };
  const cplx ds = (overlap(eps) - overlap(-eps)) / (2.0 * eps);
  return (cplx(0.0, 1.0) * ds).real() / tbar;
}

/// Post-selected probe phase phi_T(t) = C Re W(t), bin-averaged onto the
/// acquisition grid. Times are relative to the input pulse centre already
/// encoded in the trace's time axis.
inline std::vector<double> phiT_trace_theory(const WeakValueResult& weak, const MediumSpec& medium,
                                             const BinGrid& bins) {
  Trace tr = weak.weak;
  tr *= conversion_factor(medium);
  return bin_average(tr, bins);
}

inline std::vector<double> phiT_trace_theory(const WaveguideModel& model, const SampledSignal& input,
                                             const MediumSpec& medium, const BinGrid& bins) {
  return phiT_trace_theory(weak_excitation_trace(model, input), medium, bins);
}

/// Step bound required by evolve() for a given pulse.
inline double oracle_max_dt(const PulseSpec& pulse, double gamma) {
  return std::min(0.02 / gamma, 0.05 * pulse.sigma_rms);
}

/// Unit-normalised Gaussian input on a grid fine enough for evolve().
inline SampledSignal oracle_input(const PulseSpec& pulse, double gamma) {
  return gaussian_field(pulse, resolved_grid(pulse, gamma, oracle_max_dt(pulse, gamma), 2), gamma);
}

}  // namespace negdelay
