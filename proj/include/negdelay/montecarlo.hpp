#pragma once

// Shot-level simulation of the post-selected cross-phase measurement:
// coherent-state signal pulses, independent transmission/scattering of each
// photon, a binary click detector with background events, and Gaussian
// probe-phase noise on 36 samples of 16 ns.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "negdelay/errors.hpp"
#include "negdelay/excitation.hpp"
#include "negdelay/medium.hpp"
#include "negdelay/oracle.hpp"
#include "negdelay/pulse.hpp"
#include "negdelay/trace.hpp"

namespace negdelay {

/// Correlated probe-frequency wobble: each shot carries a random sign s = +-1
/// that adds s*A*sin(2 pi f t + phase) to the phase and scales the signal
/// and background click rates by (1 + modulation*s).
struct WobbleSpec {
  bool enabled = false;
  double amplitude = 1e-3;    ///< rad per shot; click correlation passes ~5% into phi_T
  double frequency = 2e6;     ///< Hz
  double phase = 0.0;         ///< rad
  double modulation = 0.05;
};

struct ShotConfig {
  double window = 576e-9;
  std::size_t n_samples = 36;
  double dt = 16e-9;
  double window_start = -192e-9;  ///< start of the window relative to the pulse centre
  double mean_photons = 100.0;
  double target_click_prob = 0.2;
  double phase_noise_rms = 0.120;  ///< rad per sample
  double background_click_fraction = 0.05;
  bool lowpass_enabled = false;
  double lowpass_cutoff = 25e6;    ///< Hz
  std::size_t shots_per_cycle = 1500;
  WobbleSpec wobble;

  void validate() const {
    if (n_samples < 2) throw ConfigError("shot.n_samples must be >= 2");
    if (!(dt > 0.0)) throw ConfigError("shot.dt_ns must be > 0");
    if (std::abs(static_cast<double>(n_samples) * dt - window) > 1e-6 * window)
      throw ConfigError("shot.n_samples * shot.dt_ns must equal shot.window_ns");
    if (!(mean_photons >= 0.0)) throw ConfigError("shot.mean_photons must be >= 0");
    if (!(target_click_prob >= 0.0 && target_click_prob < 1.0))
      throw ConfigError("shot.target_click_prob must lie in [0, 1)");
    if (!(phase_noise_rms >= 0.0)) throw ConfigError("shot.phase_noise_mrad must be >= 0");
    if (!(background_click_fraction >= 0.0 && background_click_fraction <= 0.2))
      throw ConfigError("shot.background_click_fraction must lie in [0, 0.2]");
    if (lowpass_enabled && !(lowpass_cutoff > 0.0)) throw ConfigError("shot.lowpass_cutoff_MHz must be > 0");
    if (shots_per_cycle < 1) throw ConfigError("shot.shots_per_cycle must be >= 1");
    if (wobble.enabled && !(std::abs(wobble.modulation) < 1.0))
      throw ConfigError("shot.wobble_modulation must lie in (-1, 1)");
  }

  [[nodiscard]] BinGrid bins() const { return BinGrid{window_start, dt, n_samples}; }
};

struct TruthMeta {
  std::uint32_t n_transmitted = 0;
  std::uint32_t n_scattered = 0;
  std::uint32_t n_detected = 0;
  bool background_clicked = false;
};

struct ShotRecord {
  std::uint64_t cycle = 0;
  std::vector<double> phase_samples;
  bool clicked = false;
  TruthMeta truth;
};

/// Per-class sums of all phase traces in one atom cycle.
struct CycleSummary {
  std::size_t n_click = 0;
  std::size_t n_noclick = 0;
  std::vector<double> sum_click;
  std::vector<double> sum_noclick;

  explicit CycleSummary(std::size_t n = 0) : sum_click(n, 0.0), sum_noclick(n, 0.0) {}

  void add(const ShotRecord& s) {
    auto& dst = s.clicked ? sum_click : sum_noclick;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += s.phase_samples[j];
    ++(s.clicked ? n_click : n_noclick);
  }
};

/// Phase traces per single photon, on the acquisition bins.
struct PerPhotonShapes {
  std::vector<double> phi_T1;  ///< per transmitted photon
  std::vector<double> phi_S1;  ///< per scattered photon
  std::vector<double> phi_01;  ///< per incident photon
  double transmission = 1.0;
  bool scattered_undefined = false;  ///< transmission ~ 1: phi_S1 set to zero
};

/// Split phi_01 = T phi_T1 + (1 - T) phi_S1 for the scattered-photon shape.
inline PerPhotonShapes derive_shapes(std::vector<double> phi_T1, std::vector<double> phi_01,
                                     double transmission) {
  if (phi_T1.size() != phi_01.size()) throw ConfigError("shape length mismatch");
  if (!(transmission >= 0.0 && transmission <= 1.0)) throw ConfigError("transmission outside [0, 1]");
  PerPhotonShapes s;
  s.transmission = transmission;
  s.phi_S1.assign(phi_01.size(), 0.0);
  const double scattered = 1.0 - transmission;
  if (scattered > 1e-12) {
    for (std::size_t j = 0; j < phi_01.size(); ++j)
      s.phi_S1[j] = (phi_01[j] - transmission * phi_T1[j]) / scattered;
  } else {
    s.scattered_undefined = true;
  }
  s.phi_T1 = std::move(phi_T1);
  s.phi_01 = std::move(phi_01);
  return s;
}

/// phi_T1 from the weak-value oracle, phi_01 from the slab model.
inline PerPhotonShapes derive_shapes(const MediumSpec& medium, const PulseSpec& pulse, const BinGrid& bins,
                                     int n_atoms = 64) {
  const SampledSignal sig = gaussian_field(pulse, default_grid(pulse, medium.gamma), medium.gamma);
  const double tbar = transmission_probability(sig, medium);
  auto phi01 = bin_average(phi0_trace(sig, medium), bins);
  const WaveguideModel model = build_model(medium.od, medium.gamma, n_atoms);
  auto phiT1 = phiT_trace_theory(model, oracle_input(pulse, medium.gamma), medium, bins);
  return derive_shapes(std::move(phiT1), std::move(phi01), tbar);
}

struct DetectionCalibration {
  double eta = 0.0;   ///< detection probability per transmitted photon
  double p_bg = 0.0;  ///< background click probability per shot
};

/// Solve 1 - (1 - p_bg) exp(-eta T mu) = target with p_bg = f_bg * target.
inline DetectionCalibration calibrate_detection(double transmission, double mean_photons,
                                                double target_click_prob, double background_fraction) {
  if (!(target_click_prob >= 0.0 && target_click_prob < 1.0))
    throw ConfigError("target click probability must lie in [0, 1)");
  if (!(background_fraction >= 0.0 && background_fraction < 1.0))
    throw ConfigError("background fraction must lie in [0, 1)");
  DetectionCalibration cal;
  if (target_click_prob == 0.0) return cal;
  cal.p_bg = background_fraction * target_click_prob;
  const double required = std::log((1.0 - cal.p_bg) / (1.0 - target_click_prob));
  const double lambda = transmission * mean_photons;
  if (required <= 0.0) return cal;
  if (!(lambda > 0.0) || required > lambda)
    throw AnalysisError("click target unreachable: transmitted photon number too small");
  cal.eta = required / lambda;
  return cal;
}

/// E[n_T | click] - E[n_T | no click] for n_T ~ Poisson(lambda), each photon
/// detected with probability eta, plus background clicks with probability p_bg.
inline double poisson_conditioning_factor(double mean_transmitted, double eta, double p_bg) {
  const double a = mean_transmitted * eta;
  const double p_click = -std::expm1(-a) + p_bg * std::exp(-a);
  if (p_click <= 0.0) return 1.0;
  return a / p_click;
}

enum class DatasetKind { signal, no_atoms, bypass_atoms, no_signal };

inline const char* to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::signal: return "signal";
    case DatasetKind::no_atoms: return "no_atoms";
    case DatasetKind::bypass_atoms: return "bypass_atoms";
    case DatasetKind::no_signal: return "no_signal";
  }
  return "?";
}

inline DatasetKind parse_dataset_kind(const std::string& s) {
  if (s == "signal") return DatasetKind::signal;
  if (s == "no_atoms") return DatasetKind::no_atoms;
  if (s == "bypass_atoms" || s == "bypass") return DatasetKind::bypass_atoms;
  if (s == "no_signal") return DatasetKind::no_signal;
  throw ConfigError("unknown dataset kind '" + s + "' (expected no_atoms, bypass_atoms, no_signal)");
}

/// Static probe phase from the unperturbed atoms; constant, cancels in phi_C - phi_NC.
inline constexpr double kBypassStaticPhase = 0.3;

/// Everything a shot draw needs, resolved for one dataset kind.
struct ShotModel {
  std::vector<double> phi_T1, phi_S1, offset, wobble_shape;
  double lambda_T = 0.0;
  double lambda_S = 0.0;
  DetectionCalibration detection;
  double noise = 0.0;
  std::optional<double> lowpass_alpha;
  double wobble_modulation = 0.0;
  bool wobble = false;
  std::size_t shots_per_cycle = 1500;

  [[nodiscard]] std::size_t n_samples() const { return phi_T1.size(); }
};

inline ShotModel make_shot_model(const PerPhotonShapes& shapes, const ShotConfig& cfg,
                                 DatasetKind kind = DatasetKind::signal) {
  cfg.validate();
  const std::size_t n = cfg.n_samples;
  if (shapes.phi_T1.size() != n || shapes.phi_S1.size() != n)
    throw ConfigError("shape length does not match shot.n_samples");
  ShotModel m;
  m.noise = cfg.phase_noise_rms;
  m.shots_per_cycle = cfg.shots_per_cycle;
  m.phi_T1 = shapes.phi_T1;
  m.phi_S1 = shapes.phi_S1;
  m.offset.assign(n, 0.0);
  m.wobble_shape.assign(n, 0.0);
  const double mu = cfg.mean_photons;

  switch (kind) {
    case DatasetKind::signal:
      m.lambda_T = mu * shapes.transmission;
      m.lambda_S = mu * (1.0 - shapes.transmission);
      m.detection = calibrate_detection(shapes.transmission, mu, cfg.target_click_prob,
                                        cfg.background_click_fraction);
      break;
    case DatasetKind::bypass_atoms:
      m.offset.assign(n, kBypassStaticPhase);
      [[fallthrough]];
    case DatasetKind::no_atoms:
      // The whole pulse reaches the detector; the atoms never see it.
      m.phi_T1.assign(n, 0.0);
      m.phi_S1.assign(n, 0.0);
      m.lambda_T = mu;
      m.detection = calibrate_detection(1.0, mu, cfg.target_click_prob, cfg.background_click_fraction);
      break;
    case DatasetKind::no_signal:
      // Signal blocked, collection unattenuated: leaked probe light is the only click source.
      m.phi_T1.assign(n, 0.0);
      m.phi_S1.assign(n, 0.0);
      m.detection = DetectionCalibration{0.0, cfg.target_click_prob};
      break;
  }
  if (cfg.lowpass_enabled) m.lowpass_alpha = -std::expm1(-kTwoPi * cfg.lowpass_cutoff * cfg.dt);
  if (cfg.wobble.enabled) {
    m.wobble = true;
    m.wobble_modulation = cfg.wobble.modulation;
    for (std::size_t j = 0; j < n; ++j) {
      const double t = cfg.dt * (static_cast<double>(j) + 0.5);
      m.wobble_shape[j] = cfg.wobble.amplitude * std::sin(kTwoPi * cfg.wobble.frequency * t + cfg.wobble.phase);
    }
  }
  return m;
}

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream for one atom cycle of a campaign.
inline Engine cycle_engine(std::uint64_t seed, std::uint64_t cycle) {
  return Engine(splitmix64(splitmix64(seed) ^ splitmix64(cycle + 0x632be59bd9b4e019ULL)));
}

namespace detail {

template <class Int = std::int64_t>
Int poisson(Engine& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  return std::poisson_distribution<Int>(mean)(rng);
}

inline std::int64_t binomial(Engine& rng, std::int64_t n, double p) {
  if (n <= 0 || !(p > 0.0)) return 0;
  if (p >= 1.0) return n;
  return std::binomial_distribution<std::int64_t>(n, p)(rng);
}

/// Poisson(mean) conditioned on being positive.
inline std::int64_t zero_truncated_poisson(Engine& rng, double mean) {
  if (mean > 1.0) {
    std::poisson_distribution<std::int64_t> d(mean);
    for (;;)
      if (auto k = d(rng); k > 0) return k;
  }
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double pk = mean * std::exp(-mean) / -std::expm1(-mean);
  double cum = pk;
  std::int64_t k = 1;
  while (u > cum && k < 1000) {
    ++k;
    pk *= mean / static_cast<double>(k);
    cum += pk;
  }
  return k;
}

inline void lowpass(std::vector<double>& x, double alpha) {
  double y = 0.0;
  for (double& v : x) {
    y += alpha * (v - y);
    v = y;
  }
}

}  // namespace detail

/// One shot drawn photon by photon.
inline ShotRecord simulate_shot(Engine& rng, const ShotModel& m, std::uint64_t cycle = 0) {
  const std::size_t n = m.n_samples();
  double s = 0.0;
  if (m.wobble) s = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
  const double scale = 1.0 + m.wobble_modulation * s;

  ShotRecord rec;
  rec.cycle = cycle;
  const auto n_t = detail::poisson(rng, m.lambda_T * scale);
  const auto n_s = detail::poisson(rng, m.lambda_S * scale);
  const auto n_det = detail::binomial(rng, n_t, m.detection.eta);
  const bool bg = m.detection.p_bg > 0.0 && std::bernoulli_distribution(std::min(1.0, m.detection.p_bg * scale))(rng);
  rec.truth = TruthMeta{static_cast<std::uint32_t>(n_t), static_cast<std::uint32_t>(n_s),
                        static_cast<std::uint32_t>(n_det), bg};
  rec.clicked = n_det > 0 || bg;

  rec.phase_samples.resize(n);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double nt = static_cast<double>(n_t), ns = static_cast<double>(n_s);
  for (std::size_t j = 0; j < n; ++j)
    rec.phase_samples[j] = nt * m.phi_T1[j] + ns * m.phi_S1[j] + m.offset[j] + s * m.wobble_shape[j] +
                           m.noise * noise(rng);
  if (m.lowpass_alpha) detail::lowpass(rec.phase_samples, *m.lowpass_alpha);
  return rec;
}

/// Draws the per-class sums of one cycle directly from their joint
/// distribution. Equal in distribution to summing simulate_shot() over
/// shots_per_cycle shots, at a cost independent of the per-shot noise.
inline CycleSummary simulate_cycle_summary(Engine& rng, const ShotModel& m) {
  const std::size_t n = m.n_samples();
  CycleSummary out(n);
  const auto shots = static_cast<std::int64_t>(m.shots_per_cycle);

  struct ClassTotals {
    std::int64_t count = 0, n_t = 0, n_s = 0;
    double sign = 0.0;
  } click, noclick;

  auto draw_group = [&](std::int64_t n_group, double s) {
    if (n_group == 0) return;
    const double scale = 1.0 + m.wobble_modulation * s;
    const double lam_d = m.lambda_T * m.detection.eta * scale;
    const double lam_u = m.lambda_T * (1.0 - m.detection.eta) * scale;
    const double lam_s = m.lambda_S * scale;
    const double p_bg = std::min(1.0, m.detection.p_bg * scale);
    const double p_noclick = (1.0 - p_bg) * std::exp(-lam_d);
    const std::int64_t nnc = detail::binomial(rng, n_group, p_noclick);
    const std::int64_t nc = n_group - nnc;

    noclick.count += nnc;
    noclick.sign += s * static_cast<double>(nnc);
    noclick.n_t += detail::poisson(rng, static_cast<double>(nnc) * lam_u);
    noclick.n_s += detail::poisson(rng, static_cast<double>(nnc) * lam_s);

    click.count += nc;
    click.sign += s * static_cast<double>(nc);
    if (nc > 0) {
      const double q = -std::expm1(-lam_d) / (1.0 - p_noclick);
      const std::int64_t with_signal = detail::binomial(rng, nc, q);
      for (std::int64_t i = 0; i < with_signal; ++i) click.n_t += detail::zero_truncated_poisson(rng, lam_d);
      click.n_t += detail::poisson(rng, static_cast<double>(nc) * lam_u);
      click.n_s += detail::poisson(rng, static_cast<double>(nc) * lam_s);
    }
  };

  if (m.wobble) {
    const std::int64_t plus = detail::binomial(rng, shots, 0.5);
    draw_group(plus, 1.0);
    draw_group(shots - plus, -1.0);
  } else {
    draw_group(shots, 0.0);
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  auto fill = [&](const ClassTotals& c, std::vector<double>& dst) {
    const double nt = static_cast<double>(c.n_t), ns = static_cast<double>(c.n_s);
    const double cnt = static_cast<double>(c.count);
    const double sd = m.noise * std::sqrt(cnt);
    for (std::size_t j = 0; j < n; ++j)
      dst[j] = nt * m.phi_T1[j] + ns * m.phi_S1[j] + cnt * m.offset[j] + c.sign * m.wobble_shape[j] +
               sd * noise(rng);
    if (m.lowpass_alpha) detail::lowpass(dst, *m.lowpass_alpha);
  };
  fill(click, out.sum_click);
  fill(noclick, out.sum_noclick);
  out.n_click = static_cast<std::size_t>(click.count);
  out.n_noclick = static_cast<std::size_t>(noclick.count);
  return out;
}

/// Shot stream of n_cycles * shots_per_cycle shots, cycles in order.
template <class Sink>
void run_campaign(std::uint64_t seed, std::size_t n_cycles, const ShotModel& m, Sink&& sink) {
  for (std::size_t c = 0; c < n_cycles; ++c) {
    Engine rng = cycle_engine(seed, c);
    for (std::size_t i = 0; i < m.shots_per_cycle; ++i) sink(simulate_shot(rng, m, c));
  }
}

inline std::vector<ShotRecord> run_campaign(std::uint64_t seed, std::size_t n_cycles, const ShotModel& m) {
  std::vector<ShotRecord> shots;
  shots.reserve(n_cycles * m.shots_per_cycle);
  run_campaign(seed, n_cycles, m, [&](ShotRecord&& s) { shots.push_back(std::move(s)); });
  return shots;
}

/// Calls fn(block_index) for every block in [0, n_blocks) on up to `jobs`
/// threads. Blocks are handed out dynamically; callers write results by index.
template <class Fn>
void parallel_blocks(std::size_t n_blocks, int jobs, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n_blocks <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n_blocks); ++w)
    pool.emplace_back([&] {
      for (std::size_t b = next++; b < n_blocks; b = next++) fn(b);
    });
  for (auto& t : pool) t.join();
}

}  // namespace negdelay
