#include <gtest/gtest.h>

#include <cmath>

#include "negdelay/excitation.hpp"
#include "negdelay/oracle.hpp"
#include "support.hpp"

using namespace negdelay;
using negdelay::test::medium_od;
using negdelay::test::ns;
using negdelay::test::pulse_ns;

namespace {
const double kG = MediumSpec{}.gamma;

SampledSignal input_ns(double sigma_ns) { return oracle_input(pulse_ns(sigma_ns), kG); }

double spectral_ratio(double sigma_ns, double od) {
  const MediumSpec m = medium_od(od);
  return *spectral_report(test::default_signal(sigma_ns, m), m).ratio;
}
}  // namespace

TEST(BuildModel, PerEmitterDepthAndGuards) {
  const auto m = build_model(2.0, kG, 64);
  EXPECT_EQ(m.n_atoms, 64);
  EXPECT_DOUBLE_EQ(m.od_per_atom.front(), 0.03125);
  EXPECT_NEAR(m.od, 2.0, 1e-14);
  for (std::size_t k = 0; k < 64; ++k) {
    EXPECT_GT(m.gamma_forward[k], 0.0);
    EXPECT_GT(m.gamma_side(k), 0.0);
    EXPECT_NEAR(std::pow(1.0 - 2.0 * m.gamma_forward[k] / kG, 2), std::exp(-0.03125), 1e-15);
  }
  EXPECT_TRUE(std::is_sorted(m.atom_positions.begin(), m.atom_positions.end()));
  EXPECT_THROW(build_model(4.0, kG, 8), ConfigError);
  EXPECT_THROW(build_model(1.0, kG, 0), ConfigError);
  EXPECT_THROW(build_model(-1.0, kG, 10), ConfigError);
  EXPECT_NO_THROW(build_model(0.0, kG, 0));
}

TEST(Evolve, SingleEmitterSteadyStateExtinction) {
  const auto m = build_model(0.25, kG, 1);
  const auto tr = evolve(m, input_ns(5000));
  EXPECT_NEAR(tr.transmission(), std::exp(-0.25), 1e-4);
}

TEST(Evolve, FreePropagation) {
  for (int n : {0, 16}) {
    const auto tr = evolve(build_model(0.0, kG, n), input_ns(10));
    EXPECT_NEAR(tr.transmission(), 1.0, 1e-12);
    for (double v : tr.norm()) EXPECT_NEAR(v, 1.0, 1e-12);
    for (std::size_t i = 0; i < tr.input().size(); ++i) EXPECT_NEAR(std::abs(tr.output()[i] - tr.input()[i]), 0.0, 1e-12);
  }
}

TEST(Evolve, NormNonIncreasingAndConservation) {
  for (double s : {10.0, 36.0}) {
    const auto m = build_model(3.0, kG, 64);
    const auto tr = evolve(m, input_ns(s));
    const auto& nv = tr.norm();
    EXPECT_NEAR(nv.front(), 1.0, 1e-9);
    for (std::size_t i = 1; i < nv.size(); ++i) EXPECT_LE(nv[i], nv[i - 1] + 1e-12);
    const double excited = Trace{tr.dt(), tr.t0(), tr.population()}.integral();
    EXPECT_NEAR(kG * excited, 1.0 - tr.transmission(), 0.02 * (1.0 - tr.transmission()));
    EXPECT_LE(tr.population().back(), 1e-12);
  }
}

TEST(Evolve, NarrowbandBeerLambert) {
  const auto tr = evolve(build_model(2.0, kG, 64), input_ns(500));
  EXPECT_NEAR(tr.transmission() / std::exp(-2.0), 1.0, 0.02);
}

TEST(Evolve, MatchesDiscreteChainSpectrum) {
  // Each emitter multiplies the spectrum by 1 - (2 g_k / Gamma) L(delta).
  for (double s : {10.0, 27.0})
    for (double od : {2.0, 4.0}) {
      const MediumSpec med = medium_od(od);
      const auto model = build_model(od, kG, 64);
      const double chain = test::gaussian_spectrum_average(s * ns, [&](double d) {
        cplx t = 1.0;
        for (double g : model.gamma_forward) t *= 1.0 - 2.0 * g / kG * lorentzian_response(d, med);
        return std::norm(t);
      });
      EXPECT_NEAR(evolve(model, input_ns(s)).transmission() / chain, 1.0, 1e-3) << s << " " << od;
    }
}

TEST(Evolve, ApproachesContinuumAsOneOverAtomNumber) {
  for (double s : {10.0, 27.0})
    for (double od : {2.0, 4.0}) {
      const MediumSpec med = medium_od(od);
      const double cont = transmission_probability(test::default_signal(s, med), med);
      const double e64 = evolve(build_model(od, kG, 64), input_ns(s)).transmission() / cont - 1.0;
      const double e256 = evolve(build_model(od, kG, 256), input_ns(s)).transmission() / cont - 1.0;
      EXPECT_GT(e64, 0.0) << s << " " << od;
      EXPECT_NEAR(e64 / e256, 4.0, 0.6) << s << " " << od;
    }
}

TEST(Evolve, StepBoundsEnforced) {
  const PulseSpec p = pulse_ns(10);
  const auto coarse = gaussian_field(p, default_grid(p, kG, 256), kG);
  EXPECT_THROW(evolve(build_model(1.0, kG, 8), coarse), ConfigError);
  auto bad = input_ns(10);
  for (auto& v : bad.samples) v *= 2.0;
  EXPECT_THROW(evolve(build_model(1.0, kG, 8), bad), ConfigError);
}

TEST(Evolve, StateSnapshotAccountsForAllProbability) {
  const auto tr = evolve(build_model(2.0, kG, 32), input_ns(18));
  for (std::size_t n : {std::size_t{0}, tr.size() / 3, tr.size() / 2}) {
    const auto s = tr.state_at(n);
    double photon = 0.0;
    for (const auto& a : s.photon_amplitude) photon += std::norm(a);
    EXPECT_NEAR(s.norm, tr.norm()[n], 0.0);
    EXPECT_LE(photon + s.atom_amplitudes.squaredNorm(), 1.0 + 1e-3);
    EXPECT_NEAR(s.atom_amplitudes.squaredNorm(), tr.population()[n], 1e-12);
  }
}

TEST(WeakValue, AdjointAgreesWithPerturbativeRoute) {
  for (auto [s, od] : {std::pair{10.0, 4.0}, std::pair{36.0, 3.0}, std::pair{18.0, 2.0}}) {
    const auto m = build_model(od, kG, 64);
    const auto in = input_ns(s);
    const auto w = weak_excitation_trace(m, in);
    const double pert = tauT_perturbative(m, in);
    EXPECT_NEAR(w.tauT, pert, 1e-3 * std::abs(pert) + 1e-3 * w.tau0) << s << " " << od;
  }
}

TEST(WeakValue, CheckpointIntervalDoesNotChangeResult) {
  const auto in = input_ns(18);
  const auto ref = weak_excitation_trace(build_model(3.0, kG, 32, 64), in);
  for (int k : {1, 7, 500}) {
    const auto w = weak_excitation_trace(build_model(3.0, kG, 32, k), in);
    ASSERT_EQ(w.weak.size(), ref.weak.size());
    double err = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < w.weak.size(); ++i) {
      err = std::max(err, std::abs(w.weak.values[i] - ref.weak.values[i]));
      peak = std::max(peak, std::abs(ref.weak.values[i]));
    }
    EXPECT_LT(err, 1e-10 * peak) << k;
  }
}

TEST(WeakValue, NarrowbandIntegralIsResonantGroupDelay) {
  const auto w = weak_excitation_trace(build_model(2.0, kG, 64), input_ns(500));
  EXPECT_NEAR(w.tauT * kG / -2.0, 1.0, 0.05);
}

TEST(WeakValue, TenNanosecondRatioMatchesSpectralEstimator) {
  const auto w = weak_excitation_trace(build_model(4.0, kG, 64), input_ns(10));
  EXPECT_NEAR(w.tauT / w.tau0, spectral_ratio(10, 4.0), 0.05 * std::abs(spectral_ratio(10, 4.0)));
}

TEST(WeakValue, VanishingOdApproachesUnconditionedSpectralAverage) {
  // At small od the post-selection weight is the input spectrum itself.
  const double od = 0.01;
  const MediumSpec med = medium_od(od);
  for (double s : {10.0, 36.0}) {
    const auto w = weak_excitation_trace(build_model(od, kG, 8), input_ns(s));
    const double expected =
        test::gaussian_spectrum_average(s * ns, [&](double d) { return group_delay(d, od, med); });
    EXPECT_NEAR(w.tauT / expected, 1.0, 0.03) << s;
  }
}

TEST(WeakValue, NarrowbandConditionedTraceIsMinusPopulationInIntegral) {
  const auto w = weak_excitation_trace(build_model(0.01, kG, 8), input_ns(500));
  EXPECT_NEAR(w.tauT / w.tau0, -1.0, 0.03);
}

TEST(WeakValue, LongPulseHasNegativeExcursions) {
  const auto w = weak_excitation_trace(build_model(3.0, kG, 64), input_ns(36));
  double lo = 0.0, hi = 0.0;
  for (double v : w.weak.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_LT(lo, 0.0);
  EXPECT_GT(-lo, hi);
  EXPECT_LT(w.tauT, 0.0);
}

TEST(WeakValue, DegeneratePostSelectionRejected) {
  const auto m = build_model(30.0, kG, 128);
  EXPECT_THROW(weak_excitation_trace(m, input_ns(200)), AnalysisError);
  EXPECT_THROW(tauT_perturbative(m, input_ns(200)), AnalysisError);
}

TEST(Convergence, AtomNumberAndTimeStep) {
  const auto in = input_ns(10);
  const double t64 = weak_excitation_trace(build_model(4.0, kG, 64), in).tauT;
  const double t128 = weak_excitation_trace(build_model(4.0, kG, 128), in).tauT;
  EXPECT_NEAR(t128 / t64, 1.0, 0.02);
  const PulseSpec p = pulse_ns(10);
  const auto fine = gaussian_field(p, resolved_grid(p, kG, 0.5 * oracle_max_dt(p, kG), 2), kG);
  ASSERT_LT(fine.dt, 0.75 * in.dt);
  const double tf = weak_excitation_trace(build_model(4.0, kG, 64), fine).tauT;
  EXPECT_NEAR(tf / t64, 1.0, 0.01);
}

TEST(FrequencyDiagonal, DisjointSpectraCombineWithTransmittedWeights) {
  PulseSpec a = pulse_ns(300), b = pulse_ns(300);
  a.center_detuning = -0.6 * kG;
  b.center_detuning = 1.3 * kG;
  const double max_dt = oracle_max_dt(a, kG);
  const TimeGrid grid = resolved_grid(a, kG, max_dt, 2);
  const auto ea = gaussian_field(a, grid, kG), eb = gaussian_field(b, grid, kG);
  SampledSignal mix = ea;
  for (std::size_t i = 0; i < mix.size(); ++i) mix.samples[i] = (ea.samples[i] + eb.samples[i]) / std::sqrt(2.0);
  const double scale = 1.0 / std::sqrt(mix.energy());
  for (auto& v : mix.samples) v *= scale;

  const auto model = build_model(2.0, kG, 64);
  const auto wa = weak_excitation_trace(model, ea), wb = weak_excitation_trace(model, eb);
  const auto wm = weak_excitation_trace(model, mix);
  const double expected = (wa.transmission * wa.tauT + wb.transmission * wb.tauT) / (wa.transmission + wb.transmission);
  EXPECT_NEAR(wm.tauT, expected, 0.03 * std::abs(expected));
}

TEST(Reciprocity, ReversedChainSameTransmissionAndTauT) {
  std::vector<double> ext;
  for (int k = 0; k < 40; ++k) ext.push_back(0.01 + 0.2 * (k % 7) / 7.0);
  const auto m = build_model_from_extinctions(ext, kG);
  const auto r = reversed(m);
  const auto in = input_ns(18);
  const auto wf = weak_excitation_trace(m, in), wr = weak_excitation_trace(r, in);
  EXPECT_NEAR(wf.transmission, wr.transmission, 1e-9);
  EXPECT_NEAR(wf.tauT, wr.tauT, 1e-6 * std::abs(wf.tauT));
}

TEST(PhiTTheory, ZeroOnResonanceAndResamplingConsistency) {
  MediumSpec med = medium_od(4.0);
  const BinGrid bins;
  const auto model = build_model(4.0, kG, 64);
  const auto w = weak_excitation_trace(model, input_ns(10));
  const auto phi = phiT_trace_theory(w, med, bins);
  ASSERT_EQ(phi.size(), bins.n);
  double integral = 0.0;
  for (double v : phi) integral += v * bins.width;
  EXPECT_NEAR(integral, conversion_factor(med) * w.tauT, 0.01 * std::abs(conversion_factor(med) * w.tauT));
  med.probe_detuning = 0.0;
  for (double v : phiT_trace_theory(w, med, bins)) EXPECT_EQ(v, 0.0);
}

TEST(PhiTTheory, DominantNegativeLobeForLongPulse) {
  const MediumSpec med = medium_od(3.0);
  const auto phi = phiT_trace_theory(build_model(3.0, kG, 64), input_ns(36), med, BinGrid{});
  // C < 0 here, so a negative weak value shows as a positive phase lobe.
  double pos = 0.0, neg = 0.0, sum = 0.0;
  for (double v : phi) {
    const double w = v / conversion_factor(med);
    pos = std::max(pos, w);
    neg = std::min(neg, w);
    sum += w;
  }
  EXPECT_GT(-neg, pos);
  EXPECT_LT(sum, 0.0);
}
