#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "negdelay/medium.hpp"
#include "support.hpp"

using namespace negdelay;
using negdelay::test::ns;

namespace {
const MediumSpec kMed{};
const double kG = kMed.gamma;
}  // namespace

TEST(Lorentzian, ResonanceAndHalfWidth) {
  EXPECT_EQ(lorentzian_response(0.0, kMed), std::complex<double>(1.0, 0.0));
  const auto half = lorentzian_response(0.5 * kG, kMed);
  EXPECT_NEAR(half.real(), 0.5, 1e-15);
  EXPECT_NEAR(half.imag(), 0.5, 1e-15);
  EXPECT_LT(std::abs(lorentzian_response(1e6 * kG, kMed)), 1e-6);
  EXPECT_LT(std::abs(lorentzian_response(-1e6 * kG, kMed)), 1e-6);
}

TEST(Lorentzian, RealPartBoundedImagSignFollowsDetuning) {
  for (double x = -50.0; x <= 50.0; x += 0.37) {
    const auto l = lorentzian_response(0.5 * x * kG, kMed);
    EXPECT_GT(l.real(), 0.0);
    EXPECT_LE(l.real(), 1.0);
    EXPECT_NEAR(l.real(), 1.0 / (1.0 + x * x), 1e-15);
    if (x != 0.0) {
      EXPECT_EQ(std::signbit(l.imag()), std::signbit(x));
    }
  }
}

TEST(Transfer, EmptyMediumAndResonantExtinction) {
  for (double d : {-3e7, 0.0, 1e8}) EXPECT_EQ(transfer_function(d, 0.0, kMed), std::complex<double>(1.0, 0.0));
  EXPECT_NEAR(std::norm(transfer_function(0.0, 4.0, kMed)), std::exp(-4.0), 1e-15);
  EXPECT_NEAR(std::norm(transfer_function(0.0, 4.0, kMed)), 0.0183156, 1e-7);
  const auto t = transfer_function(0.5 * kG, 2.0, kMed);
  const auto expected = std::exp(-std::complex<double>(0.5, 0.5));
  EXPECT_NEAR(std::abs(t - expected), 0.0, 1e-15);
}

TEST(Transfer, SemigroupInOpticalDepth) {
  for (double x : {-7.0, -1.0, -0.2, 0.0, 0.5, 3.0}) {
    const double d = 0.5 * x * kG;
    for (double a : {0.1, 1.0, 2.5})
      for (double b : {0.3, 1.7}) {
        const auto ab = transfer_function(d, a + b, kMed);
        const auto prod = transfer_function(d, a, kMed) * transfer_function(d, b, kMed);
        EXPECT_NEAR(std::abs(ab), std::abs(transfer_function(d, a, kMed)) * std::abs(transfer_function(d, b, kMed)),
                    1e-15);
        EXPECT_NEAR(std::abs(ab - prod), 0.0, 1e-15);
      }
  }
}

TEST(GroupDelay, ResonantValueAtReferenceParameters) {
  MediumSpec m;
  m.gamma = 1.0 / (26.0 * ns);
  EXPECT_NEAR(group_delay(0.0, 4.0, m) / ns, -104.0, 1e-9);
  for (double d : {-1e8, 0.0, 2e7}) EXPECT_EQ(group_delay(d, 0.0, m), 0.0);
  EXPECT_NEAR(group_delay(0.5 * m.gamma, 4.0, m), 0.0, 1e-22);
}

TEST(GroupDelay, ClosedFormMatchesFiniteDifferenceOfPhase) {
  const double h = 1e-4 * kG;
  for (double od : {0.5, 2.0, 4.0}) {
    for (double x : {-6.0, -2.0, -0.7, 0.0, 0.3, 0.8, 1.5, 4.0}) {
      const double d = 0.5 * x * kG;
      // arg of the ratio avoids branch cuts of arg t itself
      const double fd = std::arg(transfer_function(d + h, od, kMed) / transfer_function(d - h, od, kMed)) / (2 * h);
      const double cf = group_delay(d, od, kMed);
      EXPECT_NEAR(fd, cf, 1e-6 * std::abs(cf)) << "od " << od << " x " << x;
    }
  }
}

TEST(Scattering, NarrowbandProbability) {
  EXPECT_EQ(scattering_probability_narrowband(0.0), 0.0);
  EXPECT_NEAR(scattering_probability_narrowband(4.0), 0.98168, 1e-5);
  EXPECT_NEAR(scattering_probability_narrowband(2.0), 0.86466, 1e-5);
  EXPECT_LT(scattering_probability_narrowband(30.0), 1.0);
  EXPECT_NEAR(scattering_probability_narrowband(1e-10), 1e-10 - 5e-21, 1e-26);
}

TEST(Stark, WorkedValuesOddInDetuningLinearInIntensity) {
  EXPECT_EQ(ac_stark_shift({0.0}, -0.5 * kG, kMed), 0.0);
  EXPECT_NEAR(ac_stark_shift({1.0}, -0.5 * kG, kMed), 0.25 * kG, 1e-12 * kG);
  EXPECT_NEAR(ac_stark_shift({0.15}, -0.5 * kG, kMed), 0.0375 * kG, 1e-12 * kG);
  for (double d : {-3e7, -1e6, 4e7})
    for (double i : {0.1, 0.7}) {
      EXPECT_DOUBLE_EQ(ac_stark_shift({i}, -d, kMed), -ac_stark_shift({i}, d, kMed));
      EXPECT_NEAR(ac_stark_shift({3.0 * i}, d, kMed), 3.0 * ac_stark_shift({i}, d, kMed),
                  1e-12 * std::abs(ac_stark_shift({3.0 * i}, d, kMed)));
    }
}

TEST(ConversionFactor, HalfWidthDetuningGivesMinusHalfResonantFraction) {
  MediumSpec m;
  m.sigma0_over_area = 2e-4;
  m.probe_detuning = -0.5 * m.gamma;
  EXPECT_NEAR(conversion_factor(m), -1e-4, 1e-18);
  m.probe_detuning = 0.0;
  EXPECT_EQ(conversion_factor(m), 0.0);
  for (double d : {-2e8, -1e7, 3e6, 5e8}) {
    m.probe_detuning = d;
    EXPECT_EQ(std::signbit(conversion_factor(m)), std::signbit(d));
  }
}

TEST(ConversionFactor, EqualsDispersivePartOfLineshapeTimesCrossSection) {
  MediumSpec m;
  for (double d : {-3e8, -2.0 * kTwoPi * 1e7, -1e6, 7e7}) {
    m.probe_detuning = d;
    const double expected = lorentzian_response(d, m).imag() * m.sigma0_over_area;
    EXPECT_NEAR(conversion_factor(m), expected, 1e-14 * std::abs(expected));
  }
}

TEST(GroupDelayToTauT, FrequencyRatio) {
  MediumSpec m;
  m.omega_probe = m.omega_atom;
  EXPECT_EQ(tau_T_from_group_delay(-100 * ns, m), -100 * ns);
  m.omega_probe = m.omega_atom * (1.0 - 5e-8);
  EXPECT_NEAR(tau_T_from_group_delay(-100 * ns, m), -100 * ns, 5e-8 * 100 * ns * 1.0001);
  EXPECT_EQ(tau_T_from_group_delay(0.0, m), 0.0);
  const MediumSpec def;
  EXPECT_NEAR(def.omega_probe / def.omega_atom, 1.0 - 20e6 / 384.2304844685e12, 1e-15);
}

TEST(KramersKronig, HilbertTransformOfAbsorptionGivesDispersion) {
  // Maclaurin odd-point discrete Hilbert transform on x = 2 delta / Gamma:
  //   H[f](x_n) = (2/pi) sum_{k: n-k odd} f_k / (n - k)
  const double od = 4.0, h = 0.02, lim = 400.0;
  const int n = static_cast<int>(2 * lim / h) + 1;
  std::vector<double> f(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = -lim + h * i;
    f[static_cast<std::size_t>(i)] = -0.5 * od * lorentzian_response(0.5 * x * kG, kMed).real();
  }
  double worst = 0.0;
  const int c = n / 2, reach = static_cast<int>(10.0 / h);
  for (int m = c - reach; m <= c + reach; m += 17) {
    double s = 0.0;
    for (int k = (m % 2 == 0) ? 1 : 0; k < n; k += 2)
      s += f[static_cast<std::size_t>(k)] / (m - k);
    const double hilbert = 2.0 / std::numbers::pi * s;
    const double x = -lim + h * m;
    const double expected = -0.5 * od * lorentzian_response(0.5 * x * kG, kMed).imag();
    worst = std::max(worst, std::abs(hilbert - expected));
  }
  EXPECT_LT(worst, 0.01 * 0.5 * od * 0.5);
}

TEST(MediumSpec, ValidationRejectsBadFields) {
  MediumSpec m;
  EXPECT_NO_THROW(m.validate());
  m.od = -1;
  EXPECT_THROW(m.validate(), ConfigError);
  m = MediumSpec{};
  m.sigma0_over_area = 1.5;
  EXPECT_THROW(m.validate(), ConfigError);
  m = MediumSpec{};
  m.omega_probe = 0.5 * m.omega_atom;
  EXPECT_THROW(m.validate(), ConfigError);
  m = MediumSpec{};
  m.n_slabs = 0;
  EXPECT_THROW(m.validate(), ConfigError);
  m = MediumSpec{};
  m.gamma = 0;
  EXPECT_THROW(m.validate(), ConfigError);
}
