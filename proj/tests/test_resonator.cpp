#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "ringqed/resonator.hpp"

using namespace ringqed;
using namespace ringqed::resonator;

namespace {

RingGeometry hybrid() {
  RingGeometry g;
  g.total_length_m = 196.74e-6;
  g.gaas_length_m = 5e-6;
  g.taper_length_m = 10.5e-6;
  g.group_index = 2.3;
  g.design_wavelength_m = 910e-9;
  return g;
}

LossBudget measured() {
  LossBudget b;
  b.alpha_gaas = 75.0;
  b.taper_efficiency = 0.982;
  b.alpha_taper = taper_loss_per_length(0.982, 10.5e-6);
  b.alpha_ln = 8.21;
  return b;
}

std::vector<double> grid(double lo_nm, double hi_nm, std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = (lo_nm + (hi_nm - lo_nm) * static_cast<double>(i) / (n - 1)) * units::nm;
  return w;
}

std::vector<double> local_minima(const Spectrum& s) {
  std::vector<double> out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i)
    if (s.values[i] < s.values[i - 1] && s.values[i] <= s.values[i + 1] && s.values[i] < 0.5)
      out.push_back(s.wavelength_nm[i]);
  return out;
}

}  // namespace

TEST(TaperLoss, Examples) {
  EXPECT_EQ(taper_loss_per_length(1.0, 3e-6), 0.0);
  EXPECT_NEAR(taper_loss_per_length(0.982, 10.5e-6), 75.1, 0.05);
  EXPECT_NEAR(taper_loss_per_length(0.5, 1e-2), 3.0103, 5e-5);
}

TEST(TaperLoss, RejectsOutOfRange) {
  for (double eta : {0.0, -0.1, 1.01}) {
    try {
      taper_loss_per_length(eta, 1e-5);
      FAIL() << eta;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::DomainError);
    }
  }
}

TEST(TotalLoss, ZeroBudgetAndFullCoverage) {
  EXPECT_EQ(total_loss(hybrid(), LossBudget{}), 0.0);
  auto g = hybrid();
  g.gaas_length_m = g.total_length_m;
  g.taper_count = 0;
  LossBudget b{75.0, 0.0, 8.21, 1.0};
  EXPECT_NEAR(total_loss(g, b), 83.21, 1e-12);
}

TEST(TotalLoss, MatchesWeightedAverageOracle) {
  const auto g = hybrid();
  const auto b = measured();
  // segment list: (length in um, loss in dB/cm), then LN background everywhere
  const std::vector<std::pair<double, double>> segments{{5.0, 75.0}, {10.5, b.alpha_taper}, {10.5, b.alpha_taper}};
  double num = 0.0;
  for (auto [len, a] : segments) num += len * a;
  const double want = num / 196.74 + 8.21;
  EXPECT_NEAR(total_loss(g, b), want, 1e-12 * want);
  EXPECT_NEAR(total_loss(g, b), 18.135, 0.001);
  EXPECT_GE(total_loss(g, b), b.alpha_ln);
}

TEST(TotalLoss, SingleTaperOption) {
  auto g = hybrid();
  g.taper_count = 1;
  const auto b = measured();
  EXPECT_NEAR(total_loss(hybrid(), b) - total_loss(g, b), b.alpha_taper * 10.5 / 196.74, 1e-12);
}

TEST(Geometry, Invariants) {
  auto g = hybrid();
  g.gaas_length_m = 190e-6;
  EXPECT_THROW(g.validate(), Error);
  g = hybrid();
  g.group_index = 1.0;
  EXPECT_THROW(g.validate(), Error);
  g = hybrid();
  g.taper_length_m = 0.0;
  EXPECT_THROW(g.validate(), Error);
}

TEST(QualityFactor, ScalingAndInversion) {
  const auto g = hybrid();
  EXPECT_NEAR(quality_factor(g, 10.0) / quality_factor(g, 20.0), 2.0, 1e-15);
  const double alpha = loss_for_quality(g, 1.9e4);
  EXPECT_NEAR(quality_factor(g, alpha), 1.9e4, 1.9e4 * 1e-12);
  EXPECT_NEAR(loss_for_quality(g, quality_factor(g, alpha)), alpha, 1e-9 * alpha);
  // direct evaluation with the power-attenuation conversion
  const double per_m = alpha * std::log(10.0) / 10.0 * 100.0;
  EXPECT_NEAR(std::numbers::pi * 2.3 / (910e-9 * per_m), 1.9e4, 1e-6);
}

TEST(QualityFactor, PureLnCalibration) {
  const auto g = hybrid();
  const double alpha_ln = loss_for_quality(g, 4.2e4);
  EXPECT_NEAR(quality_factor(g, alpha_ln), 4.2e4, 1e-8);
  EXPECT_GT(alpha_ln, 0.0);
  EXPECT_LT(alpha_ln, total_loss(g, measured()));
}

TEST(QualityFactor, MeasuredBudgetGivesAbout19000) {
  const double q = quality_factor(hybrid(), total_loss(hybrid(), measured()));
  EXPECT_NEAR(q, 1.9e4, 0.01 * 1.9e4);
}

TEST(QualityFactor, RejectsLossless) {
  try {
    quality_factor(hybrid(), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DomainError);
  }
}

TEST(QualityFactor, MonotoneDecreasingInEachLossComponent) {
  const auto g = hybrid();
  auto base = measured();
  const double q0 = quality_factor(g, total_loss(g, base));
  for (double LossBudget::*field : {&LossBudget::alpha_gaas, &LossBudget::alpha_taper, &LossBudget::alpha_ln}) {
    auto b = base;
    b.*field += 1.0;
    EXPECT_LT(quality_factor(g, total_loss(g, b)), q0);
  }
}

TEST(FreeSpectralRange, AnchorAndScaling) {
  const auto g = hybrid();
  EXPECT_NEAR(g.group_index * g.total_length_m, 452.5e-6, 5e-9);
  const double fsr = free_spectral_range(g);
  EXPECT_NEAR(fsr / units::nm, 1.83, 0.001);
  EXPECT_NEAR(fsr * g.group_index * g.total_length_m / (g.design_wavelength_m * g.design_wavelength_m), 1.0, 1e-12);
  auto twice = g;
  twice.total_length_m *= 2;
  twice.gaas_length_m *= 2;
  EXPECT_NEAR(free_spectral_range(twice), fsr / 2, 1e-12 * fsr);
  // n_g L implied by the measured 1.83 nm
  EXPECT_NEAR(910.0 * 910.0 / 1.83 * 1e-3, 452.5, 0.1);
}

TEST(Transmission, CriticalCouplingCancelsOnResonance) {
  EXPECT_EQ(all_pass_transmission(0.96, 0.96, 0.0), 0.0);
  EXPECT_LT(all_pass_transmission(0.96, 0.96, 2 * std::numbers::pi * 430), 1e-20);
}

TEST(Transmission, LosslessRingIsAllPass) {
  for (double t : {0.1, 0.5, 0.95})
    for (double phi : {0.0, 0.3, 1.7, std::numbers::pi}) EXPECT_NEAR(all_pass_transmission(1.0, t, phi), 1.0, 1e-15);
}

TEST(Transmission, MatchesRoundTripSum) {
  for (double phi : {0.0, 0.01, 0.5, std::numbers::pi}) {
    const double got = all_pass_transmission(0.98, 0.95, phi);
    EXPECT_NEAR(got, oracle::ring_transmission_sum(0.98, 0.95, phi, 10000), 1e-8) << phi;
  }
}

TEST(Transmission, BoundedAndMinimaSpacedByFsr) {
  const auto g = hybrid();
  const double a = round_trip_amplitude(g, total_loss(g, measured()));
  const auto s = transmission_spectrum({a, a}, g, grid(906.0, 914.0, 40001));
  for (double v : s.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  const auto minima = local_minima(s);
  ASSERT_GE(minima.size(), 3u);
  const double fsr = free_spectral_range(g) / units::nm;
  for (std::size_t i = 1; i < minima.size(); ++i) EXPECT_NEAR(minima[i] - minima[i - 1], fsr, 0.01 * fsr);
}

TEST(Transmission, MinimaMoveOneFsrWhenPathGrowsByOneWavelength) {
  auto g = hybrid();
  const double lambda0 = 910e-9;
  // choose a length that puts resonance order m exactly at lambda0
  const double m = std::round(g.group_index * g.total_length_m / lambda0);
  g.total_length_m = m * lambda0 / g.group_index;
  auto g2 = g;
  g2.total_length_m += lambda0 / g.group_index;
  // order m in g2 sits at (m + 1) lambda0 / m = lambda0 + FSR(g at lambda0)
  const double expected = lambda0 + lambda0 * lambda0 / (g.group_index * g.total_length_m);
  const auto s = transmission_spectrum({0.97, 0.97}, g2, grid(expected / units::nm - 0.05, expected / units::nm + 0.05, 20001));
  const auto minima = local_minima(s);
  ASSERT_EQ(minima.size(), 1u);
  EXPECT_NEAR(minima[0], expected / units::nm, 1e-5);
}

TEST(Transmission, ExtinctionGrowsWithCouplingMismatch) {
  const double a = 0.96;
  double prev = -1.0;
  for (int k = 0; k <= 20; ++k) {
    const double t = a - 0.001 * k;
    const double on = all_pass_transmission(a, t, 0.0);
    EXPECT_GT(on, prev);
    prev = on;
  }
  prev = -1.0;
  for (int k = 0; k <= 20; ++k) {
    const double t = a + 0.001 * k;
    const double on = all_pass_transmission(a, t, 0.0);
    EXPECT_GT(on, prev);
    prev = on;
  }
}

TEST(Transmission, BitwiseIdenticalAcrossThreadCounts) {
  const auto g = hybrid();
  const auto w = grid(905.0, 915.0, 10007);
  const auto one = transmission_spectrum({0.95, 0.96}, g, w, 1);
  for (unsigned threads : {2u, 3u, 8u, 64u}) EXPECT_EQ(transmission_spectrum({0.95, 0.96}, g, w, threads), one);
}

TEST(Transmission, Errors) {
  try {
    transmission_spectrum({0.9, 0.9}, hybrid(), std::vector<double>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyGrid);
  }
  EXPECT_THROW(transmission_spectrum({0.9, 0.9}, hybrid(), std::vector<double>{910e-9, 909e-9}), Error);
  EXPECT_THROW(transmission_spectrum({1.0, 0.9}, hybrid(), std::vector<double>{910e-9}), Error);
}

TEST(Coupling, RegimeClassificationIsTotal) {
  EXPECT_EQ((CouplingState{0.95, 0.96}.regime()), CouplingRegime::over);
  EXPECT_EQ((CouplingState{0.97, 0.96}.regime()), CouplingRegime::under);
  EXPECT_EQ((CouplingState{0.96, 0.96}.regime()), CouplingRegime::critical);
  EXPECT_EQ((CouplingState{0.96 + 5e-7, 0.96}.regime()), CouplingRegime::critical);
  EXPECT_EQ((CouplingState{0.96 + 2e-6, 0.96}.regime()), CouplingRegime::under);
}

namespace {
ModeField box(std::size_t n, double cell) {
  ModeField f;
  f.nx = f.ny = f.nz = n;
  f.cell_volume_m3 = cell;
  f.permittivity.assign(n * n * n, 1.0);
  f.field_sq.assign(n * n * n, 0.0);
  return f;
}
}  // namespace

TEST(ModeVolume, ConstantFieldFillsDomain) {
  auto f = box(4, 2e-21);
  std::fill(f.permittivity.begin(), f.permittivity.end(), 11.0);
  std::fill(f.field_sq.begin(), f.field_sq.end(), 0.3);
  EXPECT_NEAR(effective_mode_volume(f, 910e-9, 3.5).volume_m3, 64 * 2e-21, 1e-30);
}

TEST(ModeVolume, SingleCell) {
  auto f = box(5, 1e-21);
  f.field_sq[17] = 4.0;
  EXPECT_DOUBLE_EQ(effective_mode_volume(f, 910e-9, 3.5).volume_m3, 1e-21);
}

TEST(ModeVolume, GaussianMatchesSeparableMidpointOracle) {
  const std::size_t n = 32;
  const double h = 25e-9, w = 120e-9;
  auto f = box(n, h * h * h);
  auto coord = [&](std::size_t i) { return (static_cast<double>(i) + 0.5) * h - 0.5 * n * h; };
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) {
        const double x = coord(i), y = coord(j), z = coord(k);
        f.field_sq[i + n * (j + n * k)] = std::exp(-(x * x + y * y + z * z) / (w * w));
        f.permittivity[i + n * (j + n * k)] = 12.25;
      }
  // separable: sum_x g(x) cubed over the peak sample cubed
  double line = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = std::exp(-coord(i) * coord(i) / (w * w));
    line += g * h;
    peak = std::max(peak, g);
  }
  const double want = std::pow(line / peak, 3);
  const auto v = effective_mode_volume(f, 910e-9, 3.5);
  EXPECT_NEAR(v.volume_m3, want, 1e-10 * want);
  EXPECT_NEAR(v.normalized, want / std::pow(910e-9 / 3.5, 3), 1e-10 * v.normalized);
  EXPECT_LE(v.volume_m3, n * n * n * h * h * h);

  auto scaled = f;
  for (double& e2 : scaled.field_sq) e2 *= 7.5;
  EXPECT_NEAR(effective_mode_volume(scaled, 910e-9, 3.5).volume_m3, v.volume_m3, 1e-12 * v.volume_m3);
}

TEST(ModeVolume, Errors) {
  auto f = box(3, 1e-21);
  try {
    effective_mode_volume(f, 910e-9, 3.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateField);
  }
  f.field_sq[0] = -1.0;
  EXPECT_THROW(effective_mode_volume(f, 910e-9, 3.5), Error);
  ModeField empty;
  empty.cell_volume_m3 = 1.0;
  try {
    effective_mode_volume(empty, 910e-9, 3.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyGrid);
  }
}

TEST(MaxPurcell, ExamplesAndScaling) {
  EXPECT_NEAR(max_purcell(1.9e4, 96.4), 14.98, 0.005);
  EXPECT_NEAR(max_purcell(4.0 * std::numbers::pi * std::numbers::pi / 3.0, 1.0), 1.0, 1e-15);
  EXPECT_NEAR(max_purcell(3.8e4, 96.4), 2.0 * max_purcell(1.9e4, 96.4), 1e-12);
  EXPECT_NEAR(max_purcell(1.9e4, 48.2), 2.0 * max_purcell(1.9e4, 96.4), 1e-12);
  EXPECT_THROW(max_purcell(0.0, 1.0), Error);
}
