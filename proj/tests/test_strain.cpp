#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "ringqed/strain.hpp"

using namespace ringqed;
using namespace ringqed::strain;

namespace {

const MaterialSet& db() {
  static const auto m = load_material_database(std::filesystem::path(RINGQED_DATA_DIR) / "materials.db");
  return m;
}

PiezoTensor xcut() { return rotate_piezo_to_xcut(db().ln_piezo_zcut, FrameRotation::xcut_device_frame()); }

StrainState from(std::initializer_list<double> v) {
  StrainState s;
  int i = 0;
  for (double x : v) s.voigt(i++) = x;
  return s;
}

std::vector<double> sweep(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return v;
}

double span_nm(const std::vector<TuningPoint>& c) {
  return std::abs(c.back().wavelength_m - c.front().wavelength_m) / units::nm;
}

}  // namespace

TEST(FieldFromVoltage, UniformFieldAlongDirection) {
  const auto f = field_from_voltage({500.0, 5e-6, Vector3::UnitZ()});
  EXPECT_DOUBLE_EQ(f.z(), 1.0e8);
  EXPECT_EQ(f.x(), 0.0);
  EXPECT_EQ(field_from_voltage({0.0, 5e-6, Vector3::UnitZ()}), Vector3::Zero());
  EXPECT_EQ(field_from_voltage({-500.0, 5e-6, Vector3::UnitZ()}), -f);
  EXPECT_THROW(field_from_voltage({1.0, 0.0, Vector3::UnitZ()}), Error);
  EXPECT_THROW(field_from_voltage({1.0, 5e-6, Vector3(1, 1, 0)}), Error);
}

TEST(StrainFromField, ZeroFieldAndLinearity) {
  const MechanicalContext ctx{1.0, 0.1};
  EXPECT_EQ(strain_from_field(Vector3::Zero(), db().gaas_compliance, xcut(), ctx).voigt, Vector6::Zero());
  const Vector3 f(2e7, -1e7, 5e7);
  const auto s1 = strain_from_field(f, db().gaas_compliance, xcut(), ctx).voigt;
  const auto s2 = strain_from_field(2.0 * f, db().gaas_compliance, xcut(), ctx).voigt;
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(s2(i), 2.0 * s1(i), 1e-12 * std::abs(s1(i)) + 1e-30);
}

TEST(StrainFromField, Superposition) {
  const MechanicalContext ctx{6.4, 0.1};
  const Vector3 a(1e7, 2e7, -3e7), b(-4e6, 9e6, 3e7);
  const auto sa = strain_from_field(a, db().gaas_compliance, xcut(), ctx).voigt;
  const auto sb = strain_from_field(b, db().gaas_compliance, xcut(), ctx).voigt;
  const auto sab = strain_from_field(a + b, db().gaas_compliance, xcut(), ctx).voigt;
  EXPECT_LT((sab - sa - sb).cwiseAbs().maxCoeff(), 1e-18);
}

TEST(StrainFromField, MatchesMatrixChainOracleAlongZ) {
  const MechanicalContext ctx{1.0, 1.0};
  const auto s = strain_from_field({0, 0, 1e8}, db().gaas_compliance, xcut(), ctx).voigt;
  const auto want = oracle::strain_chain(db().gaas_compliance.matrix(), xcut().matrix(), {0, 0, 1e8}, 1.0, 1.0);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(s(i), want[static_cast<std::size_t>(i)], 1e-10 * 1e-3);
  EXPECT_LT(s(2), 0);   // e33 > 0 compresses along the field
  EXPECT_GT(s(0), 0);
}

TEST(StrainFromField, ClampingScalesLinearly) {
  const Vector3 f(0, 0, 1e8);
  const auto s1 = strain_from_field(f, db().gaas_compliance, xcut(), {1.0, 0.1}).voigt;
  const auto s6 = strain_from_field(f, db().gaas_compliance, xcut(), {6.4, 0.1}).voigt;
  EXPECT_LT((s6 - 6.4 * s1).cwiseAbs().maxCoeff(), 1e-18);
}

TEST(StrainFromField, OutOfRangeAndBadContext) {
  try {
    strain_from_field({0, 0, 1e11}, db().gaas_compliance, xcut(), {1.0, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::StrainOutOfRange);
  }
  EXPECT_THROW(strain_from_field({0, 0, 1}, db().gaas_compliance, xcut(), {0.5, 1.0}), Error);
}

TEST(PikusBir, ZeroAndHydrostatic) {
  const auto& p = db().gaas_potentials;
  EXPECT_EQ(pikus_bir_shift(StrainState{}, p), 0.0);
  for (double s : {1e-4, -3e-4, 2e-3}) {
    const auto e = from({s, s, s, 0, 0, 0});
    EXPECT_NEAR(pikus_bir_shift(e, p), 3.0 * s * (p.a_c + p.a_v), 1e-12 * std::abs(3.0 * s * (p.a_c + p.a_v)));
  }
}

TEST(PikusBir, BiaxialWithShearMatchesDirectFormula) {
  const auto& p = db().gaas_potentials;
  for (double s : {1e-4, 5e-4, -2e-4}) {
    const double c = 0.9;
    const double exx = s, eyy = s, ezz = -c * s, exy = s / 10;
    const auto e = from({exx, eyy, ezz, 0, 0, 2 * exy});
    const double q = -p.b / 2 * (exx + eyy - 2 * ezz);
    const double r2 = 0.75 * p.b * p.b * (exx - eyy) * (exx - eyy) + p.d * p.d * exy * exy;
    const double want = (p.a_c + p.a_v) * (exx + eyy + ezz) - std::sqrt(q * q + r2);
    EXPECT_NEAR(pikus_bir_shift(e, p), want, 1e-15);
  }
}

TEST(PikusBir, PositivelyHomogeneous) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1e-3, 1e-3);
  for (int i = 0; i < 200; ++i) {
    StrainState e;
    for (int k = 0; k < 6; ++k) e.voigt(k) = u(rng);
    const double base = pikus_bir_shift(e, db().gaas_potentials);
    for (double scale : {0.0, 0.5, 3.0}) {
      StrainState es;
      es.voigt = scale * e.voigt;
      EXPECT_NEAR(pikus_bir_shift(es, db().gaas_potentials), scale * base, 1e-12 * std::max(std::abs(base), 1e-6));
    }
  }
}

TEST(PikusBir, DegenerateRIsSmooth) {
  const auto e = from({2e-4, 2e-4, -1e-4, 0, 0, 0});
  EXPECT_TRUE(std::isfinite(pikus_bir_shift(e, db().gaas_potentials)));
}

TEST(WavelengthShift, AnchorSignAndAntisymmetry) {
  EXPECT_EQ(wavelength_shift(0.0, 910e-9), 0.0);
  const double d = wavelength_shift(7.30e-3, 910e-9);
  EXPECT_LT(d, 0.0);
  EXPECT_NEAR(std::abs(d) / units::nm, 4.88, 0.005);
  EXPECT_NEAR(std::abs(d) / units::nm, 4.82, 0.02 * 4.82);
  EXPECT_DOUBLE_EQ(wavelength_shift(-7.30e-3, 910e-9), -d);
}

TEST(TuningCurve, ClampedCalibration) {
  StrainTuningDevice d;
  const auto c = tuning_curve(d, db(), sweep(-500, 500, 101));
  EXPECT_NEAR(span_nm(c), 0.47, 1e-9);
  EXPECT_NEAR(std::abs(effective_tuning_rate(d, db())) / units::pm, 0.47, 1e-12);
}

TEST(TuningCurve, SuspendedCalibrationAndRatio) {
  StrainTuningDevice clamped, suspended;
  suspended.suspended = true;
  const auto c = tuning_curve(suspended, db(), sweep(-800, 800, 161));
  EXPECT_NEAR(span_nm(c), 4.82, 0.01 * 4.82);
  EXPECT_NEAR(std::abs(effective_tuning_rate(suspended, db())) / units::pm, 3.01, 0.01);
  EXPECT_NEAR(effective_tuning_rate(suspended, db()) / effective_tuning_rate(clamped, db()), suspended.clamping_factor,
              1e-12);
}

TEST(TuningCurve, ExactlyLinearAcrossZero) {
  StrainTuningDevice d;
  d.suspended = true;
  const auto v = sweep(-800, 800, 321);
  const auto c = tuning_curve(d, db(), v);
  std::vector<double> w;
  for (const auto& p : c) w.push_back(p.wavelength_m);
  const auto [b0, b1] = oracle::normal_equations_line(v, w);
  double dev = 0;
  for (std::size_t i = 0; i < v.size(); ++i) dev = std::max(dev, std::abs(w[i] - (b0 + b1 * v[i])));
  EXPECT_LT(dev, 1e-12 * span_nm(c) * units::nm);
  EXPECT_NEAR(b1, effective_tuning_rate(d, db()), 1e-9 * std::abs(b1));
}

TEST(TuningCurve, ZeroLengthSweepAndLimits) {
  StrainTuningDevice d;
  const std::vector<double> zero{0.0};
  const auto c = tuning_curve(d, db(), zero);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].wavelength_m, d.emission_wavelength_m);
  EXPECT_TRUE(tuning_curve(d, db(), std::vector<double>{}).empty());
  try {
    tuning_curve(d, db(), std::vector<double>{900.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::VoltageLimitExceeded);
  }
}

TEST(TuningCurve, StrainStaysSmallAtFullSuspendedSwing) {
  StrainTuningDevice d;
  d.suspended = true;
  const auto ctx = mechanical_context(d, db());
  EXPECT_GT(ctx.transfer_efficiency, 0.0);
  EXPECT_LT(ctx.transfer_efficiency, 1.0);
  const auto s = strain_from_field(field_from_voltage({800, d.electrode_gap_m, d.field_direction}),
                                   db().gaas_compliance, xcut(), ctx);
  EXPECT_LT(s.voigt.cwiseAbs().maxCoeff(), 1e-2);
}
