#pragma once

// Voltage -> piezo strain in the GaAs layer -> Pikus-Bir gap shift ->
// emission wavelength.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "ringqed/error.hpp"
#include "ringqed/materials.hpp"
#include "ringqed/units.hpp"

namespace ringqed::strain {

inline constexpr double small_strain_limit = 1e-2;

struct AppliedField {
  double voltage_V = 0.0;
  double electrode_gap_m = 5e-6;
  Vector3 direction = Vector3::UnitZ();  // device frame

  void validate() const {
    require(electrode_gap_m > 0, ErrorKind::DomainError, "electrode gap must be > 0");
    require(std::abs(direction.norm() - 1.0) <= 1e-12, ErrorKind::DomainError, "field direction must be a unit vector");
  }
};

/// Voigt strain (xx, yy, zz, 2yz, 2xz, 2xy).
struct StrainState {
  Vector6 voigt = Vector6::Zero();

  double hydrostatic() const { return voigt(0) + voigt(1) + voigt(2); }
  double xy() const { return 0.5 * voigt(5); }  // tensor component
};

/// clamping_factor: strain gain of a suspended membrane over the oxide-clamped
/// device. transfer_efficiency: fraction of the free-LN piezo strain that
/// reaches the bonded GaAs; calibrated from a measured tuning rate.
struct MechanicalContext {
  double clamping_factor = 1.0;
  double transfer_efficiency = 1.0;

  void validate() const {
    require(clamping_factor >= 1.0, ErrorKind::DomainError, "clamping factor must be >= 1");
    require(transfer_efficiency > 0.0 && std::isfinite(transfer_efficiency), ErrorKind::DomainError,
            "transfer efficiency must be > 0");
  }
};

/// Uniform field between the electrodes: |F| = V / gap along `direction`.
inline Vector3 field_from_voltage(const AppliedField& applied) {
  applied.validate();
  return applied.direction * (applied.voltage_V / applied.electrode_gap_m);
}

/// strain = -k S (e^T F), k = clamping_factor * transfer_efficiency.
inline StrainState strain_from_field(const Vector3& field, const ElasticCompliance& compliance,
                                     const PiezoTensor& piezo_xcut, const MechanicalContext& context) {
  context.validate();
  const Vector6 stress = piezo_xcut.matrix().transpose() * field;
  StrainState s;
  s.voigt = -(context.clamping_factor * context.transfer_efficiency) * (compliance.matrix() * stress);
  for (int i = 0; i < 6; ++i)
    require(std::abs(s.voigt(i)) < small_strain_limit, ErrorKind::StrainOutOfRange,
            "strain component " + std::to_string(i) + " = " + kv::format_double(s.voigt(i), 4) +
                " leaves the small-strain regime");
  return s;
}

/// Band-gap shift on a chosen branch of the split valence band:
/// (a_c + a_v) e_h - orientation * sqrt(|Q|^2 + |R|^2).
inline double band_shift_on_branch(const StrainState& s, const DeformationPotentials& p, double orientation) {
  const double exx = s.voigt(0), eyy = s.voigt(1), ezz = s.voigt(2);
  const double q = -0.5 * p.b * (exx + eyy - 2.0 * ezz);
  const std::complex<double> r{0.5 * std::sqrt(3.0) * p.b * (exx - eyy), -p.d * s.xy()};
  return (p.a_c + p.a_v) * s.hydrostatic() - orientation * std::sqrt(q * q + std::norm(r));
}

/// Pikus-Bir gap shift, eV: (a_c + a_v) e_h - sqrt(|Q|^2 + |R|^2) with
/// Q = -b/2 (e_xx + e_yy - 2 e_zz), R = (sqrt(3)/2) b (e_xx - e_yy) - i d e_xy.
inline double pikus_bir_shift(const StrainState& s, const DeformationPotentials& p) {
  return band_shift_on_branch(s, p, 1.0);
}

/// First-order emission shift, m: d(lambda) = -lambda^2 dE / (hc).
inline double wavelength_shift(double delta_e_eV, double center_wavelength_m) {
  return -center_wavelength_m * center_wavelength_m * delta_e_eV / units::hc_eV_m;
}

/// Strain-tuned emitter. tuning_rate_pm_per_V is the calibrated magnitude
/// for the oxide-clamped device; a suspended device tunes clamping_factor
/// times faster.
struct StrainTuningDevice {
  double emission_wavelength_m = 910e-9;  // at zero voltage
  double electrode_gap_m = 5e-6;
  Vector3 field_direction = Vector3::UnitZ();
  double tuning_rate_pm_per_V = 0.47;
  double clamping_factor = 6.4;
  bool suspended = false;
  double v_min_V = -800.0;
  double v_max_V = 800.0;

  void validate() const {
    require(emission_wavelength_m > 0, ErrorKind::DomainError, "emission wavelength must be > 0");
    require(tuning_rate_pm_per_V > 0, ErrorKind::DomainError, "calibrated tuning rate must be > 0");
    require(v_min_V <= v_max_V, ErrorKind::DomainError, "voltage limits out of order");
    MechanicalContext{clamping_factor, 1.0}.validate();
  }
};

struct TuningPoint {
  double voltage_V = 0.0;
  double wavelength_m = 0.0;
};

namespace detail {
/// Shift per volt along the branch continued through zero strain, m/V.
inline double branch_rate(const StrainTuningDevice& d, const MaterialSet& m, const MechanicalContext& ctx) {
  const auto piezo = rotate_piezo_to_xcut(m.ln_piezo_zcut, FrameRotation::xcut_device_frame());
  const auto field = field_from_voltage({1.0, d.electrode_gap_m, d.field_direction});
  const auto s = strain_from_field(field, m.gaas_compliance, piezo, ctx);
  return wavelength_shift(band_shift_on_branch(s, m.gaas_potentials, 1.0), d.emission_wavelength_m);
}
}  // namespace detail

/// Free-LN strain chain slope for the clamped device, m/V (signed).
inline double intrinsic_tuning_rate(const StrainTuningDevice& d, const MaterialSet& m) {
  d.validate();
  return detail::branch_rate(d, m, {1.0, 1.0});
}

/// Fraction of the free-LN strain that must reach the GaAs to reproduce the
/// calibrated clamped rate.
inline double strain_transfer_efficiency(const StrainTuningDevice& d, const MaterialSet& m) {
  const double intrinsic = std::abs(intrinsic_tuning_rate(d, m));
  require(intrinsic > 0, ErrorKind::DomainError, "field direction produces no band-gap shift");
  return d.tuning_rate_pm_per_V * units::pm / intrinsic;
}

inline MechanicalContext mechanical_context(const StrainTuningDevice& d, const MaterialSet& m) {
  return {d.suspended ? d.clamping_factor : 1.0, strain_transfer_efficiency(d, m)};
}

/// Signed end-to-end slope, m/V.
inline double effective_tuning_rate(const StrainTuningDevice& d, const MaterialSet& m) {
  return detail::branch_rate(d, m, mechanical_context(d, m));
}

/// Emission wavelength versus voltage. The emitting hole state is followed
/// continuously through zero strain (the two valence branches cross there
/// linearly), so the response is odd in V and exactly linear.
inline std::vector<TuningPoint> tuning_curve(const StrainTuningDevice& d, const MaterialSet& m,
                                             std::span<const double> voltages) {
  d.validate();
  const auto ctx = mechanical_context(d, m);
  const auto piezo = rotate_piezo_to_xcut(m.ln_piezo_zcut, FrameRotation::xcut_device_frame());

  std::vector<TuningPoint> out;
  out.reserve(voltages.size());
  for (double v : voltages) {
    require(v >= d.v_min_V && v <= d.v_max_V, ErrorKind::VoltageLimitExceeded,
            kv::format_double(v, 6) + " V outside [" + kv::format_double(d.v_min_V, 6) + ", " +
                kv::format_double(d.v_max_V, 6) + "] V");
    const auto field = field_from_voltage({v, d.electrode_gap_m, d.field_direction});
    const auto s = strain_from_field(field, m.gaas_compliance, piezo, ctx);
    const double de = band_shift_on_branch(s, m.gaas_potentials, v < 0 ? -1.0 : 1.0);
    out.push_back({v, d.emission_wavelength_m + wavelength_shift(de, d.emission_wavelength_m)});
  }
  return out;
}

}  // namespace ringqed::strain
