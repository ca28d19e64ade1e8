#pragma once

// Hybrid GaAs/LN ring resonator: loss budget, quality factor, FSR, all-pass
// transmission, effective mode volume and the Purcell ceiling.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <thread>
#include <vector>

#include "ringqed/error.hpp"
#include "ringqed/records.hpp"
#include "ringqed/units.hpp"

namespace ringqed::resonator {

struct RingGeometry {
  double total_length_m = 0.0;
  double gaas_length_m = 0.0;
  double taper_length_m = 0.0;  // one mode transformer
  int taper_count = 2;          // transformers counted in the loss budget
  double group_index = 0.0;
  double design_wavelength_m = 0.0;

  void validate() const {
    require(total_length_m > 0 && gaas_length_m > 0 && taper_length_m > 0 && design_wavelength_m > 0,
            ErrorKind::DomainError, "ring lengths and wavelength must be > 0");
    require(taper_count >= 0 && taper_count <= 2, ErrorKind::DomainError, "taper_count must be 0, 1 or 2");
    require(gaas_length_m + taper_count * taper_length_m <= total_length_m * (1 + 1e-12), ErrorKind::DomainError,
            "GaAs section plus tapers exceed the ring length");
    require(group_index > 1.0 && group_index < 10.0, ErrorKind::DomainError, "group index must lie in (1, 10)");
  }
};

/// Losses in dB/cm.
struct LossBudget {
  double alpha_gaas = 0.0;
  double alpha_taper = 0.0;
  double alpha_ln = 0.0;
  double taper_efficiency = 1.0;

  void validate() const {
    require(alpha_gaas >= 0 && alpha_taper >= 0 && alpha_ln >= 0, ErrorKind::DomainError, "losses must be >= 0");
    require(taper_efficiency > 0 && taper_efficiency <= 1, ErrorKind::DomainError,
            "taper efficiency must lie in (0, 1]");
  }
};

enum class CouplingRegime { under, critical, over };

inline constexpr double critical_coupling_tolerance = 1e-6;

struct CouplingState {
  double self_coupling = 0.0;         // t
  double round_trip_amplitude = 1.0;  // a

  void validate() const {
    require(self_coupling > 0 && self_coupling < 1, ErrorKind::DomainError, "self coupling t must lie in (0, 1)");
    require(round_trip_amplitude > 0 && round_trip_amplitude <= 1, ErrorKind::DomainError,
            "round-trip amplitude a must lie in (0, 1]");
  }

  CouplingRegime regime() const {
    const double diff = round_trip_amplitude - self_coupling;
    if (std::abs(diff) < critical_coupling_tolerance) return CouplingRegime::critical;
    return diff > 0 ? CouplingRegime::over : CouplingRegime::under;
  }
};

/// Discretized mode: permittivity and |E|^2 per cell, row-major with x fastest.
struct ModeField {
  std::size_t nx = 0, ny = 0, nz = 0;
  double cell_volume_m3 = 0.0;
  std::vector<double> permittivity;
  std::vector<double> field_sq;

  std::size_t cells() const { return nx * ny * nz; }

  void validate() const {
    require(cells() > 0, ErrorKind::EmptyGrid, "mode field grid is empty");
    require(permittivity.size() == cells() && field_sq.size() == cells(), ErrorKind::DomainError,
            "mode field arrays do not match the grid dimensions");
    require(cell_volume_m3 > 0, ErrorKind::DomainError, "cell volume must be > 0");
    for (std::size_t i = 0; i < cells(); ++i)
      require(std::isfinite(permittivity[i]) && std::isfinite(field_sq[i]) && permittivity[i] >= 0 &&
                  field_sq[i] >= 0,
              ErrorKind::DomainError, "mode field entries must be finite and >= 0");
  }
};

struct ModeVolume {
  double volume_m3 = 0.0;
  double normalized = 0.0;  // in units of (lambda / n)^3
};

/// alpha_M = -10 log10(eta) / L_M, dB/cm.
inline double taper_loss_per_length(double efficiency, double taper_length_m) {
  require(efficiency > 0 && efficiency <= 1, ErrorKind::DomainError, "taper efficiency must lie in (0, 1]");
  require(taper_length_m > 0, ErrorKind::DomainError, "taper length must be > 0");
  return -10.0 * std::log10(efficiency) / (taper_length_m / units::cm);
}

/// Length-weighted GaAs and taper loss plus the LN background, dB/cm.
inline double total_loss(const RingGeometry& g, const LossBudget& b) {
  g.validate();
  b.validate();
  const double lumped = b.alpha_gaas * g.gaas_length_m + b.alpha_taper * g.taper_count * g.taper_length_m;
  return lumped / g.total_length_m + b.alpha_ln;
}

/// Q = pi n_g / (lambda alpha), alpha as power attenuation in 1/m.
inline double quality_factor(const RingGeometry& g, double alpha_total_db_per_cm) {
  require(alpha_total_db_per_cm > 0, ErrorKind::DomainError, "lossless ring: quality factor is unbounded");
  return std::numbers::pi * g.group_index / (g.design_wavelength_m * units::db_per_cm_to_per_m(alpha_total_db_per_cm));
}

/// Inverse of quality_factor: the total loss (dB/cm) that yields `q`.
inline double loss_for_quality(const RingGeometry& g, double q) {
  require(q > 0, ErrorKind::DomainError, "quality factor must be > 0");
  return units::per_m_to_db_per_cm(std::numbers::pi * g.group_index / (g.design_wavelength_m * q));
}

/// Field amplitude left after one round trip: exp(-alpha L / 2).
inline double round_trip_amplitude(const RingGeometry& g, double alpha_total_db_per_cm) {
  require(alpha_total_db_per_cm >= 0, ErrorKind::DomainError, "loss must be >= 0");
  return std::exp(-0.5 * units::db_per_cm_to_per_m(alpha_total_db_per_cm) * g.total_length_m);
}

/// FSR = lambda^2 / (n_g L), m.
inline double free_spectral_range(const RingGeometry& g) {
  g.validate();
  return g.design_wavelength_m * g.design_wavelength_m / (g.group_index * g.total_length_m);
}

inline double round_trip_phase(const RingGeometry& g, double wavelength_m) {
  return 2.0 * std::numbers::pi * g.group_index * g.total_length_m / wavelength_m;
}

/// Single-bus all-pass ring power transmission.
inline double all_pass_transmission(double a, double t, double phase) {
  const double c = std::cos(phase);
  const double num = a * a - 2.0 * a * t * c + t * t;
  const double den = 1.0 - 2.0 * a * t * c + (a * t) * (a * t);
  return std::clamp(num / den, 0.0, 1.0);
}

/// Evaluates the all-pass response on `wavelengths_m` (ascending). Each
/// sample is computed independently, so any thread count gives identical bits.
inline Spectrum transmission_spectrum(const CouplingState& coupling, const RingGeometry& g,
                                      std::span<const double> wavelengths_m, unsigned threads = 1) {
  coupling.validate();
  g.validate();
  require(!wavelengths_m.empty(), ErrorKind::EmptyGrid, "wavelength grid is empty");
  for (std::size_t i = 1; i < wavelengths_m.size(); ++i)
    require(wavelengths_m[i] > wavelengths_m[i - 1], ErrorKind::NonMonotonicAxis, "wavelengths must ascend");

  Spectrum s;
  s.kind = SpectrumKind::transmission;
  s.wavelength_nm.resize(wavelengths_m.size());
  s.values.resize(wavelengths_m.size());

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      s.wavelength_nm[i] = wavelengths_m[i] / units::nm;
      s.values[i] = all_pass_transmission(coupling.round_trip_amplitude, coupling.self_coupling,
                                          round_trip_phase(g, wavelengths_m[i]));
    }
  };

  const std::size_t n = wavelengths_m.size();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t b = 0; b < n; b += chunk) pool.emplace_back(work, b, std::min(n, b + chunk));
  }
  return s;
}

/// V_eff = sum(eps |E|^2 dV) / max(eps |E|^2); normalized by (lambda / n)^3.
inline ModeVolume effective_mode_volume(const ModeField& field, double wavelength_m, double refractive_index) {
  field.validate();
  require(wavelength_m > 0 && refractive_index > 0, ErrorKind::DomainError,
          "normalization needs wavelength and index > 0");
  double sum = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < field.cells(); ++i) {
    const double w = field.permittivity[i] * field.field_sq[i];
    sum += w;
    peak = std::max(peak, w);
  }
  require(peak > 0, ErrorKind::DegenerateField, "eps |E|^2 vanishes everywhere");
  ModeVolume v;
  v.volume_m3 = sum / peak * field.cell_volume_m3;
  v.normalized = v.volume_m3 / std::pow(wavelength_m / refractive_index, 3);
  return v;
}

/// F_p = 3 / (4 pi^2) * Q / V, V in (lambda / n)^3.
inline double max_purcell(double quality, double mode_volume_normalized) {
  require(quality > 0 && mode_volume_normalized > 0, ErrorKind::DomainError, "Q and V must be > 0");
  return 3.0 / (4.0 * std::numbers::pi * std::numbers::pi) * quality / mode_volume_normalized;
}

}  // namespace ringqed::resonator
