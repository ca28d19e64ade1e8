#pragma once

#include <cmath>
#include <numbers>

// Unit conventions: SI inside the physics kernels, and nm / ns / V / dB/cm
// at the file and CLI boundary. Conversions live here and nowhere else.
namespace ringqed::units {

inline constexpr double nm = 1e-9;
inline constexpr double um = 1e-6;
inline constexpr double pm = 1e-12;
inline constexpr double cm = 1e-2;

/// Planck constant times speed of light, eV·m (CODATA 2018, exact).
inline constexpr double hc_eV_m = 1.239841984e-6;

/// Power attenuation: dB/cm -> 1/m, alpha[1/m] = alpha[dB/cm] * ln(10)/10 * 100.
inline double db_per_cm_to_per_m(double alpha_db_per_cm) {
  return alpha_db_per_cm * std::numbers::ln10 / 10.0 * 100.0;
}

inline double per_m_to_db_per_cm(double alpha_per_m) {
  return alpha_per_m / (std::numbers::ln10 / 10.0 * 100.0);
}

/// Gaussian FWHM -> standard deviation.
inline double fwhm_to_sigma(double fwhm) { return fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2)); }

}  // namespace ringqed::units
