#pragma once

// Weak-coupling emitter/cavity model: detuned Purcell enhancement, beta
// factor, IRF-broadened decay histograms, pulsed g2 histograms and the
// collected-intensity contrast.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "ringqed/error.hpp"
#include "ringqed/noise.hpp"
#include "ringqed/records.hpp"

namespace ringqed::cqed {

struct EmitterCavityState {
  double qd_wavelength_nm = 910.0;
  double cavity_wavelength_nm = 910.0;
  double cavity_linewidth_nm = 0.0479;  // FWHM
  double purcell_on_resonance = 0.0;
  double free_rate_per_ns = 0.42;

  void validate() const {
    require(cavity_linewidth_nm > 0, ErrorKind::DomainError, "cavity linewidth must be > 0");
    require(purcell_on_resonance >= 0, ErrorKind::DomainError, "Purcell factor must be >= 0");
    require(free_rate_per_ns > 0, ErrorKind::DomainError, "free decay rate must be > 0");
  }

  double detuning_nm() const { return qd_wavelength_nm - cavity_wavelength_nm; }
};

/// F(delta) = F_p / (1 + (2 delta / kappa)^2).
inline double purcell_at_detuning(const EmitterCavityState& s, double detuning_nm) {
  s.validate();
  const double x = 2.0 * detuning_nm / s.cavity_linewidth_nm;
  return s.purcell_on_resonance / (1.0 + x * x);
}

/// Gamma(delta) = Gamma_off (1 + F(delta)), 1/ns.
inline double rate_at_detuning(const EmitterCavityState& s, double detuning_nm) {
  return s.free_rate_per_ns * (1.0 + purcell_at_detuning(s, detuning_nm));
}

enum class LifetimeConvention {
  rate_additive,        // tau = 1 / (Gamma_off (1 + F(delta)))
  lorentzian_lifetime,  // tau itself is a Lorentzian dip between tau_on and tau_off
};

inline double lifetime_at_detuning(const EmitterCavityState& s, double detuning_nm,
                                   LifetimeConvention convention = LifetimeConvention::rate_additive) {
  if (convention == LifetimeConvention::rate_additive) return 1.0 / rate_at_detuning(s, detuning_nm);
  s.validate();
  const double tau_off = 1.0 / s.free_rate_per_ns;
  const double tau_on = 1.0 / (s.free_rate_per_ns * (1.0 + s.purcell_on_resonance));
  const double x = 2.0 * detuning_nm / s.cavity_linewidth_nm;
  return tau_off - (tau_off - tau_on) / (1.0 + x * x);
}

/// F_p = Gamma_on / Gamma_off - 1.
inline double purcell_from_rates(double gamma_on, double gamma_off) {
  require(gamma_on > 0 && gamma_off > 0, ErrorKind::DomainError, "decay rates must be > 0");
  return gamma_on / gamma_off - 1.0;
}

inline double purcell_from_lifetimes(double tau_off, double tau_on) {
  require(tau_off > 0 && tau_on > 0, ErrorKind::DomainError, "lifetimes must be > 0");
  return purcell_from_rates(1.0 / tau_on, 1.0 / tau_off);
}

/// beta = F_p / (1 + F_p).
inline double beta_factor(double purcell) {
  require(purcell >= 0, ErrorKind::DomainError, "Purcell factor must be >= 0");
  return purcell / (1.0 + purcell);
}

/// Ratio of collected intensity at detuning_on to detuning_off. A photon
/// reaches the detector through the cavity with probability beta and with
/// relative efficiency `outcoupling_contrast` (cavity channel over the
/// free-space channel), so the collected fraction is
/// (1 - beta) + contrast * beta. The contrast is a calibration constant.
inline double intensity_enhancement(const EmitterCavityState& s, double detuning_off_nm, double outcoupling_contrast,
                                    double detuning_on_nm = 0.0) {
  require(outcoupling_contrast >= 1.0, ErrorKind::DomainError, "outcoupling contrast must be >= 1");
  auto collected = [&](double delta) {
    const double beta = beta_factor(purcell_at_detuning(s, delta));
    return (1.0 - beta) + outcoupling_contrast * beta;
  };
  return collected(detuning_on_nm) / collected(detuning_off_nm);
}

/// Contrast that makes intensity_enhancement equal `target_ratio`.
inline double calibrate_outcoupling_contrast(const EmitterCavityState& s, double detuning_off_nm, double target_ratio,
                                             double detuning_on_nm = 0.0) {
  const double b_on = beta_factor(purcell_at_detuning(s, detuning_on_nm));
  const double b_off = beta_factor(purcell_at_detuning(s, detuning_off_nm));
  // (1 - b_on + C b_on) = r (1 - b_off + C b_off)  ->  linear in C
  const double denom = b_on - target_ratio * b_off;
  require(denom > 0, ErrorKind::DomainError, "target intensity ratio is unreachable for these Purcell factors");
  const double c = (target_ratio * (1.0 - b_off) - (1.0 - b_on)) / denom;
  require(c >= 1.0, ErrorKind::DomainError, "target ratio needs a contrast below 1");
  return c;
}

// Exponentially modified Gaussian: a unit-height decay exp(-rate t) step(t)
// convolved with a normalized Gaussian of width sigma.
namespace emg {

inline double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
inline double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Phi(b) - Phi(a) without cancellation in either tail.
inline double cdf_diff(double a, double b) {
  if (a >= 0) return 0.5 * (std::erfc(a / std::numbers::sqrt2) - std::erfc(b / std::numbers::sqrt2));
  if (b <= 0) return 0.5 * (std::erfc(-b / std::numbers::sqrt2) - std::erfc(-a / std::numbers::sqrt2));
  return cdf(b) - cdf(a);
}

/// Convolved density h(t) = exp(rate^2 sigma^2 / 2 - rate t) Phi(t/sigma - rate sigma).
inline double density(double t, double rate, double sigma) {
  if (sigma == 0.0) return t < 0 ? 0.0 : std::exp(-rate * t);
  const double p = cdf(t / sigma - rate * sigma);
  if (p == 0.0) return 0.0;
  return std::exp(0.5 * rate * rate * sigma * sigma - rate * t + std::log(p));
}

struct BinMass {
  double mass = 0.0;    // integral of h over [lo, hi]
  double d_rate = 0.0;  // d mass / d rate
  double d_lo = 0.0;    // -h(lo)
  double d_hi = 0.0;    // h(hi)
};

inline BinMass bin_mass(double lo, double hi, double rate, double sigma) {
  BinMass out;
  const double h_lo = density(lo, rate, sigma);
  const double h_hi = density(hi, rate, sigma);
  if (sigma == 0.0) {
    const double a = std::max(lo, 0.0), b = std::max(hi, 0.0);
    const double ea = std::exp(-rate * a), eb = std::exp(-rate * b);
    out.mass = (ea - eb) / rate;
    out.d_rate = -out.mass / rate - (a * ea - b * eb) / rate;
  } else {
    out.mass = (cdf_diff(lo / sigma, hi / sigma) - (h_hi - h_lo)) / rate;
    const double g_hi = h_hi * (rate * sigma * sigma - hi) - sigma * phi(hi / sigma);
    const double g_lo = h_lo * (rate * sigma * sigma - lo) - sigma * phi(lo / sigma);
    out.d_rate = -out.mass / rate - (g_hi - g_lo) / rate;
  }
  out.d_lo = -h_lo;
  out.d_hi = h_hi;
  return out;
}

}  // namespace emg

/// Noiseless counts are amplitude * integral over each bin of the
/// IRF-convolved decay starting at t0, so all bins together hold
/// amplitude / rate. With a seed, each bin is replaced by a Poisson draw.
inline DecayHistogram synthesize_decay(const EmitterCavityState& s, double detuning_nm, double irf_sigma_ns,
                                       std::vector<double> bin_edges_ns, double amplitude,
                                       std::optional<std::uint64_t> noise_seed, double t0_ns = 0.0) {
  require(amplitude >= 0, ErrorKind::DomainError, "amplitude must be >= 0");
  const double rate = rate_at_detuning(s, detuning_nm);
  DecayHistogram h;
  h.irf_sigma_ns = irf_sigma_ns;
  h.bin_edges_ns = std::move(bin_edges_ns);
  h.counts.resize(h.bin_edges_ns.empty() ? 0 : h.bin_edges_ns.size() - 1);
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    h.counts[i] = amplitude * emg::bin_mass(h.bin_edges_ns[i] - t0_ns, h.bin_edges_ns[i + 1] - t0_ns, rate, irf_sigma_ns).mass;
  h.validate();
  if (noise_seed) noise::CountNoise(*noise_seed).apply_poisson(h.counts);
  return h;
}

/// Integral over [lo, hi] of exp(-|t - c| / tau) / (2 tau).
inline double two_sided_mass(double lo, double hi, double c, double tau) {
  const double a = (lo - c) / tau, b = (hi - c) / tau;
  if (a >= 0) return 0.5 * (std::exp(-a) - std::exp(-b));
  if (b <= 0) return 0.5 * (std::exp(b) - std::exp(a));
  return 1.0 - 0.5 * std::exp(-b) - 0.5 * std::exp(a);
}

struct G2Synthesis {
  double g2_zero = 0.0;         // central area over side-peak area
  double lifetime_ns = 0.5;
  double repetition_ns = 12.5;
  int side_peaks = 4;           // recorded peaks on each side of zero delay
  double peak_area = 1e5;       // counts in each side peak
  double bin_width_ns = 0.05;
};

/// Pulsed autocorrelation: two-sided exponentials at k * period. The window
/// spans +/-(side_peaks + 1/2) periods; the next peak outside the window on
/// each side still contributes its tail.
inline CorrelationHistogram synthesize_g2(const G2Synthesis& p, std::optional<std::uint64_t> noise_seed) {
  require(p.g2_zero >= 0 && p.g2_zero <= 1, ErrorKind::DomainError, "g2(0) must lie in [0, 1]");
  require(p.repetition_ns > 0 && p.lifetime_ns > 0 && p.bin_width_ns > 0 && p.peak_area >= 0, ErrorKind::DomainError,
          "g2 synthesis needs positive period, lifetime, bin width");
  require(p.side_peaks >= 1, ErrorKind::DomainError, "need at least one side peak");
  require(p.lifetime_ns < p.repetition_ns / 4.0, ErrorKind::PeakOverlap,
          "lifetime must stay below a quarter of the repetition period");

  const double half = (p.side_peaks + 0.5) * p.repetition_ns;
  const auto bins = static_cast<std::size_t>(std::llround(2.0 * half / p.bin_width_ns));
  CorrelationHistogram h;
  h.repetition_period_ns = p.repetition_ns;
  h.bin_edges_ns = uniform_edges(-half, half, bins);
  h.counts.assign(bins, 0.0);
  for (std::size_t i = 0; i < bins; ++i) {
    const double lo = h.bin_edges_ns[i], hi = h.bin_edges_ns[i + 1];
    double c = 0.0;
    for (int k = -(p.side_peaks + 1); k <= p.side_peaks + 1; ++k) {
      const double area = (k == 0 ? p.g2_zero : 1.0) * p.peak_area;
      c += area * two_sided_mass(lo, hi, k * p.repetition_ns, p.lifetime_ns);
    }
    h.counts[i] = c;
  }
  h.validate();
  if (noise_seed) noise::CountNoise(*noise_seed).apply_poisson(h.counts);
  return h;
}

}  // namespace ringqed::cqed
