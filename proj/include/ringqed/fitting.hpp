#pragma once

// Fitters that invert measured records: resonance dips, IRF-convolved decays,
// tuning slopes with linear/quadratic model selection, lifetime versus
// detuning, and pulsed g2 purity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "ringqed/cqed.hpp"
#include "ringqed/error.hpp"
#include "ringqed/lsq.hpp"
#include "ringqed/models.hpp"
#include "ringqed/records.hpp"

namespace ringqed::fit {

struct FitOptions {
  lsq::Options lsq;
  int starts = 1;  // multi-start count for peak and decay fits
  /// AICc gap the quadratic tuning model must beat to be preferred.
  double model_selection_margin = 6.0;
};

namespace detail {

inline double median(std::vector<double> v) {
  require(!v.empty(), ErrorKind::EmptyGrid, "median of empty set");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

/// Robust point-to-point noise: MAD of first differences over sqrt(2).
inline double noise_floor(std::span<const double> y) {
  if (y.size() < 3) return 0.0;
  std::vector<double> d(y.size() - 1);
  for (std::size_t i = 1; i < y.size(); ++i) d[i - 1] = y[i] - y[i - 1];
  const double med = median(d);
  for (auto& v : d) v = std::abs(v - med);
  return median(d) / 0.6744897501960817 / std::sqrt(2.0);
}

/// Deterministic multi-start scale factors for width-like guesses.
inline double start_factor(int start) {
  static constexpr double f[] = {1.0, 0.5, 2.0, 0.7, 1.4, 0.35, 2.8, 0.25, 4.0};
  return f[static_cast<std::size_t>(start) % std::size(f)];
}

inline double ratio_error(double num, double den, double var_num, double var_den, double cov) {
  const double r = num / den;
  const double rel = var_num / (num * num) + var_den / (den * den) - 2.0 * cov / (num * den);
  return std::abs(r) * std::sqrt(std::max(rel, 0.0));
}

/// Count data: refit with weights 1 / model until the parameters settle. The
/// fixed point solves the Poisson likelihood equations, which removes the
/// low bias of weights taken from the observed counts.
inline CurveFit poisson_refine(PeakModel model, Samples data, CurveFit fit, const lsq::Options& opt,
                               int max_rounds = 30) {
  const auto& names = model.names();
  auto predict = [&](const Eigen::VectorXd& p) {
    const std::span<const double> pv(p.data(), static_cast<std::size_t>(p.size()));
    std::vector<double> mu(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) mu[i] = evaluate(model.kind, data[i], pv, model.irf_sigma, nullptr);
    return mu;
  };
  auto mu = predict(fit.solution.parameters);
  for (int round = 0; round < max_rounds; ++round) {
    const auto& p = fit.solution.parameters;
    for (std::size_t i = 0; i < data.size(); ++i) data[i].weight = poisson_weight(mu[i]);
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto b = model.bound(names[i]);
      model.initial_guess[names[i]] = std::clamp(p(static_cast<Eigen::Index>(i)), b.lo, b.hi);
    }
    auto next = least_squares(model, data, opt);
    lsq::require_converged(next.solution, std::string(to_string(model.kind)) + " reweighted fit");
    const auto mu_next = predict(next.solution.parameters);
    // weights depend on the model values only, so settle on those
    double change = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
      change = std::max(change, std::abs(mu_next[i] - mu[i]) / std::max(std::abs(mu[i]), 1.0));
    fit = std::move(next);
    mu = mu_next;
    if (change < 1e-8) break;
  }
  return fit;
}

inline CurveFit best_of_starts(const std::vector<PeakModel>& models, const Samples& data, const lsq::Options& opt,
                               std::size_t* which = nullptr) {
  std::optional<CurveFit> best;
  std::optional<Error> last_error;
  for (std::size_t i = 0; i < models.size(); ++i) {
    try {
      auto f = least_squares(models[i], data, opt);
      if (!f.solution.converged) continue;
      if (!best || f.solution.residual_norm < best->solution.residual_norm) {
        best = std::move(f);
        if (which) *which = i;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularJacobian) throw;
      last_error = e;
    }
  }
  if (!best) {
    if (last_error) throw *last_error;
    fail(ErrorKind::MaxIterations, "no start converged");
  }
  return std::move(*best);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Resonances

struct ResonanceFit {
  std::vector<lsq::FitReport> resonances;  // ascending center
  std::optional<double> fsr_nm;            // mean adjacent spacing
  lsq::FitReport summary;                  // deepest resonance plus FSR
};

/// Finds every dip below the baseline by at least three noise floors and fits
/// each with a Lorentzian. Seeds: argmin for the center, the half-depth
/// crossing for the width.
inline ResonanceFit fit_resonance(const Spectrum& spectrum, const FitOptions& options = {}) {
  spectrum.validate();
  const auto& x = spectrum.wavelength_nm;
  const auto& y = spectrum.values;
  const std::size_t n = y.size();
  require(n >= 8, ErrorKind::InsufficientData, "spectrum needs at least 8 samples");

  const double baseline = detail::median(y);
  const double noise = detail::noise_floor(y);
  const double ymin = *std::min_element(y.begin(), y.end());
  const double contrast = baseline - ymin;
  const double floor = std::max(3.0 * noise, 1e-9 * std::max(std::abs(baseline), 1e-300));
  if (!(contrast > floor)) fail(ErrorKind::NoResonanceFound, "no dip exceeds three noise floors below the baseline");
  const double threshold = baseline - std::max(floor, 0.2 * contrast);

  // contiguous runs below threshold, merged across short gaps
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] >= threshold) continue;
    if (!runs.empty() && i - runs.back().second <= 3) {
      runs.back().second = i;
    } else {
      runs.push_back({i, i});
    }
  }

  auto opt = options.lsq;
  opt.scale_covariance = spectrum.kind == SpectrumKind::transmission;
  const double spacing = (x.back() - x.front()) / static_cast<double>(n - 1);

  std::vector<std::size_t> minima;
  for (auto [a, b] : runs) {
    std::size_t k = a;
    for (std::size_t i = a; i <= b; ++i)
      if (y[i] < y[k]) k = i;
    minima.push_back(k);
  }

  ResonanceFit out;
  for (std::size_t r = 0; r < minima.size(); ++r) {
    const std::size_t k = minima[r];
    const double half = 0.5 * (baseline + y[k]);
    std::size_t left = k, right = k;
    while (left > 0 && y[left] < half) --left;
    while (right + 1 < n && y[right] < half) ++right;
    const double fwhm0 = std::max(x[right] - x[left], spacing);

    double lo = x[k] - 6.0 * fwhm0, hi = x[k] + 6.0 * fwhm0;
    if (r > 0) lo = std::max(lo, 0.5 * (x[minima[r - 1]] + x[k]));
    if (r + 1 < minima.size()) hi = std::min(hi, 0.5 * (x[k] + x[minima[r + 1]]));
    Samples window;
    for (const auto& s : samples_from_spectrum(spectrum))
      if (s.x >= lo && s.x <= hi) window.push_back(s);
    if (window.size() < 8) continue;

    std::vector<PeakModel> starts;
    for (int s = 0; s < std::max(1, options.starts); ++s) {
      PeakModel m{ModelKind::lorentzian_dip};
      m.initial_guess = {{"baseline", baseline}, {"depth", contrast > 0 ? baseline - y[k] : 0.0},
                         {"center", x[k]}, {"fwhm", fwhm0 * detail::start_factor(s)}};
      m.bounds = {{"depth", {0.0, std::numeric_limits<double>::infinity()}},
                  {"center", {lo, hi}},
                  {"fwhm", {spacing, hi - lo}}};  // narrower dips are unresolved
      m.initial_guess["fwhm"] = std::clamp(m.initial_guess["fwhm"], spacing, hi - lo);
      starts.push_back(std::move(m));
    }
    std::size_t best = 0;
    auto f = detail::best_of_starts(starts, window, opt, &best);
    if (spectrum.kind == SpectrumKind::counts) f = detail::poisson_refine(starts[best], window, std::move(f), opt);

    const auto& p = f.solution.parameters;
    const auto& c = f.solution.covariance;
    const double base = p(0), depth = p(1), center = p(2), fwhm = p(3);
    lsq::FitReport rep = f.report;
    rep.model_id = "resonance";
    rep.parameters = {{"baseline", base},  {"depth", depth},        {"center_nm", center},
                      {"fwhm_nm", fwhm},   {"q_factor", center / fwhm}, {"extinction", depth / base}};
    rep.standard_errors = {{"baseline", std::sqrt(c(0, 0))},
                           {"depth", std::sqrt(c(1, 1))},
                           {"center_nm", std::sqrt(c(2, 2))},
                           {"fwhm_nm", std::sqrt(c(3, 3))},
                           {"q_factor", detail::ratio_error(center, fwhm, c(2, 2), c(3, 3), c(2, 3))},
                           {"extinction", detail::ratio_error(depth, base, c(1, 1), c(0, 0), c(0, 1))}};
    out.resonances.push_back(std::move(rep));
  }
  if (out.resonances.empty()) fail(ErrorKind::NoResonanceFound, "no dip had enough samples to fit");

  if (out.resonances.size() >= 2) {
    const double first = out.resonances.front().at("center_nm");
    const double last = out.resonances.back().at("center_nm");
    out.fsr_nm = (last - first) / static_cast<double>(out.resonances.size() - 1);
  }
  const auto deepest = std::max_element(out.resonances.begin(), out.resonances.end(),
                                        [](const auto& a, const auto& b) { return a.at("depth") < b.at("depth"); });
  out.summary = *deepest;
  out.summary.parameters["resonance_count"] = static_cast<double>(out.resonances.size());
  if (out.fsr_nm) out.summary.parameters["fsr_nm"] = *out.fsr_nm;
  return out;
}

// ---------------------------------------------------------------------------
// Decays

/// IRF-deconvolved single-exponential fit (exponentially modified Gaussian
/// with the histogram's IRF width held fixed). Seeds: tail log-slope for the
/// rate, the peak bin for t0, total counts times rate for the amplitude.
inline lsq::FitReport fit_decay(const DecayHistogram& hist, const FitOptions& options = {}) {
  hist.validate();
  const auto& c = hist.counts;
  const std::size_t n = c.size();
  require(n >= 3, ErrorKind::InsufficientData, "decay histogram needs at least 3 bins");
  const auto peak_it = std::max_element(c.begin(), c.end());
  const auto kp = static_cast<std::size_t>(peak_it - c.begin());
  const double peak = *peak_it;
  const double tail_min = *std::min_element(peak_it, c.end());
  if (!(peak >= 10.0 * std::max(tail_min, 1.0)))
    fail(ErrorKind::InsufficientDynamicRange, "counts span less than one decade after the peak");

  const double sigma = hist.irf_sigma_ns;
  const double t_peak = hist.center(kp);

  // log-linear regression over the clean part of the tail
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t used = 0;
  for (std::size_t i = kp; i < n; ++i) {
    if (hist.center(i) < t_peak + 3.0 * sigma) continue;
    if (c[i] < std::max(10.0, 1e-3 * peak)) break;
    const double w = c[i], t = hist.center(i), l = std::log(c[i]);
    sw += w, sx += w * t, sy += w * l, sxx += w * t * t, sxy += w * t * l;
    ++used;
  }
  const double span = hist.bin_edges_ns.back() - hist.bin_edges_ns.front();
  double rate0 = 5.0 / span;
  if (used >= 3) {
    const double slope = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
    if (slope < 0 && std::isfinite(slope)) rate0 = -slope;
  }
  const double total = std::accumulate(c.begin(), c.end(), 0.0);
  const double t00 = sigma > 0 ? t_peak - sigma : hist.bin_edges_ns[kp];

  const auto data = samples_from_bins(hist.bin_edges_ns, c);
  auto opt = options.lsq;
  opt.scale_covariance = false;

  std::vector<PeakModel> starts;
  for (int s = 0; s < std::max(1, options.starts); ++s) {
    const double r0 = std::clamp(rate0 * detail::start_factor(s), 1e-6, 1e3);
    PeakModel m{ModelKind::exp_decay_irf};
    m.irf_sigma = sigma;
    m.initial_guess = {{"amplitude", total * r0}, {"rate", r0}, {"t0", t00}};
    m.bounds = {{"amplitude", {0.0, std::numeric_limits<double>::infinity()}},
                {"rate", {1e-6, 1e3}},
                {"t0", {hist.bin_edges_ns.front(), hist.bin_edges_ns.back()}}};
    starts.push_back(std::move(m));
  }
  std::size_t best = 0;
  auto f = detail::best_of_starts(starts, data, opt, &best);
  f = detail::poisson_refine(starts[best], data, std::move(f), opt);

  lsq::FitReport rep = f.report;
  rep.model_id = "exp_decay_irf";
  const double rate = f.solution.parameters(1);
  rep.parameters = {{"amplitude", f.solution.parameters(0)},
                    {"rate_per_ns", rate},
                    {"t0", f.solution.parameters(2)},
                    {"lifetime_ns", 1.0 / rate},
                    {"irf_sigma_ns", sigma}};
  const double se_rate = std::sqrt(f.solution.covariance(1, 1));
  rep.standard_errors = {{"amplitude", std::sqrt(f.solution.covariance(0, 0))},
                         {"rate_per_ns", se_rate},
                         {"t0", std::sqrt(f.solution.covariance(2, 2))},
                         {"lifetime_ns", se_rate / (rate * rate)}};
  return rep;
}

// ---------------------------------------------------------------------------
// Tuning slopes

/// AICc with k regression coefficients plus the noise variance.
inline double aicc(double rss, std::size_t n, std::size_t coefficients) {
  const double k = static_cast<double>(coefficients + 1);
  const double nn = static_cast<double>(n);
  if (nn - k - 1.0 <= 0) return std::numeric_limits<double>::infinity();
  return nn * std::log(rss / nn) + 2.0 * k + 2.0 * k * (k + 1.0) / (nn - k - 1.0);
}

/// Fits wavelength (nm) versus voltage (V) with both a line and a parabola and
/// reports the slope of the model preferred by AICc. The parabola must win by
/// `model_selection_margin` to be preferred.
inline lsq::FitReport fit_tuning_rate(std::span<const double> voltages, std::span<const double> wavelengths_nm,
                                      const FitOptions& options = {}) {
  require(voltages.size() == wavelengths_nm.size(), ErrorKind::DomainError, "voltage and wavelength lists differ");
  const std::size_t n = voltages.size();
  require(n >= 3, ErrorKind::InsufficientData, "tuning fit needs at least 3 points");
  const auto [vmin, vmax] = std::minmax_element(voltages.begin(), voltages.end());
  require(*vmax > *vmin, ErrorKind::DegenerateAbscissa, "all voltages are equal");

  const auto data = samples_from_points(voltages, wavelengths_nm);
  const double ymean = std::accumulate(wavelengths_nm.begin(), wavelengths_nm.end(), 0.0) / static_cast<double>(n);

  auto fit_poly = [&](ModelKind kind) {
    PeakModel m{kind};
    m.initial_guess = {{"intercept", ymean}, {"slope", 0.0}};
    if (kind == ModelKind::quadratic) m.initial_guess["curvature"] = 0.0;
    auto f = least_squares(m, data, options.lsq);
    lsq::require_converged(f.solution, std::string(to_string(kind)) + " tuning fit");
    return f;
  };
  const auto lin = fit_poly(ModelKind::linear);
  const bool quad_possible = n >= 4;
  std::optional<CurveFit> quad;
  if (quad_possible) quad = fit_poly(ModelKind::quadratic);

  double ymax = 0;
  for (double v : wavelengths_nm) ymax = std::max(ymax, std::abs(v));
  const double rss_floor = static_cast<double>(n) * std::pow(8.0 * std::numeric_limits<double>::epsilon() * ymax, 2);
  const double a_lin = aicc(std::max(lin.solution.residual_norm, rss_floor), n, 2);
  const double a_quad =
      quad ? aicc(std::max(quad->solution.residual_norm, rss_floor), n, 3) : std::numeric_limits<double>::infinity();
  const bool prefer_quadratic = quad && a_quad < a_lin - options.model_selection_margin;

  const auto& pick = prefer_quadratic ? *quad : lin;
  const double slope = pick.solution.parameters(1);
  const double se_slope = std::sqrt(pick.solution.covariance(1, 1));

  lsq::FitReport rep = pick.report;
  rep.model_id = "tuning_rate";
  rep.parameters = {{"rate_pm_per_V", std::abs(slope) * 1e3},
                    {"slope_pm_per_V", slope * 1e3},
                    {"intercept_nm", pick.solution.parameters(0)},
                    {"quadratic_term", quad ? quad->solution.parameters(2) : 0.0},
                    {"aicc_linear", a_lin},
                    {"aicc_quadratic", a_quad}};
  rep.standard_errors = {{"rate_pm_per_V", se_slope * 1e3},
                         {"slope_pm_per_V", se_slope * 1e3},
                         {"intercept_nm", std::sqrt(pick.solution.covariance(0, 0))}};
  if (quad) rep.standard_errors["quadratic_term"] = std::sqrt(quad->solution.covariance(2, 2));
  rep.labels["preferred_model"] = prefer_quadratic ? "quadratic" : "linear";
  return rep;
}

// ---------------------------------------------------------------------------
// Lifetime versus detuning

/// rate_additive: fits 1/tau with a Lorentzian peak, Gamma_off (1 + F(delta)).
/// lorentzian_lifetime: fits tau itself with a Lorentzian dip.
/// Both report center_nm, kappa_nm, purcell, tau_off_ns, tau_on_ns.
inline lsq::FitReport fit_lifetime_vs_detuning(std::span<const double> detuning_nm, std::span<const double> lifetime_ns,
                                               cqed::LifetimeConvention convention, const FitOptions& options = {}) {
  require(detuning_nm.size() == lifetime_ns.size(), ErrorKind::DomainError, "detuning and lifetime lists differ");
  require(detuning_nm.size() >= 5, ErrorKind::InsufficientData, "lifetime fit needs at least 5 points");
  for (double t : lifetime_ns) require(t > 0, ErrorKind::DomainError, "lifetimes must be > 0");
  const bool additive = convention == cqed::LifetimeConvention::rate_additive;

  std::vector<double> y(lifetime_ns.begin(), lifetime_ns.end());
  if (additive)
    for (auto& v : y) v = 1.0 / v;
  const auto data = samples_from_points(detuning_nm, y);

  const auto ext = additive ? std::max_element(y.begin(), y.end()) : std::min_element(y.begin(), y.end());
  const auto k = static_cast<std::size_t>(ext - y.begin());
  const double base = detail::median(y);
  const auto [dmin, dmax] = std::minmax_element(detuning_nm.begin(), detuning_nm.end());
  const double span = *dmax - *dmin;
  require(span > 0, ErrorKind::DegenerateAbscissa, "all detunings are equal");
  const double half = 0.5 * (base + y[k]);
  // points are not assumed sorted: widen by nearest samples past half height
  double width = span;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool beyond = additive ? y[i] < half : y[i] > half;
    if (beyond) width = std::min(width, 2.0 * std::abs(detuning_nm[i] - detuning_nm[k]));
  }

  PeakModel m{additive ? ModelKind::lorentzian_peak : ModelKind::lorentzian_dip};
  const std::string amp = additive ? "height" : "depth";
  m.initial_guess = {{"baseline", base}, {amp, std::abs(y[k] - base)}, {"center", detuning_nm[k]}, {"fwhm", width}};
  m.bounds = {{amp, {0.0, std::numeric_limits<double>::infinity()}}, {"fwhm", {1e-9 * span, 10.0 * span}}};
  auto f = least_squares(m, data, options.lsq);
  lsq::require_converged(f.solution, "lifetime fit");

  const auto& p = f.solution.parameters;
  const auto& c = f.solution.covariance;
  lsq::FitReport rep = f.report;
  rep.model_id = additive ? "lifetime_rate_additive" : "lifetime_lorentzian";
  double tau_off, tau_on, purcell, se_purcell;
  if (additive) {
    tau_off = 1.0 / p(0);
    tau_on = 1.0 / (p(0) + p(1));
    purcell = p(1) / p(0);
    se_purcell = detail::ratio_error(p(1), p(0), c(1, 1), c(0, 0), c(0, 1));
  } else {
    tau_off = p(0);
    tau_on = p(0) - p(1);
    purcell = tau_off / tau_on - 1.0;
    // d(F)/d(base) = -depth / tau_on^2, d(F)/d(depth) = base / tau_on^2
    const double g0 = -p(1) / (tau_on * tau_on), g1 = p(0) / (tau_on * tau_on);
    se_purcell = std::sqrt(std::max(g0 * g0 * c(0, 0) + g1 * g1 * c(1, 1) + 2 * g0 * g1 * c(0, 1), 0.0));
  }
  rep.parameters = {{"center_nm", p(2)}, {"kappa_nm", p(3)}, {"purcell", purcell},
                    {"tau_off_ns", tau_off}, {"tau_on_ns", tau_on}};
  rep.standard_errors = {{"center_nm", std::sqrt(c(2, 2))}, {"kappa_nm", std::sqrt(c(3, 3))}, {"purcell", se_purcell}};
  return rep;
}

// ---------------------------------------------------------------------------
// g2 purity

/// Side peaks: each is fitted with a free double Gaussian inside its
/// one-period window. Central peak: the mean side-peak shape is held fixed
/// and only its area is fitted. g2(0) = central area / mean side area, with
/// the one-sigma error propagated from both fits.
inline lsq::FitReport fit_g2_purity(const CorrelationHistogram& hist, const FitOptions& options = {}) {
  hist.validate();
  const double period = hist.repetition_period_ns;
  const double t_hi = hist.bin_edges_ns.back();
  const int k_max = static_cast<int>(std::floor((t_hi / period) - 0.5 + 1e-9));
  if (k_max < 3) fail(ErrorKind::PeakDetectionFailure, "fewer than 3 complete side peaks on each side of zero delay");

  auto window = [&](int k) {
    const double lo = (k - 0.5) * period, hi = (k + 0.5) * period;
    std::size_t a = 0;
    while (a < hist.size() && hist.center(a) < lo) ++a;
    std::size_t b = a;
    while (b < hist.size() && hist.center(b) < hi) ++b;
    return samples_from_bins(hist.bin_edges_ns, hist.counts, a, b);
  };

  auto opt = options.lsq;
  opt.scale_covariance = false;

  struct Shape {
    double center, weight, s1, s2;
  };
  std::vector<Shape> shapes;
  std::vector<int> side_index;
  for (int k = -k_max; k <= k_max; ++k) {
    if (k == 0) continue;
    const auto data = window(k);
    double total = 0, mean = 0, m2 = 0;
    for (const auto& s : data) total += s.y, mean += s.y * s.x;
    if (total < 10.0) fail(ErrorKind::PeakDetectionFailure, "side peak " + std::to_string(k) + " holds no counts");
    mean /= total;
    for (const auto& s : data) m2 += s.y * (s.x - mean) * (s.x - mean);
    const double rms = std::max(std::sqrt(m2 / total), 1e-3 * period);
    const double bin = data.front().hi - data.front().lo;

    std::vector<PeakModel> starts;
    for (int s = 0; s < std::max(1, options.starts); ++s) {
      const double f = detail::start_factor(s);
      PeakModel m{ModelKind::double_gaussian};
      m.initial_guess = {{"area", total}, {"center", mean}, {"weight", 0.5},
                         {"sigma1", std::max(0.4 * rms * f, 0.25 * bin)}, {"sigma2", std::min(1.5 * rms * f, period)}};
      m.bounds = {{"area", {0.0, std::numeric_limits<double>::infinity()}},
                  {"center", {(k - 0.5) * period, (k + 0.5) * period}},
                  {"weight", {0.0, 1.0}},
                  {"sigma1", {0.25 * bin, period}},
                  {"sigma2", {0.25 * bin, period}}};
      starts.push_back(std::move(m));
    }
    const auto fitk = detail::best_of_starts(starts, data, opt);
    const auto& p = fitk.solution.parameters;
    Shape sh{p(1) - k * period, p(2), p(3), p(4)};
    if (sh.s1 > sh.s2) std::swap(sh.s1, sh.s2), sh.weight = 1.0 - sh.weight;
    shapes.push_back(sh);
    side_index.push_back(k);
  }

  const double nside = static_cast<double>(shapes.size());
  Shape t{0, 0, 0, 0};
  for (const auto& s : shapes) {
    t.center += s.center / nside;
    t.weight += s.weight / nside;
    t.s1 += s.s1 / nside;
    t.s2 += s.s2 / nside;
  }

  // Every peak's area with the mean shape held fixed, Poisson weighted.
  int iterations = 0;
  auto template_area = [&](int k) {
    const auto data = window(k);
    double total = 0;
    for (const auto& s : data) total += s.y;
    PeakModel m{ModelKind::double_gaussian};
    const double c = k * period + t.center;
    m.initial_guess = {{"area", std::max(total, 1.0)}, {"center", c}, {"weight", t.weight}, {"sigma1", t.s1},
                       {"sigma2", t.s2}};
    m.bounds = {{"area", {0.0, std::numeric_limits<double>::infinity()}},
                {"center", {c, c}},
                {"weight", {t.weight, t.weight}},
                {"sigma1", {t.s1, t.s1}},
                {"sigma2", {t.s2, t.s2}}};
    auto f = least_squares(m, data, opt);
    lsq::require_converged(f.solution, "peak " + std::to_string(k) + " area fit");
    f = detail::poisson_refine(m, data, std::move(f), opt);
    iterations += f.solution.iterations;
    return std::pair{f.solution.parameters(0), f.solution.covariance(0, 0)};
  };

  double mean_area = 0, var_mean = 0;
  for (int k : side_index) {
    const auto [a, v] = template_area(k);
    mean_area += a / nside;
    var_mean += v / (nside * nside);
  }
  require(mean_area > 0, ErrorKind::PeakDetectionFailure, "side peaks have zero fitted area");
  const auto [area0, var0] = template_area(0);

  const double g2 = area0 / mean_area;
  const double sigma = std::sqrt(var0 / (mean_area * mean_area) + g2 * g2 * var_mean / (mean_area * mean_area));

  lsq::FitReport rep;
  rep.model_id = "g2_double_gaussian";
  rep.converged = true;
  rep.iterations = iterations;
  rep.termination = "gradient";
  rep.parameters = {{"g2_zero", g2},
                    {"g2_zero_sigma", sigma},
                    {"central_area", area0},
                    {"mean_side_area", mean_area},
                    {"side_peaks", nside},
                    {"shape_offset_ns", t.center},
                    {"shape_weight", t.weight},
                    {"shape_sigma1_ns", t.s1},
                    {"shape_sigma2_ns", t.s2}};
  rep.standard_errors = {{"g2_zero", sigma}, {"central_area", std::sqrt(var0)}, {"mean_side_area", std::sqrt(var_mean)}};
  return rep;
}

// ---------------------------------------------------------------------------
// Monte-Carlo harness

/// Runs trial(seed) for seeds base_seed .. base_seed + count - 1 across
/// `threads` workers. Results are stored by seed index, so the output does
/// not depend on scheduling.
template <class Result>
std::vector<Result> run_trials(std::size_t count, std::uint64_t base_seed,
                               const std::function<Result(std::uint64_t)>& trial, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<Result> out(count);
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < count; i += threads) out[i] = trial(base_seed + i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace ringqed::fit
