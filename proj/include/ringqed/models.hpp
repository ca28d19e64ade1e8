#pragma once

// Curve models with analytic gradients, and the generic curve-fit entry point.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ringqed/cqed.hpp"
#include "ringqed/error.hpp"
#include "ringqed/lsq.hpp"
#include "ringqed/records.hpp"

namespace ringqed::fit {

enum class ModelKind { lorentzian_dip, lorentzian_peak, exp_decay_irf, double_gaussian, linear, quadratic };

inline constexpr std::array all_model_kinds{ModelKind::lorentzian_dip,  ModelKind::lorentzian_peak,
                                            ModelKind::exp_decay_irf,   ModelKind::double_gaussian,
                                            ModelKind::linear,          ModelKind::quadratic};

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::lorentzian_dip: return "lorentzian_dip";
    case ModelKind::lorentzian_peak: return "lorentzian_peak";
    case ModelKind::exp_decay_irf: return "exp_decay_irf";
    case ModelKind::double_gaussian: return "double_gaussian";
    case ModelKind::linear: return "linear";
    case ModelKind::quadratic: return "quadratic";
  }
  return "?";
}

inline const std::vector<std::string>& parameter_names(ModelKind k) {
  static const std::vector<std::string> dip{"baseline", "depth", "center", "fwhm"};
  static const std::vector<std::string> peak{"baseline", "height", "center", "fwhm"};
  static const std::vector<std::string> decay{"amplitude", "rate", "t0"};
  static const std::vector<std::string> dgauss{"area", "center", "weight", "sigma1", "sigma2"};
  static const std::vector<std::string> lin{"intercept", "slope"};
  static const std::vector<std::string> quad{"intercept", "slope", "curvature"};
  switch (k) {
    case ModelKind::lorentzian_dip: return dip;
    case ModelKind::lorentzian_peak: return peak;
    case ModelKind::exp_decay_irf: return decay;
    case ModelKind::double_gaussian: return dgauss;
    case ModelKind::linear: return lin;
    case ModelKind::quadratic: return quad;
  }
  return lin;
}

/// One observation. Binned models integrate over [lo, hi]; point models use x.
struct Sample {
  double x = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double y = 0.0;
  double weight = 1.0;  // inverse variance
};

using Samples = std::vector<Sample>;

enum class Weighting { uniform, poisson };

inline double poisson_weight(double counts) { return 1.0 / std::max(counts, 1.0); }

inline Samples samples_from_points(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::DomainError, "x and y differ in length");
  Samples s(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) s[i] = {x[i], x[i], x[i], y[i], 1.0};
  return s;
}

inline Samples samples_from_spectrum(const Spectrum& spec) {
  auto s = samples_from_points(spec.wavelength_nm, spec.values);
  if (spec.kind == SpectrumKind::counts)
    for (auto& p : s) p.weight = poisson_weight(p.y);
  return s;
}

/// Poisson-weighted bins; `first`/`last` select a sub-range [first, last).
inline Samples samples_from_bins(std::span<const double> edges, std::span<const double> counts, std::size_t first = 0,
                                 std::size_t last = static_cast<std::size_t>(-1)) {
  last = std::min(last, counts.size());
  Samples s;
  for (std::size_t i = first; i < last; ++i)
    s.push_back({0.5 * (edges[i] + edges[i + 1]), edges[i], edges[i + 1], counts[i], poisson_weight(counts[i])});
  return s;
}

/// Value of model `kind` on sample `s`; fills `grad` (size = parameter count) when non-null.
inline double evaluate(ModelKind kind, const Sample& s, std::span<const double> p, double irf_sigma,
                       double* grad) {
  switch (kind) {
    case ModelKind::lorentzian_dip:
    case ModelKind::lorentzian_peak: {
      const double sign = kind == ModelKind::lorentzian_dip ? -1.0 : 1.0;
      const double b = p[0], amp = p[1], c = p[2], w = p[3];
      const double u = 2.0 * (s.x - c) / w;
      const double l = 1.0 / (1.0 + u * u);
      if (grad) {
        grad[0] = 1.0;
        grad[1] = sign * l;
        grad[2] = sign * amp * 4.0 * u * l * l / w;
        grad[3] = sign * amp * 2.0 * u * u * l * l / w;
      }
      return b + sign * amp * l;
    }
    case ModelKind::exp_decay_irf: {
      const double a = p[0], rate = p[1], t0 = p[2];
      const auto m = cqed::emg::bin_mass(s.lo - t0, s.hi - t0, rate, irf_sigma);
      if (grad) {
        grad[0] = m.mass;
        grad[1] = a * m.d_rate;
        grad[2] = -a * (m.d_lo + m.d_hi);
      }
      return a * m.mass;
    }
    case ModelKind::double_gaussian: {
      const double area = p[0], mu = p[1], w = p[2];
      double mass[2], d_mu[2], d_sigma[2];
      for (int j = 0; j < 2; ++j) {
        const double sg = p[3 + j];
        const double zl = (s.lo - mu) / sg, zh = (s.hi - mu) / sg;
        mass[j] = cqed::emg::cdf_diff(zl, zh);
        const double pl = cqed::emg::phi(zl), ph = cqed::emg::phi(zh);
        d_mu[j] = -(ph - pl) / sg;
        d_sigma[j] = -(zh * ph - zl * pl) / sg;
      }
      if (grad) {
        grad[0] = w * mass[0] + (1.0 - w) * mass[1];
        grad[1] = area * (w * d_mu[0] + (1.0 - w) * d_mu[1]);
        grad[2] = area * (mass[0] - mass[1]);
        grad[3] = area * w * d_sigma[0];
        grad[4] = area * (1.0 - w) * d_sigma[1];
      }
      return area * (w * mass[0] + (1.0 - w) * mass[1]);
    }
    case ModelKind::linear:
      if (grad) {
        grad[0] = 1.0;
        grad[1] = s.x;
      }
      return p[0] + p[1] * s.x;
    case ModelKind::quadratic:
      if (grad) {
        grad[0] = 1.0;
        grad[1] = s.x;
        grad[2] = s.x * s.x;
      }
      return p[0] + p[1] * s.x + p[2] * s.x * s.x;
  }
  return 0.0;
}

/// Model kind with starting values and box bounds. Parameters missing from
/// `bounds` are unbounded; equal bounds hold a parameter fixed.
struct PeakModel {
  ModelKind kind = ModelKind::linear;
  std::map<std::string, double> initial_guess;
  std::map<std::string, lsq::Bounds> bounds;
  double irf_sigma = 0.0;  // exp_decay_irf only

  PeakModel() = default;
  explicit PeakModel(ModelKind k) : kind(k) {}

  const std::vector<std::string>& names() const { return parameter_names(kind); }

  void validate() const {
    for (const auto& [key, _] : initial_guess) {
      const auto& n = names();
      require(std::find(n.begin(), n.end(), key) != n.end(), ErrorKind::DomainError,
              std::string(to_string(kind)) + " has no parameter '" + key + "'");
    }
    for (const auto& name : names()) {
      const auto it = initial_guess.find(name);
      require(it != initial_guess.end(), ErrorKind::DomainError, "initial guess is missing '" + name + "'");
      const auto b = bound(name);
      require(it->second >= b.lo && it->second <= b.hi, ErrorKind::DomainError,
              "initial guess for '" + name + "' lies outside its bounds");
    }
    require(irf_sigma >= 0, ErrorKind::DomainError, "irf sigma must be >= 0");
  }

  lsq::Bounds bound(const std::string& name) const {
    const auto it = bounds.find(name);
    return it == bounds.end() ? lsq::Bounds{} : it->second;
  }

  Eigen::VectorXd guess_vector() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(names().size()));
    for (std::size_t i = 0; i < names().size(); ++i) v(static_cast<Eigen::Index>(i)) = initial_guess.at(names()[i]);
    return v;
  }

  std::vector<lsq::Bounds> bounds_vector() const {
    std::vector<lsq::Bounds> out;
    for (const auto& n : names()) out.push_back(bound(n));
    return out;
  }
};

/// Weighted residuals sqrt(w) (y - f) for a curve model.
class CurveProblem {
 public:
  CurveProblem(ModelKind kind, const Samples& data, double irf_sigma) : kind_(kind), data_(data), irf_sigma_(irf_sigma) {}

  std::size_t residual_count() const { return data_.size(); }

  void evaluate(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
    const auto np = static_cast<std::size_t>(p.size());
    std::vector<double> grad(np);
    const std::span<const double> pv(p.data(), np);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      const auto& s = data_[i];
      const double sw = std::sqrt(s.weight);
      const double f = fit::evaluate(kind_, s, pv, irf_sigma_, jac ? grad.data() : nullptr);
      r(static_cast<Eigen::Index>(i)) = sw * (s.y - f);
      if (jac)
        for (std::size_t j = 0; j < np; ++j)
          (*jac)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = -sw * grad[j];
    }
  }

 private:
  ModelKind kind_;
  const Samples& data_;
  double irf_sigma_;
};

struct CurveFit {
  lsq::Solution solution;
  lsq::FitReport report;
};

inline lsq::FitReport make_report(const PeakModel& model, const lsq::Solution& sol) {
  lsq::FitReport rep;
  rep.model_id = std::string(to_string(model.kind));
  rep.residual_norm = sol.residual_norm;
  rep.iterations = sol.iterations;
  rep.converged = sol.converged;
  rep.termination = lsq::to_string(sol.termination);
  for (std::size_t i = 0; i < model.names().size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    rep.parameters[model.names()[i]] = sol.parameters(k);
    if (sol.converged) rep.standard_errors[model.names()[i]] = std::sqrt(std::max(sol.covariance(k, k), 0.0));
  }
  return rep;
}

/// Damped least-squares fit of `model` to `data`.
inline CurveFit least_squares(const PeakModel& model, const Samples& data, const lsq::Options& options = {}) {
  model.validate();
  for (const auto& s : data)
    require(std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.weight) && s.weight > 0,
            ErrorKind::DomainError, "fit data must be finite with positive weights");
  require(data.size() >= model.names().size(), ErrorKind::InsufficientData,
          std::to_string(data.size()) + " points for " + std::to_string(model.names().size()) + " parameters");
  CurveProblem problem(model.kind, data, model.irf_sigma);
  CurveFit out;
  out.solution = lsq::solve(problem, model.guess_vector(), model.bounds_vector(), options);
  out.report = make_report(model, out.solution);
  return out;
}

}  // namespace ringqed::fit
