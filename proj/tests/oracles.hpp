#pragma once

// Reference computations for the tests. Each one takes a different route
// from the library code it checks: plain loops instead of Eigen expressions,
// full tensors instead of Voigt matrices, brute force instead of closed forms.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "ringqed/models.hpp"
#include "ringqed/planner.hpp"

namespace oracle {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec6 = std::array<double, 6>;

inline constexpr int voigt_of[3][3] = {{0, 5, 4}, {5, 1, 3}, {4, 3, 2}};

inline Mat3 mat3(const Eigen::Matrix3d& m) {
  Mat3 a{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a[i][j] = m(i, j);
  return a;
}

/// Voigt(A sigma A^T) for a Voigt stress vector, via the full 3x3 tensor.
inline Vec6 rotate_stress(const Mat3& a, const Vec6& v) {
  double s[3][3], r[3][3] = {};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s[i][j] = v[voigt_of[i][j]];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) r[i][j] += a[i][k] * a[j][l] * s[k][l];
  return {r[0][0], r[1][1], r[2][2], r[1][2], r[0][2], r[0][1]};
}

/// e'_ijk = A_il A_jm A_kn e_lmn on the stress-charge piezo tensor (no shear
/// factors in the Voigt contraction).
inline std::array<std::array<double, 6>, 3> rotate_rank3(const Mat3& a, const std::array<std::array<double, 6>, 3>& e) {
  double full[3][3][3], out[3][3][3] = {};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) full[i][j][k] = e[i][voigt_of[j][k]];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          for (int m = 0; m < 3; ++m)
            for (int n = 0; n < 3; ++n) out[i][j][k] += a[i][l] * a[j][m] * a[k][n] * full[l][m][n];
  std::array<std::array<double, 6>, 3> v{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = j; k < 3; ++k) v[i][voigt_of[j][k]] = out[i][j][k];
  return v;
}

/// -clamp * eta * S (e^T F) with explicit loops.
inline Vec6 strain_chain(const Eigen::Matrix<double, 6, 6>& s, const Eigen::Matrix<double, 3, 6>& e,
                         const std::array<double, 3>& f, double clamp, double eta) {
  double stress[6] = {};
  for (int j = 0; j < 6; ++j)
    for (int i = 0; i < 3; ++i) stress[j] += e(i, j) * f[static_cast<std::size_t>(i)];
  Vec6 out{};
  for (int i = 0; i < 6; ++i) {
    double acc = 0.0;
    for (int j = 0; j < 6; ++j) acc += s(i, j) * stress[j];
    out[static_cast<std::size_t>(i)] = -clamp * eta * acc;
  }
  return out;
}

/// Length over which each parameter of `kind` changes the model appreciably.
inline std::vector<double> natural_scales(ringqed::fit::ModelKind kind, const ringqed::fit::Sample& s,
                                          const std::vector<double>& p, double irf_sigma) {
  using ringqed::fit::ModelKind;
  auto mag = [](double v) { return std::max(std::abs(v), 1.0); };
  switch (kind) {
    case ModelKind::lorentzian_dip:
    case ModelKind::lorentzian_peak:
      return {mag(p[0]), mag(p[1]), p[3], p[3]};
    case ModelKind::exp_decay_irf: {
      double t = std::min(s.hi - s.lo, 1.0 / p[1]);
      if (irf_sigma > 0) t = std::min(t, irf_sigma);
      return {mag(p[0]), p[1], t};
    }
    case ModelKind::double_gaussian: {
      const double w = std::min(p[3], p[4]);
      return {mag(p[0]), w, 1.0, w, w};
    }
    case ModelKind::linear:
      return {1.0, 1.0};
    case ModelKind::quadratic:
      return {1.0, 1.0, 1e-3};
  }
  return {};
}

/// Five-point central-difference gradient of a curve model at one sample,
/// step 1e-3 of each parameter's natural scale.
inline std::vector<double> fd_gradient(ringqed::fit::ModelKind kind, const ringqed::fit::Sample& s,
                                       std::vector<double> p, double irf_sigma) {
  const auto scale = natural_scales(kind, s, p, irf_sigma);
  std::vector<double> g(p.size());
  auto f = [&](std::size_t j, double v) {
    const double keep = p[j];
    p[j] = v;
    const double y = ringqed::fit::evaluate(kind, s, p, irf_sigma, nullptr);
    p[j] = keep;
    return y;
  };
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double h = 1e-3 * scale[j], x = p[j];
    g[j] = (8.0 * (f(j, x + h) - f(j, x - h)) - (f(j, x + 2 * h) - f(j, x - 2 * h))) / (12.0 * h);
  }
  return g;
}

struct RandomPoint {
  std::vector<double> p;
  ringqed::fit::Sample s;
  double irf = 0.0;
};

/// Random parameters and a random sample inside each model's working range.
inline RandomPoint random_point(ringqed::fit::ModelKind kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  RandomPoint r;
  switch (kind) {
    case ringqed::fit::ModelKind::lorentzian_dip:
    case ringqed::fit::ModelKind::lorentzian_peak: {
      const double c = in(905, 915), w = in(0.01, 0.2);
      r.p = {in(0.5, 1.5), in(0.1, 1.0), c, w};
      r.s.x = c + in(-3, 3) * w;
      break;
    }
    case ringqed::fit::ModelKind::exp_decay_irf: {
      r.p = {in(1e3, 1e6), in(0.3, 3.0), in(0.5, 1.5)};
      r.irf = in(0.0, 1.0) < 0.2 ? 0.0 : in(0.01, 0.1);
      r.s.lo = r.p[2] + in(-5.0 * r.irf, 4.0);  // bins deep in the IRF tail hold ~1e-40 of the peak
      r.s.hi = r.s.lo + in(0.01, 0.1);
      if (r.irf == 0.0 && r.s.lo < r.p[2] + 0.05) r.s.lo = r.p[2] + 0.05, r.s.hi = r.s.lo + 0.02;  // kink at t0
      break;
    }
    case ringqed::fit::ModelKind::double_gaussian: {
      r.p = {in(1e3, 1e5), in(-0.2, 0.2), in(0.2, 0.8), in(0.1, 0.4), in(0.5, 1.2)};
      r.s.lo = r.p[1] + in(-2.5, 2.5);
      r.s.hi = r.s.lo + in(0.02, 0.1);
      break;
    }
    case ringqed::fit::ModelKind::linear:
      r.p = {in(-5, 5), in(-2, 2)};
      r.s.x = in(-800, 800);
      break;
    case ringqed::fit::ModelKind::quadratic:
      r.p = {in(-5, 5), in(-2, 2), in(-1e-3, 1e-3)};
      r.s.x = in(-800, 800);
      break;
  }
  return r;
}

inline double worst_jacobian_error(ringqed::fit::ModelKind kind, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto r = random_point(kind, rng);
    std::vector<double> g(r.p.size());
    ringqed::fit::evaluate(kind, r.s, r.p, r.irf, g.data());
    const auto fd = fd_gradient(kind, r.s, r.p, r.irf);
    double scale = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) scale = std::max(scale, std::abs(fd[j]));
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double denom = std::max(std::abs(fd[j]), 1e-4 * scale);
      if (denom > 0) worst = std::max(worst, std::abs(g[j] - fd[j]) / denom);
    }
  }
  return worst;
}

/// Through-port field of an all-pass ring summed over `trips` round trips.
inline double ring_transmission_sum(double a, double t, double phase, int trips) {
  const std::complex<double> loop = a * std::polar(1.0, phase);
  std::complex<double> sum = 0.0, term = 1.0;
  for (int n = 0; n < trips; ++n) {
    sum += term;
    term *= t * loop;
  }
  const std::complex<double> out = t - (1.0 - t * t) * loop * sum;
  return std::norm(out);
}

/// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Bin mass of exp(-rate t) step(t) convolved with a unit Gaussian of width
/// sigma, by direct double quadrature.
inline double convolved_bin_mass(double lo, double hi, double rate, double sigma) {
  auto h = [&](double t) {
    // h(t) = int_0^inf exp(-rate u) g(t - u) du
    const double upper = std::max(0.0, t + 12.0 * sigma);
    if (upper <= 0.0) return 0.0;
    const double lower = std::max(0.0, t - 12.0 * sigma);
    auto integrand = [&](double u) {
      const double z = (t - u) / sigma;
      return std::exp(-rate * u) * std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
    };
    return simpson(integrand, lower, upper, 400);
  };
  return simpson(h, lo, hi, 200);
}

/// Ordinary least squares line in long double.
inline std::pair<double, double> normal_equations_line(const std::vector<double>& x, const std::vector<double>& y) {
  long double n = static_cast<long double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i], sy += y[i], sxx += static_cast<long double>(x[i]) * x[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  const long double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {static_cast<double>((sy - slope * sx) / n), static_cast<double>(slope)};
}

struct GridPlan {
  bool feasible = false;
  double target_nm = 0.0;
  double objective = std::numeric_limits<double>::infinity();
};

/// Brute-force minimax plan: scan target wavelengths on a `step_nm` grid,
/// round each voltage to `volt_step`, keep the smallest max |V|.
inline GridPlan grid_plan(const std::vector<ringqed::plan::DeviceTuningSpec>& devices, double step_nm = 1e-4,
                          double volt_step = 0.1) {
  using ringqed::plan::Axis;
  double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
  for (const auto& d : devices)
    for (Axis ax : {Axis::strain, Axis::electro_optic}) {
      const double a = d.base(ax) + d.rate(ax) * d.limits(ax).lo, b = d.base(ax) + d.rate(ax) * d.limits(ax).hi;
      lo = std::max(lo, std::min(a, b));
      hi = std::min(hi, std::max(a, b));
    }
  GridPlan best;
  if (!(lo <= hi)) return best;
  best.feasible = true;
  std::vector<double> xs{lo, hi};
  for (double x = std::ceil(lo / step_nm) * step_nm; x <= hi; x += step_nm) xs.push_back(x);
  for (double x : xs) {
    double worst = 0.0;
    for (const auto& d : devices)
      for (Axis ax : {Axis::strain, Axis::electro_optic}) {
        const double v = (x - d.base(ax)) / d.rate(ax);
        worst = std::max(worst, std::round(std::abs(v) / volt_step) * volt_step);
      }
    if (worst < best.objective) best.objective = worst, best.target_nm = x;
  }
  return best;
}

}  // namespace oracle
