#pragma once

// Voltage planning for fleets of QD/cavity pairs. Each device has two linear
// tuning axes: strain moves the emitter, lambda_qd = lambda_qd0 + gamma_s V_s,
// and the electro-optic electrode moves the cavity,
// lambda_c = lambda_c0 + gamma_eo V_eo. A plan picks one common target
// wavelength and solves both axes of every device for it. The axes are
// treated as independent.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ringqed/cqed.hpp"
#include "ringqed/error.hpp"

namespace ringqed::plan {

struct Interval {
  double lo = 0.0;
  double hi = -1.0;

  bool empty() const { return !(lo <= hi); }
  double width() const { return empty() ? 0.0 : hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }

  Interval intersect(const Interval& o) const { return {std::max(lo, o.lo), std::min(hi, o.hi)}; }
};

struct VoltageLimits {
  double lo = -200.0;
  double hi = 200.0;
};

enum class Axis { strain, electro_optic };

inline const char* to_string(Axis a) { return a == Axis::strain ? "V_S" : "V_EO"; }

struct DeviceTuningSpec {
  std::string name = "device";
  double qd_wavelength0_nm = 910.0;
  double cavity_wavelength0_nm = 910.0;
  double gamma_s_pm_per_V = 0.57;
  double gamma_eo_pm_per_V = 1.89;
  VoltageLimits vs_limits;
  VoltageLimits veo_limits;
  /// Allowed |lambda_qd - lambda_c| at the plan; only used for an axis with a
  /// zero rate. Default is a tenth of the 0.0479 nm cavity linewidth.
  double resonance_tolerance_nm = 0.00479;

  void validate() const {
    require(std::isfinite(qd_wavelength0_nm) && std::isfinite(cavity_wavelength0_nm), ErrorKind::DomainError,
            name + ": wavelengths must be finite");
    require(vs_limits.lo <= vs_limits.hi && veo_limits.lo <= veo_limits.hi, ErrorKind::DomainError,
            name + ": voltage limits out of order");
    require(std::isfinite(gamma_s_pm_per_V) && std::isfinite(gamma_eo_pm_per_V), ErrorKind::DomainError,
            name + ": tuning rates must be finite");
    require(resonance_tolerance_nm >= 0, ErrorKind::DomainError, name + ": tolerance must be >= 0");
  }

  double base(Axis a) const { return a == Axis::strain ? qd_wavelength0_nm : cavity_wavelength0_nm; }
  /// nm per volt
  double rate(Axis a) const { return 1e-3 * (a == Axis::strain ? gamma_s_pm_per_V : gamma_eo_pm_per_V); }
  const VoltageLimits& limits(Axis a) const { return a == Axis::strain ? vs_limits : veo_limits; }

  /// Voltage that puts this axis at `target_nm` (0 for an untunable axis).
  double voltage_for(Axis a, double target_nm) const {
    return rate(a) == 0.0 ? 0.0 : (target_nm - base(a)) / rate(a);
  }
  double wavelength_at(Axis a, double volts) const { return base(a) + rate(a) * volts; }
};

/// Which limit fixes one end of an axis interval.
struct Binding {
  Axis axis = Axis::strain;
  bool upper_voltage = false;  // true: the V max limit; false: the V min limit
  bool fixed_axis = false;     // zero-rate axis, bound set by the tolerance

  std::string describe() const {
    if (fixed_axis) return std::string(to_string(axis)) + " untunable (tolerance)";
    return std::string(to_string(axis)) + (upper_voltage ? " max" : " min");
  }
};

inline Interval axis_reach(const DeviceTuningSpec& d, Axis a, Binding* lower = nullptr, Binding* upper = nullptr) {
  const double g = d.rate(a);
  const auto& lim = d.limits(a);
  if (g == 0.0) {
    if (lower) *lower = {a, false, true};
    if (upper) *upper = {a, true, true};
    if (lim.lo > 0 || lim.hi < 0) return {};  // V = 0 not allowed
    return {d.base(a) - d.resonance_tolerance_nm, d.base(a) + d.resonance_tolerance_nm};
  }
  const double w_lo = d.wavelength_at(a, lim.lo), w_hi = d.wavelength_at(a, lim.hi);
  if (lower) *lower = {a, g < 0, false};
  if (upper) *upper = {a, g > 0, false};
  return {std::min(w_lo, w_hi), std::max(w_lo, w_hi)};
}

/// Target wavelengths reachable by both axes of one device.
inline Interval device_reach(const DeviceTuningSpec& d) {
  d.validate();
  return axis_reach(d, Axis::strain).intersect(axis_reach(d, Axis::electro_optic));
}

struct Assignment {
  std::string name;
  double vs = 0.0;
  double veo = 0.0;
};

struct DeviceDiagnosis {
  std::string name;
  Interval reach;
  Binding lower;  // constraint that sets reach.lo
  Binding upper;  // constraint that sets reach.hi
  bool sets_fleet_lower = false;
  bool sets_fleet_upper = false;
};

enum class Objective { minimize_max_abs_voltage, maximize_margin };

inline const char* to_string(Objective o) {
  return o == Objective::minimize_max_abs_voltage ? "minimize_max_abs_voltage" : "maximize_margin";
}

struct AlignmentPlan {
  Objective objective_kind = Objective::minimize_max_abs_voltage;
  bool feasible = false;
  double target_wavelength_nm = std::numeric_limits<double>::quiet_NaN();
  Interval feasible_interval;
  std::vector<DeviceTuningSpec> devices;
  std::vector<Assignment> assignments;  // empty when infeasible
  double objective = std::numeric_limits<double>::quiet_NaN();  // max |V| over all assignments
  double min_margin_V = std::numeric_limits<double>::quiet_NaN();
  std::vector<DeviceDiagnosis> diagnosis;
};

namespace detail {

// f(lambda) = slope * lambda + offset
struct Affine {
  double slope = 0.0;
  double offset = 0.0;
  double operator()(double x) const { return slope * x + offset; }
};

/// Affine pieces whose maximum is the objective to minimize.
inline std::vector<Affine> objective_pieces(const std::vector<DeviceTuningSpec>& devices, Objective obj) {
  std::vector<Affine> out;
  for (const auto& d : devices)
    for (Axis a : {Axis::strain, Axis::electro_optic}) {
      const double g = d.rate(a);
      if (g == 0.0) continue;
      const Affine v{1.0 / g, -d.base(a) / g};  // voltage as a function of lambda
      if (obj == Objective::minimize_max_abs_voltage) {
        out.push_back(v);
        out.push_back({-v.slope, -v.offset});
      } else {
        const auto& lim = d.limits(a);
        out.push_back({-v.slope, lim.lo - v.offset});  // -(V - lo)
        out.push_back({v.slope, v.offset - lim.hi});   // -(hi - V)
      }
    }
  return out;
}

inline double max_of(const std::vector<Affine>& f, double x) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& a : f) m = std::max(m, a(x));
  return f.empty() ? 0.0 : m;
}

/// Exact minimiser of a max of affine functions over [lo, hi]: the optimum is
/// an endpoint or a pairwise crossing. Ties resolve to the smallest x.
inline double minimize_max_affine(const std::vector<Affine>& f, double lo, double hi) {
  std::vector<double> cand{lo, hi};
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t j = i + 1; j < f.size(); ++j) {
      const double ds = f[i].slope - f[j].slope;
      if (ds == 0.0) continue;
      const double x = (f[j].offset - f[i].offset) / ds;
      if (x > lo && x < hi) cand.push_back(x);
    }
  std::sort(cand.begin(), cand.end());
  double best_x = cand.front();
  double best = max_of(f, best_x);
  for (double x : cand) {
    const double v = max_of(f, x);
    const double tie = 1e-12 * std::max(1.0, std::abs(best));
    if (v < best - tie) best = v, best_x = x;
  }
  return best_x;
}

}  // namespace detail

/// Assignments and summary metrics at a fixed target wavelength. The plan is
/// feasible iff the target lies inside every device reach.
inline AlignmentPlan plan_at(const std::vector<DeviceTuningSpec>& devices, double target_nm,
                             Objective objective = Objective::minimize_max_abs_voltage) {
  require(!devices.empty(), ErrorKind::DomainError, "plan needs at least one device");
  AlignmentPlan p;
  p.objective_kind = objective;
  p.devices = devices;
  p.feasible_interval = {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (const auto& d : devices) {
    DeviceDiagnosis dg;
    dg.name = d.name;
    const auto rs = axis_reach(d, Axis::strain, &dg.lower, &dg.upper);
    Binding lo_eo, hi_eo;
    const auto re = axis_reach(d, Axis::electro_optic, &lo_eo, &hi_eo);
    d.validate();
    dg.reach = rs.intersect(re);
    if (re.lo > rs.lo) dg.lower = lo_eo;
    if (re.hi < rs.hi) dg.upper = hi_eo;
    p.feasible_interval = p.feasible_interval.intersect(dg.reach);
    p.diagnosis.push_back(dg);
  }
  for (auto& dg : p.diagnosis) {
    dg.sets_fleet_lower = dg.reach.lo == p.feasible_interval.lo;
    dg.sets_fleet_upper = dg.reach.hi == p.feasible_interval.hi;
  }
  p.feasible = !p.feasible_interval.empty() && p.feasible_interval.contains(target_nm);
  if (!p.feasible) return p;

  p.target_wavelength_nm = target_nm;
  double max_abs = 0.0, margin = std::numeric_limits<double>::infinity();
  for (const auto& d : devices) {
    Assignment a{d.name, d.voltage_for(Axis::strain, target_nm), d.voltage_for(Axis::electro_optic, target_nm)};
    for (auto [v, ax] : {std::pair{a.vs, Axis::strain}, std::pair{a.veo, Axis::electro_optic}}) {
      max_abs = std::max(max_abs, std::abs(v));
      margin = std::min({margin, v - d.limits(ax).lo, d.limits(ax).hi - v});
    }
    p.assignments.push_back(a);
  }
  p.objective = max_abs;
  p.min_margin_V = margin;
  return p;
}

/// Common target wavelength and per-device voltages. Feasible iff the device
/// reaches intersect; the target is then the exact optimum of the objective on
/// that intersection. Infeasible plans carry the diagnosis only.
inline AlignmentPlan plan_alignment(const std::vector<DeviceTuningSpec>& devices,
                                    Objective objective = Objective::minimize_max_abs_voltage) {
  auto probe = plan_at(devices, std::numeric_limits<double>::quiet_NaN(), objective);
  const auto& iv = probe.feasible_interval;
  if (iv.empty()) return probe;
  const auto pieces = detail::objective_pieces(devices, objective);
  return plan_at(devices, detail::minimize_max_affine(pieces, iv.lo, iv.hi), objective);
}

/// Human-readable reason an infeasible plan fails.
inline std::string explain(const AlignmentPlan& p) {
  if (p.feasible) return "feasible";
  std::string lo, hi;
  for (const auto& d : p.diagnosis) {
    if (d.reach.empty()) return d.name + ": axes do not overlap (" + d.lower.describe() + " vs " + d.upper.describe() + ")";
    if (d.sets_fleet_lower) lo = d.name + " " + d.lower.describe();
    if (d.sets_fleet_upper) hi = d.name + " " + d.upper.describe();
  }
  return "reaches are disjoint: lower end fixed by " + lo + ", upper end fixed by " + hi;
}

struct PurcellReport {
  std::vector<double> purcell;
  std::vector<double> residual_detuning_nm;
  double minimum = 0.0;
};

/// Purcell factor of every device at its planned voltages, from the residual
/// detuning between the tuned emitter and the tuned cavity.
inline PurcellReport purcell_over_plan(const AlignmentPlan& plan, const std::vector<cqed::EmitterCavityState>& states) {
  if (!plan.feasible) fail(ErrorKind::InfeasiblePlan, "plan is infeasible: " + explain(plan));
  require(states.size() == plan.devices.size(), ErrorKind::DomainError, "one emitter state per planned device");
  PurcellReport r;
  r.minimum = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& d = plan.devices[i];
    const auto& a = plan.assignments[i];
    const double delta = d.wavelength_at(Axis::strain, a.vs) - d.wavelength_at(Axis::electro_optic, a.veo);
    const double f = cqed::purcell_at_detuning(states[i], delta);
    r.purcell.push_back(f);
    r.residual_detuning_nm.push_back(delta);
    r.minimum = std::min(r.minimum, f);
  }
  return r;
}

}  // namespace ringqed::plan
