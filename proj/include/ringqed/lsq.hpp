#pragma once

// Bounded damped least squares (Levenberg-Marquardt with a gain-ratio trust
// region and Marquardt diagonal scaling).
//
// A problem supplies weighted residuals r(p) and their Jacobian:
//
//   struct Problem {
//     std::size_t residual_count() const;
//     void evaluate(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const;
//   };
//
// Parameters with equal lower and upper bounds are held fixed.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ringqed/error.hpp"

namespace ringqed::lsq {

struct Options {
  int max_iterations = 200;
  double gtol = 1e-10;  // scaled gradient (cosine between residual and Jacobian columns)
  double xtol = 1e-12;  // relative step
  double ftol = 1e-15;  // relative cost reduction
  double initial_damping = 1e-3;
  /// Multiply the covariance by the reduced chi-square. Use for data whose
  /// weights are relative (transmission); leave off for Poisson-weighted counts.
  bool scale_covariance = true;
};

struct Bounds {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

enum class Termination { gradient, step, cost, max_iterations };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::gradient: return "gradient";
    case Termination::step: return "step";
    case Termination::cost: return "cost";
    case Termination::max_iterations: return "max_iterations";
  }
  return "?";
}

struct Solution {
  Eigen::VectorXd parameters;
  Eigen::MatrixXd covariance;      // full size; zero rows/cols for fixed parameters
  std::vector<bool> free;
  double residual_norm = 0.0;      // sum of squared weighted residuals
  double gradient_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::size_t residual_count = 0;
  bool converged = false;
  Termination termination = Termination::max_iterations;
};

namespace detail {

/// MINPACK-style scaled gradient: max over free parameters of the cosine
/// between the residual vector and the Jacobian column, with components that
/// would push an active bound outward dropped.
inline double scaled_gradient(const Eigen::VectorXd& g, const Eigen::MatrixXd& jac, double rnorm,
                              const Eigen::VectorXd& x, const std::vector<Bounds>& b, const std::vector<int>& free_idx) {
  if (rnorm == 0.0) return 0.0;
  double m = 0.0;
  for (std::size_t k = 0; k < free_idx.size(); ++k) {
    const int i = free_idx[k];
    const auto kk = static_cast<Eigen::Index>(k);
    double gi = g(kk);
    if (x(i) <= b[static_cast<std::size_t>(i)].lo && gi > 0) gi = 0;
    if (x(i) >= b[static_cast<std::size_t>(i)].hi && gi < 0) gi = 0;
    const double cn = jac.col(kk).norm();
    if (cn > 0) m = std::max(m, std::abs(gi) / (cn * rnorm));
  }
  return m;
}

}  // namespace detail

template <class Problem>
Solution solve(const Problem& problem, Eigen::VectorXd x, const std::vector<Bounds>& bounds,
               const Options& opt = {}) {
  const auto n = x.size();
  require(static_cast<std::size_t>(n) == bounds.size(), ErrorKind::DomainError, "one bound pair per parameter");
  std::vector<int> free_idx;
  Solution sol;
  sol.free.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& b = bounds[static_cast<std::size_t>(i)];
    require(b.lo <= b.hi, ErrorKind::DomainError, "bounds out of order for parameter " + std::to_string(i));
    require(x(i) >= b.lo && x(i) <= b.hi, ErrorKind::DomainError,
            "initial guess outside bounds for parameter " + std::to_string(i));
    if (b.lo < b.hi) {
      free_idx.push_back(static_cast<int>(i));
      sol.free[static_cast<std::size_t>(i)] = true;
    }
  }
  const auto m = problem.residual_count();
  const auto nf = static_cast<Eigen::Index>(free_idx.size());
  require(m >= free_idx.size() && m > 0, ErrorKind::InsufficientData,
          std::to_string(m) + " residuals for " + std::to_string(free_idx.size()) + " free parameters");

  auto at = [&](Eigen::Index k) { return free_idx[static_cast<std::size_t>(k)]; };
  auto reduce = [&](const Eigen::MatrixXd& full) {
    Eigen::MatrixXd j(full.rows(), nf);
    for (Eigen::Index k = 0; k < nf; ++k) j.col(k) = full.col(at(k));
    return j;
  };

  Eigen::VectorXd r(static_cast<Eigen::Index>(m)), r_new(static_cast<Eigen::Index>(m));
  Eigen::MatrixXd jac_full(static_cast<Eigen::Index>(m), n);
  problem.evaluate(x, r, &jac_full);
  ++sol.evaluations;
  require(r.allFinite() && jac_full.allFinite(), ErrorKind::DomainError, "model is not finite at the initial guess");
  Eigen::MatrixXd jac = reduce(jac_full);
  for (Eigen::Index k = 0; k < nf; ++k)
    require(jac.col(k).squaredNorm() > 0, ErrorKind::SingularJacobian,
            "parameter " + std::to_string(at(k)) + " has no influence on the residuals");

  double cost = 0.5 * r.squaredNorm();
  Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::VectorXd g = jac.transpose() * r;
  double damping = opt.initial_damping;
  double nu = 2.0;
  auto gradient = [&] { return detail::scaled_gradient(g, jac, std::sqrt(2.0 * cost), x, bounds, free_idx); };

  bool done = false;
  while (!done) {
    sol.gradient_norm = gradient();
    if (nf == 0 || sol.gradient_norm <= opt.gtol) {
      sol.converged = true;
      sol.termination = Termination::gradient;
      break;
    }
    if (sol.iterations >= opt.max_iterations) {
      sol.termination = Termination::max_iterations;
      break;
    }
    ++sol.iterations;

    for (;;) {
      // Parameters pinned at a bound with the descent direction pointing
      // outward are held fixed for this step; the rest solve the damped system.
      std::vector<Eigen::Index> move;
      for (Eigen::Index k = 0; k < nf; ++k) {
        const auto& b = bounds[static_cast<std::size_t>(at(k))];
        const double xk = x(at(k));
        if (!((xk <= b.lo && g(k) > 0) || (xk >= b.hi && g(k) < 0))) move.push_back(k);
      }
      const auto nm = static_cast<Eigen::Index>(move.size());
      Eigen::MatrixXd a(nm, nm);
      Eigen::VectorXd rhs(nm);
      for (Eigen::Index i = 0; i < nm; ++i) {
        rhs(i) = -g(move[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < nm; ++j) a(i, j) = jtj(move[static_cast<std::size_t>(i)], move[static_cast<std::size_t>(j)]);
        a(i, i) += damping * std::max(a(i, i), 1e-300);
      }
      const Eigen::VectorXd sub = a.ldlt().solve(rhs);
      Eigen::VectorXd delta = Eigen::VectorXd::Zero(nf);
      for (Eigen::Index i = 0; i < nm; ++i) delta(move[static_cast<std::size_t>(i)]) = sub(i);
      Eigen::VectorXd x_new = x;
      for (Eigen::Index k = 0; k < nf; ++k) {
        const auto& b = bounds[static_cast<std::size_t>(at(k))];
        x_new(at(k)) = std::clamp(x(at(k)) + delta(k), b.lo, b.hi);
      }
      // Per-component relative step, so a large parameter cannot mask a small one still moving.
      Eigen::VectorXd step(nf);
      bool tiny = true;
      for (Eigen::Index k = 0; k < nf; ++k) {
        step(k) = x_new(at(k)) - x(at(k));
        tiny = tiny && std::abs(step(k)) <= opt.xtol * (std::abs(x(at(k))) + opt.xtol);
      }
      if (!delta.allFinite() || tiny) {
        sol.converged = delta.allFinite();
        sol.termination = Termination::step;
        done = true;
        break;
      }

      problem.evaluate(x_new, r_new, nullptr);
      ++sol.evaluations;
      const double cost_new =
          r_new.allFinite() ? 0.5 * r_new.squaredNorm() : std::numeric_limits<double>::infinity();
      const double predicted = -(g.dot(step) + 0.5 * step.dot(jtj * step));
      const double rho = predicted > 0 ? (cost - cost_new) / predicted : -1.0;

      if (rho > 0 && cost_new < cost) {
        const double reduction = cost - cost_new;
        x = x_new;
        cost = cost_new;
        problem.evaluate(x, r, &jac_full);
        ++sol.evaluations;
        jac = reduce(jac_full);
        jtj = jac.transpose() * jac;
        g = jac.transpose() * r;
        damping *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        nu = 2.0;
        if (reduction <= opt.ftol * cost) {
          sol.converged = true;
          sol.termination = Termination::cost;
          done = true;
        }
        break;
      }
      damping *= nu;
      nu *= 2.0;
      if (damping > 1e200) {
        // No decrease is representable any more: we sit on the minimum to
        // machine precision.
        sol.converged = true;
        sol.termination = Termination::step;
        done = true;
        break;
      }
    }
  }

  sol.parameters = x;
  sol.residual_norm = 2.0 * cost;
  sol.residual_count = m;
  sol.gradient_norm = gradient();
  sol.covariance = Eigen::MatrixXd::Zero(n, n);
  if (sol.converged && nf > 0) {
    // Scale columns before inverting so the rank test is unit-free.
    const Eigen::VectorXd d = jtj.diagonal().cwiseSqrt().cwiseMax(1e-300);
    const Eigen::MatrixXd scaled = d.cwiseInverse().asDiagonal() * jtj * d.cwiseInverse().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
    const double top = eig.eigenvalues().maxCoeff();
    const double bottom = eig.eigenvalues().minCoeff();
    require(top > 0 && bottom > 1e-12 * top, ErrorKind::SingularJacobian,
            "Jacobian is rank deficient at the solution");
    Eigen::MatrixXd cov = d.cwiseInverse().asDiagonal() *
                          (eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                           eig.eigenvectors().transpose()) *
                          d.cwiseInverse().asDiagonal();
    if (opt.scale_covariance) {
      const double dof = static_cast<double>(m) - static_cast<double>(nf);
      cov *= dof > 0 ? sol.residual_norm / dof : 0.0;
    }
    for (Eigen::Index a = 0; a < nf; ++a)
      for (Eigen::Index b = 0; b < nf; ++b) sol.covariance(at(a), at(b)) = cov(a, b);
  }
  return sol;
}

/// Named-parameter summary of a fit. Standard errors are present iff converged.
struct FitReport {
  std::string model_id;
  std::map<std::string, double> parameters;
  std::map<std::string, double> standard_errors;
  std::map<std::string, std::string> labels;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string termination;

  double at(const std::string& key) const {
    const auto it = parameters.find(key);
    require(it != parameters.end(), ErrorKind::DomainError, "fit report has no parameter '" + key + "'");
    return it->second;
  }

  double error(const std::string& key) const {
    const auto it = standard_errors.find(key);
    require(it != standard_errors.end(), ErrorKind::DomainError, "fit report has no standard error for '" + key + "'");
    return it->second;
  }

  bool operator==(const FitReport&) const = default;
};

inline void require_converged(const Solution& s, const std::string& what) {
  if (!s.converged)
    fail(ErrorKind::MaxIterations, what + " did not converge after " + std::to_string(s.iterations) + " iterations");
}

}  // namespace ringqed::lsq
