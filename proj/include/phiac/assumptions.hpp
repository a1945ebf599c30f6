#pragma once

// Executable versions of the structural requirements on a disturbed pH plant:
// skew J / symmetric PSD R, matched disturbances with sign-definite G_d,
// unmatched disturbances in the range of (J_au + R_au)^T, and an isolated
// minimum of the shifted energy H(x) + x_a^T dbar_u.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phiac/ph_system.hpp"

namespace phiac {

namespace tol {
inline constexpr double kStructureRel = 1e-12;  ///< ||A +- A^T|| <= tol (1 + ||A||)
inline constexpr double kPsdFloor = -1e-10;     ///< min eigenvalue threshold for R >= 0
inline constexpr double kUnmatchedResidual = 1e-8;
inline constexpr double kStationary = 1e-9;
}  // namespace tol

struct Violation {
  std::string property;
  std::size_t sample = 0;
  double value = 0.0;
  std::string detail;
};

struct StructureReport {
  bool passed = true;
  double worst_skew_defect = 0.0;      ///< max ||J + J^T|| / (1 + ||J||)
  double worst_symmetry_defect = 0.0;  ///< max ||R - R^T|| / (1 + ||R||)
  double min_R_eig = std::numeric_limits<double>::infinity();
  double min_R_uu_eig = std::numeric_limits<double>::infinity();  ///< informational
  std::vector<Violation> violations;  ///< first violation per property
};

namespace detail {
inline void record_first(std::vector<Violation>& out, Violation v) {
  for (const auto& existing : out)
    if (existing.property == v.property) return;
  out.push_back(std::move(v));
}
}  // namespace detail

/// Audit the pH structure at every sample. Never throws on a violated
/// property; scans all samples and lists the first violation of each.
inline StructureReport check_structure(const PhSystem& sys, std::span<const Vec> samples) {
  if (samples.empty()) throw ContractViolation("check_structure: no samples");
  StructureReport rep;
  const auto s = sys.partition().s;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Vec& x = samples[k];
    sys.check_state(x);
    const Mat J = sys.J()(x);
    const Mat R = sys.R()(x);
    const double skew = linalg::skew_defect(J) / (1.0 + J.norm());
    const double symd = linalg::symmetry_defect(R) / (1.0 + R.norm());
    const double emin = linalg::min_sym_eig(R);
    rep.worst_skew_defect = std::max(rep.worst_skew_defect, skew);
    rep.worst_symmetry_defect = std::max(rep.worst_symmetry_defect, symd);
    rep.min_R_eig = std::min(rep.min_R_eig, emin);
    if (s > 0) rep.min_R_uu_eig = std::min(rep.min_R_uu_eig, linalg::min_sym_eig(R.bottomRightCorner(s, s)));
    if (!(skew <= tol::kStructureRel))
      detail::record_first(rep.violations, {"J skew-symmetric", k, skew, "||J + J^T|| too large"});
    if (!(symd <= tol::kStructureRel))
      detail::record_first(rep.violations, {"R symmetric", k, symd, "||R - R^T|| too large"});
    if (!(emin >= tol::kPsdFloor))
      detail::record_first(rep.violations,
                           {"R positive semidefinite", k, emin, "negative eigenvalue " + std::to_string(emin)});
  }
  rep.passed = rep.violations.empty();
  return rep;
}

struct MatchedAssumptionReport {
  bool passed = true;
  /// min over samples of -lambda_max(sym G_d): positive iff G_d < 0 everywhere.
  double worst_margin = std::numeric_limits<double>::infinity();
  double max_condition = 1.0;
  bool state_dependent = false;
  std::optional<Violation> violation;
};

/// Assumption 1: G_d(x) invertible with negative-definite symmetric part.
/// A positive-definite G_d is rejected, never auto-negated.
inline MatchedAssumptionReport check_assumption_matched(const PhSystem& sys,
                                                        std::span<const Vec> samples) {
  const auto& md = sys.disturbance().matched;
  if (!md) throw ConfigError(sys.name() + ": no matched disturbance model");
  if (samples.empty()) throw ContractViolation("check_assumption_matched: no samples");
  MatchedAssumptionReport rep;
  rep.state_dependent = md->state_dependent;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Mat g = md->G_d(samples[k]);
    const double margin = -linalg::max_sym_eig(g);
    const double cond = linalg::condition_number(g);
    rep.worst_margin = std::min(rep.worst_margin, margin);
    rep.max_condition = std::max(rep.max_condition, cond);
    if (!rep.violation) {
      if (!std::isfinite(cond) || cond > 1e12)
        rep.violation = Violation{"G_d invertible", k, cond, "G_d is singular"};
      else if (!(margin > 1e-12 * (1.0 + g.norm())))
        rep.violation = Violation{"G_d negative definite", k, margin,
                                  "symmetric part of G_d is not negative definite"};
    }
  }
  rep.passed = !rep.violation.has_value();
  return rep;
}

struct UnmatchedAssumptionReport {
  bool passed = false;
  Vec d_bar;               ///< recovered constant, valid when passed
  double max_residual = 0.0;
  std::optional<Violation> violation;
};

/// Assumption 2: find one constant dbar_u with (J_au + R_au)^T(x) dbar_u equal
/// to the raw unmatched field at every sample (least squares over the stacked
/// samples, then per-sample residual check).
inline UnmatchedAssumptionReport check_assumption_unmatched(const PhSystem& sys,
                                                            const VecField& d_u_raw,
                                                            std::span<const Vec> samples) {
  if (samples.empty()) throw ContractViolation("check_assumption_unmatched: no samples");
  const auto m = sys.partition().m;
  const auto s = sys.partition().s;
  UnmatchedAssumptionReport rep;
  if (s == 0) {
    rep.passed = true;
    rep.d_bar = Vec::Zero(m);
    return rep;
  }
  const auto rows = static_cast<Eigen::Index>(samples.size()) * s;
  Mat A(rows, m);
  Vec b(rows);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto r0 = static_cast<Eigen::Index>(k) * s;
    A.middleRows(r0, s) = sys.unmatched_direction(samples[k]);
    const Vec raw = d_u_raw(samples[k]);
    if (raw.size() != s) throw ContractViolation("check_assumption_unmatched: raw field must have s entries");
    b.segment(r0, s) = raw;
  }
  rep.d_bar = A.completeOrthogonalDecomposition().solve(b);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto r0 = static_cast<Eigen::Index>(k) * s;
    const Vec rk = A.middleRows(r0, s) * rep.d_bar - b.segment(r0, s);
    const double res = rk.norm() / (1.0 + b.segment(r0, s).norm());
    rep.max_residual = std::max(rep.max_residual, res);
    if (!(res < tol::kUnmatchedResidual) && !rep.violation)
      rep.violation = Violation{"constant dbar_u", k, res,
                                "no constant dbar_u reproduces the disturbance at sample " + std::to_string(k)};
  }
  rep.passed = !rep.violation.has_value();
  return rep;
}

/// Central-difference gradient with per-coordinate step h (1 + |x_i|).
inline Vec finite_diff_gradient(const ScalarField& f, const Vec& x, double h = 1e-6) {
  if (!(h > 0.0)) throw ContractViolation("finite_diff_gradient: step must be positive");
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double hi = h * (1.0 + std::abs(x(i)));
    xp(i) = x(i) + hi;
    const double fp = f(xp);
    xp(i) = x(i) - hi;
    const double fm = f(xp);
    xp(i) = x(i);
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_diff_gradient: non-finite energy along coordinate " + std::to_string(i));
    g(i) = (fp - fm) / (2.0 * hi);
  }
  return g;
}

inline Vec finite_diff_gradient(const HamiltonianModel& H, const Vec& x, double h = 1e-6) {
  return finite_diff_gradient(H.value, x, h);
}

/// Central-difference Jacobian of a vector field, column j = d f / d x_j.
inline Mat finite_diff_jacobian(const VecField& f, const Vec& x, double h = 1e-6) {
  const Vec f0 = f(x);
  Mat jac(f0.size(), x.size());
  Vec xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double hj = h * (1.0 + std::abs(x(j)));
    xp(j) = x(j) + hj;
    const Vec fp = f(xp);
    xp(j) = x(j) - hj;
    const Vec fm = f(xp);
    xp(j) = x(j);
    if (!fp.allFinite() || !fm.allFinite())
      throw NumericError("finite_diff_jacobian: non-finite value along coordinate " + std::to_string(j));
    jac.col(j) = (fp - fm) / (2.0 * hj);
  }
  return jac;
}

struct GradientAuditReport {
  bool passed = true;
  double worst_rel_error = 0.0;
  std::optional<Violation> violation;
};

/// Relative error ||g - g_fd||_inf / (1 + ||g||_inf) at every sample.
inline GradientAuditReport audit_gradient(const ScalarField& value, const VecField& grad,
                                          std::span<const Vec> samples, double rel_tol = 1e-6) {
  GradientAuditReport rep;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Vec ga = grad(samples[k]);
    const Vec gf = finite_diff_gradient(value, samples[k]);
    const double err = (ga - gf).lpNorm<Eigen::Infinity>() / (1.0 + ga.lpNorm<Eigen::Infinity>());
    rep.worst_rel_error = std::max(rep.worst_rel_error, err);
    if (!(err <= rel_tol) && !rep.violation)
      rep.violation = Violation{"gradient matches finite differences", k, err, linalg::format(samples[k])};
  }
  rep.passed = !rep.violation.has_value();
  return rep;
}

inline GradientAuditReport audit_gradient(const HamiltonianModel& H, std::span<const Vec> samples,
                                          double rel_tol = 1e-6) {
  return audit_gradient(H.value, H.grad, samples, rel_tol);
}

struct MinimumReport {
  bool passed = false;
  Vec x_bar;             ///< last iterate (the minimizer when passed)
  double grad_norm = 0.0;
  double min_hessian_eig = 0.0;
  int iterations = 0;
  std::string message;
};

struct MinimumOptions {
  int max_iterations = 200;
  double grad_tol = tol::kStationary;
};

/// Assumption 3: locate a stationary point of H(x) + x_a^T dbar_u by damped
/// Newton seeded at x_star, then require a positive-definite Hessian there.
inline MinimumReport check_assumption_min(const PhSystem& sys, const Vec& d_bar_u,
                                          MinimumOptions opts = {}) {
  const auto m = sys.partition().m;
  const auto n = sys.partition().n();
  if (d_bar_u.size() != m) throw ContractViolation("check_assumption_min: dbar_u must have m entries");
  const auto& H = sys.H();
  Vec shift = Vec::Zero(n);
  shift.head(m) = d_bar_u;
  const auto value = [&](const Vec& x) { return H.value(x) + x.head(m).dot(d_bar_u); };
  const auto grad = [&](const Vec& x) -> Vec { return H.grad(x) + shift; };
  const auto hess = [&](const Vec& x) -> Mat {
    if (H.has_hessian()) return H.hess(x);
    return linalg::sym(finite_diff_jacobian(H.grad, x, 1e-5));
  };

  MinimumReport rep;
  Vec x = sys.x_star();
  Vec g = grad(x);
  for (rep.iterations = 0; rep.iterations < opts.max_iterations && g.norm() >= opts.grad_tol; ++rep.iterations) {
    Mat Hx = hess(x);
    const double emin = linalg::min_sym_eig(Hx);
    if (emin <= 1e-8) Hx += (1e-8 - emin + 1e-3 * (1.0 + std::abs(emin))) * Mat::Identity(n, n);
    const Vec step = -Hx.ldlt().solve(g);
    const double f0 = value(x);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
      const Vec xt = x + alpha * step;
      const Vec gt = grad(xt);
      if (!gt.allFinite()) continue;
      if (value(xt) <= f0 + 1e-4 * alpha * g.dot(step) || gt.norm() < g.norm()) {
        x = xt;
        g = gt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  rep.x_bar = x;
  rep.grad_norm = g.norm();
  if (!(rep.grad_norm < opts.grad_tol)) {
    rep.message = "no stationary point found within " + std::to_string(opts.max_iterations) +
                  " iterations; last iterate " + linalg::format(x);
    return rep;
  }
  rep.min_hessian_eig = linalg::min_sym_eig(hess(x));
  if (!(rep.min_hessian_eig > 1e-10)) {
    rep.message = "not a minimum: Hessian eigenvalue " + std::to_string(rep.min_hessian_eig);
    return rep;
  }
  rep.passed = true;
  return rep;
}

}  // namespace phiac
