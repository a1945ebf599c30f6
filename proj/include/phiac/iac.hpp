#pragma once

// Integral-action controller for disturbed pH plants.
//
//   u     = [-J_aa + R_aa + J_c1 - R_c1 - R_c2] grad_a H
//           + [J_c1 - R_c1] K_i (x_a - x_c) + 2 R_au grad_u H
//   dx_c  = -R_c2 grad_a H + (J_au + R_au) grad_u H
//
// plus the equivalent w_c = x_a - x_c realization, the classical integrator on
// the passive output, and the damping-free simplification available when
// R_aa is constant and R_au = 0.

#include <string>
#include <utility>

#include "phiac/ph_system.hpp"

namespace phiac {

/// Controller gains. J_c1, R_c1, R_c2 may depend on the plant state; K_i is a
/// constant symmetric positive-definite matrix.
class IacGains {
 public:
  static IacGains constant(const Mat& J_c1, const Mat& R_c1, const Mat& R_c2, const Mat& K_i) {
    IacGains g(constant_field(J_c1), constant_field(R_c1), constant_field(R_c2), K_i, false);
    g.validate_at(Vec());
    return g;
  }

  static IacGains state_dependent(MatField J_c1, MatField R_c1, MatField R_c2, const Mat& K_i,
                                  const Vec& probe) {
    IacGains g(std::move(J_c1), std::move(R_c1), std::move(R_c2), K_i, true);
    g.validate_at(probe);
    return g;
  }

  /// Skips every validity predicate. Only meant for negative-control
  /// experiments that deliberately run invalid gains.
  static IacGains unchecked(const Mat& J_c1, const Mat& R_c1, const Mat& R_c2, const Mat& K_i) {
    return IacGains(constant_field(J_c1), constant_field(R_c1), constant_field(R_c2), K_i, false);
  }

  [[nodiscard]] Mat J_c1(const Vec& x) const { return J_c1_(x); }
  [[nodiscard]] Mat R_c1(const Vec& x) const { return R_c1_(x); }
  [[nodiscard]] Mat R_c2(const Vec& x) const { return R_c2_(x); }
  [[nodiscard]] const Mat& K_i() const { return K_i_; }
  [[nodiscard]] Eigen::Index m() const { return K_i_.rows(); }
  [[nodiscard]] bool is_state_dependent() const { return state_dependent_; }

  /// Throws ConfigError naming the first violated predicate at x.
  void validate_at(const Vec& x) const {
    const auto m = K_i_.rows();
    if (K_i_.cols() != m || m < 1) throw ConfigError("gains: K_i must be square");
    const Mat j = J_c1_(x), r1 = R_c1_(x), r2 = R_c2_(x);
    if (j.rows() != m || j.cols() != m || r1.rows() != m || r1.cols() != m || r2.rows() != m || r2.cols() != m)
      throw ConfigError("gains: J_c1, R_c1, R_c2 and K_i must all be m x m");
    const auto rel = [](const Mat& a) { return 1e-12 * (1.0 + a.norm()); };
    if (linalg::skew_defect(j) > rel(j)) throw ConfigError("gains: J_c1 is not skew-symmetric");
    if (linalg::symmetry_defect(r1) > rel(r1)) throw ConfigError("gains: R_c1 is not symmetric");
    if (!(linalg::min_sym_eig(r1) > rel(r1))) throw ConfigError("gains: R_c1 is not positive definite");
    if (linalg::symmetry_defect(r2) > rel(r2)) throw ConfigError("gains: R_c2 is not symmetric");
    if (!(linalg::min_sym_eig(r2) >= -1e-10)) throw ConfigError("gains: R_c2 is not positive semidefinite");
    if (linalg::symmetry_defect(K_i_) > rel(K_i_)) throw ConfigError("gains: K_i is not symmetric");
    if (!(linalg::min_sym_eig(K_i_) > rel(K_i_))) throw ConfigError("gains: K_i is not positive definite");
  }

 private:
  IacGains(MatField J_c1, MatField R_c1, MatField R_c2, Mat K_i, bool state_dependent)
      : J_c1_(std::move(J_c1)),
        R_c1_(std::move(R_c1)),
        R_c2_(std::move(R_c2)),
        K_i_(std::move(K_i)),
        state_dependent_(state_dependent) {}

  MatField J_c1_, R_c1_, R_c2_;
  Mat K_i_;
  bool state_dependent_ = false;
};

struct MatchedSplit {
  Mat J_c1;
  Mat R_c1;
};

/// J_c1 = (G_d - G_d^T)/2, R_c1 = -(G_d + G_d^T)/2 so that J_c1 - R_c1 = G_d.
/// Rejects G_d whose symmetric part is not negative definite.
inline MatchedSplit matched_gains(const Mat& G_d) {
  if (G_d.rows() != G_d.cols()) throw ContractViolation("matched_gains: G_d must be square");
  MatchedSplit out{0.5 * (G_d - G_d.transpose()), -0.5 * (G_d + G_d.transpose())};
  const double emin = linalg::min_sym_eig(out.R_c1);
  if (!(emin > 1e-12 * (1.0 + G_d.norm())))
    throw ConfigError("matched_gains: symmetric part of G_d is not negative definite (R_c1 eigenvalue " +
                      std::to_string(emin) + ")");
  return out;
}

/// Gains whose J_c1 - R_c1 equals the plant's G_d (recomputed at every state
/// when G_d is state dependent).
inline IacGains gains_from_matched(const PhSystem& plant, const Mat& R_c2, const Mat& K_i) {
  const auto& md = plant.disturbance().matched;
  if (!md) throw ConfigError(plant.name() + ": no matched disturbance to derive gains from");
  if (!md->state_dependent) {
    const auto split = matched_gains(md->G_d(plant.x_star()));
    return IacGains::constant(split.J_c1, split.R_c1, R_c2, K_i);
  }
  auto G_d = md->G_d;
  return IacGains::state_dependent([G_d](const Vec& x) { return matched_gains(G_d(x)).J_c1; },
                                   [G_d](const Vec& x) { return matched_gains(G_d(x)).R_c1; },
                                   constant_field(R_c2), K_i, plant.x_star());
}

namespace detail {
inline void check_dims(const PhSystem& plant, const IacGains& gains, const Vec& x, const Vec& xc) {
  plant.check_state(x);
  if (gains.m() != plant.partition().m) throw ContractViolation("iac: gains do not match the plant's m");
  if (xc.size() != plant.partition().m) throw ContractViolation("iac: controller state must have m entries");
}

inline Vec feedback_part(const PhSystem& plant, const IacGains& gains, const Vec& x, const Vec& grad,
                         const Vec& integral_term) {
  const auto m = plant.partition().m;
  const auto s = plant.partition().s;
  if (gains.is_state_dependent()) gains.validate_at(x);
  const Mat J = plant.J()(x);
  const Mat R = plant.R()(x);
  const Mat Jc1 = gains.J_c1(x), Rc1 = gains.R_c1(x), Rc2 = gains.R_c2(x);
  const Mat A = -J.topLeftCorner(m, m) + R.topLeftCorner(m, m) + Jc1 - Rc1 - Rc2;
  return A * grad.head(m) + (Jc1 - Rc1) * integral_term + 2.0 * R.topRightCorner(m, s) * grad.tail(s);
}
}  // namespace detail

inline Vec control_law(const PhSystem& plant, const IacGains& gains, const Vec& x, const Vec& x_c) {
  detail::check_dims(plant, gains, x, x_c);
  const Vec grad = plant.H().grad(x);
  return detail::feedback_part(plant, gains, x, grad, gains.K_i() * (plant.x_a(x) - x_c));
}

inline Vec integrator_dynamics(const PhSystem& plant, const IacGains& gains, const Vec& x, const Vec& x_c) {
  detail::check_dims(plant, gains, x, x_c);
  const auto m = plant.partition().m;
  const auto s = plant.partition().s;
  const Vec grad = plant.H().grad(x);
  const Mat J = plant.J()(x);
  const Mat R = plant.R()(x);
  return -gains.R_c2(x) * grad.head(m) + (J.topRightCorner(m, s) + R.topRightCorner(m, s)) * grad.tail(s);
}

struct ControlAndRate {
  Vec u;
  Vec rate;  ///< time derivative of the controller state
};

/// Realization with integrator state w_c = x_a - x_c. d_a is the matched
/// disturbance the w_c dynamics must absorb; zero in the unmatched-only case
/// where this realization is implementable.
inline ControlAndRate control_law_wc(const PhSystem& plant, const IacGains& gains, const Vec& x,
                                     const Vec& w_c, const Vec& d_a) {
  detail::check_dims(plant, gains, x, w_c);
  if (d_a.size() != plant.partition().m) throw ContractViolation("control_law_wc: d_a must have m entries");
  const auto m = plant.partition().m;
  const Vec grad = plant.H().grad(x);
  const Vec kw = gains.K_i() * w_c;
  ControlAndRate out;
  out.u = detail::feedback_part(plant, gains, x, grad, kw);
  out.rate = (gains.J_c1(x) - gains.R_c1(x)) * (grad.head(m) + kw) - d_a;
  return out;
}

/// Classical integral action on the passive output: dx_c = K_i y_a, u = -x_c.
inline ControlAndRate baseline_passive_iac(const PhSystem& plant, const Mat& K_i, const Vec& x, const Vec& x_c) {
  plant.check_state(x);
  if (x_c.size() != plant.partition().m || K_i.rows() != plant.partition().m)
    throw ContractViolation("baseline_passive_iac: dimension mismatch");
  if (!(linalg::min_sym_eig(K_i) > 0.0)) throw ConfigError("baseline_passive_iac: K_i must be positive definite");
  return {-x_c, K_i * eval_outputs(plant, x).y_a};
}

/// Gains J_c1 = 0, R_c1 = R_aa, K_i = kappa R_aa^{-1}. With these the law does
/// not depend on R at all; see r8_control_law.
inline IacGains damping_free_gains(const Mat& R_aa, const Mat& R_c2, double kappa) {
  if (!(kappa > 0.0)) throw ConfigError("damping_free_gains: kappa must be positive");
  const auto m = R_aa.rows();
  return IacGains::constant(Mat::Zero(m, m), R_aa, R_c2, kappa * linalg::inverse(R_aa, "R_aa"));
}

/// u = [-J_aa - R_c2] grad_a H - kappa (x_a - x_c),
/// dx_c = -R_c2 grad_a H + J_au grad_u H.
/// Uses only the interconnection blocks; valid when R_aa is constant and
/// R_au = 0, which the caller asserts by choosing this law.
inline ControlAndRate r8_control_law(const PhSystem& plant, const Mat& R_c2, double kappa, const Vec& x,
                                     const Vec& x_c) {
  plant.check_state(x);
  const auto m = plant.partition().m;
  const auto s = plant.partition().s;
  if (x_c.size() != m || R_c2.rows() != m) throw ContractViolation("r8_control_law: dimension mismatch");
  const Vec grad = plant.H().grad(x);
  const Mat J = plant.J()(x);
  ControlAndRate out;
  out.u = (-J.topLeftCorner(m, m) - R_c2) * grad.head(m) - kappa * (plant.x_a(x) - x_c);
  out.rate = -R_c2 * grad.head(m) + J.topRightCorner(m, s) * grad.tail(s);
  return out;
}

}  // namespace phiac
