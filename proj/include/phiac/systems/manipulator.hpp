#pragma once

// Fully actuated 2-DOF planar manipulator with unknown viscous damping R_d,
// q = (theta_a, theta_u):
//
//   M(q) = [a_a + a_u + 2 b cos(theta_u), a_u + b cos(theta_u); a_u + b cos(theta_u), a_u]
//   H = 1/2 p^T M^{-1} p + 1/2 (q - q*)^T K_p (q - q*)
//
// As a mechanical system G = I, so T = I and Md = M.

#include <array>

#include "phiac/mech.hpp"

namespace phiac::systems {

struct ManipulatorParams {
  double a_a = 2.0;
  double a_u = 1.0;
  double b = 0.5;
  Mat K_p = 10.0 * Mat::Identity(2, 2);
  Mat R_d = Mat::Identity(2, 2);
  Vec q_star = Vec::Map(std::array{0.5, -0.3}.data(), 2);
  Vec d_a = Vec::Map(std::array{1.0, -0.5}.data(), 2);
  double t_on = 0.0;

  void validate() const {
    if (!(a_a > 0.0 && a_u > 0.0)) throw ConfigError("manipulator: a_a, a_u must be positive");
    if (!(a_a * a_u > b * b)) throw ConfigError("manipulator: M(q) > 0 needs a_a a_u > b^2");
    if (K_p.rows() != 2 || K_p.cols() != 2 || R_d.rows() != 2 || R_d.cols() != 2)
      throw ConfigError("manipulator: K_p and R_d must be 2 x 2");
    if (linalg::symmetry_defect(K_p) > 1e-12 || !(linalg::min_sym_eig(K_p) > 0.0))
      throw ConfigError("manipulator: K_p must be symmetric positive definite");
    if (linalg::symmetry_defect(R_d) > 1e-12 || !(linalg::min_sym_eig(R_d) > 0.0))
      throw ConfigError("manipulator: R_d must be symmetric positive definite");
    if (q_star.size() != 2 || d_a.size() != 2) throw ConfigError("manipulator: q_star and d_a need 2 entries");
    if (t_on < 0.0) throw ConfigError("manipulator: t_on must be non-negative");
  }

  [[nodiscard]] Mat M(double theta_u) const {
    const double c = std::cos(theta_u);
    Mat out(2, 2);
    out << a_a + a_u + 2.0 * b * c, a_u + b * c,  //
        a_u + b * c, a_u;
    return out;
  }
};

inline MechanicalSystem build_manipulator(const ManipulatorParams& P) {
  P.validate();
  MechanicalSystem s;
  s.name = "manipulator";
  s.l = 2;
  s.m = 2;
  s.M = [P](const Vec& q) { return P.M(q(1)); };
  s.Md = s.M;
  s.dMd = [P](const Vec& q) {
    const double sn = std::sin(q(1));
    Mat d1(2, 2);
    d1 << -2.0 * P.b * sn, -P.b * sn,  //
        -P.b * sn, 0.0;
    return std::vector<Mat>{Mat::Zero(2, 2), d1};
  };
  s.Vd = [P](const Vec& q) { return 0.5 * linalg::weighted_sq(q - P.q_star, P.K_p); };
  s.grad_Vd = [P](const Vec& q) { return Vec(P.K_p * (q - P.q_star)); };
  s.J2 = [](const Vec&, const Vec&) { return Mat(Mat::Zero(2, 2)); };
  s.Rd = constant_field(P.R_d);
  s.G = constant_field(Mat::Identity(2, 2));
  s.jac_Tp = [](const Vec&, const Vec&) { return Mat(Mat::Zero(2, 2)); };
  s.q_star = P.q_star;
  s.d_m = P.d_a;
  s.d_m_on = P.t_on;
  return s;
}

}  // namespace phiac::systems
