#pragma once

// Damped VTOL aircraft under IDA-PBC, q = (x, y, theta), pb = dq/dt (M = I):
//
//   Md(q) = [k1 eps c^2 + k3, k1 eps c s, k1 c; k1 eps c s, -k1 eps c^2 + k3, k1 s; k1 c, k1 s, k2]
//   Vd(q) = g (1 - cos theta)/(k1 - k2 eps) + 1/2 e^T P e,   e = z(q) - z(q*)
//   J2 = [0, pt.a1, pt.a2; -pt.a1, 0, pt.a3; -pt.a2, -pt.a3, 0],   pt = Md^{-1} pb
//   Rd = G K_v G^T + R0 Md
//   G = [1 0; 0 1; c/eps s/eps]
//
// T(q) uses the annihilator (cos theta, sin theta, -eps).

#include <array>

#include "phiac/mech.hpp"

namespace phiac::systems {

struct VtolParams {
  double eps = 1.0;
  double g = 9.81;
  double k1 = 2.0;
  double k2 = 1.1;
  double k3 = 30.0;
  Mat K_v = (Mat(2, 2) << 10.0, 5.0, 5.0, 10.0).finished();
  Mat P = (Mat(2, 2) << 0.03, 0.0, 0.0, 0.02).finished();
  Vec R0 = Vec::Ones(3);  ///< diagonal of R0
  Vec q_star = Vec::Map(std::array{5.0, 0.0, 0.0}.data(), 3);
  Vec d_m = Vec::Map(std::array{5.0, -5.0}.data(), 2);
  double t_on = 30.0;

  [[nodiscard]] double gamma() const { return k1 - k2 * eps; }

  void validate() const {
    if (!(eps > 0.0)) throw ConfigError("vtol: eps must be positive");
    if (std::abs(gamma()) < 1e-12) throw ConfigError("vtol: k1 - eps k2 must be nonzero");
    if (K_v.rows() != 2 || K_v.cols() != 2 || P.rows() != 2 || P.cols() != 2)
      throw ConfigError("vtol: K_v and P must be 2 x 2");
    if (R0.size() != 3 || !(R0.minCoeff() > 0.0)) throw ConfigError("vtol: R0 needs 3 positive entries");
    if (q_star.size() != 3 || d_m.size() != 2) throw ConfigError("vtol: q_star needs 3 and d_m 2 entries");
    if (q_star(2) != 0.0) throw ConfigError("vtol: the shaped potential assumes theta* = 0");
    if (t_on < 0.0) throw ConfigError("vtol: t_on must be non-negative");
    for (int k = 0; k <= 64; ++k) {
      const double th = -M_PI + 2.0 * M_PI * k / 64.0;
      if (!(linalg::min_sym_eig(Md(th)) > 0.0))
        throw ConfigError("vtol: Md(theta) is not positive definite at theta = " + std::to_string(th));
    }
  }

  [[nodiscard]] Mat Md(double th) const {
    const double c = std::cos(th), s = std::sin(th);
    Mat out(3, 3);
    out << k1 * eps * c * c + k3, k1 * eps * c * s, k1 * c,  //
        k1 * eps * c * s, -k1 * eps * c * c + k3, k1 * s,    //
        k1 * c, k1 * s, k2;
    return out;
  }

  [[nodiscard]] Mat dMd(double th) const {
    const double c = std::cos(th), s = std::sin(th), c2 = c * c - s * s;
    Mat out(3, 3);
    out << -2.0 * k1 * eps * c * s, k1 * eps * c2, -k1 * s,  //
        k1 * eps * c2, 2.0 * k1 * eps * c * s, k1 * c,       //
        -k1 * s, k1 * c, 0.0;
    return out;
  }

  [[nodiscard]] Mat G(double th) const {
    Mat out(3, 2);
    out << 1.0, 0.0, 0.0, 1.0, std::cos(th) / eps, std::sin(th) / eps;
    return out;
  }

  /// Shaped coordinates z(q).
  [[nodiscard]] Eigen::Vector2d z(const Vec& q) const {
    const double a = k3 / gamma(), b = (k3 - k1 * eps) / gamma();
    return {q(0) - a * std::sin(q(2)), q(1) - b * (std::cos(q(2)) - 1.0)};
  }

  /// Closed form of T(q).
  [[nodiscard]] Mat T(double th) const {
    const double c = std::cos(th), s = std::sin(th), E = eps * eps + 1.0;
    Mat out(3, 3);
    out << (eps * eps + s * s) / E, -std::sin(2.0 * th) / (2.0 * E), eps * c / E,  //
        -std::sin(2.0 * th) / (2.0 * E), (eps * eps - s * s + 1.0) / E, eps * s / E,  //
        c, s, -eps;
    return out;
  }

  [[nodiscard]] Mat dT(double th) const {
    const double c = std::cos(th), s = std::sin(th), E = eps * eps + 1.0, c2 = c * c - s * s;
    Mat out(3, 3);
    out << 2.0 * s * c / E, -c2 / E, -eps * s / E,  //
        -c2 / E, -2.0 * s * c / E, eps * c / E,    //
        -s, c, 0.0;
    return out;
  }
};

inline MechanicalSystem build_vtol(const VtolParams& P) {
  P.validate();
  MechanicalSystem s;
  s.name = "vtol";
  s.l = 3;
  s.m = 2;
  s.M = constant_field(Mat::Identity(3, 3));
  s.Md = [P](const Vec& q) { return P.Md(q(2)); };
  s.dMd = [P](const Vec& q) { return std::vector<Mat>{Mat::Zero(3, 3), Mat::Zero(3, 3), P.dMd(q(2))}; };
  const Eigen::Vector2d z_star = P.z(P.q_star);
  const Mat Pm = P.P;
  s.Vd = [P, z_star, Pm](const Vec& q) {
    const Eigen::Vector2d e = P.z(q) - z_star;
    return P.g * (1.0 - std::cos(q(2))) / P.gamma() + 0.5 * e.dot(Pm * e);
  };
  s.grad_Vd = [P, z_star, Pm](const Vec& q) {
    const double a = P.k3 / P.gamma(), b = (P.k3 - P.k1 * P.eps) / P.gamma();
    const Eigen::Vector2d e = P.z(q) - z_star;
    const Eigen::Vector2d pe = Pm * e;
    Vec out(3);
    out << pe(0), pe(1), P.g * std::sin(q(2)) / P.gamma() - pe(0) * a * std::cos(q(2)) + pe(1) * b * std::sin(q(2));
    return out;
  };
  // Skew part of R0 Md (zero when R0 is a multiple of I) joins the
  // interconnection so that Rd stays symmetric.
  s.J2 = [P](const Vec& q, const Vec& pb) {
    const double c = std::cos(q(2)), sn = std::sin(q(2));
    const Mat Md = P.Md(q(2));
    const Vec pt = Md.ldlt().solve(pb);
    const double f = -0.5 * P.k1 * P.gamma();
    Eigen::Vector3d a1(2.0 * P.eps * c, 2.0 * P.eps * sn, 1.0), a2(0.0, 1.0, 0.0), a3(-1.0, 0.0, 0.0);
    const double j01 = f * pt.dot(a1), j02 = f * pt.dot(a2), j12 = f * pt.dot(a3);
    Mat out(3, 3);
    out << 0.0, j01, j02,  //
        -j01, 0.0, j12,    //
        -j02, -j12, 0.0;
    return Mat(out - linalg::skew(P.R0.asDiagonal() * Md));
  };
  s.Rd = [P](const Vec& q) {
    const Mat G = P.G(q(2));
    return Mat(G * P.K_v * G.transpose() + linalg::sym(P.R0.asDiagonal() * P.Md(q(2))));
  };
  s.G = [P](const Vec& q) { return P.G(q(2)); };
  s.G_perp = [P](const Vec& q) {
    Mat out(1, 3);
    out << std::cos(q(2)), std::sin(q(2)), -P.eps;
    return out;
  };
  s.jac_Tp = [P](const Vec& q, const Vec& pb) {
    Mat out = Mat::Zero(3, 3);
    out.col(2) = P.dT(q(2)) * pb;
    return out;
  };
  s.q_star = P.q_star;
  s.d_m = P.d_m;
  s.d_m_on = P.t_on;
  return s;
}

inline IacGains vtol_reference_gains() {
  Mat Rc1(2, 2);
  Rc1 << 10.0, 5.0, 5.0, 10.0;
  return IacGains::constant(Mat::Zero(2, 2), Rc1, 10.0 * Mat::Identity(2, 2), Mat::Identity(2, 2));
}

}  // namespace phiac::systems
