#pragma once

// Permanent-magnet synchronous motor after energy shaping, x = (i_q, i_d, w):
//
//   H = 1/2 g1 i_d^2 - (n_p Phi)/(2 J C23) i_q^2 + 1/2 g2 (w - w*)^2
//   J = [0 -C12 C23; C12 0 C13; -C23 -C13 0],   C13 = -(n_p/(J g1)) (L_d - L_q) i_q
//   R = diag(r2, r1, R_m/(J g2))
//
// The load torque and friction at the target speed enter the speed equation as
// the unmatched disturbance (0, (tau_L + R_m w*)/J). It lies in the range of
// (J_au + R_au)^T only when C12 = 0, which the main builder fixes.

#include <array>

#include "phiac/closed_loop.hpp"

namespace phiac::systems {

struct PmsmParams {
  double L_d = 4e-3;
  double L_q = 5e-3;
  double R_s = 0.5;
  double Phi = 0.1;
  double J = 0.01;
  double n_p = 4.0;
  double R_m = 0.01;
  double tau_L = 0.5;
  double omega_star = 100.0;
  double r1 = 10.0;
  double r2 = 1.0;
  double gamma1 = 1.0;
  double gamma2 = 5.0;
  double C23 = -2.0;
  double t_on = 0.0;     ///< activation of the load disturbance
  double d_a = 0.0;      ///< optional matched term through G_d = -r2
  double d_a_t_on = 0.0;

  void validate() const {
    const auto pos = [](double v, const char* what) {
      if (!(v > 0.0)) throw ConfigError(std::string("pmsm: ") + what + " must be positive");
    };
    pos(L_d, "L_d");
    pos(L_q, "L_q");
    pos(R_s, "R_s");
    pos(Phi, "Phi");
    pos(J, "J");
    pos(n_p, "n_p");
    pos(r1, "r1");
    pos(r2, "r2");
    pos(gamma1, "gamma1");
    pos(gamma2, "gamma2");
    if (!(R_m >= 0.0)) throw ConfigError("pmsm: R_m must be non-negative");
    if (!(C23 < 0.0)) throw ConfigError("pmsm: C23 must be negative");
    if (!std::isfinite(tau_L) || !std::isfinite(omega_star) || !std::isfinite(d_a))
      throw ConfigError("pmsm: non-finite parameter");
    if (t_on < 0.0 || d_a_t_on < 0.0) throw ConfigError("pmsm: activation times must be non-negative");
  }

  /// (tau_L + R_m w*) / J, the raw speed-equation disturbance.
  [[nodiscard]] double load() const { return (tau_L + R_m * omega_star) / J; }
  /// Closed-form dbar_u = (tau_L + R_m w*) / (J C23).
  [[nodiscard]] double d_bar_u() const { return load() / C23; }
  /// Equilibrium current (tau_L + R_m w*) / (n_p Phi).
  [[nodiscard]] double i_q_bar() const { return (tau_L + R_m * omega_star) / (n_p * Phi); }
  [[nodiscard]] Vec x_bar() const { return Vec::Map(std::array{i_q_bar(), 0.0, omega_star}.data(), 3); }
};

namespace detail {
inline HamiltonianModel pmsm_hamiltonian(const PmsmParams& P) {
  const double kq = -P.n_p * P.Phi / (P.J * P.C23);
  HamiltonianModel H;
  H.value = [P, kq](const Vec& x) {
    const double dw = x(2) - P.omega_star;
    return 0.5 * kq * x(0) * x(0) + 0.5 * P.gamma1 * x(1) * x(1) + 0.5 * P.gamma2 * dw * dw;
  };
  H.grad = [P, kq](const Vec& x) {
    Vec g(3);
    g << kq * x(0), P.gamma1 * x(1), P.gamma2 * (x(2) - P.omega_star);
    return g;
  };
  H.hess = [P, kq](const Vec&) {
    Mat h = Mat::Zero(3, 3);
    h.diagonal() << kq, P.gamma1, P.gamma2;
    return h;
  };
  return H;
}
}  // namespace detail

/// Lower-level builder with an arbitrary C12(x); no unmatched model attached.
inline PhSystem build_pmsm_c12(const PmsmParams& P, ScalarField C12) {
  P.validate();
  const Partition part(1, 2);
  auto J = PartitionedMatrix::from_full(part, MatrixRole::interconnection, [P, C12](const Vec& x) {
    const double c12 = C12(x);
    const double c13 = -(P.n_p / (P.J * P.gamma1)) * (P.L_d - P.L_q) * x(0);
    Mat j(3, 3);
    j << 0.0, -c12, P.C23,  //
        c12, 0.0, c13,      //
        -P.C23, -c13, 0.0;
    return j;
  });
  Mat r = Mat::Zero(3, 3);
  r.diagonal() << P.r2, P.r1, P.R_m / (P.J * P.gamma2);
  auto R = PartitionedMatrix::from_full(part, MatrixRole::dissipation, constant_field(r));
  DisturbanceModel dist;
  dist.matched = MatchedDisturbance{constant_field(Mat::Constant(1, 1, -P.r2)), Vec::Constant(1, P.d_a), P.d_a_t_on,
                                    false};
  Vec xs(3);
  xs << 0.0, 0.0, P.omega_star;
  return PhSystem(part, std::move(J), std::move(R), detail::pmsm_hamiltonian(P), std::move(dist), xs, "pmsm");
}

inline PhSystem build_pmsm(const PmsmParams& P) {
  const PhSystem base = build_pmsm_c12(P, [](const Vec&) { return 0.0; });
  DisturbanceModel dist = base.disturbance();
  dist.unmatched = UnmatchedDisturbance{Vec::Constant(1, P.d_bar_u()), P.t_on};
  return base.with_disturbance(dist);
}

/// Raw unactuated disturbance field (0, (tau_L + R_m w*)/J).
inline VecField pmsm_unmatched_raw(const PmsmParams& P) {
  return [load = P.load()](const Vec&) {
    Vec d(2);
    d << 0.0, load;
    return d;
  };
}

/// J_c1 = 0, R_c1 = r2, R_c2 = 0. The matched split of G_d = -r2 gives the
/// same J_c1, R_c1, so these gains also serve the mixed case.
inline IacGains pmsm_gains(const PmsmParams& P, double K_i) {
  return IacGains::constant(Mat::Zero(1, 1), Mat::Constant(1, 1, P.r2), Mat::Zero(1, 1), Mat::Constant(1, 1, K_i));
}

}  // namespace phiac::systems
