#pragma once

// Closed loop of a disturbed pH plant with the integral-action controller, in
// the coordinates w = (x_a, x_u, x_a - x_c):
//
//   dw = [J_cl(w) - R_cl(w)] grad H_cl(w) - col(d_a, d_u, d_a)
//   H_cl(w) = H(w_a, w_u) + 1/2 ||w_c||^2_{K_i}
//
//   J_cl = [ J_c1            J_au + R_au   J_c1 ]   R_cl = [ R_c1 + R_c2  0     R_c1 ]
//          [ -(J_au+R_au)^T  J_uu          0    ]          [ 0            R_uu  0    ]
//          [ J_c1            0             J_c1 ]          [ R_c1         0     R_c1 ]
//
// Equilibrium predictions, shifted-energy Lyapunov functions and their decay
// bounds live here too.

#include <memory>
#include <random>
#include <utility>

#include "phiac/assumptions.hpp"
#include "phiac/iac.hpp"

namespace phiac {

class ClosedLoop {
 public:
  ClosedLoop(PhSystem plant, IacGains gains) : plant_(std::move(plant)), gains_(std::move(gains)) {
    if (gains_.m() != plant_.partition().m) throw ConfigError("ClosedLoop: gains do not match the plant's m");
  }

  [[nodiscard]] const PhSystem& plant() const { return plant_; }
  [[nodiscard]] const IacGains& gains() const { return gains_; }
  [[nodiscard]] Eigen::Index m() const { return plant_.partition().m; }
  [[nodiscard]] Eigen::Index s() const { return plant_.partition().s; }
  [[nodiscard]] Eigen::Index dim() const { return plant_.partition().n() + m(); }

  [[nodiscard]] Vec x_of(const Vec& w) const { return w.head(plant_.partition().n()); }
  [[nodiscard]] Vec w_c_of(const Vec& w) const { return w.tail(m()); }
  [[nodiscard]] Vec to_w(const Vec& x, const Vec& x_c) const { return concat(x, plant_.x_a(x) - x_c); }
  /// Inverse of to_w: (x, x_c).
  [[nodiscard]] std::pair<Vec, Vec> from_w(const Vec& w) const {
    const Vec x = x_of(w);
    return {x, plant_.x_a(x) - w_c_of(w)};
  }

  [[nodiscard]] Mat J_cl(const Vec& w) const {
    check(w);
    const Vec x = x_of(w);
    const auto ma = m(), su = s();
    const Mat Jc1 = gains_.J_c1(x);
    const Mat coupling = plant_.J().au(x) + plant_.R().au(x);
    Mat out = Mat::Zero(dim(), dim());
    out.block(0, 0, ma, ma) = Jc1;
    out.block(0, ma, ma, su) = coupling;
    out.block(0, ma + su, ma, ma) = Jc1;
    out.block(ma, 0, su, ma) = -coupling.transpose();
    out.block(ma, ma, su, su) = plant_.J().uu(x);
    out.block(ma + su, 0, ma, ma) = Jc1;
    out.block(ma + su, ma + su, ma, ma) = Jc1;
    return out;
  }

  [[nodiscard]] Mat R_cl(const Vec& w) const {
    check(w);
    const Vec x = x_of(w);
    const auto ma = m(), su = s();
    const Mat Rc1 = gains_.R_c1(x);
    Mat out = Mat::Zero(dim(), dim());
    out.block(0, 0, ma, ma) = Rc1 + gains_.R_c2(x);
    out.block(0, ma + su, ma, ma) = Rc1;
    out.block(ma, ma, su, su) = plant_.R().uu(x);
    out.block(ma + su, 0, ma, ma) = Rc1;
    out.block(ma + su, ma + su, ma, ma) = Rc1;
    return out;
  }

  [[nodiscard]] double H_cl(const Vec& w) const {
    check(w);
    const Vec wc = w_c_of(w);
    return plant_.H().value(x_of(w)) + 0.5 * linalg::weighted_sq(wc, gains_.K_i());
  }

  [[nodiscard]] Vec grad_H_cl(const Vec& w) const {
    check(w);
    return concat(plant_.H().grad(x_of(w)), gains_.K_i() * w_c_of(w));
  }

  [[nodiscard]] Vec disturbance_term(const Vec& w, double t) const {
    const Vec x = x_of(w);
    const Vec da = plant_.d_a(x, t);
    return concat(da, plant_.d_u(x, t), da);
  }

  [[nodiscard]] Vec drift(const Vec& w, double t) const {
    return (J_cl(w) - R_cl(w)) * grad_H_cl(w) - disturbance_term(w, t);
  }

  /// Plant plus controller in the original (x, x_c) coordinates.
  /// Same values as control_law, integrator_dynamics and PhSystem::drift, with
  /// J, R and grad H evaluated once.
  [[nodiscard]] std::pair<Vec, Vec> composed_drift(const Vec& x, const Vec& x_c, double t) const {
    plant_.check_state(x);
    if (x_c.size() != m()) throw ContractViolation("ClosedLoop: controller state must have m entries");
    if (gains_.is_state_dependent()) gains_.validate_at(x);
    const auto ma = m(), su = s();
    const Vec g = plant_.H().grad(x);
    const Mat J = plant_.J()(x), R = plant_.R()(x);
    const Mat Jc1 = gains_.J_c1(x), Rc1 = gains_.R_c1(x), Rc2 = gains_.R_c2(x);
    const Vec ga = g.head(ma), gu = g.tail(su);
    const Mat Jau = J.topRightCorner(ma, su), Rau = R.topRightCorner(ma, su);
    const Vec u = (-J.topLeftCorner(ma, ma) + R.topLeftCorner(ma, ma) + Jc1 - Rc1 - Rc2) * ga +
                  (Jc1 - Rc1) * (gains_.K_i() * (x.head(ma) - x_c)) + 2.0 * Rau * gu;
    Vec dx = (J - R) * g;
    dx.head(ma) += u - plant_.d_a(x, t);
    const auto& um = plant_.disturbance().unmatched;
    if (um && t >= um->t_on) dx.tail(su) -= (Jau + Rau).transpose() * um->d_bar;
    return {dx, -Rc2 * ga + (Jau + Rau) * gu};
  }

 private:
  void check(const Vec& w) const {
    if (w.size() != dim()) throw ContractViolation("ClosedLoop: w has wrong dimension");
  }

  PhSystem plant_;
  IacGains gains_;
};

inline ClosedLoop build_closed_loop(const PhSystem& plant, const IacGains& gains) {
  gains.validate_at(plant.x_star());
  return ClosedLoop(plant, gains);
}

enum class EquilibriumKind { matched, unmatched, mixed };

inline const char* to_string(EquilibriumKind k) {
  switch (k) {
    case EquilibriumKind::matched: return "matched";
    case EquilibriumKind::unmatched: return "unmatched";
    case EquilibriumKind::mixed: return "mixed";
  }
  return "?";
}

/// A predicted closed-loop equilibrium together with the loop (disturbances
/// switched on from t = 0) whose drift certifies it.
struct EquilibriumPrediction {
  Vec w_bar;
  EquilibriumKind kind = EquilibriumKind::matched;
  double residual = 0.0;
  Vec d_bar_u;  ///< energy shift x_a^T dbar_u; zero for purely matched
  std::shared_ptr<const ClosedLoop> loop;

  [[nodiscard]] Vec x_bar() const { return loop->x_of(w_bar); }
  [[nodiscard]] Vec w_c_bar() const { return loop->w_c_of(w_bar); }
};

inline constexpr double kEquilibriumFailTol = 1e-6;

namespace detail {

inline EquilibriumPrediction certify(std::shared_ptr<const ClosedLoop> loop, Vec w_bar, EquilibriumKind kind,
                                     Vec d_bar_u) {
  EquilibriumPrediction out{std::move(w_bar), kind, 0.0, std::move(d_bar_u), std::move(loop)};
  out.residual = out.loop->drift(out.w_bar, 0.0).norm();
  if (!(out.residual <= kEquilibriumFailTol))
    throw InconsistencyError(std::string(to_string(kind)) + " equilibrium does not certify: drift residual " +
                             std::to_string(out.residual));
  return out;
}

inline void require_matched_split(const PhSystem& plant, const IacGains& gains, const Vec& x) {
  const auto& md = plant.disturbance().matched;
  if (!md) throw PreconditionError(plant.name() + ": no matched disturbance model");
  const Mat G = md->G_d(x);
  const Mat split = gains.J_c1(x) - gains.R_c1(x);
  if ((split - G).norm() > 1e-9 * (1.0 + G.norm()))
    throw PreconditionError("matched equilibrium: gains must satisfy J_c1 - R_c1 = G_d");
}

inline void require_zero_Rc2(const IacGains& gains, const Vec& x) {
  if (gains.R_c2(x).norm() > 1e-12) throw PreconditionError("unmatched equilibrium requires R_c2 = 0");
}

inline Vec find_minimum(const PhSystem& plant, const Vec& d_bar_u) {
  const auto rep = check_assumption_min(plant, d_bar_u);
  if (!rep.passed) throw InconsistencyError("Assumption 3 check failed: " + rep.message);
  return rep.x_bar;
}

}  // namespace detail

inline EquilibriumPrediction equilibrium_matched(const PhSystem& plant, const IacGains& gains, const Vec& d_bar_a) {
  const auto m = plant.partition().m;
  if (d_bar_a.size() != m) throw ContractViolation("equilibrium_matched: dbar_a must have m entries");
  detail::require_matched_split(plant, gains, plant.x_star());
  DisturbanceModel dist;
  dist.matched = *plant.disturbance().matched;
  dist.matched->d_bar = d_bar_a;
  dist.matched->t_on = 0.0;
  auto loop = std::make_shared<const ClosedLoop>(plant.with_disturbance(dist), gains);
  const Vec wc = linalg::solve(gains.K_i(), d_bar_a, "K_i");
  return detail::certify(loop, concat(plant.x_star(), wc), EquilibriumKind::matched, Vec::Zero(m));
}

inline EquilibriumPrediction equilibrium_unmatched(const PhSystem& plant, const IacGains& gains,
                                                   const Vec& d_bar_u) {
  const auto m = plant.partition().m;
  if (d_bar_u.size() != m) throw ContractViolation("equilibrium_unmatched: dbar_u must have m entries");
  detail::require_zero_Rc2(gains, plant.x_star());
  const Vec x_bar = detail::find_minimum(plant, d_bar_u);
  detail::require_zero_Rc2(gains, x_bar);
  DisturbanceModel dist;
  dist.unmatched = UnmatchedDisturbance{d_bar_u, 0.0};
  auto loop = std::make_shared<const ClosedLoop>(plant.with_disturbance(dist), gains);
  const Vec wc = linalg::solve(gains.K_i(), d_bar_u, "K_i");
  return detail::certify(loop, concat(x_bar, wc), EquilibriumKind::unmatched, d_bar_u);
}

inline EquilibriumPrediction equilibrium_mixed(const PhSystem& plant, const IacGains& gains, const Vec& d_bar_a,
                                               const Vec& d_bar_u) {
  const auto m = plant.partition().m;
  if (d_bar_a.size() != m || d_bar_u.size() != m)
    throw ContractViolation("equilibrium_mixed: disturbances must have m entries");
  detail::require_zero_Rc2(gains, plant.x_star());
  detail::require_matched_split(plant, gains, plant.x_star());
  const Vec x_bar = detail::find_minimum(plant, d_bar_u);
  DisturbanceModel dist;
  dist.matched = *plant.disturbance().matched;
  dist.matched->d_bar = d_bar_a;
  dist.matched->t_on = 0.0;
  dist.unmatched = UnmatchedDisturbance{d_bar_u, 0.0};
  auto loop = std::make_shared<const ClosedLoop>(plant.with_disturbance(dist), gains);
  const Vec wc = linalg::solve(gains.K_i(), d_bar_a + d_bar_u, "K_i");
  return detail::certify(loop, concat(x_bar, wc), EquilibriumKind::mixed, d_bar_u);
}

/// Shifted closed-loop energy centred at the predicted equilibrium:
///   W(w) = H_cl(w) + w_a^T dbar_u - (K_i wbar_c)^T (w_c - wbar_c) - [same at wbar].
/// For a matched prediction K_i wbar_c = dbar_a; for an unmatched one it is
/// dbar_u and H + x_a^T dbar_u is the shifted plant energy.
inline double shifted_lyapunov(const EquilibriumPrediction& eq, const Vec& w) {
  const auto& loop = *eq.loop;
  const auto m = loop.m();
  const Vec anchor = loop.gains().K_i() * eq.w_c_bar();
  const auto energy = [&](const Vec& v) { return loop.H_cl(v) + v.head(m).dot(eq.d_bar_u); };
  return energy(w) - anchor.dot(loop.w_c_of(w) - eq.w_c_bar()) - energy(eq.w_bar);
}

inline Vec shifted_lyapunov_grad(const EquilibriumPrediction& eq, const Vec& w) {
  const auto& loop = *eq.loop;
  const auto m = loop.m();
  Vec g = loop.grad_H_cl(w);
  g.head(m) += eq.d_bar_u;
  g.tail(m) -= loop.gains().K_i() * eq.w_c_bar();
  return g;
}

inline double lyapunov_matched(const EquilibriumPrediction& eq, const Vec& w) {
  if (eq.kind != EquilibriumKind::matched) throw PreconditionError("lyapunov_matched: needs a matched prediction");
  return shifted_lyapunov(eq, w);
}

inline double lyapunov_unmatched(const EquilibriumPrediction& eq, const Vec& w) {
  if (eq.kind == EquilibriumKind::matched) throw PreconditionError("lyapunov_unmatched: needs an unmatched prediction");
  return shifted_lyapunov(eq, w);
}

struct RateBound {
  double rate = 0.0;   ///< analytic dW/dt along the closed-loop drift
  double bound = 0.0;  ///< -||z_a||^2_{R_c2} - ||z_a + K_i (w_c - wbar_c)||^2_{R_c1}
};

/// dW/dt and its decay bound, z_a = grad_a H + dbar_u. The bound drops the
/// -||grad_u H||^2_{R_uu} term, so rate <= bound <= 0.
inline RateBound lyapunov_rate_bound(const EquilibriumPrediction& eq, const Vec& w) {
  const auto& loop = *eq.loop;
  const auto m = loop.m();
  const Vec x = loop.x_of(w);
  RateBound out;
  out.rate = shifted_lyapunov_grad(eq, w).dot(loop.drift(w, 0.0));
  const Vec za = loop.plant().H().grad(x).head(m) + eq.d_bar_u;
  const Vec zc = loop.gains().K_i() * (loop.w_c_of(w) - eq.w_c_bar());
  out.bound = -linalg::weighted_sq(za, loop.gains().R_c2(x)) - linalg::weighted_sq(za + zc, loop.gains().R_c1(x));
  return out;
}

struct DetectionOutputs {
  Vec Y_a;  ///< col(grad_{w_a} H_cl, w_c - wbar_c)
  Vec Y_u;  ///< grad_{w_a} H + dbar_u + K_i (w_c - wbar_c)
};

inline DetectionOutputs detect_outputs(const EquilibriumPrediction& eq, const Vec& w) {
  const auto& loop = *eq.loop;
  const auto m = loop.m();
  const Vec ga = loop.plant().H().grad(loop.x_of(w)).head(m);
  const Vec wt = loop.w_c_of(w) - eq.w_c_bar();
  return {concat(ga, wt), ga + eq.d_bar_u + loop.gains().K_i() * wt};
}

/// Smallest W over random points on the sphere ||w - wbar|| = radius.
inline double shell_min_lyapunov(const EquilibriumPrediction& eq, double radius, int directions,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < directions; ++k) {
    Vec dir(eq.w_bar.size());
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = normal(rng);
    dir.normalize();
    worst = std::min(worst, shifted_lyapunov(eq, eq.w_bar + radius * dir));
  }
  return worst;
}

}  // namespace phiac
