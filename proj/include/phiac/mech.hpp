#pragma once

// Shaped mechanical plants
//
//   dq  = M^{-1} Md grad_pb Hd
//   dpb = -Md M^{-1} grad_q Hd + [J2(q, pb) - Rd(q)] grad_pb Hd + G(q) (u - dbar_m)
//   Hd  = 1/2 pb^T Md^{-1} pb + Vd(q)
//
// and the momentum change p = T(q) pb with T = [(G^T G)^{-1} G^T; G_perp],
// which turns the input matrix into col(I, 0). In the new coordinates
//
//   Md^{-1}|_p = T^{-T} Md^{-1} T^{-1},   Q = M^{-1} Md T^T,   D = T Rd T^T,
//   C = X - X^T + T J2 T^T,   X = d(T pb)/dq  M^{-1} Md T^T,
//
// where d(T pb)/dq is the ordinary Jacobian (row i, column j = d(T pb)_i/dq_j).
// pb denotes the untransformed momentum throughout.

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "phiac/closed_loop.hpp"

namespace phiac {

using QPMatField = std::function<Mat(const Vec& q, const Vec& pb)>;

struct MechanicalSystem {
  Eigen::Index l = 0;  ///< configuration dimension
  Eigen::Index m = 0;  ///< number of inputs
  MatField M;
  MatField Md;
  std::function<std::vector<Mat>(const Vec& q)> dMd;  ///< dMd/dq_i, i = 0..l-1
  ScalarField Vd;
  VecField grad_Vd;
  QPMatField J2;  ///< skew, evaluated at the untransformed momentum
  MatField Rd;
  MatField G;
  MatField G_perp;    ///< optional (l-m) x l annihilator; SVD-based default when empty
  QPMatField jac_Tp;  ///< optional d(T pb)/dq; central differences when empty
  Vec q_star;
  Vec d_m;            ///< matched disturbance dbar_m
  double d_m_on = 0.0;
  std::string name = "mech";
};

/// Orthonormal basis of the left null space of G, one row per vector, each
/// row signed so that its first nonzero entry is positive.
inline Mat left_annihilator(const Mat& G) {
  const auto l = G.rows(), m = G.cols();
  Eigen::JacobiSVD<Mat> svd(G, Eigen::ComputeFullU);
  Mat N = svd.matrixU().rightCols(l - m).transpose();
  for (Eigen::Index r = 0; r < N.rows(); ++r) {
    for (Eigen::Index c = 0; c < l; ++c) {
      if (std::abs(N(r, c)) > 1e-12) {
        if (N(r, c) < 0.0) N.row(r) *= -1.0;
        break;
      }
    }
  }
  return N;
}

inline Mat build_T(const MechanicalSystem& sys, const Vec& q) {
  const Mat G = sys.G(q);
  if (G.rows() != sys.l || G.cols() != sys.m) throw ConfigError(sys.name + ": G must be l x m");
  const Mat GtG = G.transpose() * G;
  Eigen::FullPivLU<Mat> lu(G);
  if (lu.rank() < sys.m || linalg::condition_number(GtG) > 1e12)
    throw SingularityError(sys.name + ": G(q) is rank deficient at q = " + linalg::format(q));
  Mat T(sys.l, sys.l);
  T.topRows(sys.m) = GtG.ldlt().solve(G.transpose());
  if (sys.l > sys.m) T.bottomRows(sys.l - sys.m) = sys.G_perp ? sys.G_perp(q) : left_annihilator(G);
  return T;
}

inline Mat fd_jac_Tp(const MechanicalSystem& sys, const Vec& q, const Vec& pb, double h = 1e-6) {
  Mat out(sys.l, sys.l);
  for (Eigen::Index j = 0; j < sys.l; ++j) {
    const double step = h * (1.0 + std::abs(q(j)));
    Vec qp = q, qm = q;
    qp(j) += step;
    qm(j) -= step;
    out.col(j) = (build_T(sys, qp) * pb - build_T(sys, qm) * pb) / (2.0 * step);
  }
  return out;
}

/// Evaluators of the mechanical plant in transformed coordinates (q, p).
class TransformedMech {
 public:
  explicit TransformedMech(MechanicalSystem sys) : sys_(std::make_shared<const MechanicalSystem>(std::move(sys))) {
    const auto& s = *sys_;
    if (s.l < 1 || s.m < 1 || s.m > s.l) throw ConfigError(s.name + ": need 1 <= m <= l");
    if (!s.M || !s.Md || !s.dMd || !s.Vd || !s.grad_Vd || !s.J2 || !s.Rd || !s.G)
      throw ConfigError(s.name + ": missing evaluator");
    if (s.q_star.size() != s.l) throw ConfigError(s.name + ": q_star must have l entries");
    if (s.d_m.size() != s.m) throw ConfigError(s.name + ": dbar_m must have m entries");
    const Vec& q = s.q_star;
    for (const auto& [label, mat] : {std::pair{"M", s.M(q)}, std::pair{"Md", s.Md(q)}}) {
      if (mat.rows() != s.l || mat.cols() != s.l) throw ConfigError(s.name + ": " + label + " must be l x l");
      if (linalg::symmetry_defect(mat) > 1e-12 * (1.0 + mat.norm()) || !(linalg::min_sym_eig(mat) > 0.0))
        throw ConfigError(s.name + ": " + label + "(q_star) is not symmetric positive definite");
    }
    const Vec gv = s.grad_Vd(q);
    if (!(gv.norm() <= 1e-9)) throw ConfigError(s.name + ": grad Vd(q_star) = " + linalg::format(gv));
    const Mat G = s.G(q);
    const Mat T = build_T(s, q);
    if (s.l > s.m && (T.bottomRows(s.l - s.m) * G).norm() > 1e-12 * (1.0 + G.norm()))
      throw ConfigError(s.name + ": G_perp does not annihilate G");
    if (linalg::condition_number(T) > 1e12) throw SingularityError(s.name + ": T(q_star) is singular");
  }

  [[nodiscard]] const MechanicalSystem& system() const { return *sys_; }
  [[nodiscard]] Eigen::Index l() const { return sys_->l; }
  [[nodiscard]] Eigen::Index m() const { return sys_->m; }

  [[nodiscard]] Mat T(const Vec& q) const { return build_T(*sys_, q); }
  [[nodiscard]] Mat T_inv(const Vec& q) const { return linalg::inverse(T(q), "T(q)"); }

  [[nodiscard]] Vec to_p(const Vec& q, const Vec& pb) const { return T(q) * pb; }
  [[nodiscard]] Vec to_pb(const Vec& q, const Vec& p) const { return linalg::solve(T(q), p, "T(q)"); }

  [[nodiscard]] Mat jac_Tp(const Vec& q, const Vec& pb) const {
    return sys_->jac_Tp ? sys_->jac_Tp(q, pb) : fd_jac_Tp(*sys_, q, pb);
  }

  [[nodiscard]] Mat Md_inv(const Vec& q) const {
    const Mat Ti = T_inv(q);
    return linalg::sym(Ti.transpose() * linalg::inverse(sys_->Md(q), "Md(q)") * Ti);
  }

  [[nodiscard]] Mat Q(const Vec& q) const {
    return linalg::solve_mat(sys_->M(q), sys_->Md(q), "M(q)") * T(q).transpose();
  }

  [[nodiscard]] Mat C(const Vec& q, const Vec& p) const {
    const Mat Tq = T(q);
    const Vec pb = linalg::solve(Tq, p, "T(q)");
    const Mat X = jac_Tp(q, pb) * linalg::solve_mat(sys_->M(q), sys_->Md(q), "M(q)") * Tq.transpose();
    return X - X.transpose() + Tq * sys_->J2(q, pb) * Tq.transpose();
  }

  [[nodiscard]] Mat D(const Vec& q) const {
    const Mat Tq = T(q);
    return linalg::sym(Tq * sys_->Rd(q) * Tq.transpose());
  }

  /// Original energy Hd(q, pb).
  [[nodiscard]] double Hd(const Vec& q, const Vec& pb) const {
    return 0.5 * pb.dot(linalg::solve(sys_->Md(q), pb, "Md(q)")) + sys_->Vd(q);
  }

  /// Gradient of Hd in (q, pb): col(grad_q Hd, grad_pb Hd).
  [[nodiscard]] Vec grad_Hd(const Vec& q, const Vec& pb) const {
    const Vec pt = linalg::solve(sys_->Md(q), pb, "Md(q)");
    const auto dM = sys_->dMd(q);
    Vec gq = sys_->grad_Vd(q);
    for (Eigen::Index i = 0; i < sys_->l; ++i) gq(i) -= 0.5 * pt.dot(dM[static_cast<std::size_t>(i)] * pt);
    return concat(gq, pt);
  }

  /// Transformed energy H(q, p) = Hd(q, T^{-1} p).
  [[nodiscard]] double H(const Vec& q, const Vec& p) const { return Hd(q, to_pb(q, p)); }

  /// col(grad_p H, grad_q H) at (q, p).
  [[nodiscard]] Vec grad_H(const Vec& q, const Vec& p) const {
    const Vec pb = to_pb(q, p);
    const Vec g = grad_Hd(q, pb);
    const Vec gp = linalg::solve(T(q).transpose(), g.tail(sys_->l), "T(q)^T");
    const Vec gq = g.head(sys_->l) - jac_Tp(q, pb).transpose() * gp;
    return concat(gp, gq);
  }

  /// Original drift, state (q, pb).
  [[nodiscard]] Vec original_drift(const Vec& q, const Vec& pb, const Vec& u, double t) const {
    const Mat MiMd = linalg::solve_mat(sys_->M(q), sys_->Md(q), "M(q)");
    const Vec g = grad_Hd(q, pb);
    const Vec gq = g.head(sys_->l), gp = g.tail(sys_->l);
    Vec dpb = -MiMd.transpose() * gq + (sys_->J2(q, pb) - sys_->Rd(q)) * gp;
    const Vec dm = t >= sys_->d_m_on ? sys_->d_m : Vec::Zero(sys_->m);
    dpb += sys_->G(q) * (u - dm);
    return concat(Vec(MiMd * gp), dpb);
  }

  /// Drift in the transformed coordinates, state (q, p).
  [[nodiscard]] Vec transformed_drift(const Vec& q, const Vec& p, const Vec& u, double t) const {
    const Vec g = grad_H(q, p);
    const Vec gp = g.head(sys_->l), gq = g.tail(sys_->l);
    const Mat Qq = Q(q);
    Vec dp = -Qq.transpose() * gq + (C(q, p) - D(q)) * gp;
    const Vec dm = t >= sys_->d_m_on ? sys_->d_m : Vec::Zero(sys_->m);
    dp += T(q) * sys_->G(q) * (u - dm);
    return concat(Vec(Qq * gp), dp);
  }

  /// Worst relative mismatch between jac_Tp and central differences over the
  /// samples (each sample is col(q, pb)). Throws ConfigError above rel_tol.
  double validate_jacobian(const std::vector<Vec>& samples, double rel_tol = 1e-5) const {
    double worst = 0.0;
    for (const auto& s : samples) {
      const Vec q = s.head(sys_->l), pb = s.tail(sys_->l);
      const Mat a = jac_Tp(q, pb), n = fd_jac_Tp(*sys_, q, pb);
      const double err = (a - n).cwiseAbs().maxCoeff() / (1.0 + n.cwiseAbs().maxCoeff());
      worst = std::max(worst, err);
      if (err > rel_tol)
        throw ConfigError(sys_->name + ": jac_Tp disagrees with finite differences at " + linalg::format(s));
    }
    return worst;
  }

 private:
  std::shared_ptr<const MechanicalSystem> sys_;
};

inline TransformedMech momentum_transform(const MechanicalSystem& sys) { return TransformedMech(sys); }

/// Partitioned pH form with x = col(p_a, p_u, q):
///   J = [C, -Q^T; Q, 0],   R = [D, 0; 0, 0],
/// and matched disturbance G_d dbar_a with dbar_a = G_d^{-1} dbar_m.
/// G_d defaults to -I.
inline PhSystem partition_mech(const TransformedMech& tm, std::optional<Mat> G_d = std::nullopt) {
  const auto l = tm.l(), m = tm.m();
  const Partition part(m, 2 * l - m);
  auto tmp = std::make_shared<const TransformedMech>(tm);
  auto J = PartitionedMatrix::from_full(part, MatrixRole::interconnection, [tmp, l](const Vec& x) {
    const Vec p = x.head(l), q = x.tail(l);
    const Mat Qq = tmp->Q(q);
    Mat out = Mat::Zero(2 * l, 2 * l);
    out.topLeftCorner(l, l) = tmp->C(q, p);
    out.topRightCorner(l, l) = -Qq.transpose();
    out.bottomLeftCorner(l, l) = Qq;
    return out;
  });
  auto R = PartitionedMatrix::from_full(part, MatrixRole::dissipation, [tmp, l](const Vec& x) {
    Mat out = Mat::Zero(2 * l, 2 * l);
    out.topLeftCorner(l, l) = tmp->D(x.tail(l));
    return out;
  });
  HamiltonianModel H;
  H.value = [tmp, l](const Vec& x) { return tmp->H(x.tail(l), x.head(l)); };
  H.grad = [tmp, l](const Vec& x) { return tmp->grad_H(x.tail(l), x.head(l)); };
  const auto& s = tm.system();
  const Mat Gd = G_d ? *G_d : Mat(-Mat::Identity(m, m));
  if (Gd.rows() != m || Gd.cols() != m) throw ConfigError(s.name + ": G_d must be m x m");
  DisturbanceModel dist;
  dist.matched = MatchedDisturbance{constant_field(Gd), linalg::solve(Gd, s.d_m, "G_d"), s.d_m_on, false};
  return PhSystem(part, std::move(J), std::move(R), std::move(H), std::move(dist),
                  concat(Vec::Zero(l), s.q_star), s.name);
}

/// Transformed state col(p, q) from original (q, pb).
inline Vec mech_state(const TransformedMech& tm, const Vec& q, const Vec& pb) {
  return concat(tm.to_p(q, pb), q);
}

namespace detail {
inline void require_mech_gains(const IacGains& gains, Eigen::Index m) {
  if (gains.is_state_dependent()) throw ConfigError("mechanical IAC requires constant gains");
  if (gains.m() != m) throw ConfigError("mechanical IAC: gains do not match m");
  if (!(linalg::min_sym_eig(gains.R_c2(Vec())) > 0.0))
    throw ConfigError("mechanical IAC requires R_c2 positive definite");
}
}  // namespace detail

/// Mechanical IAC written in the transformed blocks:
///   u   = (-C_aa + D_aa + J_c1 - R_c1 - R_c2) grad_pa H + (J_c1 - R_c1) K_i (p_a - x_c)
///         + 2 D_au grad_pu H
///   dxc = -R_c2 grad_pa H + (C_au + D_au) grad_pu H - Q_a^T grad_q H
inline ControlAndRate mech_iac(const TransformedMech& tm, const IacGains& gains, const Vec& q, const Vec& p,
                               const Vec& x_c) {
  const auto l = tm.l(), m = tm.m(), r = l - m;
  detail::require_mech_gains(gains, m);
  if (q.size() != l || p.size() != l || x_c.size() != m) throw ContractViolation("mech_iac: dimension mismatch");
  const Vec g = tm.grad_H(q, p);
  const Vec ga = g.head(m), gu = g.segment(m, r), gq = g.tail(l);
  const Mat Cm = tm.C(q, p), Dm = tm.D(q), Qa = tm.Q(q).leftCols(m);
  const Vec none;
  const Mat Jc1 = gains.J_c1(none), Rc1 = gains.R_c1(none), Rc2 = gains.R_c2(none);
  const Mat Caa = Cm.topLeftCorner(m, m), Daa = Dm.topLeftCorner(m, m);
  const Mat Cau = Cm.topRightCorner(m, r), Dau = Dm.topRightCorner(m, r);
  ControlAndRate out;
  out.u = (-Caa + Daa + Jc1 - Rc1 - Rc2) * ga + (Jc1 - Rc1) * gains.K_i() * (p.head(m) - x_c) + 2.0 * Dau * gu;
  out.rate = -Rc2 * ga + (Cau + Dau) * gu - Qa.transpose() * gq;
  return out;
}

/// Equilibrium (q*, 0, K_i^{-1} (J_c1 - R_c1)^{-1} dbar_m), certified on the
/// partitioned system with G_d = J_c1 - R_c1.
inline EquilibriumPrediction mech_equilibrium(const TransformedMech& tm, const IacGains& gains, const Vec& d_bar_m) {
  detail::require_mech_gains(gains, tm.m());
  const Vec none;
  const Mat Gd = gains.J_c1(none) - gains.R_c1(none);
  const PhSystem plant = partition_mech(tm, Gd);
  return equilibrium_matched(plant, gains, linalg::solve(Gd, d_bar_m, "J_c1 - R_c1"));
}

}  // namespace phiac
