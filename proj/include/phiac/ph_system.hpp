#pragma once

// Disturbed port-Hamiltonian plants
//
//   d/dt [x_a; x_u] = [J(x) - R(x)] grad H(x) + [u - d_a(x, t); -d_u(x, t)]
//   y_a = grad_{x_a} H,   y_u = grad_{x_u} H
//
// with x_a the m actuated and x_u the s unactuated states. The matched
// disturbance is d_a = G_d(x) dbar_a and the unmatched one is
// d_u = (J_au + R_au)^T dbar_u; each switches on at its own activation time.

#include <optional>
#include <string>
#include <utility>

#include "phiac/linalg.hpp"

namespace phiac {

struct Partition {
  Eigen::Index m = 1;  ///< actuated states
  Eigen::Index s = 0;  ///< unactuated states

  Partition() = default;
  Partition(Eigen::Index actuated, Eigen::Index unactuated) : m(actuated), s(unactuated) {
    if (m < 1 || s < 0) throw ConfigError("Partition: need m >= 1 and s >= 0");
  }

  [[nodiscard]] Eigen::Index n() const { return m + s; }
  friend bool operator==(const Partition&, const Partition&) = default;
};

enum class MatrixRole { interconnection, dissipation };

/// State-dependent n x n matrix with its actuated/unactuated block structure.
///
/// Internally one evaluator produces the assembled matrix; block accessors
/// slice it. from_blocks derives the lower-left block from the upper-right one
/// according to the role (-au^T for J, au^T for R).
class PartitionedMatrix {
 public:
  PartitionedMatrix() = default;

  static PartitionedMatrix from_full(Partition p, MatrixRole role, MatField full) {
    return PartitionedMatrix(p, role, std::move(full));
  }

  static PartitionedMatrix from_blocks(Partition p, MatrixRole role, MatField aa, MatField au,
                                       MatField uu) {
    const double sign = role == MatrixRole::interconnection ? -1.0 : 1.0;
    auto full = [p, sign, aa = std::move(aa), au = std::move(au), uu = std::move(uu)](const Vec& x) {
      Mat out(p.n(), p.n());
      const Mat b_au = au(x);
      out.topLeftCorner(p.m, p.m) = aa(x);
      out.topRightCorner(p.m, p.s) = b_au;
      out.bottomLeftCorner(p.s, p.m) = sign * b_au.transpose();
      out.bottomRightCorner(p.s, p.s) = uu(x);
      return out;
    };
    return PartitionedMatrix(p, role, std::move(full));
  }

  static PartitionedMatrix zero(Partition p, MatrixRole role) {
    return PartitionedMatrix(p, role, constant_field(Mat::Zero(p.n(), p.n())));
  }

  [[nodiscard]] Mat operator()(const Vec& x) const { return full_(x); }
  [[nodiscard]] Mat aa(const Vec& x) const { return full_(x).topLeftCorner(p_.m, p_.m); }
  [[nodiscard]] Mat au(const Vec& x) const { return full_(x).topRightCorner(p_.m, p_.s); }
  [[nodiscard]] Mat ua(const Vec& x) const { return full_(x).bottomLeftCorner(p_.s, p_.m); }
  [[nodiscard]] Mat uu(const Vec& x) const { return full_(x).bottomRightCorner(p_.s, p_.s); }

  [[nodiscard]] const Partition& partition() const { return p_; }
  [[nodiscard]] MatrixRole role() const { return role_; }

 private:
  PartitionedMatrix(Partition p, MatrixRole role, MatField full)
      : p_(p), role_(role), full_(std::move(full)) {}

  Partition p_{};
  MatrixRole role_ = MatrixRole::interconnection;
  MatField full_;
};

/// Energy function with hand-coded gradient and optional Hessian.
struct HamiltonianModel {
  ScalarField value;
  VecField grad;
  MatField hess;  ///< may be empty; finite differences of grad are used then

  [[nodiscard]] bool has_hessian() const { return static_cast<bool>(hess); }
};

struct MatchedDisturbance {
  MatField G_d;               ///< m x m, Assumption-1 convention G_d < 0
  Vec d_bar;                  ///< constant m-vector
  double t_on = 0.0;          ///< activation time [s]
  bool state_dependent = false;
};

struct UnmatchedDisturbance {
  Vec d_bar;  ///< constant m-vector; enters as (J_au + R_au)^T d_bar
  double t_on = 0.0;
};

struct DisturbanceModel {
  std::optional<MatchedDisturbance> matched;
  std::optional<UnmatchedDisturbance> unmatched;

  /// Same disturbances, switched on from t = 0.
  [[nodiscard]] DisturbanceModel always_on() const {
    DisturbanceModel out = *this;
    if (out.matched) out.matched->t_on = 0.0;
    if (out.unmatched) out.unmatched->t_on = 0.0;
    return out;
  }
};

/// Immutable disturbed pH plant.
class PhSystem {
 public:
  static constexpr double kStationaryTol = 1e-9;

  PhSystem(Partition partition, PartitionedMatrix J, PartitionedMatrix R, HamiltonianModel H,
           DisturbanceModel dist, Vec x_star, std::string name = "plant")
      : p_(partition),
        J_(std::move(J)),
        R_(std::move(R)),
        H_(std::move(H)),
        dist_(std::move(dist)),
        x_star_(std::move(x_star)),
        name_(std::move(name)) {
    if (J_.partition() != p_ || R_.partition() != p_)
      throw ConfigError(name_ + ": J/R partition differs from system partition");
    if (J_.role() != MatrixRole::interconnection || R_.role() != MatrixRole::dissipation)
      throw ConfigError(name_ + ": J/R roles swapped");
    if (!H_.value || !H_.grad) throw ConfigError(name_ + ": Hamiltonian needs value and gradient");
    if (x_star_.size() != p_.n()) throw ConfigError(name_ + ": x_star has wrong dimension");
    validate_disturbance(dist_);
    const Vec g = H_.grad(x_star_);
    if (g.size() != p_.n()) throw ConfigError(name_ + ": gradient has wrong dimension");
    if (!(g.norm() <= kStationaryTol))
      throw ConfigError(name_ + ": grad H(x_star) = " + linalg::format(g) + " is not zero");
  }

  [[nodiscard]] const Partition& partition() const { return p_; }
  [[nodiscard]] const PartitionedMatrix& J() const { return J_; }
  [[nodiscard]] const PartitionedMatrix& R() const { return R_; }
  [[nodiscard]] const HamiltonianModel& H() const { return H_; }
  [[nodiscard]] const DisturbanceModel& disturbance() const { return dist_; }
  [[nodiscard]] const Vec& x_star() const { return x_star_; }
  [[nodiscard]] const std::string& name() const { return name_; }

  [[nodiscard]] PhSystem with_disturbance(DisturbanceModel dist) const {
    PhSystem copy = *this;
    copy.validate_disturbance(dist);
    copy.dist_ = std::move(dist);
    return copy;
  }

  [[nodiscard]] Vec x_a(const Vec& x) const { return x.head(p_.m); }
  [[nodiscard]] Vec x_u(const Vec& x) const { return x.tail(p_.s); }

  /// (J_au + R_au)^T at x: the s x m injection direction of the unmatched
  /// disturbance.
  [[nodiscard]] Mat unmatched_direction(const Vec& x) const {
    return (J_.au(x) + R_.au(x)).transpose();
  }

  [[nodiscard]] Vec d_a(const Vec& x, double t) const {
    if (!dist_.matched || t < dist_.matched->t_on) return Vec::Zero(p_.m);
    return dist_.matched->G_d(x) * dist_.matched->d_bar;
  }

  [[nodiscard]] Vec d_u(const Vec& x, double t) const {
    if (!dist_.unmatched || t < dist_.unmatched->t_on) return Vec::Zero(p_.s);
    return unmatched_direction(x) * dist_.unmatched->d_bar;
  }

  [[nodiscard]] Vec drift(const Vec& x, const Vec& u, double t) const {
    check_state(x);
    if (u.size() != p_.m) throw ContractViolation(name_ + ": input has wrong dimension");
    if (!(t >= 0.0)) throw ContractViolation(name_ + ": time must be non-negative");
    Vec dx = (J_(x) - R_(x)) * H_.grad(x);
    dx.head(p_.m) += u - d_a(x, t);
    dx.tail(p_.s) -= d_u(x, t);
    return dx;
  }

  void check_state(const Vec& x) const {
    if (x.size() != p_.n()) throw ContractViolation(name_ + ": state has wrong dimension");
  }

 private:
  void validate_disturbance(const DisturbanceModel& d) const {
    if (d.matched) {
      if (!d.matched->G_d) throw ConfigError(name_ + ": matched disturbance without G_d");
      if (d.matched->d_bar.size() != p_.m)
        throw ConfigError(name_ + ": matched dbar_a must have m entries");
      const Mat g = d.matched->G_d(x_star_);
      if (g.rows() != p_.m || g.cols() != p_.m)
        throw ConfigError(name_ + ": G_d must be m x m");
    }
    if (d.unmatched && d.unmatched->d_bar.size() != p_.m)
      throw ConfigError(name_ + ": unmatched dbar_u must have m entries");
  }

  Partition p_;
  PartitionedMatrix J_;
  PartitionedMatrix R_;
  HamiltonianModel H_;
  DisturbanceModel dist_;
  Vec x_star_;
  std::string name_;
};

/// Plant drift [J - R] grad H + col(u - d_a, -d_u); each disturbance active
/// once t reaches its activation time.
inline Vec eval_drift(const PhSystem& sys, const Vec& x, const Vec& u, double t) {
  return sys.drift(x, u, t);
}

struct Outputs {
  Vec y_a;
  Vec y_u;
};

inline Outputs eval_outputs(const PhSystem& sys, const Vec& x) {
  sys.check_state(x);
  const Vec g = sys.H().grad(x);
  return {g.head(sys.partition().m), g.tail(sys.partition().s)};
}

}  // namespace phiac
