#include "support.hpp"

using namespace phiac;
using namespace phiac::test;

namespace {

/// T(q) for the VTOL with coupling eps, typed in independently of the library.
Mat vtol_T_oracle(double eps, double th) {
  const double d = eps * eps + 1.0, s = std::sin(th), c = std::cos(th);
  return mat({{(eps * eps + s * s) / d, -std::sin(2 * th) / (2 * d), eps * c / d},
              {-std::sin(2 * th) / (2 * d), (eps * eps - s * s + 1) / d, eps * s / d},
              {c, s, -eps}});
}

/// Two-link toy with configuration-dependent inertia and a single input
/// through G(q) = (sin(q1) / 2, 1)^T. No analytic annihilator or jac_Tp, so the
/// SVD and finite-difference defaults are exercised.
MechanicalSystem toy_underactuated() {
  MechanicalSystem s;
  s.l = 2;
  s.m = 1;
  s.M = [](const Vec& q) { return mat({{2.0 + std::cos(q(1)), 0.3}, {0.3, 1.0}}); };
  s.Md = [](const Vec& q) { return mat({{3.0, 0.5 * std::sin(q(0))}, {0.5 * std::sin(q(0)), 2.0}}); };
  s.dMd = [](const Vec& q) {
    return std::vector<Mat>{mat({{0, 0.5 * std::cos(q(0))}, {0.5 * std::cos(q(0)), 0}}), Mat::Zero(2, 2)};
  };
  s.Vd = [](const Vec& q) { return 0.5 * q.squaredNorm() + 0.1 * std::pow(q(0), 4); };
  s.grad_Vd = [](const Vec& q) { return Vec(q + vec({0.4 * std::pow(q(0), 3), 0})); };
  s.J2 = [](const Vec& q, const Vec& pb) { return mat({{0, 0.2 * pb(0) + q(1)}, {-0.2 * pb(0) - q(1), 0}}); };
  s.Rd = [](const Vec&) { return mat({{1, 0.2}, {0.2, 0.5}}); };
  s.G = [](const Vec& q) { return mat({{0.5 * std::sin(q(1))}, {1}}); };
  s.q_star = Vec::Zero(2);
  s.d_m = vec({0.7});
  s.name = "toy";
  return s;
}

}  // namespace

TEST(BuildT, FullyActuatedIsIdentity) {
  const auto man = systems::build_manipulator({});
  Gen g(1);
  for (int k = 0; k < 20; ++k) EXPECT_LT(max_abs(build_T(man, g.vec(2, 3.0)) - Mat::Identity(2, 2)), 1e-15);
}

TEST(BuildT, VtolMatchesPrintedMatrix) {
  const systems::VtolParams P;
  const auto sys = systems::build_vtol(P);
  Gen g(2);
  for (int k = 0; k < 100; ++k) {
    const Vec q = g.vec(3, M_PI);
    EXPECT_LT(max_abs(build_T(sys, q) - vtol_T_oracle(P.eps, q(2))), 1e-14);
  }
}

TEST(BuildT, AnnihilatesInput) {
  for (const auto& sys : {systems::build_vtol({}), toy_underactuated()}) {
    Gen g(3);
    for (int k = 0; k < 100; ++k) {
      const Vec q = g.vec(sys.l, M_PI);
      const Mat TG = build_T(sys, q) * sys.G(q);
      Mat expect = Mat::Zero(sys.l, sys.m);
      expect.topRows(sys.m).setIdentity();
      EXPECT_LT(max_abs(TG - expect), 1e-12) << sys.name;
    }
  }
}

TEST(BuildT, RankDeficientInputIsSingularityError) {
  auto sys = toy_underactuated();
  sys.G = [](const Vec&) { return Mat(Mat::Zero(2, 1)); };
  EXPECT_THROW(build_T(sys, Vec::Zero(2)), SingularityError);
}

TEST(LeftAnnihilator, SignConvention) {
  Gen g(4);
  for (int k = 0; k < 50; ++k) {
    const Mat G = g.mat(4, 2);
    const Mat N = left_annihilator(G);
    ASSERT_EQ(N.rows(), 2);
    EXPECT_LT(max_abs(N * G), 1e-12);
    for (Eigen::Index r = 0; r < N.rows(); ++r) {
      Eigen::Index c = 0;
      while (std::abs(N(r, c)) <= 1e-12) ++c;
      EXPECT_GT(N(r, c), 0.0);
    }
  }
}

TEST(MomentumTransform, ConstantInertiaReducesToJ2) {
  MechanicalSystem s;
  s.l = 2;
  s.m = 2;
  s.M = constant_field(mat({{2, 0.5}, {0.5, 1}}));
  s.Md = s.M;
  s.dMd = [](const Vec&) { return std::vector<Mat>{Mat::Zero(2, 2), Mat::Zero(2, 2)}; };
  s.Vd = [](const Vec& q) { return 0.5 * q.squaredNorm(); };
  s.grad_Vd = [](const Vec& q) { return q; };
  s.J2 = [](const Vec& q, const Vec& pb) { return mat({{0, q(0) + pb(1)}, {-q(0) - pb(1), 0}}); };
  s.Rd = constant_field(Mat::Identity(2, 2));
  s.G = constant_field(Mat::Identity(2, 2));
  s.jac_Tp = [](const Vec&, const Vec&) { return Mat(Mat::Zero(2, 2)); };
  s.q_star = Vec::Zero(2);
  s.d_m = Vec::Zero(2);
  const TransformedMech tm(s);
  Gen g(5);
  for (int k = 0; k < 20; ++k) {
    const Vec q = g.vec(2), p = g.vec(2);
    EXPECT_LT(max_abs(tm.C(q, p) - s.J2(q, p)), 1e-14);
    EXPECT_LT((tm.to_p(q, p) - p).norm(), 1e-15);
  }
}

TEST(MomentumTransform, EnergyInvarianceAndDriftEquivalence) {
  for (const auto& sys : {systems::build_vtol({}), systems::build_manipulator({}), toy_underactuated()}) {
    const TransformedMech tm(sys);
    Gen g(6);
    for (int k = 0; k < 100; ++k) {
      const Vec q = sys.q_star + g.vec(sys.l, 5.0), pb = g.vec(sys.l, 5.0), u = g.vec(sys.m, 2.0);
      const Vec p = tm.to_p(q, pb);
      ASSERT_NEAR(tm.H(q, p), tm.Hd(q, pb), 1e-10 * (1.0 + std::abs(tm.Hd(q, pb)))) << sys.name;
      // push the transformed drift back: dq equal, dpb = T^{-1} (dp - d/dt(T) pb)
      const Vec orig = tm.original_drift(q, pb, u, 1e9);
      const Vec tr = tm.transformed_drift(q, p, u, 1e9);
      const Vec dq = tr.head(sys.l);
      const Vec dpb = tm.T_inv(q) * (tr.tail(sys.l) - tm.jac_Tp(q, pb) * dq);
      const Vec back = concat(dq, dpb);
      ASSERT_LT((back - orig).norm(), 1e-8 * (1.0 + orig.norm())) << sys.name;
    }
  }
}

TEST(MomentumTransform, KineticMatrixSymmetricPositive) {
  const TransformedMech tm(systems::build_vtol({}));
  Gen g(7);
  for (int k = 0; k < 100; ++k) {
    const Mat Mi = tm.Md_inv(g.vec(3, M_PI));
    EXPECT_LE(linalg::symmetry_defect(Mi), 1e-14);
    EXPECT_GT(linalg::min_sym_eig(Mi), 0.0);
  }
}

TEST(MomentumTransform, DissipationPsd) {
  const TransformedMech tm(systems::build_vtol({}));
  Gen g(8);
  for (int k = 0; k < 100; ++k) EXPECT_GE(linalg::min_sym_eig(tm.D(g.vec(3, M_PI))), -1e-10);
}

TEST(MomentumTransform, JacobianCallbacksAgreeWithFiniteDifferences) {
  const TransformedMech tm(systems::build_vtol({}));
  const auto samples = box(Vec::Zero(6), 5.0, 100, 9);
  EXPECT_LE(tm.validate_jacobian(samples), 1e-5);

  auto broken = systems::build_vtol({});
  broken.jac_Tp = [](const Vec&, const Vec&) { return Mat(Mat::Identity(3, 3)); };
  EXPECT_THROW(TransformedMech(broken).validate_jacobian(samples), ConfigError);
}

TEST(MomentumTransform, RejectsBadSystems) {
  auto s = toy_underactuated();
  s.Md = [](const Vec&) { return mat({{1, 0}, {0, -1}}); };
  EXPECT_THROW(TransformedMech{s}, ConfigError);
  auto t = toy_underactuated();
  t.grad_Vd = [](const Vec& q) { return Vec(q + vec({1, 0})); };
  EXPECT_THROW(TransformedMech{t}, ConfigError);
  auto u = toy_underactuated();
  u.G_perp = [](const Vec&) { return mat({{0, 1}}); };
  EXPECT_THROW(TransformedMech{u}, ConfigError);
}

TEST(PartitionMech, StructureAndBlocks) {
  const TransformedMech tm(systems::build_vtol({}));
  const auto plant = partition_mech(tm);
  const auto xs = box(plant.x_star(), 5.0, 100, 10);
  EXPECT_TRUE(check_structure(plant, xs).passed);
  // R_au = [D_au 0] and it couples for the VTOL
  const Vec x = xs[0];
  const Mat Rau = plant.R().au(x);
  const Mat D = tm.D(x.tail(3));
  EXPECT_LT(max_abs(Rau.leftCols(1) - D.topRightCorner(2, 1)), 1e-14);
  EXPECT_EQ(max_abs(Rau.rightCols(3)), 0.0);
  EXPECT_GT(max_abs(Rau), 1e-3);
}

TEST(PartitionMech, FullyActuatedManipulatorBlocks) {
  const systems::ManipulatorParams P;
  const TransformedMech tm(systems::build_manipulator(P));
  const auto plant = partition_mech(tm);
  Gen g(11);
  for (int k = 0; k < 20; ++k) {
    const Vec x = plant.x_star() + g.vec(4, 3.0);
    // Q = M^{-1} Md = I since Md = M
    EXPECT_LT(max_abs(plant.J().au(x) + Mat::Identity(2, 2)), 1e-12);
    EXPECT_EQ(max_abs(plant.R().au(x)), 0.0);
    EXPECT_LT(max_abs(plant.R().aa(x) - P.R_d), 1e-14);
  }
}

TEST(MechIac, ZeroAtTarget) {
  const TransformedMech tm(systems::build_vtol({}));
  const auto gains = systems::vtol_reference_gains();
  const auto r = mech_iac(tm, gains, tm.system().q_star, Vec::Zero(3), Vec::Zero(2));
  EXPECT_LT(r.u.norm() + r.rate.norm(), 1e-12);
}

TEST(MechIac, SpecializesGeneralLaw) {
  for (const auto& sys : {systems::build_vtol({}), toy_underactuated()}) {
    const TransformedMech tm(sys);
    const auto m = sys.m;
    Gen g(12);
    const Mat Rc1 = g.spd(m), Ki = g.spd(m), Rc2 = g.spd(m);
    const auto gains = IacGains::constant(g.skew(m), Rc1, Rc2, Ki);
    const auto plant = partition_mech(tm);
    for (const auto& x : box(plant.x_star(), 5.0, 100, 13)) {
      const Vec xc = g.vec(m, 3.0);
      const Vec p = x.head(sys.l), q = x.tail(sys.l);
      const auto r = mech_iac(tm, gains, q, p, xc);
      const Vec u = control_law(plant, gains, x, xc);
      const Vec rate = integrator_dynamics(plant, gains, x, xc);
      ASSERT_LT((r.u - u).norm(), 1e-12 * (1.0 + u.norm())) << sys.name;
      ASSERT_LT((r.rate - rate).norm(), 1e-12 * (1.0 + rate.norm())) << sys.name;
    }
  }
}

TEST(MechIac, RequiresPositiveRc2AndConstantGains) {
  const TransformedMech tm(systems::build_vtol({}));
  const Mat I = Mat::Identity(2, 2);
  const auto semi = IacGains::constant(Mat::Zero(2, 2), I, Mat::Zero(2, 2), I);
  EXPECT_THROW(mech_iac(tm, semi, tm.system().q_star, Vec::Zero(3), Vec::Zero(2)), ConfigError);
  const auto dep = IacGains::state_dependent(constant_field(Mat::Zero(2, 2)), constant_field(I), constant_field(I), I,
                                             Vec::Zero(6));
  EXPECT_THROW(mech_iac(tm, dep, tm.system().q_star, Vec::Zero(3), Vec::Zero(2)), ConfigError);
}

TEST(MechEquilibrium, Examples) {
  const TransformedMech tm(systems::build_vtol({}));
  const Mat I = Mat::Identity(2, 2);
  const auto unit = IacGains::constant(Mat::Zero(2, 2), I, I, I);
  const auto zero = mech_equilibrium(tm, unit, Vec::Zero(2));
  EXPECT_LT((zero.w_bar - concat(concat(Vec::Zero(3), tm.system().q_star), Vec::Zero(2))).norm(), 1e-14);

  const Vec dm = vec({5, -5});
  EXPECT_LT((mech_equilibrium(tm, unit, dm).w_c_bar() + dm).norm(), 1e-12);

  const auto gains = systems::vtol_reference_gains();
  const auto eq = mech_equilibrium(tm, gains, dm);
  // K_i = I, J_c1 = 0: wbar_c solves -R_c1 wbar_c = dbar_m
  const Vec expect = -mat({{10, 5}, {5, 10}}).inverse() * dm;
  EXPECT_LT((eq.w_c_bar() - expect).norm(), 1e-12);
  EXPECT_LT((eq.w_c_bar() - vec({-1, 1})).norm(), 1e-12);
  EXPECT_LT(eq.residual, 1e-9);
  EXPECT_LT(eq.x_bar().head(3).norm(), 1e-15);
}

TEST(MechEquilibrium, ControllerStateOfTheEquilibrium) {
  // x_c = x_a - w_c = p_a - wbar_c = (1, -1) for the published gains
  const TransformedMech tm(systems::build_vtol({}));
  const auto eq = mech_equilibrium(tm, systems::vtol_reference_gains(), vec({5, -5}));
  EXPECT_LT((eq.loop->from_w(eq.w_bar).second - vec({1, -1})).norm(), 1e-12);
}
