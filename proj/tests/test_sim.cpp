#include "support.hpp"

using namespace phiac;
using namespace phiac::test;

namespace {

/// dx/dt = -x on R^1 with no controller.
Scenario decay(double dt, double t_end = 1.0) {
  Composition c;
  c.controller = "none";
  c.n = 1;
  c.rhs = [](double, const Vec& z) { return Vec(-z); };
  c.input = [](double, const Vec&) { return Vec(); };
  Scenario s;
  s.name = "decay";
  s.comp = c;
  s.z0 = vec({1.0});
  s.t_end = t_end;
  s.dt = dt;
  return s;
}

/// Undamped oscillator with H = 1/2 |x|^2, recorded energy in H_cl.
Scenario oscillator(double t_end, int stride) {
  Composition c;
  c.controller = "none";
  c.n = 2;
  c.rhs = [](double, const Vec& z) { return vec({z(1), -z(0)}); };
  c.input = [](double, const Vec&) { return Vec(); };
  c.H_cl = [](const Vec& z) { return 0.5 * z.squaredNorm(); };
  Scenario s;
  s.comp = c;
  s.z0 = vec({1.0, 0.5});
  s.t_end = t_end;
  s.dt = 1e-3;
  s.stride = stride;
  return s;
}

Scenario pmsm_scenario(double t_end, bool wc) {
  auto cfg = preset_json("pmsm.default");
  cfg["controller"]["type"] = wc ? "iac_wc" : "iac";
  cfg["scenario"]["t_end"] = t_end;
  cfg["scenario"]["stride"] = 1;
  return build_preset(cfg).scenario;
}

}  // namespace

TEST(Integrate, ExponentialDecay) {
  const auto tr = integrate(decay(1e-3));
  EXPECT_NEAR(tr.z.back()(0), std::exp(-1.0), 1e-9);
  EXPECT_DOUBLE_EQ(tr.t.back(), 1.0);
  EXPECT_EQ(tr.size(), 1001u);
}

TEST(Integrate, FourthOrder) {
  const double e1 = std::abs(integrate(decay(0.1)).z.back()(0) - std::exp(-1.0));
  const double e2 = std::abs(integrate(decay(0.05)).z.back()(0) - std::exp(-1.0));
  const double ratio = e1 / e2;
  EXPECT_GT(ratio, 8.0);
  EXPECT_LT(ratio, 32.0);
}

TEST(Integrate, EnergyConservation) {
  const auto tr = integrate(oscillator(100.0, 100));
  double worst = 0.0;
  for (double h : tr.H_cl) worst = std::max(worst, std::abs(h - tr.H_cl.front()));
  EXPECT_LT(worst, 1e-8);
}

TEST(Integrate, StrideAndMonotoneTime) {
  const auto tr = integrate(oscillator(1.0, 7));
  for (std::size_t k = 1; k < tr.size(); ++k) EXPECT_GT(tr.t[k], tr.t[k - 1]);
  EXPECT_DOUBLE_EQ(tr.t.back(), 1.0);  // final sample always kept
}

TEST(Integrate, Deterministic) {
  const auto a = integrate(pmsm_scenario(0.5, false));
  const auto b = integrate(pmsm_scenario(0.5, false));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) ASSERT_EQ((a.z[k] - b.z[k]).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Integrate, DivergenceCarriesTime) {
  auto s = decay(1e-2, 10.0);
  s.comp.rhs = [](double t, const Vec& z) { return t > 0.5 ? Vec(Vec::Constant(1, std::nan(""))) : Vec(-z); };
  try {
    integrate(s);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.time(), 0.5);
    EXPECT_LT(e.time(), 0.6);
  }
}

TEST(Integrate, CoarseStepWarns) {
  auto s = decay(0.5, 100.0);
  s.comp.rhs = [](double, const Vec& z) { return Vec(-3.0 * z); };
  const auto tr = integrate(s);
  EXPECT_FALSE(tr.warnings.empty());
  EXPECT_GT(tr.max_step_error, 1e-6);
}

TEST(Integrate, ScenarioValidation) {
  auto s = decay(0.0);
  EXPECT_THROW(integrate(s), ConfigError);
  s = decay(1e-3);
  s.stride = 0;
  EXPECT_THROW(integrate(s), ConfigError);
  s = decay(1e-3);
  s.z0 = vec({1, 2});
  EXPECT_THROW(integrate(s), ConfigError);
}

TEST(Integrate, DisturbanceSnappedToGrid) {
  // a step at t0 = 0.0104 with dt = 1e-3 becomes active on the step from 0.010
  const auto plant = rotation_plant(matched(-Mat::Identity(1, 1), vec({1.0}), 0.0104));
  auto loop = std::make_shared<const ClosedLoop>(plant, identity_gains(1));
  Scenario s;
  s.comp = compose_iac(loop);
  s.z0 = Vec::Zero(3);
  s.t_end = 0.02;
  s.dt = 1e-3;
  const auto tr = integrate(s);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    if (tr.t[k] <= 0.0100 + 1e-12)
      EXPECT_EQ(tr.z[k].norm(), 0.0) << "t = " << tr.t[k];
    else
      EXPECT_GT(tr.z[k].norm(), 0.0) << "t = " << tr.t[k];
  }
}

TEST(CheckConvergence, AlreadyAtEquilibrium) {
  Gen g(1);
  const auto q = random_quadratic(g, 2, 1);
  const auto plant = quadratic_plant(q, matched(-Mat::Identity(2, 2), vec({1, -1})));
  const auto gains = identity_gains(2);
  auto eq = std::make_shared<const EquilibriumPrediction>(equilibrium_matched(plant, gains, vec({1, -1})));
  auto loop = std::make_shared<const ClosedLoop>(plant, gains);
  Scenario s;
  s.comp = compose_iac(loop, {{0.0, eq}});
  const auto [x, xc] = loop->from_w(eq->w_bar);
  s.z0 = concat(x, xc);
  s.t_end = 1.0;
  const auto tr = integrate(s);
  const auto v = check_convergence(tr, *eq, 1e-9);
  EXPECT_TRUE(v.converged);
  EXPECT_LT(v.final_error, 1e-12);
  EXPECT_TRUE(v.lyapunov_monotone);
  ASSERT_TRUE(v.first_time_within);
  EXPECT_EQ(*v.first_time_within, 0.0);
}

TEST(CheckConvergence, UnstableGainsDoNotConverge) {
  auto cfg = preset_json("manipulator.default");
  const auto built = build_preset(cfg);
  const auto& plant = built.plant;
  const Vec none;
  // R_c1 replaced by -R_c1 with validation bypassed
  const auto bad = IacGains::unchecked(built.gains.J_c1(none), -built.gains.R_c1(none), built.gains.R_c2(none),
                                       built.gains.K_i());
  auto loop = std::make_shared<const ClosedLoop>(plant, bad);
  Scenario s;
  s.comp = compose_iac(loop);
  s.z0 = built.scenario.z0;
  s.t_end = 5.0;
  s.dt = 1e-3;
  s.stride = 10;
  ConvergenceVerdict v;
  try {
    const auto tr = integrate(s);
    v = check_convergence(tr, *built.scenario.target, 1e-2);
    EXPECT_FALSE(v.converged);
  } catch (const DivergenceError&) {
    SUCCEED();
  }
}

TEST(CheckConvergence, VtolDisturbedWindow) {
  const auto built = build_preset(preset_json("vtol.paper"));
  const auto tr = integrate(built.scenario);
  const auto v = check_convergence(tr, *built.scenario.target, 1e-2, 30.0);
  EXPECT_TRUE(v.converged) << v.final_error;
  EXPECT_TRUE(v.lyapunov_monotone) << v.max_lyapunov_increase;
  Vec q = tr.x(tr.size() - 1).tail(3);
  EXPECT_LT((q - vec({5, 0, 0})).norm(), 1e-2);
}

TEST(Sweep, OrderAndErrors) {
  EXPECT_TRUE(sweep({}).empty());
  std::vector<Scenario> list;
  for (const auto* name : {"pmsm.default", "manipulator.default", "vtol.paper"}) {
    auto cfg = preset_json(name);
    cfg["scenario"]["t_end"] = 0.2;
    auto sc = build_preset(cfg).scenario;
    list.push_back(sc);
  }
  auto broken = list[0];
  broken.name = "broken";
  broken.comp.rhs = [](double, const Vec& z) { return Vec(Vec::Constant(z.size(), std::nan(""))); };
  list.push_back(broken);
  const auto out = sweep(list);
  ASSERT_EQ(out.size(), 4u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(out[i].name, list[i].name);
    EXPECT_TRUE(out[i].trajectory.has_value());
    EXPECT_TRUE(out[i].verdict.has_value());
  }
  EXPECT_FALSE(out[3].trajectory.has_value());
  EXPECT_FALSE(out[3].error.empty());
}

TEST(Sweep, ManipulatorRobustness) {
  std::vector<Scenario> list;
  for (const Mat& Rd : {Mat(0.5 * Mat::Identity(2, 2)), Mat(Mat::Identity(2, 2)), mat({{1, 0}, {0, 3}})}) {
    auto cfg = preset_json("manipulator.default");
    cfg["params"]["R_d"] = {{Rd(0, 0), Rd(0, 1)}, {Rd(1, 0), Rd(1, 1)}};
    list.push_back(build_preset(cfg).scenario);
  }
  for (const auto& r : sweep(list)) {
    ASSERT_TRUE(r.verdict) << r.error;
    EXPECT_TRUE(r.verdict->converged) << r.verdict->final_error;
  }
}

TEST(Realizations, XcAndWcAgree) {
  const auto a = integrate(pmsm_scenario(2.0, false));
  const auto b = integrate(pmsm_scenario(2.0, true));
  ASSERT_EQ(a.size(), b.size());
  double du = 0.0, dx = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    du = std::max(du, (a.u[k] - b.u[k]).cwiseAbs().maxCoeff());
    dx = std::max(dx, (a.x(k) - b.x(k)).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(du, 1e-8);
  EXPECT_LT(dx, 1e-8);
}

TEST(Regimes, LyapunovAuditSkipsSwitch) {
  const auto built = build_preset(preset_json("vtol.paper"));
  ASSERT_EQ(built.scenario.comp.regimes.size(), 2u);
  EXPECT_EQ(built.scenario.comp.regimes[1].t_start, 30.0);
  EXPECT_EQ(built.scenario.comp.regime_index(29.999), 0);
  EXPECT_EQ(built.scenario.comp.regime_index(30.0), 1);
}
