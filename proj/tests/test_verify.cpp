#include "support.hpp"

using namespace phiac;
using namespace phiac::test;

namespace {

AuditOptions quick(std::uint64_t seed = 1) {
  AuditOptions o;
  o.seed = seed;
  o.rate_samples = 300;
  o.horizon = 20.0;
  return o;
}

std::string failed_names(const AuditReport& r) {
  std::string out;
  for (const auto& c : r.checks)
    if (!c.passed) out += c.name + " (" + c.detail + "); ";
  return out;
}

bool has_failed(const AuditReport& r, const std::string& name) {
  for (const auto& c : r.checks)
    if (c.name == name) return !c.passed;
  return false;
}

/// m = s = 1 quadratic plant with full damping.
Quadratic scalar_plant() {
  Gen g(21);
  auto q = random_quadratic(g, 1, 1);
  q.x_star = vec({0.3, -0.2});
  return q;
}

}  // namespace

TEST(Audit1, PresetsPass) {
  for (const auto& info : list_presets()) {
    const auto b = build_preset(info.name);
    const auto r = run_audit(b, 1, 1);
    EXPECT_TRUE(r.passed()) << info.name << ": " << failed_names(r);
  }
}

TEST(Audit1, CorruptedDampingFailsGainValidity) {
  const auto q = scalar_plant();
  const auto plant = quadratic_plant(q);
  const auto bad = IacGains::unchecked(Mat::Zero(1, 1), -Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Identity(1, 1));
  const auto r = audit_proposition1(plant, bad, quick());
  EXPECT_FALSE(r.passed());
  EXPECT_TRUE(has_failed(r, "gain validity"));
}

TEST(Audit1, ScalarPlantPasses) {
  const auto plant = quadratic_plant(scalar_plant(), matched(-Mat::Identity(1, 1), vec({0.7})));
  const auto r = audit_proposition1(plant, identity_gains(1), quick());
  EXPECT_TRUE(r.passed()) << failed_names(r);
}

TEST(Audit1, RandomPlantsPass) {
  Gen g(22);
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = g.integer(1, 3), s = g.integer(1, 3);
    const auto q = random_quadratic(g, m, s);
    const Mat Rc1 = g.spd(m), Jc1 = g.skew(m);
    const auto gains = IacGains::constant(Jc1, Rc1, g.psd(m, m), g.spd(m));
    const auto plant = quadratic_plant(q, matched(Mat(Jc1 - Rc1), g.vec(m)));
    const auto r = audit_proposition1(plant, gains, quick(static_cast<std::uint64_t>(trial)));
    EXPECT_TRUE(r.passed()) << failed_names(r);
  }
}

TEST(Audit2, ManipulatorPasses) {
  const auto r = run_audit(build_preset("manipulator.default"), 2, 1);
  EXPECT_TRUE(r.passed()) << failed_names(r);
}

TEST(Audit2, ZeroDisturbanceIsDegenerateButPasses) {
  const auto plant = quadratic_plant(scalar_plant(), matched(-Mat::Identity(1, 1), vec({0.0})));
  const auto r = audit_proposition2(plant, identity_gains(1), vec({0.0}), quick());
  EXPECT_TRUE(r.passed()) << failed_names(r);
}

TEST(Audit2, FlippedInputMapFailsAssumption) {
  const auto plant = quadratic_plant(scalar_plant(), matched(Mat::Identity(1, 1), vec({1.0})));
  const auto r = audit_proposition2(plant, identity_gains(1), vec({1.0}), quick());
  EXPECT_FALSE(r.passed());
  EXPECT_TRUE(has_failed(r, "Assumption 1"));
  EXPECT_EQ(r.checks.size(), 1u);
}

TEST(Audit2, MissingMatchedModelIsReported) {
  const auto plant = quadratic_plant(scalar_plant());
  const auto r = audit_proposition2(plant, identity_gains(1), vec({1.0}), quick());
  EXPECT_FALSE(r.passed());
}

TEST(Audit3, PmsmPasses) {
  const auto r = run_audit(build_preset("pmsm.default"), 3, 1);
  EXPECT_TRUE(r.passed()) << failed_names(r);
}

TEST(Audit3, UnloadedMotorPasses) {
  auto cfg = preset_json("pmsm.default");
  cfg["params"]["tau_L"] = 0.0;
  cfg["params"]["R_m"] = 0.0;
  const auto b = build_preset(cfg);
  EXPECT_EQ(b.plant.disturbance().unmatched->d_bar(0), 0.0);
  const auto r = run_audit(b, 3, 1);
  EXPECT_TRUE(r.passed()) << failed_names(r);
}

TEST(Audit3, NonzeroRc2IsPreconditionFailure) {
  const auto b = build_preset("pmsm.default");
  const auto gains = systems::pmsm_gains(systems::PmsmParams{}, 5.0);
  const Vec none;
  const auto withRc2 = IacGains::constant(gains.J_c1(none), gains.R_c1(none), Mat::Identity(1, 1), gains.K_i());
  const auto r = audit_proposition3(b.plant, withRc2, b.plant.disturbance().unmatched->d_bar, b.d_u_raw, quick());
  EXPECT_FALSE(r.passed());
  EXPECT_TRUE(has_failed(r, "R_c2 = 0"));
}

TEST(Audit3, WrongDisturbanceEstimateFails) {
  const auto b = build_preset("pmsm.default");
  const Vec wrong = b.plant.disturbance().unmatched->d_bar * 2.0;
  const auto r = audit_proposition3(b.plant, b.gains, wrong, b.d_u_raw, quick());
  EXPECT_TRUE(has_failed(r, "Assumption 2"));
}

TEST(Audit4, QuadraticPlantPasses) {
  DisturbanceModel d = matched(-Mat::Identity(1, 1), vec({0.4}));
  d.unmatched = UnmatchedDisturbance{vec({-0.6}), 0.0};
  const auto plant = quadratic_plant(scalar_plant(), d);
  const auto r = audit_proposition4(plant, identity_gains(1, 0.0), vec({0.4}), vec({-0.6}), quick());
  EXPECT_TRUE(r.passed()) << failed_names(r);
}

TEST(Audit4, PmsmWithMatchedTermPasses) {
  const auto r = run_audit(build_preset("pmsm.default"), 4, 1);
  EXPECT_TRUE(r.passed()) << failed_names(r);
}

TEST(Audit5, VtolPasses) {
  const auto r = run_audit(build_preset("vtol.paper"), 5, 1);
  EXPECT_TRUE(r.passed()) << failed_names(r);
}

TEST(Audit5, ZeroDisturbancePasses) {
  auto cfg = preset_json("vtol.paper");
  cfg["params"]["d_m"] = {0.0, 0.0};
  const auto b = build_preset(cfg);
  const auto r = run_audit(b, 5, 1);
  EXPECT_TRUE(r.passed()) << failed_names(r);
}

TEST(Audit5, ManipulatorPasses) {
  const auto r = run_audit(build_preset("manipulator.default"), 5, 1);
  EXPECT_TRUE(r.passed()) << failed_names(r);
}

TEST(Audit5, StateDependentGainsRejected) {
  const auto b = build_preset("vtol.paper");
  const Vec none;
  const Mat Rc1 = b.gains.R_c1(none);
  const auto sd = IacGains::state_dependent([](const Vec&) { return Mat(Mat::Zero(2, 2)); },
                                            [Rc1](const Vec&) { return Rc1; },
                                            [](const Vec&) { return Mat(Mat::Identity(2, 2)); }, Mat::Identity(2, 2),
                                            b.plant.x_star());
  const auto r = audit_proposition5(*b.mech, sd, quick());
  EXPECT_FALSE(r.passed());
}

TEST(Audit, InapplicablePropositionIsConfigError) {
  EXPECT_THROW(run_audit(build_preset("vtol.paper"), 3, 1), ConfigError);
  EXPECT_THROW(run_audit(build_preset("pmsm.default"), 5, 1), ConfigError);
  EXPECT_THROW(run_audit(build_preset("pmsm.default"), 0, 1), ConfigError);
}

TEST(Audit, DeterministicGivenSeed) {
  const auto b = build_preset("pmsm.default");
  const auto a = audit_json(run_audit(b, 3, 7)).dump();
  const auto c = audit_json(run_audit(b, 3, 7)).dump();
  EXPECT_EQ(a, c);
}

TEST(Audit, FailureCarriesOffendingSample) {
  // R with a negative eigenvalue somewhere in the box
  Quadratic q = scalar_plant();
  q.R = mat({{1.0, 0.0}, {0.0, -0.1}});
  const auto plant = quadratic_plant(q, matched(-Mat::Identity(1, 1), vec({0.0})));
  const auto r = audit_proposition1(plant, identity_gains(1), quick());
  EXPECT_FALSE(r.passed());
  bool with_sample = false;
  for (const auto& c : r.checks)
    if (!c.passed && c.offending_sample) with_sample = true;
  EXPECT_TRUE(with_sample);
}
