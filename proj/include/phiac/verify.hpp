#pragma once

// Property audits of the closed-loop claims. Each audit samples states with
// its own seeded generator, never throws on a failed property and never
// touches the system under test; failures are report entries.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phiac/mech.hpp"
#include "phiac/sim.hpp"

namespace phiac {

inline constexpr int kAuditSchemaVersion = 1;

struct AuditCheck {
  std::string name;
  bool passed = false;
  double worst_margin = 0.0;  ///< >= 0 when passed; how far the worst sample is from failing
  std::optional<Vec> offending_sample;
  std::string detail;
};

struct AuditReport {
  std::string suite;
  std::string system;
  std::uint64_t seed = 0;
  std::vector<AuditCheck> checks;

  [[nodiscard]] bool passed() const {
    if (checks.empty()) return false;
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }

  AuditCheck& add(std::string name, bool passed, double margin, std::string detail = {},
                  std::optional<Vec> sample = std::nullopt) {
    checks.push_back({std::move(name), passed, margin, std::move(sample), std::move(detail)});
    return checks.back();
  }
};

struct AuditOptions {
  std::uint64_t seed = 1;
  int samples = 100;        ///< structural / identity samples
  int rate_samples = 1000;  ///< Lyapunov rate-bound samples
  double radius = 5.0;      ///< sampling box half-width around the equilibrium
  double shell_radius = 0.1;
  int shell_directions = 200;
  double run_radius = 0.5;  ///< decay-run initial offset (infinity norm)
  double horizon = 30.0;
  double dt = 1e-3;
  double decay_ratio = 1e-2;  ///< W(end) <= ratio * W(0) and output shrinkage
};

namespace detail {

/// Tracks the worst sample of a "value <= limit" style property.
struct Worst {
  double margin = std::numeric_limits<double>::infinity();
  std::optional<Vec> sample;
  void see(double m, const Vec& x) {
    if (m < margin) {
      margin = m;
      sample = x;
    }
  }
  [[nodiscard]] bool ok() const { return margin >= 0.0; }
};

inline std::vector<Vec> sample_box(const Vec& center, double radius, int count, std::uint64_t seed) {
  BoxSampler s(center, radius, seed);
  return s.draw(static_cast<std::size_t>(count));
}

inline void structure_checks(AuditReport& rep, const PhSystem& plant, const std::vector<Vec>& xs) {
  const auto st = check_structure(plant, xs);
  rep.add("plant J skew / R symmetric PSD", st.passed,
          std::min({tol::kStructureRel - st.worst_skew_defect, tol::kStructureRel - st.worst_symmetry_defect,
                    st.min_R_eig - tol::kPsdFloor}),
          st.passed ? "min eig(R_uu) " + std::to_string(st.min_R_uu_eig)
                    : st.violations.front().property + " at sample " + std::to_string(st.violations.front().sample),
          st.passed ? std::nullopt : std::optional<Vec>(xs[st.violations.front().sample]));
}

inline void closed_loop_structure(AuditReport& rep, const ClosedLoop& loop, const std::vector<Vec>& ws) {
  Worst skew, psd;
  for (const auto& w : ws) {
    const Mat J = loop.J_cl(w), R = loop.R_cl(w);
    skew.see(tol::kStructureRel - linalg::skew_defect(J) / (1.0 + J.norm()), w);
    psd.see(std::min(linalg::min_sym_eig(R) - tol::kPsdFloor,
                     tol::kStructureRel - linalg::symmetry_defect(R) / (1.0 + R.norm())),
            w);
  }
  rep.add("J_cl skew-symmetric", skew.ok(), skew.margin, {}, skew.ok() ? std::nullopt : skew.sample);
  rep.add("R_cl symmetric PSD", psd.ok(), psd.margin, {}, psd.ok() ? std::nullopt : psd.sample);
}

inline void equilibrium_check(AuditReport& rep, const EquilibriumPrediction& eq) {
  rep.add(std::string(to_string(eq.kind)) + " equilibrium certified", eq.residual < tol::kStationary, tol::kStationary - eq.residual,
          "w_bar = " + linalg::format(eq.w_bar) + ", residual " + std::to_string(eq.residual));
}

inline void lyapunov_checks(AuditReport& rep, const EquilibriumPrediction& eq, const AuditOptions& o) {
  const double shell = shell_min_lyapunov(eq, o.shell_radius, o.shell_directions, o.seed + 11);
  rep.add("W positive on shell", shell > 0.0, shell,
          "radius " + std::to_string(o.shell_radius) + ", min W " + std::to_string(shell));
  Worst rate, sign;
  for (const auto& w : sample_box(eq.w_bar, o.radius, o.rate_samples, o.seed + 13)) {
    const auto rb = lyapunov_rate_bound(eq, w);
    rate.see(rb.bound + 1e-9 * (1.0 + std::abs(rb.bound)) - rb.rate, w);
    sign.see(1e-9 * (1.0 + std::abs(rb.bound)) - rb.bound, w);
  }
  rep.add("dW/dt <= bound", rate.ok(), rate.margin, std::to_string(o.rate_samples) + " samples",
          rate.ok() ? std::nullopt : rate.sample);
  rep.add("bound <= 0", sign.ok(), sign.margin, {}, sign.ok() ? std::nullopt : sign.sample);
}

/// Simulates the loop with disturbances always on from a seeded offset around
/// the equilibrium and checks monotone decay of W and shrinking outputs.
inline void decay_run(AuditReport& rep, const EquilibriumPrediction& eq, const AuditOptions& o, bool unmatched_output) {
  Vec w0 = eq.w_bar;
  BoxSampler s(Vec::Zero(w0.size()), o.run_radius, o.seed + 17);
  w0 += s();
  const auto [x0, xc0] = eq.loop->from_w(w0);
  Scenario sc;
  sc.name = "decay";
  auto loop = eq.loop;
  sc.comp = compose_iac(loop, {{0.0, std::make_shared<const EquilibriumPrediction>(eq)}});
  sc.z0 = concat(x0, xc0);
  sc.t_end = o.horizon;
  sc.dt = o.dt;
  sc.stride = 10;
  try {
    const Trajectory tr = integrate(sc);
    const auto v = check_convergence(tr, eq, std::numeric_limits<double>::infinity());
    const double W0 = tr.W.front(), W1 = tr.W.back();
    rep.add("W non-increasing along run", v.lyapunov_monotone, kLyapunovStepTol - v.max_lyapunov_increase,
            "max step increase " + std::to_string(v.max_lyapunov_increase));
    const bool decayed = W1 <= o.decay_ratio * std::max(W0, 1e-300) || W1 < 1e-12;
    rep.add("W decays along run", decayed, o.decay_ratio * W0 - W1,
            "W(0) = " + std::to_string(W0) + ", W(end) = " + std::to_string(W1));
    const auto& Y = unmatched_output ? tr.Y_u : tr.Y_a;
    const double y0 = std::max(1.0, Y.front()), y1 = Y.back();
    rep.add(unmatched_output ? "|Y_u| -> 0" : "|Y_a| -> 0", y1 <= o.decay_ratio * y0, o.decay_ratio * y0 - y1,
            "final " + std::to_string(y1) + " (empirical detectability evidence)");
  } catch (const NumericError& e) {
    rep.add("decay run", false, -1.0, e.what(), w0);
  }
}

template <class F>
bool guarded(AuditReport& rep, const std::string& what, F&& f) {
  try {
    f();
    return true;
  } catch (const Error& e) {
    rep.add(what, false, -1.0, e.what());
    return false;
  }
}


}  // namespace detail

inline AuditReport audit_proposition1(const PhSystem& plant, const IacGains& gains, const AuditOptions& o = {}) {
  AuditReport rep{"proposition1", plant.name(), o.seed, {}};
  if (!detail::guarded(rep, "gain validity", [&] { gains.validate_at(plant.x_star()); })) return rep;
  rep.add("gain validity", true, 0.0);
  const ClosedLoop loop(plant.with_disturbance(plant.disturbance().always_on()), gains);
  const auto m = plant.partition().m;
  const Vec center = concat(plant.x_star(), Vec::Zero(m));
  const auto ws = detail::sample_box(center, o.radius, o.samples, o.seed);
  std::vector<Vec> xs;
  for (const auto& w : ws) xs.push_back(loop.x_of(w));
  detail::structure_checks(rep, loop.plant(), xs);
  detail::closed_loop_structure(rep, loop, ws);
  detail::Worst ident, grad;
  for (const auto& w : ws) {
    const auto [x, xc] = loop.from_w(w);
    const auto [dx, dxc] = loop.composed_drift(x, xc, 0.0);
    const Vec pushed = concat(dx, Vec(dx.head(m) - dxc));
    const Vec cl = loop.drift(w, 0.0);
    ident.see(1e-10 * (1.0 + cl.norm()) - (pushed - cl).norm(), w);
    const Vec u = control_law(loop.plant(), gains, x, xc);
    const Vec dx_plain = loop.plant().drift(x, u, 0.0);
    ident.see(1e-10 * (1.0 + dx.norm()) - (dx_plain - dx).norm(), w);
    const Vec g = loop.grad_H_cl(w);
    const Vec expect = concat(loop.plant().H().grad(x), Vec(gains.K_i() * loop.w_c_of(w)));
    const Vec fd = finite_diff_gradient([&](const Vec& v) { return loop.H_cl(v); }, w);
    const double err = std::max((g - expect).lpNorm<Eigen::Infinity>(), (g - fd).lpNorm<Eigen::Infinity>()) /
                       (1.0 + g.lpNorm<Eigen::Infinity>());
    grad.see(1e-6 - err, w);
  }
  rep.add("closed-loop pH identity", ident.ok(), ident.margin, "drift == pushforward of plant + controller",
          ident.ok() ? std::nullopt : ident.sample);
  rep.add("grad H_cl block formula", grad.ok(), grad.margin, {}, grad.ok() ? std::nullopt : grad.sample);
  return rep;
}

inline AuditReport audit_proposition2(const PhSystem& plant, const IacGains& gains, const Vec& d_bar_a,
                                      const AuditOptions& o = {}) {
  AuditReport rep{"proposition2", plant.name(), o.seed, {}};
  if (!plant.disturbance().matched) {
    rep.add("Assumption 1", false, -1.0, "no matched disturbance model");
    return rep;
  }
  const auto xs = detail::sample_box(plant.x_star(), o.radius, o.samples, o.seed);
  const auto a1 = check_assumption_matched(plant, xs);
  rep.add("Assumption 1", a1.passed, a1.worst_margin,
          a1.passed ? (a1.state_dependent ? "state-dependent G_d; gains follow G_d(x)" : "")
                    : a1.violation->detail,
          a1.passed ? std::nullopt : std::optional<Vec>(xs[a1.violation->sample]));
  if (!a1.passed) return rep;
  std::optional<EquilibriumPrediction> eq;
  if (!detail::guarded(rep, "matched equilibrium certified", [&] { eq = equilibrium_matched(plant, gains, d_bar_a); }))
    return rep;
  detail::equilibrium_check(rep, *eq);
  detail::lyapunov_checks(rep, *eq, o);
  detail::decay_run(rep, *eq, o, false);
  return rep;
}

inline AuditReport audit_proposition3(const PhSystem& plant, const IacGains& gains, const Vec& d_bar_u,
                                      const VecField& d_u_raw = {}, const AuditOptions& o = {}) {
  AuditReport rep{"proposition3", plant.name(), o.seed, {}};
  const double rc2 = gains.R_c2(plant.x_star()).norm();
  rep.add("R_c2 = 0", rc2 <= 1e-12, 1e-12 - rc2);
  if (rc2 > 1e-12) return rep;
  const auto xs = detail::sample_box(plant.x_star(), o.radius, o.samples, o.seed);
  if (d_u_raw) {
    const auto a2 = check_assumption_unmatched(plant, d_u_raw, xs);
    const double mismatch = a2.passed ? (a2.d_bar - d_bar_u).norm() : 0.0;
    const bool ok = a2.passed && mismatch <= 1e-8 * (1.0 + d_bar_u.norm());
    rep.add("Assumption 2", ok, a2.passed ? 1e-8 - mismatch : -a2.max_residual,
            a2.passed ? "recovered dbar_u " + linalg::format(a2.d_bar) : a2.violation->detail);
    if (!ok) return rep;
  }
  const auto a3 = check_assumption_min(plant, d_bar_u);
  rep.add("Assumption 3", a3.passed, a3.passed ? a3.min_hessian_eig : -1.0,
          a3.passed ? "x_bar " + linalg::format(a3.x_bar) : a3.message);
  if (!a3.passed) return rep;
  std::optional<EquilibriumPrediction> eq;
  if (!detail::guarded(rep, "unmatched equilibrium certified",
                       [&] { eq = equilibrium_unmatched(plant, gains, d_bar_u); }))
    return rep;
  detail::equilibrium_check(rep, *eq);
  // drift = [J_cl - R_cl] grad Hb_cl - col((J_c1 - R_c1) dbar_u, 0, (J_c1 - R_c1) dbar_u)
  const auto& loop = *eq->loop;
  const auto m = loop.m();
  detail::Worst ident;
  for (const auto& w : detail::sample_box(eq->w_bar, o.radius, o.samples, o.seed + 5)) {
    const Vec x = loop.x_of(w);
    Vec gb = loop.grad_H_cl(w);
    gb.head(m) += d_bar_u;
    const Vec gd = (gains.J_c1(x) - gains.R_c1(x)) * d_bar_u;
    Vec rhs = (loop.J_cl(w) - loop.R_cl(w)) * gb;
    rhs.head(m) -= gd;
    rhs.tail(m) -= gd;
    const Vec dr = loop.drift(w, 0.0);
    ident.see(1e-10 * (1.0 + dr.norm()) - (rhs - dr).norm(), w);
  }
  rep.add("shifted-energy dynamics identity", ident.ok(), ident.margin, {}, ident.ok() ? std::nullopt : ident.sample);
  detail::lyapunov_checks(rep, *eq, o);
  detail::decay_run(rep, *eq, o, true);
  return rep;
}

inline AuditReport audit_proposition4(const PhSystem& plant, const IacGains& gains, const Vec& d_bar_a,
                                      const Vec& d_bar_u, const AuditOptions& o = {}) {
  AuditReport rep{"proposition4", plant.name(), o.seed, {}};
  const double rc2 = gains.R_c2(plant.x_star()).norm();
  rep.add("R_c2 = 0", rc2 <= 1e-12, 1e-12 - rc2);
  if (rc2 > 1e-12) return rep;
  if (!plant.disturbance().matched) {
    rep.add("Assumption 1", false, -1.0, "no matched disturbance model");
    return rep;
  }
  const auto xs = detail::sample_box(plant.x_star(), o.radius, o.samples, o.seed);
  const auto a1 = check_assumption_matched(plant, xs);
  rep.add("Assumption 1", a1.passed, a1.worst_margin, a1.passed ? "" : a1.violation->detail);
  if (!a1.passed) return rep;
  std::optional<EquilibriumPrediction> eq;
  if (!detail::guarded(rep, "mixed equilibrium certified",
                       [&] { eq = equilibrium_mixed(plant, gains, d_bar_a, d_bar_u); }))
    return rep;
  detail::equilibrium_check(rep, *eq);
  detail::lyapunov_checks(rep, *eq, o);
  detail::decay_run(rep, *eq, o, true);
  return rep;
}

inline AuditReport audit_proposition5(const TransformedMech& tm, const IacGains& gains, const AuditOptions& o = {}) {
  const auto& sys = tm.system();
  AuditReport rep{"proposition5", sys.name, o.seed, {}};
  if (!detail::guarded(rep, "constant gains, R_c1, R_c2, K_i > 0", [&] {
        gains.validate_at(Vec());
        detail::require_mech_gains(gains, tm.m());
      }))
    return rep;
  rep.add("constant gains, R_c1, R_c2, K_i > 0", true, linalg::min_sym_eig(gains.R_c2(Vec())));
  const auto l = tm.l(), m = tm.m();
  const auto qp = detail::sample_box(concat(sys.q_star, Vec::Zero(l)), o.radius, o.samples, o.seed);
  detail::Worst energy, push, annih;
  for (const auto& s : qp) {
    const Vec q = s.head(l), pb = s.tail(l);
    const Vec p = tm.to_p(q, pb);
    const double hd = tm.Hd(q, pb);
    energy.see(1e-10 * (1.0 + std::abs(hd)) - std::abs(tm.H(q, p) - hd), s);
    BoxSampler us(Vec::Zero(m), 1.0, o.seed + 3);
    const Vec u = us();
    const Vec od = tm.original_drift(q, pb, u, 0.0);
    const Vec td = tm.transformed_drift(q, p, u, 0.0);
    const Vec pf = concat(od.head(l), Vec(tm.T(q) * od.tail(l) + tm.jac_Tp(q, pb) * od.head(l)));
    push.see(1e-8 * (1.0 + td.norm()) - (pf - td).norm(), s);
    Mat target = Mat::Zero(l, m);
    target.topRows(m) = Mat::Identity(m, m);
    annih.see(1e-12 - (tm.T(q) * sys.G(q) - target).norm(), s);
  }
  rep.add("energy invariance H(q, T pb) = Hd(q, pb)", energy.ok(), energy.margin, {},
          energy.ok() ? std::nullopt : energy.sample);
  rep.add("drift pushforward equivalence", push.ok(), push.margin, {}, push.ok() ? std::nullopt : push.sample);
  rep.add("T G = col(I, 0)", annih.ok(), annih.margin, {}, annih.ok() ? std::nullopt : annih.sample);
  detail::guarded(rep, "jac_Tp matches finite differences", [&] {
    const double err = tm.validate_jacobian(qp);
    rep.add("jac_Tp matches finite differences", true, 1e-5 - err);
  });
  const Vec none;
  const Mat Gd = gains.J_c1(none) - gains.R_c1(none);
  const PhSystem plant = partition_mech(tm, Gd);
  detail::structure_checks(rep, plant, [&] {
    std::vector<Vec> xs;
    for (const auto& s : qp) xs.push_back(mech_state(tm, s.head(l), s.tail(l)));
    return xs;
  }());
  detail::Worst spec;
  BoxSampler cs(Vec::Zero(m), o.radius, o.seed + 7);
  for (const auto& s : qp) {
    const Vec q = s.head(l), p = tm.to_p(q, s.tail(l)), xc = cs();
    const auto mi = mech_iac(tm, gains, q, p, xc);
    const Vec x = concat(p, q);
    const Vec u = control_law(plant, gains, x, xc), r = integrator_dynamics(plant, gains, x, xc);
    spec.see(1e-12 * (1.0 + u.norm() + r.norm()) - (mi.u - u).norm() - (mi.rate - r).norm(), s);
  }
  rep.add("mechanical law == general law on partitioned form", spec.ok(), spec.margin, {},
          spec.ok() ? std::nullopt : spec.sample);
  std::optional<EquilibriumPrediction> eq;
  if (!detail::guarded(rep, "mechanical equilibrium certified", [&] { eq = mech_equilibrium(tm, gains, sys.d_m); }))
    return rep;
  detail::equilibrium_check(rep, *eq);
  detail::lyapunov_checks(rep, *eq, o);
  detail::decay_run(rep, *eq, o, false);
  return rep;
}

}  // namespace phiac
