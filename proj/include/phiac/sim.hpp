#pragma once

// Fixed-step RK4 integration of plant + controller compositions.
//
// The state is z = col(x, c) with c the controller state. Every stage of a step
// sees the disturbance schedule as it is at the start of the step, so a step
// activating at t_on takes effect at the first grid point k dt >= t_on (t_on is
// first snapped to the nearest grid point).

#include <algorithm>
#include <future>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phiac/closed_loop.hpp"

namespace phiac {

/// Equilibrium prediction governing the run from t_start on.
struct Regime {
  double t_start = 0.0;
  std::shared_ptr<const EquilibriumPrediction> prediction;
};

/// A plant + controller vector field with its analysis hooks.
struct Composition {
  std::string controller;
  Eigen::Index n = 0;  ///< plant states
  Eigen::Index c = 0;  ///< controller states
  Eigen::Index m = 0;  ///< inputs
  std::vector<std::string> state_names;
  std::vector<std::string> controller_names;
  std::vector<std::string> state_panels;  ///< plot panel per plant state; "state" when empty
  std::function<Vec(double t, const Vec& z)> rhs;
  std::function<Vec(double t, const Vec& z)> input;
  std::function<Vec(const Vec& z)> to_w;       ///< closed-loop coordinates
  std::function<double(const Vec& w)> H_cl;
  std::vector<double> switch_times;           ///< disturbance activation times
  std::vector<Regime> regimes;                ///< sorted by t_start; may be empty

  [[nodiscard]] const EquilibriumPrediction* prediction_at(double t) const {
    const EquilibriumPrediction* out = nullptr;
    for (const auto& r : regimes)
      if (t >= r.t_start) out = r.prediction.get();
    return out;
  }

  [[nodiscard]] int regime_index(double t) const {
    int k = -1;
    for (std::size_t i = 0; i < regimes.size(); ++i)
      if (t >= regimes[i].t_start) k = static_cast<int>(i);
    return k;
  }
};

struct Scenario {
  std::string name;
  Composition comp;
  Vec z0;
  double t_end = 1.0;
  double dt = 1e-3;
  int stride = 1;
  std::shared_ptr<const EquilibriumPrediction> target;  ///< for the verdict; optional
  double tol = 1e-2;

  void validate() const {
    if (!(dt > 0.0) || !(t_end > 0.0)) throw ConfigError("scenario: dt and t_end must be positive");
    if (stride < 1) throw ConfigError("scenario: stride must be at least 1");
    if (z0.size() != comp.n + comp.c) throw ConfigError("scenario: initial state has wrong dimension");
    if (!comp.rhs || !comp.input) throw ConfigError("scenario: composition incomplete");
  }
};

struct Trajectory {
  std::vector<std::string> state_names;
  std::vector<std::string> controller_names;
  std::vector<std::string> state_panels;
  Eigen::Index n = 0, c = 0, m = 0;
  std::vector<double> t;
  std::vector<Vec> z;  ///< col(x, controller state)
  std::vector<Vec> u;
  std::vector<Vec> w;  ///< closed-loop coordinates (empty vectors when unavailable)
  std::vector<double> H_cl, W, Y_a, Y_u;
  std::vector<int> regime;
  double max_step_error = 0.0;  ///< largest step-doubling estimate
  std::vector<std::string> warnings;

  [[nodiscard]] std::size_t size() const { return t.size(); }
  [[nodiscard]] Vec x(std::size_t k) const { return z[k].head(n); }
  [[nodiscard]] Vec xc(std::size_t k) const { return z[k].tail(c); }
};

namespace detail {

inline Vec rk4_step(const Composition& comp, double t, const Vec& z, double h) {
  const Vec k1 = comp.rhs(t, z);
  const Vec k2 = comp.rhs(t, z + 0.5 * h * k1);
  const Vec k3 = comp.rhs(t, z + 0.5 * h * k2);
  const Vec k4 = comp.rhs(t, z + h * k3);
  return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Maps grid index k to the schedule time used throughout step k.
class GridClock {
 public:
  GridClock(const std::vector<double>& switches, double dt) : dt_(dt) {
    for (double s : switches) snapped_.emplace_back(s, std::llround(s / dt));
  }
  [[nodiscard]] double operator()(long long k) const {
    double t = static_cast<double>(k) * dt_;
    for (const auto& [s, ks] : snapped_) {
      if (k >= ks && t < s) t = s;
      if (k < ks && t >= s) t = std::nextafter(s, -std::numeric_limits<double>::infinity());
    }
    return std::max(t, 0.0);
  }
  [[nodiscard]] bool crosses(long long k0, long long k1) const {
    for (const auto& [s, ks] : snapped_)
      if (k0 < ks && k1 >= ks) return true;
    return false;
  }

 private:
  double dt_;
  std::vector<std::pair<double, long long>> snapped_;
};

inline void record(const Composition& comp, Trajectory& tr, double t, const Vec& z) {
  tr.t.push_back(t);
  tr.z.push_back(z);
  tr.u.push_back(comp.input(t, z));
  const int ri = comp.regime_index(t);
  tr.regime.push_back(ri);
  if (comp.to_w) {
    const Vec w = comp.to_w(z);
    tr.w.push_back(w);
    tr.H_cl.push_back(comp.H_cl ? comp.H_cl(w) : 0.0);
    if (const auto* eq = comp.prediction_at(t)) {
      tr.W.push_back(shifted_lyapunov(*eq, w));
      const auto y = detect_outputs(*eq, w);
      tr.Y_a.push_back(y.Y_a.norm());
      tr.Y_u.push_back(y.Y_u.norm());
    } else {
      tr.W.push_back(tr.H_cl.back());
      tr.Y_a.push_back(0.0);
      tr.Y_u.push_back(0.0);
    }
  } else {
    tr.w.emplace_back();
    tr.H_cl.push_back(comp.H_cl ? comp.H_cl(z) : 0.0);
    tr.W.push_back(tr.H_cl.back());
    tr.Y_a.push_back(0.0);
    tr.Y_u.push_back(0.0);
  }
}

}  // namespace detail

inline constexpr int kStepDoublingEvery = 100;
inline constexpr double kStepDoublingWarn = 1e-6;

/// Classical RK4 with fixed step. Records every stride-th grid point and the
/// final one.
inline Trajectory integrate(const Scenario& sc) {
  sc.validate();
  const auto& comp = sc.comp;
  const long long steps = std::llround(sc.t_end / sc.dt);
  const detail::GridClock clock(comp.switch_times, sc.dt);
  Trajectory tr;
  tr.state_names = comp.state_names;
  tr.controller_names = comp.controller_names;
  tr.state_panels = comp.state_panels;
  if (tr.state_panels.size() != static_cast<std::size_t>(comp.n)) tr.state_panels.assign(comp.n, "state");
  tr.n = comp.n;
  tr.c = comp.c;
  tr.m = comp.m;
  tr.t.reserve(static_cast<std::size_t>(steps / sc.stride + 2));
  Vec z = sc.z0;
  if (!z.allFinite()) throw DivergenceError("initial state is not finite", 0.0);
  detail::record(comp, tr, 0.0, z);
  for (long long k = 0; k < steps; ++k) {
    const double ts = clock(k);
    if (k % kStepDoublingEvery == 0 && k + 2 <= steps && !clock.crosses(k, k + 2)) {
      const Vec coarse = detail::rk4_step(comp, ts, z, 2.0 * sc.dt);
      const Vec half = detail::rk4_step(comp, ts, z, sc.dt);
      const Vec fine = detail::rk4_step(comp, clock(k + 1), half, sc.dt);
      const double est = (fine - coarse).norm() / 15.0;
      tr.max_step_error = std::max(tr.max_step_error, est);
      if (est > kStepDoublingWarn * (1.0 + z.norm()) && tr.warnings.size() < 10)
        tr.warnings.push_back("step-doubling error estimate " + std::to_string(est) + " at t = " +
                              std::to_string(static_cast<double>(k) * sc.dt) + "; dt may be too coarse");
    }
    z = detail::rk4_step(comp, ts, z, sc.dt);
    const double t_next = static_cast<double>(k + 1) * sc.dt;
    if (!z.allFinite()) throw DivergenceError("state became non-finite at t = " + std::to_string(t_next), t_next);
    if ((k + 1) % sc.stride == 0 || k + 1 == steps) detail::record(comp, tr, clock(k + 1), z);
  }
  for (std::size_t i = 0; i < tr.size(); ++i) tr.t[i] = static_cast<double>(std::llround(tr.t[i] / sc.dt)) * sc.dt;
  return tr;
}

struct ConvergenceVerdict {
  bool converged = false;
  double final_error = 0.0;
  std::optional<double> first_time_within;  ///< from then on the error stays below tol
  double max_lyapunov_increase = 0.0;       ///< over recorded steps inside one regime
  bool lyapunov_monotone = true;
  double tol = 0.0;
  double window_start = 0.0;
  double window_end = 0.0;
};

inline constexpr double kLyapunovStepTol = 1e-7;

/// Distance of w to the prediction over [t_from, t_to] (whole run by default).
/// The Lyapunov audit skips pairs of samples lying in different regimes.
inline ConvergenceVerdict check_convergence(const Trajectory& tr, const EquilibriumPrediction& eq, double tol,
                                            double t_from = 0.0,
                                            double t_to = std::numeric_limits<double>::infinity()) {
  ConvergenceVerdict v;
  v.tol = tol;
  std::size_t first = tr.size(), last = 0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    if (tr.t[k] + 1e-12 < t_from || tr.t[k] > t_to + 1e-12) continue;
    first = std::min(first, k);
    last = k;
  }
  if (first == tr.size()) throw ContractViolation("check_convergence: empty window");
  if (tr.w[first].size() != eq.w_bar.size())
    throw ContractViolation("check_convergence: trajectory and prediction dimensions differ");
  v.window_start = tr.t[first];
  v.window_end = tr.t[last];
  std::optional<std::size_t> entered;
  for (std::size_t k = first; k <= last; ++k) {
    const double err = (tr.w[k] - eq.w_bar).norm();
    if (err < tol) {
      if (!entered) entered = k;
    } else {
      entered.reset();
    }
    if (k > first && tr.regime[k] == tr.regime[k - 1])
      v.max_lyapunov_increase = std::max(v.max_lyapunov_increase, tr.W[k] - tr.W[k - 1]);
  }
  v.final_error = (tr.w[last] - eq.w_bar).norm();
  if (entered) v.first_time_within = tr.t[*entered];
  v.converged = v.final_error < tol;
  v.lyapunov_monotone = v.max_lyapunov_increase <= kLyapunovStepTol;
  return v;
}

struct SweepResult {
  std::string name;
  std::optional<Trajectory> trajectory;
  std::optional<ConvergenceVerdict> verdict;
  std::string error;  ///< empty on success

  [[nodiscard]] bool ok() const { return error.empty(); }
};

/// Runs every scenario on its own task; results come back in input order.
inline std::vector<SweepResult> sweep(const std::vector<Scenario>& scenarios) {
  std::vector<std::future<SweepResult>> jobs;
  jobs.reserve(scenarios.size());
  for (const auto& sc : scenarios) {
    jobs.push_back(std::async(std::launch::async, [&sc] {
      SweepResult r;
      r.name = sc.name;
      try {
        r.trajectory = integrate(sc);
        if (sc.target) r.verdict = check_convergence(*r.trajectory, *sc.target, sc.tol);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      return r;
    }));
  }
  std::vector<SweepResult> out;
  out.reserve(jobs.size());
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

// ---------------------------------------------------------------------------
// Compositions

namespace detail {
inline std::vector<std::string> indexed(const std::string& stem, Eigen::Index count) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < count; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

inline std::vector<double> switches_of(const PhSystem& plant) {
  std::vector<double> out;
  const auto& d = plant.disturbance();
  if (d.matched && d.matched->t_on > 0.0) out.push_back(d.matched->t_on);
  if (d.unmatched && d.unmatched->t_on > 0.0) out.push_back(d.unmatched->t_on);
  return out;
}
}  // namespace detail

/// Prediction for the disturbances active from time tau on: matched, unmatched
/// or mixed as appropriate, the unshifted equilibrium when none is active.
inline EquilibriumPrediction equilibrium_for(const PhSystem& plant, const IacGains& gains, double tau) {
  const auto& d = plant.disturbance();
  const auto m = plant.partition().m;
  const bool ma = d.matched && d.matched->t_on <= tau;
  const bool un = d.unmatched && d.unmatched->t_on <= tau;
  if (ma && un) return equilibrium_mixed(plant, gains, d.matched->d_bar, d.unmatched->d_bar);
  if (ma) return equilibrium_matched(plant, gains, d.matched->d_bar);
  if (un) return equilibrium_unmatched(plant, gains, d.unmatched->d_bar);
  if (d.matched) return equilibrium_matched(plant, gains, Vec::Zero(m));
  return equilibrium_unmatched(plant, gains, Vec::Zero(m));
}

/// One regime per distinct activation time (plus t = 0).
inline std::vector<Regime> schedule_regimes(const PhSystem& plant, const IacGains& gains) {
  std::vector<double> starts{0.0};
  for (double s : detail::switches_of(plant)) starts.push_back(s);
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
  std::vector<Regime> out;
  for (double s : starts)
    out.push_back({s, std::make_shared<const EquilibriumPrediction>(equilibrium_for(plant, gains, s))});
  return out;
}

/// Plant with the controller in its x_c realization. The loop's plant carries
/// the disturbance schedule.
inline Composition compose_iac(std::shared_ptr<const ClosedLoop> loop, std::vector<Regime> regimes = {},
                               std::vector<std::string> state_names = {}) {
  const auto& plant = loop->plant();
  const auto n = plant.partition().n(), m = plant.partition().m;
  Composition c;
  c.controller = "iac";
  c.n = n;
  c.c = m;
  c.m = m;
  c.state_names = state_names.empty() ? detail::indexed("x", n) : std::move(state_names);
  c.controller_names = detail::indexed("xc", m);
  c.rhs = [loop, n, m](double t, const Vec& z) {
    const auto [dx, dxc] = loop->composed_drift(z.head(n), z.tail(m), t);
    return concat(dx, dxc);
  };
  c.input = [loop, n, m](double, const Vec& z) {
    return control_law(loop->plant(), loop->gains(), z.head(n), z.tail(m));
  };
  c.to_w = [loop, n, m](const Vec& z) { return loop->to_w(z.head(n), z.tail(m)); };
  c.H_cl = [loop](const Vec& w) { return loop->H_cl(w); };
  c.switch_times = detail::switches_of(plant);
  c.regimes = std::move(regimes);
  return c;
}

/// Same controller with integrator state w_c = x_a - x_c.
inline Composition compose_iac_wc(std::shared_ptr<const ClosedLoop> loop, std::vector<Regime> regimes = {},
                                  std::vector<std::string> state_names = {}) {
  Composition c = compose_iac(loop, std::move(regimes), std::move(state_names));
  const auto n = c.n, m = c.c;
  c.controller = "iac_wc";
  c.controller_names = detail::indexed("wc", m);
  c.rhs = [loop, n, m](double t, const Vec& z) {
    const Vec x = z.head(n);
    const auto& plant = loop->plant();
    const auto cr = control_law_wc(plant, loop->gains(), x, z.tail(m), plant.d_a(x, t));
    return concat(plant.drift(x, cr.u, t), cr.rate);
  };
  c.input = [loop, n, m](double t, const Vec& z) {
    const Vec x = z.head(n);
    const auto& plant = loop->plant();
    return control_law_wc(plant, loop->gains(), x, z.tail(m), plant.d_a(x, t)).u;
  };
  c.to_w = [n, m](const Vec& z) { return concat(z.head(n), z.tail(m)); };
  return c;
}

/// Damping-free law on a plant whose R_aa is constant and R_au = 0. The
/// analysis loop (built with the true damping) only feeds W and H_cl.
inline Composition compose_r8(const PhSystem& plant, const Mat& R_c2, double kappa,
                              std::shared_ptr<const ClosedLoop> analysis, std::vector<Regime> regimes = {},
                              std::vector<std::string> state_names = {}) {
  const auto n = plant.partition().n(), m = plant.partition().m;
  auto p = std::make_shared<const PhSystem>(plant);
  Composition c;
  c.controller = "r8";
  c.n = n;
  c.c = m;
  c.m = m;
  c.state_names = state_names.empty() ? detail::indexed("x", n) : std::move(state_names);
  c.controller_names = detail::indexed("xc", m);
  c.rhs = [p, R_c2, kappa, n, m](double t, const Vec& z) {
    const Vec x = z.head(n);
    const auto cr = r8_control_law(*p, R_c2, kappa, x, z.tail(m));
    return concat(p->drift(x, cr.u, t), cr.rate);
  };
  c.input = [p, R_c2, kappa, n, m](double, const Vec& z) {
    return r8_control_law(*p, R_c2, kappa, z.head(n), z.tail(m)).u;
  };
  if (analysis) {
    c.to_w = [analysis, n, m](const Vec& z) { return analysis->to_w(z.head(n), z.tail(m)); };
    c.H_cl = [analysis](const Vec& w) { return analysis->H_cl(w); };
  }
  c.switch_times = detail::switches_of(plant);
  c.regimes = std::move(regimes);
  return c;
}

/// Integral action on the passive output: u = -x_c, dx_c = K_i y_a. Stored
/// energy H + 1/2 x_c^T K_i^{-1} x_c.
inline Composition compose_baseline(const PhSystem& plant, const Mat& K_i,
                                    std::vector<std::string> state_names = {}) {
  const auto n = plant.partition().n(), m = plant.partition().m;
  auto p = std::make_shared<const PhSystem>(plant);
  const Mat Kinv = linalg::inverse(K_i, "K_i");
  Composition c;
  c.controller = "baseline";
  c.n = n;
  c.c = m;
  c.m = m;
  c.state_names = state_names.empty() ? detail::indexed("x", n) : std::move(state_names);
  c.controller_names = detail::indexed("xc", m);
  c.rhs = [p, K_i, n, m](double t, const Vec& z) {
    const Vec x = z.head(n);
    const auto cr = baseline_passive_iac(*p, K_i, x, z.tail(m));
    return concat(p->drift(x, cr.u, t), cr.rate);
  };
  c.input = [p, K_i, n, m](double, const Vec& z) { return baseline_passive_iac(*p, K_i, z.head(n), z.tail(m)).u; };
  c.H_cl = [p, Kinv, n, m](const Vec& z) {
    return p->H().value(z.head(n)) + 0.5 * linalg::weighted_sq(z.tail(m), Kinv);
  };
  c.switch_times = detail::switches_of(plant);
  return c;
}

}  // namespace phiac
