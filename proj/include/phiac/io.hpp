#pragma once

// Serialization: trajectory CSV, tidy plot CSV, verdict and audit JSON, and a
// text rendering of audit reports. Numbers are written with the shortest
// round-trip representation so reruns are byte-identical.

#include <charconv>
#include <ostream>
#include <string>

#include "json.hpp"
#include "phiac/sim.hpp"
#include "phiac/verify.hpp"

namespace phiac {

inline constexpr int kVerdictSchemaVersion = 1;

namespace detail {
inline std::string num_str(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline nlohmann::json num_json(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline nlohmann::json vec_json(const Vec& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(num_json(v(i)));
  return out;
}
}  // namespace detail

/// Header: t, plant states, controller states, u0.., H_cl, W, Y_a_norm, Y_u_norm.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t";
  for (const auto& n : tr.state_names) os << ',' << n;
  for (const auto& n : tr.controller_names) os << ',' << n;
  for (Eigen::Index i = 0; i < tr.m; ++i) os << ",u" << i;
  os << ",H_cl,W,Y_a_norm,Y_u_norm\n";
  for (std::size_t k = 0; k < tr.size(); ++k) {
    os << detail::num_str(tr.t[k]);
    for (Eigen::Index i = 0; i < tr.z[k].size(); ++i) os << ',' << detail::num_str(tr.z[k](i));
    for (Eigen::Index i = 0; i < tr.u[k].size(); ++i) os << ',' << detail::num_str(tr.u[k](i));
    os << ',' << detail::num_str(tr.H_cl[k]) << ',' << detail::num_str(tr.W[k]) << ','
       << detail::num_str(tr.Y_a[k]) << ',' << detail::num_str(tr.Y_u[k]) << '\n';
  }
}

/// Long format t,panel,series,value. Panels: the plant-state panels of the
/// composition, "controller" and "lyapunov".
inline void write_plot_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,panel,series,value\n";
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const std::string t = detail::num_str(tr.t[k]);
    for (Eigen::Index i = 0; i < tr.n; ++i)
      os << t << ',' << tr.state_panels[static_cast<std::size_t>(i)] << ','
         << tr.state_names[static_cast<std::size_t>(i)] << ',' << detail::num_str(tr.z[k](i)) << '\n';
    for (Eigen::Index i = 0; i < tr.c; ++i)
      os << t << ",controller," << tr.controller_names[static_cast<std::size_t>(i)] << ','
         << detail::num_str(tr.z[k](tr.n + i)) << '\n';
    os << t << ",lyapunov,W," << detail::num_str(tr.W[k]) << '\n';
  }
}

inline nlohmann::json verdict_json(const ConvergenceVerdict& v) {
  nlohmann::json j;
  j["converged"] = v.converged;
  j["final_error"] = detail::num_json(v.final_error);
  j["first_time_within"] = v.first_time_within ? detail::num_json(*v.first_time_within) : nlohmann::json(nullptr);
  j["max_lyapunov_increase"] = detail::num_json(v.max_lyapunov_increase);
  j["lyapunov_monotone"] = v.lyapunov_monotone;
  j["tol"] = detail::num_json(v.tol);
  j["window"] = {detail::num_json(v.window_start), detail::num_json(v.window_end)};
  return j;
}

inline nlohmann::json audit_json(const AuditReport& r) {
  nlohmann::json j;
  j["schema_version"] = kAuditSchemaVersion;
  j["suite"] = r.suite;
  j["system"] = r.system;
  j["seed"] = r.seed;
  j["passed"] = r.passed();
  auto checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    nlohmann::json cj;
    cj["name"] = c.name;
    cj["passed"] = c.passed;
    cj["worst_margin"] = detail::num_json(c.worst_margin);
    cj["offending_sample"] = c.offending_sample ? detail::vec_json(*c.offending_sample) : nlohmann::json(nullptr);
    cj["detail"] = c.detail;
    checks.push_back(cj);
  }
  j["checks"] = checks;
  return j;
}

inline std::string audit_text(const AuditReport& r) {
  std::string out = r.suite + " on " + r.system + " (seed " + std::to_string(r.seed) + "): " +
                    (r.passed() ? "PASS" : "FAIL") + "\n";
  for (const auto& c : r.checks) {
    out += std::string("  [") + (c.passed ? "pass" : "FAIL") + "] " + c.name + "  margin " +
           detail::num_str(c.worst_margin);
    if (!c.detail.empty()) out += "  (" + c.detail + ")";
    if (c.offending_sample) out += "  at " + linalg::format(*c.offending_sample);
    out += "\n";
  }
  return out;
}

}  // namespace phiac
