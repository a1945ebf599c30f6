#pragma once

// Named example configurations and their translation into runnable scenarios
// and audit inputs. Presets are JSON documents; the same documents ship as
// files under presets/.

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "phiac/systems/manipulator.hpp"
#include "phiac/systems/pmsm.hpp"
#include "phiac/systems/vtol.hpp"
#include "phiac/verify.hpp"

namespace phiac {

using Json = nlohmann::json;

inline constexpr int kPresetSchemaVersion = 1;

namespace detail {

inline const char* const kPmsmDefault = R"json({
  "schema_version": 1,
  "name": "pmsm.default",
  "system": "pmsm",
  "provenance": "non-paper",
  "description": "Shaped PMSM under unknown load torque; physical constants are plausible defaults, not published values",
  "params": {
    "L_d": 0.004, "L_q": 0.005, "R_s": 0.5, "Phi": 0.1, "J": 0.01, "n_p": 4, "R_m": 0.01,
    "tau_L": 0.5, "omega_star": 100, "r1": 10, "r2": 1, "gamma1": 1, "gamma2": 5, "C23": -2,
    "t_on": 0, "d_a": 0, "d_a_t_on": 0
  },
  "controller": {"type": "iac_wc", "K_i": 5},
  "scenario": {"t_end": 20, "dt": 0.001, "stride": 10, "tol": 0.0001, "x0": [0, 0.5, 80], "xc0": [0]},
  "audit": {"samples": 100, "rate_samples": 1000, "horizon": 20, "d_a": 0.3}
})json";

inline const char* const kManipulatorDefault = R"json({
  "schema_version": 1,
  "name": "manipulator.default",
  "system": "manipulator",
  "provenance": "non-paper",
  "description": "2-DOF planar manipulator with hidden damping under a constant matched disturbance; inertia constants are plausible defaults",
  "params": {
    "a_a": 2, "a_u": 1, "b": 0.5,
    "K_p": [[10, 0], [0, 10]],
    "R_d": [[1, 0], [0, 1]],
    "q_star": [0.5, -0.3],
    "d_a": [1, -0.5],
    "t_on": 0
  },
  "controller": {"type": "r8", "R_c2": [[5, 0], [0, 5]], "kappa": 2, "K_i": [[1, 0], [0, 1]]},
  "scenario": {"t_end": 30, "dt": 0.001, "stride": 10, "tol": 0.001, "q0": [0, 0], "p0": [0, 0], "xc0": [0, 0]},
  "robustness": {"R_d": [[[0.5, 0], [0, 0.5]], [[1, 0], [0, 1]], [[1, 0], [0, 3]]]},
  "audit": {"samples": 100, "rate_samples": 1000, "horizon": 30}
})json";

inline const char* const kVtolReference = R"json({
  "schema_version": 1,
  "name": "vtol.paper",
  "system": "vtol",
  "provenance": "paper",
  "description": "Damped VTOL aircraft with the published gains; matched disturbance (5, -5) from t = 30 s. g is not published and defaults to 9.81",
  "params": {
    "eps": 1, "g": 9.81, "k1": 2, "k2": 1.1, "k3": 30,
    "K_v": [[10, 5], [5, 10]],
    "P": [[0.03, 0], [0, 0.02]],
    "R0": [1, 1, 1],
    "q_star": [5, 0, 0],
    "d_m": [5, -5],
    "t_on": 30
  },
  "controller": {
    "type": "iac",
    "J_c1": [[0, 0], [0, 0]],
    "R_c1": [[10, 5], [5, 10]],
    "R_c2": [[10, 0], [0, 10]],
    "K_i": [[1, 0], [0, 1]]
  },
  "scenario": {"t_end": 60, "dt": 0.001, "stride": 10, "tol": 0.01, "q0": [-5, 0, 0.1], "p0": [-0.1, -0.1, 0.1], "xc0": [0, 0]},
  "audit": {"samples": 100, "rate_samples": 1000, "horizon": 30}
})json";

}  // namespace detail

struct PresetInfo {
  std::string name;
  std::string system;
  std::string provenance;
  std::string description;
};

inline const std::map<std::string, const char*>& preset_sources() {
  static const std::map<std::string, const char*> m{{"manipulator.default", detail::kManipulatorDefault},
                                                    {"pmsm.default", detail::kPmsmDefault},
                                                    {"vtol.paper", detail::kVtolReference}};
  return m;
}

inline Json preset_json(const std::string& name) {
  const auto& src = preset_sources();
  const auto it = src.find(name);
  if (it == src.end()) throw ConfigError("unknown preset '" + name + "'");
  return Json::parse(it->second);
}

inline std::vector<PresetInfo> list_presets() {
  std::vector<PresetInfo> out;
  for (const auto& [name, text] : preset_sources()) {
    const Json j = Json::parse(text);
    out.push_back({name, j.at("system"), j.at("provenance"), j.at("description")});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Overrides

namespace detail {

inline bool same_shape(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return true;
  if (a.is_array() && b.is_array()) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!same_shape(a[i], b[i])) return false;
    return true;
  }
  if (a.is_object() && b.is_object()) return true;
  return a.type() == b.type();
}

inline std::string type_name(const Json& j) {
  if (j.is_array()) return "array of " + std::to_string(j.size());
  return j.type_name();
}

}  // namespace detail

/// Sets `key` (dotted path, or a bare name looked up in scenario, params,
/// controller and audit in that order) to `value` parsed as JSON. The key must
/// exist and the new value must have the same type and shape.
inline void apply_override(Json& cfg, const std::string& key, const std::string& value) {
  Json v;
  try {
    v = Json::parse(value);
  } catch (const Json::parse_error&) {
    v = value;
  }
  Json::json_pointer ptr;
  if (key.find('.') == std::string::npos) {
    bool found = false;
    for (const char* section : {"scenario", "params", "controller", "audit"}) {
      if (cfg.contains(section) && cfg[section].contains(key)) {
        ptr = Json::json_pointer("/" + std::string(section) + "/" + key);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("override: unknown key '" + key + "'");
  } else {
    std::string path = "/" + key;
    for (auto& c : path)
      if (c == '.') c = '/';
    ptr = Json::json_pointer(path);
    if (!cfg.contains(ptr)) throw ConfigError("override: unknown key '" + key + "'");
  }
  const Json& old = cfg.at(ptr);
  if (!detail::same_shape(old, v))
    throw ConfigError("override: '" + key + "' expects " + detail::type_name(old) + ", got " + detail::type_name(v));
  cfg[ptr] = v;
}

/// Preset named by the config (key "preset") or given inline, merged with the
/// config's remaining fields. Fields of the file take precedence over the
/// preset; unknown fields are rejected.
inline Json resolve_config(const Json& file) {
  if (!file.is_object()) throw ConfigError("config must be a JSON object");
  if (!file.contains("preset")) return file;
  Json base = preset_json(file.at("preset").get<std::string>());
  std::function<void(Json&, const Json&, const std::string&)> merge = [&](Json& dst, const Json& src,
                                                                          const std::string& where) {
    for (const auto& [k, v] : src.items()) {
      if (where.empty() && k == "preset") continue;
      if (!dst.contains(k)) throw ConfigError("config: unknown key '" + where + k + "'");
      if (dst[k].is_object() && v.is_object()) {
        merge(dst[k], v, where + k + ".");
      } else {
        if (!detail::same_shape(dst[k], v))
          throw ConfigError("config: '" + where + k + "' expects " + detail::type_name(dst[k]));
        dst[k] = v;
      }
    }
  };
  merge(base, file, "");
  return base;
}

// ---------------------------------------------------------------------------
// JSON -> numbers

namespace detail {

inline double num(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) throw ConfigError(std::string("expected number '") + key + "'");
  return j.at(key).get<double>();
}

inline Vec vec_of(const Json& j, const std::string& what) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  if (!j.is_array()) throw ConfigError("expected array for '" + what + "'");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("non-numeric entry in '" + what + "'");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline Mat mat_of(const Json& j, const std::string& what) {
  if (j.is_number()) return Mat::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError("expected matrix for '" + what + "'");
  const auto rows = static_cast<Eigen::Index>(j.size()), cols = static_cast<Eigen::Index>(j[0].size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vec row = vec_of(j[static_cast<std::size_t>(r)], what);
    if (row.size() != cols) throw ConfigError("ragged matrix '" + what + "'");
    m.row(r) = row.transpose();
  }
  return m;
}

inline Vec vec(const Json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing '") + key + "'");
  return vec_of(j.at(key), key);
}

inline Mat mat(const Json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing '") + key + "'");
  return mat_of(j.at(key), key);
}

}  // namespace detail

inline systems::PmsmParams pmsm_params(const Json& p) {
  using detail::num;
  systems::PmsmParams P;
  P.L_d = num(p, "L_d");
  P.L_q = num(p, "L_q");
  P.R_s = num(p, "R_s");
  P.Phi = num(p, "Phi");
  P.J = num(p, "J");
  P.n_p = num(p, "n_p");
  P.R_m = num(p, "R_m");
  P.tau_L = num(p, "tau_L");
  P.omega_star = num(p, "omega_star");
  P.r1 = num(p, "r1");
  P.r2 = num(p, "r2");
  P.gamma1 = num(p, "gamma1");
  P.gamma2 = num(p, "gamma2");
  P.C23 = num(p, "C23");
  P.t_on = num(p, "t_on");
  P.d_a = num(p, "d_a");
  P.d_a_t_on = num(p, "d_a_t_on");
  P.validate();
  return P;
}

inline systems::ManipulatorParams manipulator_params(const Json& p) {
  systems::ManipulatorParams P;
  P.a_a = detail::num(p, "a_a");
  P.a_u = detail::num(p, "a_u");
  P.b = detail::num(p, "b");
  P.K_p = detail::mat(p, "K_p");
  P.R_d = detail::mat(p, "R_d");
  P.q_star = detail::vec(p, "q_star");
  P.d_a = detail::vec(p, "d_a");
  P.t_on = detail::num(p, "t_on");
  P.validate();
  return P;
}

inline systems::VtolParams vtol_params(const Json& p) {
  systems::VtolParams P;
  P.eps = detail::num(p, "eps");
  P.g = detail::num(p, "g");
  P.k1 = detail::num(p, "k1");
  P.k2 = detail::num(p, "k2");
  P.k3 = detail::num(p, "k3");
  P.K_v = detail::mat(p, "K_v");
  P.P = detail::mat(p, "P");
  P.R0 = detail::vec(p, "R0");
  P.q_star = detail::vec(p, "q_star");
  P.d_m = detail::vec(p, "d_m");
  P.t_on = detail::num(p, "t_on");
  P.validate();
  return P;
}

inline IacGains gains_of(const Json& c) {
  return IacGains::constant(detail::mat(c, "J_c1"), detail::mat(c, "R_c1"), detail::mat(c, "R_c2"),
                            detail::mat(c, "K_i"));
}

// ---------------------------------------------------------------------------
// Built presets

/// Everything a preset defines, ready to run or audit.
struct BuiltPreset {
  std::string name;
  std::string system;
  Json config;
  Scenario scenario;
  PhSystem plant;      ///< the plant in the coordinates the controller sees
  IacGains gains;      ///< analysis gains of the IAC family (equal to the controller's for iac/iac_wc)
  std::optional<TransformedMech> mech;
  VecField d_u_raw;    ///< raw unmatched field when the system has one
};

namespace detail {

inline Scenario make_scenario(const Json& sc, const std::string& name, Composition comp, Vec z0) {
  Scenario s;
  s.name = name;
  s.comp = std::move(comp);
  s.z0 = std::move(z0);
  s.t_end = num(sc, "t_end");
  s.dt = num(sc, "dt");
  const double stride = num(sc, "stride");
  if (stride != std::floor(stride)) throw ConfigError("scenario: stride must be an integer");
  s.stride = static_cast<int>(stride);
  s.tol = num(sc, "tol");
  if (!s.comp.regimes.empty()) s.target = s.comp.regimes.back().prediction;
  s.validate();
  return s;
}

inline Composition compose_for(const std::string& type, const std::shared_ptr<const ClosedLoop>& loop,
                               std::vector<Regime> regimes, std::vector<std::string> names) {
  if (type == "iac") return compose_iac(loop, std::move(regimes), std::move(names));
  if (type == "iac_wc") return compose_iac_wc(loop, std::move(regimes), std::move(names));
  throw ConfigError("controller type '" + type + "' is not available for this system");
}

inline Vec initial_controller(const std::string& type, const Vec& x_a, const Vec& xc0) {
  return type == "iac_wc" ? Vec(x_a - xc0) : xc0;
}

inline BuiltPreset build_pmsm_preset(const Json& cfg) {
  const auto P = pmsm_params(cfg.at("params"));
  const Json& c = cfg.at("controller");
  const std::string type = c.at("type");
  const IacGains gains = systems::pmsm_gains(P, num(c, "K_i"));
  const PhSystem plant = systems::build_pmsm(P);
  auto loop = std::make_shared<const ClosedLoop>(plant, gains);
  const Json& sc = cfg.at("scenario");
  const Vec x0 = vec(sc, "x0"), xc0 = vec(sc, "xc0");
  if (x0.size() != 3 || xc0.size() != 1) throw ConfigError("pmsm: x0 needs 3 and xc0 1 entries");
  Composition comp;
  if (type == "baseline") {
    comp = compose_baseline(plant, gains.K_i(), {"i_q", "i_d", "omega"});
  } else {
    comp = compose_for(type, loop, schedule_regimes(plant, gains), {"i_q", "i_d", "omega"});
  }
  comp.state_panels = {"current", "current", "speed"};
  const Vec z0 = concat(x0, initial_controller(type, x0.head(1), xc0));
  return {cfg.at("name"), "pmsm", cfg, make_scenario(sc, cfg.at("name"), std::move(comp), z0), plant, gains,
          std::nullopt, systems::pmsm_unmatched_raw(P)};
}

inline BuiltPreset build_manipulator_preset(const Json& cfg) {
  const auto P = manipulator_params(cfg.at("params"));
  const Json& c = cfg.at("controller");
  const std::string type = c.at("type");
  const Mat Rc2 = mat(c, "R_c2");
  const double kappa = num(c, "kappa");
  TransformedMech tm(systems::build_manipulator(P));
  const IacGains gains = damping_free_gains(P.R_d, Rc2, kappa);
  const PhSystem plant = partition_mech(tm, Mat(-P.R_d));
  auto loop = std::make_shared<const ClosedLoop>(plant, gains);
  const Json& sc = cfg.at("scenario");
  const Vec q0 = vec(sc, "q0"), p0 = vec(sc, "p0"), xc0 = vec(sc, "xc0");
  if (q0.size() != 2 || p0.size() != 2 || xc0.size() != 2) throw ConfigError("manipulator: q0, p0, xc0 need 2 entries");
  const std::vector<std::string> names{"p1", "p2", "theta_a", "theta_u"};
  Composition comp;
  if (type == "r8") {
    comp = compose_r8(plant, Rc2, kappa, loop, schedule_regimes(plant, gains), names);
  } else if (type == "baseline") {
    comp = compose_baseline(plant, mat(c, "K_i"), names);
  } else {
    comp = compose_for(type, loop, schedule_regimes(plant, gains), names);
  }
  comp.state_panels = {"momentum", "momentum", "configuration", "configuration"};
  const Vec x0 = mech_state(tm, q0, p0);
  const Vec z0 = concat(x0, initial_controller(type, x0.head(2), xc0));
  return {cfg.at("name"), "manipulator", cfg, make_scenario(sc, cfg.at("name"), std::move(comp), z0), plant, gains,
          tm, VecField{}};
}

inline BuiltPreset build_vtol_preset(const Json& cfg) {
  const auto P = vtol_params(cfg.at("params"));
  const Json& c = cfg.at("controller");
  const std::string type = c.at("type");
  const IacGains gains = gains_of(c);
  TransformedMech tm(systems::build_vtol(P));
  require_mech_gains(gains, 2);
  const Vec none;
  const PhSystem plant = partition_mech(tm, Mat(gains.J_c1(none) - gains.R_c1(none)));
  auto loop = std::make_shared<const ClosedLoop>(plant, gains);
  const Json& sc = cfg.at("scenario");
  const Vec q0 = vec(sc, "q0"), p0 = vec(sc, "p0"), xc0 = vec(sc, "xc0");
  if (q0.size() != 3 || p0.size() != 3 || xc0.size() != 2) throw ConfigError("vtol: q0, p0 need 3 and xc0 2 entries");
  Composition comp;
  const std::vector<std::string> names{"p1", "p2", "p3", "x", "y", "theta"};
  if (type == "baseline") {
    comp = compose_baseline(plant, gains.K_i(), names);
  } else {
    comp = compose_for(type, loop, schedule_regimes(plant, gains), names);
  }
  comp.state_panels = {"momentum", "momentum", "momentum", "configuration", "configuration", "configuration"};
  const Vec x0 = mech_state(tm, q0, p0);
  const Vec z0 = concat(x0, initial_controller(type, x0.head(2), xc0));
  return {cfg.at("name"), "vtol", cfg, make_scenario(sc, cfg.at("name"), std::move(comp), z0), plant, gains, tm,
          VecField{}};
}

}  // namespace detail

/// Builds a resolved config. All JSON access errors surface as ConfigError.
inline BuiltPreset build_preset(const Json& cfg) {
  try {
    if (cfg.value("schema_version", 0) != kPresetSchemaVersion) throw ConfigError("unsupported preset schema_version");
    const std::string system = cfg.at("system");
    if (system == "pmsm") return detail::build_pmsm_preset(cfg);
    if (system == "manipulator") return detail::build_manipulator_preset(cfg);
    if (system == "vtol") return detail::build_vtol_preset(cfg);
    throw ConfigError("unknown system '" + system + "'");
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline BuiltPreset build_preset(const std::string& name) { return build_preset(preset_json(name)); }
inline BuiltPreset build_preset(const char* name) { return build_preset(preset_json(name)); }

inline AuditOptions audit_options(const Json& cfg, std::uint64_t seed) {
  AuditOptions o;
  o.seed = seed;
  if (cfg.contains("audit")) {
    const Json& a = cfg.at("audit");
    if (a.contains("samples")) o.samples = a.at("samples").get<int>();
    if (a.contains("rate_samples")) o.rate_samples = a.at("rate_samples").get<int>();
    if (a.contains("horizon")) o.horizon = a.at("horizon").get<double>();
  }
  o.dt = cfg.at("scenario").at("dt").get<double>();
  return o;
}

/// Runs proposition `prop` (1-5) on a built preset. Throws ConfigError when
/// the proposition does not apply to the preset's system.
inline AuditReport run_audit(const BuiltPreset& b, int prop, std::uint64_t seed) {
  const AuditOptions o = audit_options(b.config, seed);
  const auto& d = b.plant.disturbance();
  switch (prop) {
    case 1:
      return audit_proposition1(b.plant, b.gains, o);
    case 2:
      if (!d.matched) break;
      if (b.system == "pmsm") {
        return audit_proposition2(b.plant.with_disturbance({d.matched, std::nullopt}), b.gains,
                                  Vec::Constant(1, b.config.at("audit").at("d_a").get<double>()), o);
      }
      return audit_proposition2(b.plant, b.gains, d.matched->d_bar, o);
    case 3:
      if (b.system != "pmsm") break;
      return audit_proposition3(b.plant, b.gains, d.unmatched->d_bar, b.d_u_raw, o);
    case 4:
      if (b.system != "pmsm") break;
      return audit_proposition4(b.plant, b.gains, Vec::Constant(1, b.config.at("audit").at("d_a").get<double>()),
                                d.unmatched->d_bar, o);
    case 5:
      if (!b.mech) break;
      return audit_proposition5(*b.mech, b.gains, o);
    default:
      throw ConfigError("--prop must be between 1 and 5");
  }
  throw ConfigError("proposition " + std::to_string(prop) + " does not apply to system '" + b.system + "'");
}

}  // namespace phiac
