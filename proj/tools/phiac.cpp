// phiac command-line front end.
//
//   phiac list [--json]
//   phiac simulate    (--preset NAME | --config FILE) [--override k=v]... [--out DIR] [--seed N] [--json]
//   phiac export-plot (--preset NAME | --config FILE) [--override k=v]... [--out DIR]
//   phiac audit       (--preset NAME | --config FILE) --prop N [--override k=v]... [--out DIR] [--seed N] [--json]
//
// Exit status: 0 success, 2 usage or configuration error, 3 numeric failure
// (divergence, failed audit).

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "phiac/phiac.hpp"

namespace fs = std::filesystem;
using phiac::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct Common {
  std::string preset;
  std::string config;
  std::vector<std::string> overrides;
  std::string out = ".";
  std::uint64_t seed = 1;
  bool json = false;
};

void add_common(CLI::App* sub, Common& c, bool with_seed) {
  auto* p = sub->add_option("--preset", c.preset, "Built-in preset name");
  auto* f = sub->add_option("--config", c.config, "JSON config file (may name a preset to extend)");
  p->excludes(f);
  sub->add_option("--override", c.overrides, "key=value, repeatable; dotted keys or bare scenario/params names")
      ->allow_extra_args(false);
  sub->add_option("--out", c.out, "Output directory");
  if (with_seed) sub->add_option("--seed", c.seed, "Seed for sampled audits");
  sub->add_flag("--json", c.json, "Print machine-readable output");
}

Json load_config(const Common& c) {
  Json cfg;
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw phiac::ConfigError("cannot read config file '" + c.config + "'");
    try {
      cfg = phiac::resolve_config(Json::parse(in));
    } catch (const Json::exception& e) {
      throw phiac::ConfigError(std::string("config file: ") + e.what());
    }
  } else if (!c.preset.empty()) {
    cfg = phiac::preset_json(c.preset);
  } else {
    throw phiac::ConfigError("one of --preset or --config is required");
  }
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw phiac::ConfigError("override '" + kv + "' is not key=value");
    phiac::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

fs::path out_dir(const Common& c) {
  fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw phiac::ConfigError("cannot create output directory '" + c.out + "': " + ec.message());
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw phiac::ConfigError("cannot write '" + path.string() + "'");
  os << text;
}

std::string stem_of(const Json& cfg) { return cfg.at("name").get<std::string>(); }

int cmd_list(bool json) {
  const auto presets = phiac::list_presets();
  if (json) {
    Json arr = Json::array();
    for (const auto& p : presets)
      arr.push_back({{"name", p.name}, {"system", p.system}, {"provenance", p.provenance}, {"description", p.description}});
    std::cout << arr.dump(2) << "\n";
    return kExitOk;
  }
  for (const auto& p : presets) std::cout << p.name << "  [" << p.provenance << "]  " << p.description << "\n";
  return kExitOk;
}

Json simulation_verdict(const phiac::BuiltPreset& b, const phiac::Trajectory& tr) {
  Json v;
  v["schema_version"] = phiac::kVerdictSchemaVersion;
  v["preset"] = b.name;
  v["system"] = b.system;
  v["controller"] = b.scenario.comp.controller;
  v["t_end"] = b.scenario.t_end;
  v["dt"] = b.scenario.dt;
  Json regimes = Json::array();
  const auto& rs = b.scenario.comp.regimes;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const double from = rs[i].t_start;
    const double to = i + 1 < rs.size() ? rs[i + 1].t_start : std::numeric_limits<double>::infinity();
    if (from > tr.t.back()) break;
    const auto verdict = phiac::check_convergence(tr, *rs[i].prediction, b.scenario.tol, from, to);
    regimes.push_back({{"t_start", from},
                       {"kind", phiac::to_string(rs[i].prediction->kind)},
                       {"w_bar", phiac::detail::vec_json(rs[i].prediction->w_bar)},
                       {"residual", rs[i].prediction->residual},
                       {"verdict", phiac::verdict_json(verdict)}});
  }
  v["regimes"] = regimes;
  if (b.scenario.target) {
    // window opens at the last regime switch the run actually reached
    double from = 0.0;
    for (const auto& r : rs)
      if (r.t_start <= tr.t.back()) from = r.t_start;
    const auto fin = phiac::check_convergence(tr, *b.scenario.target, b.scenario.tol, from);
    v["converged"] = fin.converged;
    v["final"] = phiac::verdict_json(fin);
  } else {
    v["converged"] = nullptr;
    v["final"] = nullptr;
  }
  v["final_state"] = phiac::detail::vec_json(tr.z.back());
  v["max_step_error_estimate"] = tr.max_step_error;
  v["warnings"] = tr.warnings;
  return v;
}

int cmd_simulate(const Common& c, bool plot_only) {
  const Json cfg = load_config(c);
  const auto built = phiac::build_preset(cfg);
  const fs::path dir = out_dir(c);
  const std::string stem = stem_of(cfg);
  phiac::Trajectory tr;
  try {
    tr = phiac::integrate(built.scenario);
  } catch (const phiac::DivergenceError& e) {
    Json diag{{"schema_version", phiac::kVerdictSchemaVersion},
              {"preset", built.name},
              {"error", "divergence"},
              {"time", e.time()},
              {"message", e.what()}};
    write_file(dir / (stem + ".diagnostic.json"), diag.dump(2) + "\n");
    std::cerr << "phiac: " << e.what() << "\n";
    if (c.json) std::cout << diag.dump(2) << "\n";
    return kExitNumeric;
  }
  std::ostringstream plot;
  phiac::write_plot_csv(plot, tr);
  write_file(dir / (stem + ".plot.csv"), plot.str());
  if (plot_only) {
    std::cout << (dir / (stem + ".plot.csv")).string() << "\n";
    return kExitOk;
  }
  std::ostringstream traj;
  phiac::write_trajectory_csv(traj, tr);
  write_file(dir / (stem + ".trajectory.csv"), traj.str());
  const Json verdict = simulation_verdict(built, tr);
  write_file(dir / (stem + ".verdict.json"), verdict.dump(2) + "\n");
  if (c.json) {
    std::cout << verdict.dump(2) << "\n";
  } else {
    const bool conv = verdict["converged"].is_boolean() && verdict["converged"].get<bool>();
    std::cout << built.name << ": " << (conv ? "converged" : "not converged");
    if (verdict["final"].is_object()) std::cout << ", final error " << verdict["final"]["final_error"].dump();
    std::cout << "\n";
    for (const auto& w : tr.warnings) std::cout << "warning: " << w << "\n";
  }
  return kExitOk;
}

int cmd_audit(const Common& c, int prop) {
  if (prop < 1 || prop > 5) throw phiac::ConfigError("--prop must be between 1 and 5");
  const Json cfg = load_config(c);
  const auto built = phiac::build_preset(cfg);
  const auto report = phiac::run_audit(built, prop, c.seed);
  const fs::path dir = out_dir(c);
  const Json j = phiac::audit_json(report);
  write_file(dir / (stem_of(cfg) + ".audit" + std::to_string(prop) + ".json"), j.dump(2) + "\n");
  if (c.json)
    std::cout << j.dump(2) << "\n";
  else
    std::cout << phiac::audit_text(report);
  return report.passed() ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Integral action on disturbed port-Hamiltonian systems: simulation and audits"};
  app.require_subcommand(1);

  bool list_json = false;
  auto* list = app.add_subcommand("list", "List built-in presets");
  list->add_flag("--json", list_json, "Print machine-readable output");

  Common sim_opts, plot_opts, audit_opts;
  auto* simulate = app.add_subcommand("simulate", "Run a scenario and write trajectory, verdict and plot data");
  add_common(simulate, sim_opts, true);
  auto* plot = app.add_subcommand("export-plot", "Run a scenario and write only the tidy plot CSV");
  add_common(plot, plot_opts, false);
  int prop = 0;
  auto* audit = app.add_subcommand("audit", "Run a proposition audit");
  add_common(audit, audit_opts, true);
  audit->add_option("--prop", prop, "Proposition number (1-5)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*list) return cmd_list(list_json);
    if (*simulate) return cmd_simulate(sim_opts, false);
    if (*plot) return cmd_simulate(plot_opts, true);
    if (*audit) return cmd_audit(audit_opts, prop);
  } catch (const phiac::ConfigError& e) {
    std::cerr << "phiac: " << e.what() << "\n";
    return kExitUsage;
  } catch (const phiac::ContractViolation& e) {
    std::cerr << "phiac: " << e.what() << "\n";
    return kExitUsage;
  } catch (const phiac::NumericError& e) {
    std::cerr << "phiac: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
