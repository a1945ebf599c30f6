// Sweeps the PMSM load torque and prints where each run settles against the
// closed-form equilibrium (i_q = (tau_L + R_m w*) / (n_p Phi), i_d = 0, w = w*).
//
//   pmsm_load_sweep [tau_max] [count]

#include <cstdio>
#include <cstdlib>

#include "phiac/phiac.hpp"

int main(int argc, char** argv) {
  const double tau_max = argc > 1 ? std::atof(argv[1]) : 2.0;
  const int count = argc > 2 ? std::atoi(argv[2]) : 5;
  if (count < 1) return 2;

  std::vector<phiac::Scenario> runs;
  std::vector<phiac::systems::PmsmParams> params;
  for (int k = 0; k < count; ++k) {
    auto cfg = phiac::preset_json("pmsm.default");
    cfg["params"]["tau_L"] = count == 1 ? tau_max : tau_max * k / (count - 1);
    cfg["name"] = "tau_" + std::to_string(k);
    runs.push_back(phiac::build_preset(cfg).scenario);
    params.push_back(phiac::pmsm_params(cfg["params"]));
  }

  std::printf("%8s %12s %12s %12s %10s\n", "tau_L", "i_q", "i_q (pred)", "w - w*", "converged");
  const auto out = phiac::sweep(runs);
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!out[k].ok()) {
      std::printf("%8.3f  failed: %s\n", params[k].tau_L, out[k].error.c_str());
      continue;
    }
    const auto& tr = *out[k].trajectory;
    const phiac::Vec x = tr.x(tr.size() - 1);
    std::printf("%8.3f %12.6f %12.6f %12.3e %10s\n", params[k].tau_L, x(0), params[k].i_q_bar(),
                x(2) - params[k].omega_star, out[k].verdict->converged ? "yes" : "no");
  }
  return 0;
}
