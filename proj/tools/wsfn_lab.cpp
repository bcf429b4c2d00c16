// wsfn-lab: experiment presets, the property suite and the parameter calculator.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "wsfn/errors.hpp"
#include "wsfn/experiment.hpp"
#include "wsfn/optimize.hpp"
#include "wsfn/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

unsigned resolve_jobs(unsigned flag) {
  if (const char* env = std::getenv("WSFN_LAB_JOBS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw wsfn::ConfigError(std::string("WSFN_LAB_JOBS must be a positive integer, got '") + env + "'");
  }
  return flag;
}

struct RunFlags {
  std::string target;
  double scale = 1.0;
  int trials = 0;
  int iters = -1;
  std::string methods;
  std::string out;
  unsigned jobs = 1;
  long long seed = -1;
  bool timing = false;
};

int cmd_run(const RunFlags& f) {
  wsfn::ExperimentConfig cfg;
  const auto presets = wsfn::preset_names();
  if (std::find(presets.begin(), presets.end(), f.target) != presets.end()) {
    cfg = wsfn::make_preset(f.target);
  } else if (f.target.size() > 5 && f.target.substr(f.target.size() - 5) == ".json") {
    std::ifstream in(f.target);
    if (!in) throw wsfn::ConfigError("cannot read config '" + f.target + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw wsfn::ConfigError("config '" + f.target + "' is not valid JSON: " + e.what());
    }
    cfg = wsfn::ExperimentConfig::from_json(j);
  } else {
    throw wsfn::ConfigError("unknown preset '" + f.target + "' (presets: exp1_icl, exp2_matdec, exp3_coulomb; or a .json config)");
  }
  if (f.scale != 1.0) wsfn::apply_scale(cfg, f.scale);
  if (f.iters >= 0) wsfn::set_iterations(cfg, f.iters);
  if (f.trials > 0) cfg.trials = f.trials;
  if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
  if (!f.methods.empty()) wsfn::filter_methods(cfg, split_list(f.methods));
  if (!f.out.empty()) cfg.out_dir = f.out;
  cfg.timing = f.timing;

  const wsfn::ExperimentResult result = wsfn::run_experiment(cfg, resolve_jobs(f.jobs));
  wsfn::write_artifacts(result, cfg.out_dir);

  std::cout << std::left << std::setw(15) << "method" << std::setw(24) << "final loss (mean)"
            << "perturbations\n";
  for (std::size_t m = 0; m < result.records.size(); ++m) {
    double s = 0.0;
    int perts = 0;
    for (const auto& r : result.records[m]) {
      s += r.rows.empty() ? std::nan("") : r.rows.back().loss;
      perts += r.perturbations;
    }
    std::cout << std::setw(15) << wsfn::to_string(cfg.optimizers[m].cfg.method) << std::setw(24)
              << s / static_cast<double>(result.records[m].size()) << perts << "\n";
    for (std::size_t t = 0; t < result.records[m].size(); ++t) {
      const auto& r = result.records[m][t];
      if (r.failed) std::cerr << "trial " << t << ": " << r.termination << "\n";
      for (const auto& w : r.warnings) std::cerr << "warning (trial " << t << "): " << w << "\n";
    }
  }
  std::cout << "artifacts written to " << cfg.out_dir << "\n";
  return result.any_failed() ? kExitNumeric : kExitOk;
}

int cmd_verify(const std::string& select, long long seed, const std::string& json_path, unsigned jobs) {
  const auto report =
      wsfn::run_property_suite(split_list(select), static_cast<std::uint64_t>(seed), resolve_jobs(jobs));
  std::cout << report.table();
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    if (!out) throw wsfn::ConfigError("cannot write '" + json_path + "'");
    out << report.to_json().dump(2) << "\n";
  }
  return report.passed() ? kExitOk : kExitFail;
}

struct ParamFlags {
  wsfn::TheoryConstants theory;
  double beta = 1.0;
  double delta = 0.5;
  double eps = 1e-3;
  double zeta_ep = -1.0;
  double c_abs = -1.0;
  double hessian_norm = -1.0;
};

int cmd_params(const ParamFlags& f) {
  wsfn::ParamOptions o;
  if (f.zeta_ep >= 0.0) o.zeta_ep = f.zeta_ep;
  if (f.c_abs >= 0.0) o.c_abs = f.c_abs;
  if (f.hessian_norm >= 0.0) o.hessian_norm = f.hessian_norm;
  const wsfn::TheoryParams p = wsfn::theoretical_params(f.theory, f.beta, f.delta, f.eps, o);
  std::cout << std::setprecision(10);
  std::cout << "tau          " << p.tau << "\n"
            << "kappa        " << p.kappa << "\n"
            << "n_out        " << p.n_out << " (" << static_cast<long long>(std::ceil(p.n_out)) << " iterations)\n"
            << "F0           " << p.F0 << "\n"
            << "eta          " << p.eta << "\n"
            << "delta_tilde  " << p.delta_tilde << "\n"
            << "zeta_ep      " << p.zeta_ep << "\n"
            << "|c|          " << p.c_abs << "\n"
            << "admissible   " << (p.admissible ? "true" : "false") << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein saddle-free Newton laboratory"};
  app.require_subcommand(1);

  RunFlags rf;
  auto* run = app.add_subcommand("run", "Run an experiment preset or JSON config");
  run->add_option("target", rf.target, "Preset name (exp1_icl, exp2_matdec, exp3_coulomb) or config.json")->required();
  run->add_option("--scale", rf.scale, "Shrink particles, samples and iterations by this factor");
  run->add_option("--trials", rf.trials, "Number of trials");
  run->add_option("--iters", rf.iters, "Iteration budget (overrides the scaled one)");
  run->add_option("--methods", rf.methods, "Comma-separated subset of methods");
  run->add_option("--out", rf.out, "Output directory");
  run->add_option("--jobs", rf.jobs, "Worker threads (WSFN_LAB_JOBS overrides)");
  run->add_option("--seed", rf.seed, "Base seed");
  run->add_flag("--timing", rf.timing, "Fill the elapsed_ms column");

  std::string select;
  long long vseed = 7;
  std::string json_path;
  unsigned vjobs = 0;
  auto* verify = app.add_subcommand("verify", "Run the property suite");
  verify->add_option("--select", select, "Comma-separated check names");
  verify->add_option("--seed", vseed, "Suite seed");
  verify->add_option("--json", json_path, "Write the report as JSON");
  verify->add_option("--jobs", vjobs, "Worker threads (0 = all cores)");
  verify->add_flag_callback("--list", [] {
    for (const auto& n : wsfn::check_names()) std::cout << n << "\n";
    std::exit(0);
  }, "List check names");

  ParamFlags pf;
  auto* params = app.add_subcommand("params", "Evaluate the theoretical parameter choices");
  params->add_option("--C_H", pf.theory.C_H, "Hessian bound C_M + C_K");
  params->add_option("--L_H", pf.theory.L_H, "Hessian Lipschitz constant");
  params->add_option("--R_F", pf.theory.R_F, "Local regularity constant");
  params->add_option("--zeta", pf.theory.zeta, "Failure probability zeta");
  params->add_option("--F_min", pf.theory.F_min, "F(mu^0) - inf F");
  params->add_option("--beta", pf.beta, "Preconditioner regularizer");
  params->add_option("--delta", pf.delta, "Curvature threshold");
  params->add_option("--eps", pf.eps, "Gradient threshold");
  params->add_option("--zeta_ep", pf.zeta_ep, "Fix zeta_ep instead of solving for it");
  params->add_option("--c", pf.c_abs, "|c| in the n_out formula");
  params->add_option("--hessian-norm", pf.hessian_norm, "Kernel norm entering kappa (default C_H)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(rf);
    if (*verify) return cmd_verify(select, vseed, json_path, vjobs);
    if (*params) return cmd_params(pf);
  } catch (const wsfn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const wsfn::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const wsfn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
