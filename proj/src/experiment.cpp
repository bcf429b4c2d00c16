#include "wsfn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "wsfn/errors.hpp"
#include "wsfn/rng.hpp"

namespace wsfn {

namespace {

using nlohmann::json;

template <class T>
T get_or(const json& j, const char* section, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(section) + "." + key + " has the wrong type");
  }
}

json optimizer_to_json(const MethodRun& m) {
  const OptimizerConfig& c = m.cfg;
  json j = {{"method", to_string(c.method)},
            {"tau", c.tau},
            {"beta", c.beta},
            {"lanczos_m", c.lanczos_m},
            {"eps", c.eps},
            {"delta", c.delta},
            {"n_out", c.n_out},
            {"F0", c.F0},
            {"eta", c.eta},
            {"trigger", to_string(c.trigger)},
            {"max_iters", c.max_iters},
            {"perturb_mode", to_string(c.perturb_mode)},
            {"halt_on_failed_episode", c.halt_on_failed_episode},
            {"fd_step", c.fd_step}};
  if (c.kappa) j["kappa"] = *c.kappa;
  if (c.hvp_mode) j["hvp_mode"] = to_string(*c.hvp_mode);
  if (m.f0_relative) j["F0_relative"] = *m.f0_relative;
  return j;
}

MethodRun optimizer_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("optimizers entries must be objects");
  const char* s = "optimizers[]";
  MethodRun m;
  OptimizerConfig& c = m.cfg;
  if (!j.contains("method")) throw ConfigError("optimizers[].method is required");
  c.method = method_from_string(get_or<std::string>(j, s, "method", ""));
  c.tau = get_or(j, s, "tau", c.tau);
  c.beta = get_or(j, s, "beta", c.beta);
  c.lanczos_m = get_or<Index>(j, s, "lanczos_m", c.lanczos_m);
  c.eps = get_or(j, s, "eps", c.eps);
  c.delta = get_or(j, s, "delta", c.delta);
  c.n_out = get_or(j, s, "n_out", c.n_out);
  c.F0 = get_or(j, s, "F0", c.F0);
  c.eta = get_or(j, s, "eta", c.eta);
  if (j.contains("kappa") && !j["kappa"].is_null()) c.kappa = get_or(j, s, "kappa", 0.0);
  c.trigger = trigger_from_string(get_or<std::string>(j, s, "trigger", std::string(to_string(c.trigger))));
  c.max_iters = get_or(j, s, "max_iters", c.max_iters);
  c.perturb_mode =
      perturb_mode_from_string(get_or<std::string>(j, s, "perturb_mode", std::string(to_string(c.perturb_mode))));
  c.halt_on_failed_episode = get_or(j, s, "halt_on_failed_episode", c.halt_on_failed_episode);
  c.fd_step = get_or(j, s, "fd_step", c.fd_step);
  if (j.contains("hvp_mode")) {
    const auto mode = get_or<std::string>(j, s, "hvp_mode", "");
    if (mode == "exact_blocks") {
      c.hvp_mode = HvpMode::exact_blocks;
    } else if (mode == "fd_transport") {
      c.hvp_mode = HvpMode::fd_transport;
    } else {
      throw ConfigError("optimizers[].hvp_mode must be exact_blocks or fd_transport");
    }
  }
  if (j.contains("F0_relative")) m.f0_relative = get_or(j, s, "F0_relative", 0.0);
  if (m.f0_relative && !(*m.f0_relative >= 0.0)) throw ConfigError("optimizers[].F0_relative must be non-negative");
  c.validate();
  return m;
}

MethodRun method(Method m, double tau, int iters) {
  MethodRun r;
  r.cfg.method = m;
  r.cfg.tau = tau;
  r.cfg.max_iters = iters;
  r.cfg.trigger = Trigger::stagnation;
  r.cfg.halt_on_failed_episode = false;
  return r;
}

}  // namespace

json ExperimentConfig::to_json() const {
  json opt = json::array();
  for (const auto& m : optimizers) opt.push_back(optimizer_to_json(m));
  json j = {{"name", name},
            {"objective", objective},
            {"ensemble", {{"particles", particles}, {"init_scale", init_scale}}},
            {"optimizers", opt},
            {"trials", {{"count", trials}, {"seed", seed}}},
            {"output", {{"dir", out_dir}, {"timing", timing}, {"w2_column", w2_column}}}};
  if (!init_center.empty()) j["ensemble"]["init_center"] = init_center;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  c.name = get_or<std::string>(j, "config", "name", c.name);
  if (!j.contains("objective") || !j["objective"].is_object()) throw ConfigError("config.objective is required");
  c.objective = j["objective"];
  if (j.contains("ensemble")) {
    const json& e = j["ensemble"];
    c.particles = get_or<Index>(e, "ensemble", "particles", c.particles);
    c.init_scale = get_or(e, "ensemble", "init_scale", c.init_scale);
    c.init_center = get_or(e, "ensemble", "init_center", c.init_center);
  }
  if (c.particles < 1) throw ConfigError("ensemble.particles must be positive");
  if (!(c.init_scale >= 0.0)) throw ConfigError("ensemble.init_scale must be non-negative");
  if (!j.contains("optimizers") || !j["optimizers"].is_array() || j["optimizers"].empty()) {
    throw ConfigError("config.optimizers must be a non-empty list");
  }
  for (const auto& o : j["optimizers"]) c.optimizers.push_back(optimizer_from_json(o));
  if (j.contains("trials")) {
    c.trials = get_or(j["trials"], "trials", "count", c.trials);
    c.seed = get_or(j["trials"], "trials", "seed", c.seed);
  }
  if (c.trials < 1) throw ConfigError("trials.count must be positive");
  if (j.contains("output")) {
    c.out_dir = get_or(j["output"], "output", "dir", c.out_dir);
    c.timing = get_or(j["output"], "output", "timing", c.timing);
    c.w2_column = get_or(j["output"], "output", "w2_column", c.w2_column);
  }
  return c;
}

std::vector<std::string> preset_names() { return {"exp1_icl", "exp2_matdec", "exp3_coulomb"}; }

ExperimentConfig make_preset(std::string_view name) {
  ExperimentConfig c;
  c.name = std::string(name);
  c.out_dir = "wsfn-out/" + c.name;
  if (name == "exp1_icl" || name == "exp2_matdec") {
    const bool icl = name == "exp1_icl";
    const int iters = 3000;
    c.objective = {{"kind", icl ? "icl" : "matrix_decomp"},
                   {"input_dim", 15},
                   {"feature_dim", 5},
                   {"samples", 300},
                   {"teacher_count", 5},
                   {"activation", "tanh"}};
    c.particles = icl ? 400 : 300;
    c.trials = 5;
    // Students start from the teacher's particle distribution N(0, I/(k+l)).
    c.init_scale = 1.0 / std::sqrt(20.0);
    const double tau = icl ? 1e-7 : 5e-6;
    for (Method m : {Method::wgf, Method::wgf_isotropic, Method::pwgf, Method::wsfn}) {
      MethodRun r = method(m, tau, iters);
      r.cfg.n_out = 100;
      r.cfg.eta = 1e-2;
      r.f0_relative = 1e-3;
      if (m == Method::wsfn) {
        r.cfg.beta = icl ? 1e-3 : 1e-4;
        r.cfg.lanczos_m = icl ? 10 : 12;
      }
      c.optimizers.push_back(r);
    }
    return c;
  }
  if (name == "exp3_coulomb") {
    c.objective = {{"kind", "coulomb_mmd"},
                   {"dim", 3},
                   {"eps_ker", 5e-2},
                   {"modes", {{2.0, 0.0, 0.0}, {-2.0, 0.0, 0.0}}},
                   {"noise", 0.25},
                   {"target_count", 400}};
    c.particles = 500;
    c.trials = 5;
    c.init_scale = 0.1;
    for (Method m : {Method::wgf, Method::wgf_isotropic, Method::pwgf, Method::wsfn}) {
      MethodRun r = method(m, 1e-6, 3000);
      r.cfg.n_out = 20;
      r.cfg.F0 = 1e-2;
      r.cfg.eta = 1e-1;
      r.cfg.perturb_mode = PerturbMode::gp_rms_normalized;
      if (m == Method::wsfn) {
        r.cfg.beta = 1e-5;
        r.cfg.lanczos_m = 12;
      }
      c.optimizers.push_back(r);
    }
    return c;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "' (known: exp1_icl, exp2_matdec, exp3_coulomb)");
}

void apply_scale(ExperimentConfig& cfg, double scale) {
  if (!(scale > 0.0)) throw ConfigError("--scale must be positive");
  auto shrink = [scale](long v, long floor) {
    return std::max<long>(floor, static_cast<long>(std::lround(static_cast<double>(v) * scale)));
  };
  cfg.particles = shrink(cfg.particles, 20);
  for (const char* key : {"samples", "target_count"}) {
    if (cfg.objective.contains(key)) cfg.objective[key] = shrink(cfg.objective[key].get<long>(), 20);
  }
  for (auto& m : cfg.optimizers) m.cfg.max_iters = static_cast<int>(shrink(m.cfg.max_iters, 50));
}

void set_iterations(ExperimentConfig& cfg, int iters) {
  if (iters < 0) throw ConfigError("--iters must be non-negative");
  for (auto& m : cfg.optimizers) m.cfg.max_iters = iters;
}

void filter_methods(ExperimentConfig& cfg, const std::vector<std::string>& methods) {
  std::vector<MethodRun> kept;
  for (const auto& name : methods) {
    const Method m = method_from_string(name);
    auto it = std::find_if(cfg.optimizers.begin(), cfg.optimizers.end(),
                           [m](const MethodRun& r) { return r.cfg.method == m; });
    if (it == cfg.optimizers.end()) throw ConfigError("method '" + name + "' is not part of this experiment");
    kept.push_back(*it);
  }
  cfg.optimizers = std::move(kept);
}

bool ExperimentResult::any_failed() const {
  for (const auto& per_method : records) {
    for (const auto& r : per_method) {
      if (r.failed) return true;
    }
  }
  return false;
}

std::uint64_t trial_seed(const ExperimentConfig& cfg, int trial) {
  return cfg.seed + static_cast<std::uint64_t>(trial);
}

ObjectivePtr make_trial_objective(const ExperimentConfig& cfg, int trial) {
  json spec = cfg.objective;
  spec["seed"] = trial_seed(cfg, trial);
  return make_objective(spec);
}

ParticleEnsemble make_trial_init(const ExperimentConfig& cfg, const Objective& obj, int trial) {
  const Index d = obj.particle_dim();
  Rng rng = make_stream(trial_seed(cfg, trial), {0x1417});
  RowMatrix x = standard_normal_matrix(cfg.particles, d, rng) * cfg.init_scale;
  if (!cfg.init_center.empty()) {
    if (static_cast<Index>(cfg.init_center.size()) != d) {
      throw ConfigError("ensemble.init_center must have the particle dimension " + std::to_string(d));
    }
    for (Index i = 0; i < x.rows(); ++i) {
      for (Index k = 0; k < d; ++k) x(i, k) += cfg.init_center[static_cast<std::size_t>(k)];
    }
  }
  return ParticleEnsemble(std::move(x));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned jobs) {
  if (cfg.optimizers.empty()) throw ConfigError("no optimizers to run");
  const auto n_methods = cfg.optimizers.size();
  const auto n_trials = static_cast<std::size_t>(cfg.trials);
  std::vector<ObjectivePtr> objectives;
  std::vector<ParticleEnsemble> inits;
  for (int t = 0; t < cfg.trials; ++t) {
    objectives.push_back(make_trial_objective(cfg, t));
    inits.push_back(make_trial_init(cfg, *objectives.back(), t));
  }
  std::optional<ParticleEnsemble> target;
  if (cfg.w2_column) {
    if (cfg.objective.value("kind", "") != "potential") {
      throw ConfigError("output.w2_column needs an objective with an N-atom minimizer (potential)");
    }
  }
  for (const auto& m : cfg.optimizers) m.cfg.validate();

  ExperimentResult result{cfg, {}, {}};
  result.records.assign(n_methods, std::vector<RunRecord>(n_trials, RunRecord{{}, inits.front()}));
  result.f0_used.assign(n_methods, std::vector<double>(n_trials, 0.0));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < n_methods * n_trials; job = next++) {
      const std::size_t m = job / n_trials;
      const std::size_t t = job % n_trials;
      const Objective& obj = *objectives[t];
      OptimizerConfig oc = cfg.optimizers[m].cfg;
      oc.seed = trial_seed(cfg, static_cast<int>(t));
      RunOptions ro;
      ro.stream = m;
      if (cfg.w2_column) {
        const auto& pot = static_cast<const PotentialEnergy&>(obj);
        RowMatrix x(cfg.particles, obj.particle_dim());
        for (Index i = 0; i < x.rows(); ++i) x.row(i) = pot.params().center.transpose();
        ro.target = ParticleEnsemble(std::move(x));
      }
      try {
        if (cfg.optimizers[m].f0_relative) oc.F0 = *cfg.optimizers[m].f0_relative * std::abs(obj.value(inits[t]));
        result.f0_used[m][t] = oc.F0;
        result.records[m][t] = run(obj, inits[t], oc, ro);
      } catch (const Error& e) {
        RunRecord rec{{}, inits[t]};
        rec.failed = true;
        rec.termination = std::string("error: ") + e.what();
        result.records[m][t] = std::move(rec);
      }
    }
  };
  if (jobs == 0) jobs = 1;
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, n_methods * n_trials));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < jobs; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return result;
}

// ---------------------------------------------------------------------------

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string trace_csv(const std::vector<RunRecord>& trials, bool timing, bool w2_column) {
  std::ostringstream os;
  os << "trial,iter,loss,grad_norm,event,elapsed_ms" << (w2_column ? ",w2_to_target" : "") << "\n";
  for (std::size_t t = 0; t < trials.size(); ++t) {
    for (const auto& r : trials[t].rows) {
      os << t << ',' << r.iter << ',' << num(r.loss) << ',' << num(r.grad_norm) << ',' << to_string(r.event) << ',';
      if (timing) os << num(r.elapsed_ms);
      if (w2_column) os << ',' << (r.w2_to_target ? num(*r.w2_to_target) : "");
      os << "\n";
    }
  }
  return os.str();
}

std::string render_loss_svg(const ExperimentResult& result) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  const double w = 720, h = 440, left = 80, right = 170, top = 40, bottom = 60;
  struct Curve {
    std::string label;
    std::vector<double> mean, lo, hi;
  };
  std::vector<Curve> curves;
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = -std::numeric_limits<double>::infinity();
  std::size_t xmax = 1;
  for (std::size_t m = 0; m < result.records.size(); ++m) {
    Curve c;
    c.label = std::string(to_string(result.config.optimizers[m].cfg.method));
    std::size_t len = std::numeric_limits<std::size_t>::max();
    for (const auto& r : result.records[m]) len = std::min(len, r.rows.size());
    for (std::size_t i = 0; i < len; ++i) {
      double s = 0.0, s2 = 0.0;
      const double k = static_cast<double>(result.records[m].size());
      for (const auto& r : result.records[m]) {
        s += r.rows[i].loss;
        s2 += r.rows[i].loss * r.rows[i].loss;
      }
      const double mean = s / k;
      const double sd = std::sqrt(std::max(0.0, s2 / k - mean * mean));
      c.mean.push_back(mean);
      c.lo.push_back(mean - sd);
      c.hi.push_back(mean + sd);
      if (mean > 0.0) ymin = std::min(ymin, mean);
      ymax = std::max(ymax, mean + sd);
    }
    xmax = std::max(xmax, len > 0 ? len - 1 : 1);
    curves.push_back(std::move(c));
  }
  if (!std::isfinite(ymin) || !(ymax > 0.0)) {
    ymin = 1e-12;
    ymax = 1.0;
  }
  const double lmin = std::floor(std::log10(ymin));
  const double lmax = std::max(lmin + 1.0, std::ceil(std::log10(ymax)));
  const double floor_value = std::pow(10.0, lmin);
  auto px = [&](double i) { return left + (w - left - right) * i / static_cast<double>(xmax); };
  auto py = [&](double y) {
    const double l = std::log10(std::max(y, floor_value));
    return top + (h - top - bottom) * (lmax - l) / (lmax - lmin);
  };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
     << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << result.config.name
     << ": loss (mean &#177; 1 sd over " << result.config.trials << " trials)</text>\n";
  for (double l = lmin; l <= lmax + 1e-9; l += 1.0) {
    const double y = py(std::pow(10.0, l));
    os << "<line x1=\"" << left << "\" x2=\"" << w - right << "\" y1=\"" << y << "\" y2=\"" << y
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << static_cast<int>(l)
       << "</text>\n";
  }
  for (int k = 0; k <= 5; ++k) {
    const double it = static_cast<double>(xmax) * k / 5.0;
    os << "<text x=\"" << px(it) << "\" y=\"" << h - bottom + 18 << "\" text-anchor=\"middle\">"
       << static_cast<long>(std::lround(it)) << "</text>\n";
  }
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << w - left - right << "\" height=\""
     << h - top - bottom << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 15 << "\" text-anchor=\"middle\">iteration</text>\n";
  for (std::size_t m = 0; m < curves.size(); ++m) {
    const auto& c = curves[m];
    const char* color = colors[m % 6];
    if (c.mean.empty()) continue;
    os << "<path fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" d=\"";
    for (std::size_t i = 0; i < c.hi.size(); ++i) os << (i ? 'L' : 'M') << px(double(i)) << ',' << py(c.hi[i]) << ' ';
    for (std::size_t i = c.lo.size(); i-- > 0;) os << 'L' << px(double(i)) << ',' << py(c.lo[i]) << ' ';
    os << "Z\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
    for (std::size_t i = 0; i < c.mean.size(); ++i) os << px(double(i)) << ',' << py(c.mean[i]) << ' ';
    os << "\"/>\n";
    const double ly = top + 18.0 * static_cast<double>(m + 1);
    os << "<line x1=\"" << w - right + 12 << "\" x2=\"" << w - right + 36 << "\" y1=\"" << ly << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
    os << "<text x=\"" << w - right + 42 << "\" y=\"" << ly + 4 << "\">" << c.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_artifacts(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + (dir / name).string());
    out << text;
  };
  json meta;
  meta["config"] = result.config.to_json();
  meta["runs"] = json::array();
  for (std::size_t m = 0; m < result.records.size(); ++m) {
    const std::string label(to_string(result.config.optimizers[m].cfg.method));
    write(label + ".csv", trace_csv(result.records[m], result.config.timing, result.config.w2_column));
    for (std::size_t t = 0; t < result.records[m].size(); ++t) {
      const RunRecord& r = result.records[m][t];
      meta["runs"].push_back({{"method", label},
                              {"trial", t},
                              {"seed", trial_seed(result.config, static_cast<int>(t))},
                              {"F0", result.f0_used[m][t]},
                              {"perturbations", r.perturbations},
                              {"termination", r.termination},
                              {"warnings", r.warnings}});
    }
  }
  meta["defaults"] = {
      {"seed_streams", "mt19937_64 seeded by std::seed_seq over (trial seed, stream ids); std::normal_distribution"},
      {"trial_seed", "trials.seed + trial index; drives data, initialization and perturbations"},
      {"stagnation_F0", "F0_relative * |F(mu^0)| where F0_relative is set"},
      {"elapsed_ms", "empty unless output.timing is set"}};
  write("metadata.json", meta.dump(2) + "\n");
  write("loss.svg", render_loss_svg(result));
}

}  // namespace wsfn
