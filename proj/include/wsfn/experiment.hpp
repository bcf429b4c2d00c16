#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsfn/optimize.hpp"

namespace wsfn {

struct MethodRun {
  OptimizerConfig cfg;
  /// When set, the stagnation tolerance is F0 = f0_relative * |F(mu^0)| per trial.
  std::optional<double> f0_relative;
};

/// A complete, reproducible experiment description. Presets materialize to
/// this type and it round-trips through JSON (sections objective,
/// optimizers, trials, output).
struct ExperimentConfig {
  std::string name = "custom";
  nlohmann::json objective;
  Index particles = 100;
  /// Initial particles are init_center + init_scale * N(0, I), drawn once per
  /// trial and shared by every method.
  double init_scale = 1.0;
  std::vector<double> init_center;
  std::vector<MethodRun> optimizers;
  int trials = 1;
  std::uint64_t seed = 0;
  std::string out_dir = "wsfn-out";
  bool timing = false;
  /// Adds a w2_to_target column (objectives whose minimizer has N atoms only).
  bool w2_column = false;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

std::vector<std::string> preset_names();
ExperimentConfig make_preset(std::string_view name);

/// Shrinks particles, data sample counts and iterations by `scale`, never
/// below 20 particles or samples and 50 iterations.
void apply_scale(ExperimentConfig& cfg, double scale);
void set_iterations(ExperimentConfig& cfg, int iters);
/// Keeps only the listed methods (in the listed order).
void filter_methods(ExperimentConfig& cfg, const std::vector<std::string>& methods);

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<std::vector<RunRecord>> records;  // [method][trial]
  std::vector<std::vector<double>> f0_used;     // [method][trial]
  bool any_failed() const;
};

/// Seeds used for trial t: data, initialization and perturbations all derive
/// from seed + t.
std::uint64_t trial_seed(const ExperimentConfig& cfg, int trial);
ObjectivePtr make_trial_objective(const ExperimentConfig& cfg, int trial);
ParticleEnsemble make_trial_init(const ExperimentConfig& cfg, const Objective& obj, int trial);

/// Runs every (method, trial) pair on up to `jobs` worker threads.
ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned jobs = 1);

/// CSV trace for one method: trial,iter,loss,grad_norm,event,elapsed_ms[,w2_to_target].
/// elapsed_ms is left empty unless `timing` is set so traces stay byte-stable.
std::string trace_csv(const std::vector<RunRecord>& trials, bool timing, bool w2_column);

/// Loss curves (mean and one standard deviation band across trials, log
/// loss axis) as a standalone SVG document.
std::string render_loss_svg(const ExperimentResult& result);

/// Writes <method>.csv per method, metadata.json and loss.svg into `dir`.
void write_artifacts(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace wsfn
