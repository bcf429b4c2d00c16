#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wsfn/hessian.hpp"
#include "wsfn/objectives.hpp"
#include "wsfn/perturb.hpp"

namespace wsfn {

enum class Method { wgf, wgf_isotropic, pwgf, newton, lm, wsfn };
enum class Trigger { grad_norm, grad_and_curvature, stagnation };
enum class Event { step, perturb, episode_end, terminate };

std::string_view to_string(Method m);
std::string_view to_string(Trigger t);
std::string_view to_string(Event e);
Method method_from_string(std::string_view name);
Trigger trigger_from_string(std::string_view name);

struct OptimizerConfig {
  Method method = Method::wsfn;
  double tau = 1e-2;
  double beta = 1e-3;
  Index lanczos_m = 10;
  double eps = 1e-3;
  double delta = 1e-2;
  int n_out = 100;
  double F0 = 0.0;
  double eta = 1e-1;
  std::optional<double> kappa;
  Trigger trigger = Trigger::grad_norm;
  int max_iters = 100;
  std::uint64_t seed = 0;
  /// Field used by pwgf and wsfn; wgf_isotropic always draws isotropic noise.
  PerturbMode perturb_mode = PerturbMode::gp_hessian;
  bool halt_on_failed_episode = true;
  /// Overrides the per-objective choice of exact_blocks or fd_transport.
  std::optional<HvpMode> hvp_mode;
  double fd_step = 1e-4;

  void validate() const;
  bool perturbs() const;
};

// Single steps. Each returns the pushed ensemble and leaves `mu` untouched.
ParticleEnsemble step_wgf(const Objective& obj, const ParticleEnsemble& mu, double tau);
ParticleEnsemble step_wsfn(const Objective& obj, const ParticleEnsemble& mu, const OptimizerConfig& cfg);
ParticleEnsemble step_newton(const Objective& obj, const ParticleEnsemble& mu, double tau);
ParticleEnsemble step_lm(const Objective& obj, const ParticleEnsemble& mu, double tau);

/// The preconditioned direction (H^2 + beta I)^{-1/2} grad F used by step_wsfn.
TangentField wsfn_direction(const Objective& obj, const ParticleEnsemble& mu, const OptimizerConfig& cfg);

/// One step of whichever rule `cfg.method` names (no perturbation).
ParticleEnsemble step(const Objective& obj, const ParticleEnsemble& mu, const OptimizerConfig& cfg);

struct TraceRow {
  int iter = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  Event event = Event::step;
  double elapsed_ms = 0.0;
  std::optional<double> w2_to_target;
};

struct RunRecord {
  std::vector<TraceRow> rows;
  ParticleEnsemble final_ensemble;
  std::string termination;  // max_iters | failed_episode | error: <message>
  std::vector<std::string> warnings;
  int perturbations = 0;
  bool failed = false;
};

struct RunOptions {
  /// When set, every row carries W2(mu^n, target) (equal particle counts).
  std::optional<ParticleEnsemble> target;
  /// Stream id mixed into the per-iteration seed streams (e.g. the trial).
  std::uint64_t stream = 0;
};

/// The episode controller. Logs one row per iteration (the loss and gradient
/// norm at mu^n, tagged perturb when a perturbation is applied before the
/// step) and a final terminate row. Step errors end the run; the record then
/// has failed = true and termination "error: ...".
RunRecord run(const Objective& obj, const ParticleEnsemble& mu0, const OptimizerConfig& cfg,
              const RunOptions& options = {});

// ---------------------------------------------------------------------------

struct TheoryConstants {
  double C_H = 1.0;
  double L_H = 1.0;
  double R_F = 1.0;
  double zeta = 0.1;
  double F_min = 1.0;

  void validate() const;
};

struct ParamOptions {
  /// Fixes zeta_ep instead of solving zeta_ep = (4/3) ceil(F_min/F0)^{-1} zeta.
  std::optional<double> zeta_ep;
  /// |c| in the n_out log argument; defaults to sqrt(2 pi) delta zeta_ep / 4.
  std::optional<double> c_abs;
  /// Hilbert-Schmidt norm of the Hessian kernel entering kappa; defaults to C_H.
  std::optional<double> hessian_norm;
};

struct TheoryParams {
  double tau = 0.0;
  double kappa = 0.0;
  double n_out = 0.0;
  double F0 = 0.0;
  double eta = 0.0;
  double delta_tilde = 0.0;
  double zeta_ep = 0.0;
  double c_abs = 0.0;
  bool admissible = false;
};

TheoryParams theoretical_params(const TheoryConstants& theory, double beta, double delta, double eps,
                                const ParamOptions& options = {});

}  // namespace wsfn
