#include "wsfn/optimize.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "wsfn/errors.hpp"
#include "wsfn/spectral.hpp"

namespace wsfn {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::wgf: return "wgf";
    case Method::wgf_isotropic: return "wgf_isotropic";
    case Method::pwgf: return "pwgf";
    case Method::newton: return "newton";
    case Method::lm: return "lm";
    case Method::wsfn: return "wsfn";
  }
  return "unknown";
}

std::string_view to_string(Trigger t) {
  switch (t) {
    case Trigger::grad_norm: return "grad_norm";
    case Trigger::grad_and_curvature: return "grad_and_curvature";
    case Trigger::stagnation: return "stagnation";
  }
  return "unknown";
}

std::string_view to_string(Event e) {
  switch (e) {
    case Event::step: return "step";
    case Event::perturb: return "perturb";
    case Event::episode_end: return "episode_end";
    case Event::terminate: return "terminate";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  for (auto m : {Method::wgf, Method::wgf_isotropic, Method::pwgf, Method::newton, Method::lm, Method::wsfn}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown optimizer method '" + std::string(name) + "'");
}

Trigger trigger_from_string(std::string_view name) {
  for (auto t : {Trigger::grad_norm, Trigger::grad_and_curvature, Trigger::stagnation}) {
    if (to_string(t) == name) return t;
  }
  throw ConfigError("unknown trigger '" + std::string(name) + "'");
}

void OptimizerConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("optimizer.tau must be positive");
  if (method == Method::wsfn && !(beta > 0.0)) throw ConfigError("optimizer.beta must be positive for wsfn");
  if (method == Method::wsfn && lanczos_m < 1) throw ConfigError("optimizer.lanczos_m must be at least 1");
  if (n_out < 1) throw ConfigError("optimizer.n_out must be at least 1");
  if (!(F0 >= 0.0)) throw ConfigError("optimizer.F0 must be non-negative");
  if (!(eta >= 0.0)) throw ConfigError("optimizer.eta must be non-negative");
  if (kappa && !(*kappa > 0.0)) throw ConfigError("optimizer.kappa must be positive when set");
  if (max_iters < 0) throw ConfigError("optimizer.max_iters must be non-negative");
  if (!(fd_step > 0.0)) throw ConfigError("optimizer.fd_step must be positive");
}

bool OptimizerConfig::perturbs() const {
  return method == Method::wgf_isotropic || method == Method::pwgf || method == Method::wsfn;
}

// ---------------------------------------------------------------------------

namespace {

TangentField finite_grad(const Objective& obj, const ParticleEnsemble& mu) {
  TangentField g = obj.grad(mu);
  if (!g.all_finite()) throw NumericError("non-finite Wasserstein gradient");
  return g;
}

ParticleEnsemble push_checked(const ParticleEnsemble& mu, const TangentField& dir, double scale, const char* what) {
  if (!dir.all_finite()) throw NumericError(std::string(what) + ": non-finite direction");
  return push(mu, dir, scale);
}

Matrix dense_hessian(const Objective& obj, const ParticleEnsemble& mu) {
  const HessianOperator h(obj, mu, HessianOperator::default_mode(obj));
  return h.assemble_dense();
}

}  // namespace

ParticleEnsemble step_wgf(const Objective& obj, const ParticleEnsemble& mu, double tau) {
  return push_checked(mu, finite_grad(obj, mu), -tau, "wgf");
}

TangentField wsfn_direction(const Objective& obj, const ParticleEnsemble& mu, const OptimizerConfig& cfg) {
  const TangentField g = finite_grad(obj, mu);
  if (g.values().isZero(0.0)) return g;
  const HessianOperator h(obj, mu, cfg.hvp_mode.value_or(HessianOperator::default_mode(obj)), cfg.fd_step);
  const Vector dir = lanczos_apply_inv_sqrt(h.as_operator(), g.flat(), cfg.beta, cfg.lanczos_m);
  return TangentField::from_flat(dir, mu.dim());
}

ParticleEnsemble step_wsfn(const Objective& obj, const ParticleEnsemble& mu, const OptimizerConfig& cfg) {
  if (!(cfg.beta > 0.0)) throw ConfigError("wsfn: beta must be positive");
  if (cfg.lanczos_m < 1) throw ConfigError("wsfn: lanczos_m must be at least 1");
  return push_checked(mu, wsfn_direction(obj, mu, cfg), -cfg.tau, "wsfn");
}

ParticleEnsemble step_newton(const Objective& obj, const ParticleEnsemble& mu, double tau) {
  const TangentField g = finite_grad(obj, mu);
  Eigen::SelfAdjointEigenSolver<Matrix> es(dense_hessian(obj, mu));
  if (es.info() != Eigen::Success) throw NumericError("newton: Hessian eigensolve failed");
  const Vector abs_eigs = es.eigenvalues().cwiseAbs();
  const double lo = abs_eigs.minCoeff();
  const double hi = abs_eigs.maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw NumericError("newton: Hessian is singular or ill-conditioned (condition estimate " +
                       std::to_string(lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()) +
                       "); use lm or wsfn instead");
  }
  const Matrix& q = es.eigenvectors();
  const Vector dir = q * (q.transpose() * g.flat()).cwiseQuotient(es.eigenvalues());
  return push_checked(mu, TangentField::from_flat(dir, mu.dim()), -tau, "newton");
}

ParticleEnsemble step_lm(const Objective& obj, const ParticleEnsemble& mu, double tau) {
  if (!(tau > 0.0)) throw ConfigError("lm: tau must be positive");
  const TangentField g = finite_grad(obj, mu);
  Matrix h = dense_hessian(obj, mu);
  h.diagonal().array() += 1.0 / tau;
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) {
    throw NumericError(
        "lm: H + I/tau is not positive definite; the Hessian has curvature below -1/tau. "
        "Levenberg-Marquardt regularization only covers H >= -delta with tau < 1/delta; decrease tau");
  }
  const Vector dir = llt.solve(g.flat());
  return push_checked(mu, TangentField::from_flat(dir, mu.dim()), -1.0, "lm");
}

ParticleEnsemble step(const Objective& obj, const ParticleEnsemble& mu, const OptimizerConfig& cfg) {
  switch (cfg.method) {
    case Method::wgf:
    case Method::wgf_isotropic:
    case Method::pwgf:
      return step_wgf(obj, mu, cfg.tau);
    case Method::wsfn:
      return step_wsfn(obj, mu, cfg);
    case Method::newton:
      return step_newton(obj, mu, cfg.tau);
    case Method::lm:
      return step_lm(obj, mu, cfg.tau);
  }
  throw ConfigError("unknown optimizer method");
}

// ---------------------------------------------------------------------------

RunRecord run(const Objective& obj, const ParticleEnsemble& mu0, const OptimizerConfig& cfg,
              const RunOptions& options) {
  cfg.validate();
  obj.check_dim(mu0);
  if (cfg.perturbs() && cfg.trigger == Trigger::grad_and_curvature && !obj.has_hessian_blocks()) {
    throw ConfigError("trigger grad_and_curvature needs the kernel operator, which " +
                      std::string(to_string(obj.kind())) + " does not expose; use stagnation");
  }
  if (options.target && (options.target->count() != mu0.count() || options.target->dim() != mu0.dim())) {
    throw ShapeError("run: target ensemble must match the particle count and dimension");
  }

  PerturbationSpec pspec;
  pspec.mode = cfg.method == Method::wgf_isotropic ? PerturbMode::isotropic : cfg.perturb_mode;
  pspec.eta = cfg.eta;
  pspec.kappa = cfg.kappa;
  if (cfg.perturbs() && pspec.mode != PerturbMode::isotropic && !obj.has_hessian_blocks()) {
    pspec.mode = PerturbMode::isotropic;
    // rms normalization is still meaningful for isotropic noise
    if (cfg.perturb_mode == PerturbMode::gp_rms_normalized) pspec.mode = PerturbMode::gp_rms_normalized;
  }

  RunRecord rec{{}, mu0};
  if (cfg.perturbs() && !obj.has_hessian_blocks() && cfg.method != Method::wgf_isotropic) {
    rec.warnings.push_back(std::string(to_string(obj.kind())) +
                           " has no kernel blocks; Hessian-guided perturbations fall back to isotropic noise");
  }

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double, std::milli>(clock::now() - start).count(); };

  ParticleEnsemble mu = mu0;
  std::vector<double> losses;
  int n_pert = 0;
  bool in_episode = false;
  double f_pert = 0.0;
  std::optional<ParticleEnsemble> mu_pert;
  bool zero_field_warned = false;

  for (int n = 0;; ++n) {
    TraceRow row;
    row.iter = n;
    try {
      row.loss = obj.value(mu);
      if (!std::isfinite(row.loss)) throw NumericError("non-finite loss");
      row.grad_norm = l2_norm(finite_grad(obj, mu));
    } catch (const Error& e) {
      rec.failed = true;
      rec.termination = std::string("error: ") + e.what();
      break;
    }
    if (options.target) row.w2_to_target = w2_exact(mu, *options.target);
    losses.push_back(row.loss);

    if (in_episode && n == n_pert + cfg.n_out) {
      in_episode = false;
      if (f_pert - row.loss <= cfg.F0) {
        if (cfg.halt_on_failed_episode) {
          row.event = Event::terminate;
          row.elapsed_ms = elapsed();
          rec.rows.push_back(row);
          rec.final_ensemble = *mu_pert;
          rec.termination = "failed_episode";
          return rec;
        }
        row.event = Event::episode_end;
      }
    }
    if (n == cfg.max_iters) {
      row.event = Event::terminate;
      row.elapsed_ms = elapsed();
      rec.rows.push_back(row);
      rec.termination = "max_iters";
      break;
    }

    try {
      if (cfg.perturbs() && n - n_pert > cfg.n_out) {
        bool fire = false;
        switch (cfg.trigger) {
          case Trigger::grad_norm:
            fire = row.grad_norm <= cfg.eps;
            break;
          case Trigger::grad_and_curvature:
            fire = row.grad_norm <= cfg.eps && min_eig_kernel(obj, mu) < -cfg.delta;
            break;
          case Trigger::stagnation:
            fire = n >= cfg.n_out && losses[n - cfg.n_out] - row.loss <= cfg.F0;
            break;
        }
        if (fire) {
          Rng rng = make_stream(cfg.seed, {options.stream, static_cast<std::uint64_t>(n)});
          PerturbOutcome out = perturb(obj, mu, pspec, rng);
          if (out.zero_field && !zero_field_warned) {
            rec.warnings.push_back("perturbation field vanished (kernel operator is zero at the iterate)");
            zero_field_warned = true;
          }
          mu = std::move(out.mu);
          mu_pert = mu;
          f_pert = obj.value(mu);
          n_pert = n;
          in_episode = true;
          ++rec.perturbations;
          row.event = Event::perturb;
        }
      }
      mu = step(obj, mu, cfg);
    } catch (const Error& e) {
      row.elapsed_ms = elapsed();
      rec.rows.push_back(row);
      rec.failed = true;
      rec.termination = std::string("error: ") + e.what();
      break;
    }
    row.elapsed_ms = elapsed();
    rec.rows.push_back(row);
  }
  rec.final_ensemble = mu;
  return rec;
}

// ---------------------------------------------------------------------------

void TheoryConstants::validate() const {
  if (!(C_H > 0.0) || !(L_H > 0.0) || !(R_F > 0.0) || !(F_min > 0.0)) {
    throw ConfigError("theory constants C_H, L_H, R_F and F_min must be positive");
  }
  if (!(zeta > 0.0 && zeta < 1.0)) throw ConfigError("theory constant zeta must lie in (0, 1)");
}

namespace {

TheoryParams params_for(const TheoryConstants& t, double beta, double delta, double eps, double zeta_ep,
                        const ParamOptions& o) {
  TheoryParams p;
  p.zeta_ep = zeta_ep;
  p.delta_tilde = delta / std::sqrt(delta * delta + beta);
  p.tau = std::min(1.0, std::sqrt(beta) / t.C_H);
  p.kappa = o.hessian_norm.value_or(t.C_H) * std::sqrt(2.0 * std::log(4.0 / zeta_ep));
  p.c_abs = o.c_abs.value_or(std::sqrt(2.0 * std::numbers::pi) * delta * zeta_ep / 4.0);
  const double lg = std::log1p(p.tau * p.delta_tilde);
  const double arg = 16.0 * std::sqrt(2.0 * t.C_H * p.tau) * p.kappa /
                     (std::sqrt(std::numbers::e * beta) * p.c_abs * std::sqrt(lg));
  p.n_out = 2.0 / lg * std::log(arg);
  if (!(p.n_out > 0.0) || !std::isfinite(p.n_out)) {
    throw NumericError("theoretical_params: n_out = " + std::to_string(p.n_out) +
                       " is not positive; the log argument is below 1 for these constants");
  }
  const double l32 = std::log(1.5);
  const double bracket = 1.0 / (2.0 * std::sqrt(beta)) + 2.0 * t.C_H / (std::numbers::pi * beta);
  p.F0 = beta * l32 * l32 / (144.0 * t.L_H * t.L_H * bracket * bracket * std::pow(p.tau * p.n_out, 3));
  p.eta = 2.0 * p.F0 / (p.kappa * (eps + std::sqrt(eps * eps + 2.0 * t.C_H * p.F0)));
  p.admissible = eps * (t.R_F / std::sqrt(beta) + 2.0 * t.L_H / (std::numbers::pi * beta)) <=
                 std::pow(p.delta_tilde, 1.5);
  return p;
}

}  // namespace

TheoryParams theoretical_params(const TheoryConstants& theory, double beta, double delta, double eps,
                                const ParamOptions& options) {
  theory.validate();
  if (!(beta > 0.0) || !(delta > 0.0) || !(eps > 0.0)) {
    throw ConfigError("theoretical_params: beta, delta and eps must be positive");
  }
  if (options.zeta_ep && !(*options.zeta_ep > 0.0 && *options.zeta_ep < 1.0)) {
    throw ConfigError("theoretical_params: zeta_ep must lie in (0, 1)");
  }
  if (options.c_abs && !(*options.c_abs > 0.0)) throw ConfigError("theoretical_params: |c| must be positive");
  if (options.hessian_norm && !(*options.hessian_norm > 0.0)) {
    throw ConfigError("theoretical_params: the Hessian norm must be positive");
  }
  if (options.zeta_ep) return params_for(theory, beta, delta, eps, *options.zeta_ep, options);

  // zeta_ep and F0 depend on each other; iterate zeta_ep = (4/3) zeta / ceil(F_min / F0)
  // from the largest admissible value. The sequence is non-increasing, so it
  // settles once the ceiling stops changing.
  double zeta_ep = 4.0 / 3.0 * theory.zeta;
  for (int it = 0; it < 200; ++it) {
    const TheoryParams p = params_for(theory, beta, delta, eps, zeta_ep, options);
    const double next = 4.0 / 3.0 * theory.zeta / std::ceil(theory.F_min / p.F0);
    if (next == zeta_ep) return p;
    zeta_ep = next;
  }
  throw NumericError("theoretical_params: the zeta_ep fixed point did not settle in 200 iterations");
}

}  // namespace wsfn
