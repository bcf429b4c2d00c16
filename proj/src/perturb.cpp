#include "wsfn/perturb.hpp"

#include <cmath>

#include "wsfn/errors.hpp"
#include "wsfn/hessian.hpp"

namespace wsfn {

std::string_view to_string(PerturbMode mode) {
  switch (mode) {
    case PerturbMode::gp_hessian: return "gp_hessian";
    case PerturbMode::isotropic: return "isotropic";
    case PerturbMode::gp_rms_normalized: return "gp_rms_normalized";
  }
  return "unknown";
}

PerturbMode perturb_mode_from_string(std::string_view name) {
  for (auto m : {PerturbMode::gp_hessian, PerturbMode::isotropic, PerturbMode::gp_rms_normalized}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown perturbation mode '" + std::string(name) + "'");
}

void PerturbationSpec::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("perturbation: eta must be a finite non-negative number");
  if (kappa && !(*kappa > 0.0)) throw ConfigError("perturbation: kappa must be positive when set");
  if (max_attempts < 1) throw ConfigError("perturbation: max_attempts must be at least 1");
}

TangentField sample_gp(const Objective& obj, const ParticleEnsemble& mu, Rng& rng) {
  if (!obj.has_hessian_blocks()) {
    throw CapabilityError(std::string(to_string(obj.kind())) +
                          " has no kernel blocks; use isotropic perturbations instead");
  }
  const Index n = mu.count();
  const Index d = mu.dim();
  const RowMatrix g = standard_normal_matrix(n, d, rng);
  TangentField xi = TangentField::zeros(n, d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Index i = 0; i < n; ++i) {
    Vector acc = Vector::Zero(d);
    for (Index k = 0; k < n; ++k) acc += obj.k_block(mu, i, k) * g.row(k).transpose();
    xi.at(i) = scale * acc.transpose();
  }
  return xi;
}

TangentField sample_isotropic(Index n, Index d, Rng& rng) {
  if (n < 1 || d < 1) throw ShapeError("sample_isotropic: n and d must be positive");
  return TangentField(standard_normal_matrix(n, d, rng));
}

ParticleEnsemble apply_perturbation(const ParticleEnsemble& mu, const TangentField& xi, const PerturbationSpec& spec) {
  spec.validate();
  require_same_shape(mu, xi);
  if (spec.mode == PerturbMode::gp_rms_normalized) {
    const double rms = l2_norm(xi);
    if (rms == 0.0) return mu;
    return push(mu, xi, spec.eta / rms);
  }
  return push(mu, xi, spec.eta);
}

PerturbOutcome perturb(const Objective& obj, const ParticleEnsemble& mu, const PerturbationSpec& spec, Rng& rng) {
  spec.validate();
  PerturbOutcome out{mu};
  const bool gp = spec.mode != PerturbMode::isotropic && obj.has_hessian_blocks();
  out.fell_back_to_isotropic = spec.mode != PerturbMode::isotropic && !gp;
  TangentField xi;
  for (out.attempts = 1;; ++out.attempts) {
    xi = gp ? sample_gp(obj, mu, rng) : sample_isotropic(mu.count(), mu.dim(), rng);
    out.xi_norm = l2_norm(xi);
    if (!spec.kappa || out.xi_norm <= *spec.kappa) break;
    if (out.attempts >= spec.max_attempts) {
      throw NumericError("perturbation: |xi| <= kappa = " + std::to_string(*spec.kappa) + " not met after " +
                         std::to_string(spec.max_attempts) + " draws (last |xi| = " +
                         std::to_string(out.xi_norm) + ")");
    }
  }
  out.zero_field = out.xi_norm == 0.0;
  out.mu = apply_perturbation(mu, xi, spec);
  return out;
}

}  // namespace wsfn
