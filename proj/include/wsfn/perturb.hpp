#pragma once

#include <optional>
#include <string>

#include "wsfn/objectives.hpp"
#include "wsfn/rng.hpp"

namespace wsfn {

enum class PerturbMode { gp_hessian, isotropic, gp_rms_normalized };

std::string_view to_string(PerturbMode mode);
PerturbMode perturb_mode_from_string(std::string_view name);

struct PerturbationSpec {
  PerturbMode mode = PerturbMode::gp_hessian;
  double eta = 1e-1;
  std::optional<double> kappa;  // resample until |xi| <= kappa when set
  int max_attempts = 100;

  void validate() const;
};

/// Gaussian field at the particles with covariance C(x_i, x_j) =
/// (1/N) sum_k A[i,k] A[k,j], drawn as xi_i = N^{-1/2} sum_k A[i,k] g_k.
/// Throws CapabilityError for objectives without kernel blocks.
TangentField sample_gp(const Objective& obj, const ParticleEnsemble& mu, Rng& rng);

/// i.i.d. standard normal field.
TangentField sample_isotropic(Index n, Index d, Rng& rng);

/// positions + eta * xi, or + eta * xi / |xi| in rms-normalized mode. A zero
/// field in rms-normalized mode leaves the ensemble unchanged.
ParticleEnsemble apply_perturbation(const ParticleEnsemble& mu, const TangentField& xi, const PerturbationSpec& spec);

struct PerturbOutcome {
  ParticleEnsemble mu;
  double xi_norm = 0.0;
  int attempts = 0;
  bool fell_back_to_isotropic = false;
  bool zero_field = false;
};

/// Draws a field per `spec` (falling back to isotropic noise when the
/// objective has no kernel blocks), enforces the kappa bound by resampling
/// and applies it. Throws NumericError carrying the last norm if the bound is
/// not met within max_attempts draws.
PerturbOutcome perturb(const Objective& obj, const ParticleEnsemble& mu, const PerturbationSpec& spec, Rng& rng);

}  // namespace wsfn
