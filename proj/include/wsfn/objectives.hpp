#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "wsfn/measure.hpp"

namespace wsfn {

enum class ObjectiveKind { potential, interaction, coulomb_mmd, matrix_decomp, icl };

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind objective_kind_from_string(std::string_view name);

/// A functional F on uniform empirical measures.
///
/// `grad` returns the empirical Wasserstein gradient N * dF_N/dx_j. Objectives
/// with explicit second-order structure also expose the multiplication blocks
/// M_i and the kernel blocks A[i,j]; the Hessian acts on tangent fields as
/// (Hv)_i = M_i v_i + (1/N) sum_j A[i,j] v_j. Instances are immutable.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual ObjectiveKind kind() const = 0;
  virtual Index particle_dim() const = 0;

  virtual double value(const ParticleEnsemble& mu) const = 0;
  virtual TangentField grad(const ParticleEnsemble& mu) const = 0;

  virtual bool has_hessian_blocks() const { return false; }
  virtual Matrix m_block(const ParticleEnsemble& mu, Index i) const;
  virtual Matrix k_block(const ParticleEnsemble& mu, Index i, Index j) const;

  /// Seed used to generate embedded data (0 when nothing was sampled).
  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  void check_dim(const ParticleEnsemble& mu) const;

 protected:
  void check_index(const ParticleEnsemble& mu, Index i) const;

 private:
  std::uint64_t seed_ = 0;
};

using ObjectivePtr = std::shared_ptr<const Objective>;

// ---------------------------------------------------------------------------
// Potential energy F(mu) = int V dmu.

struct PotentialParams {
  enum class Shape { quadratic, quartic };
  Shape shape = Shape::quadratic;
  Vector center;     // m
  Vector curvature;  // quadratic only: V = 1/2 sum_k c_k (x_k - m_k)^2
};

class PotentialEnergy final : public Objective {
 public:
  explicit PotentialEnergy(PotentialParams params);

  ObjectiveKind kind() const override { return ObjectiveKind::potential; }
  Index particle_dim() const override { return params_.center.size(); }
  double value(const ParticleEnsemble& mu) const override;
  TangentField grad(const ParticleEnsemble& mu) const override;
  bool has_hessian_blocks() const override { return true; }
  Matrix m_block(const ParticleEnsemble& mu, Index i) const override;
  Matrix k_block(const ParticleEnsemble& mu, Index i, Index j) const override;

  const PotentialParams& params() const { return params_; }

 private:
  PotentialParams params_;
};

// ---------------------------------------------------------------------------
// Interaction energy F(mu) = int V_c dmu + 1/2 iint U(x - y) dmu dmu with an
// even kernel U and an optional quadratic confinement V_c = c/2 |x|^2.

struct InteractionParams {
  enum class Kernel { quadratic, gaussian };
  Kernel kernel = Kernel::quadratic;
  Index dim = 1;
  double scale = 1.0;       // quadratic: U = scale/2 |z|^2
  double amplitude = 1.0;   // gaussian: U = amplitude * exp(-|z|^2 / (2 width^2))
  double width = 1.0;
  double confinement = 0.0;
};

class InteractionEnergy final : public Objective {
 public:
  explicit InteractionEnergy(InteractionParams params);

  ObjectiveKind kind() const override { return ObjectiveKind::interaction; }
  Index particle_dim() const override { return params_.dim; }
  double value(const ParticleEnsemble& mu) const override;
  TangentField grad(const ParticleEnsemble& mu) const override;
  bool has_hessian_blocks() const override { return true; }
  Matrix m_block(const ParticleEnsemble& mu, Index i) const override;
  Matrix k_block(const ParticleEnsemble& mu, Index i, Index j) const override;

  const InteractionParams& params() const { return params_; }

 private:
  double kernel(const Vector& z) const;
  Vector kernel_grad(const Vector& z) const;
  Matrix kernel_hess(const Vector& z) const;

  InteractionParams params_;
};

// ---------------------------------------------------------------------------
// Coulomb MMD against a sampled target, U-statistic estimator with the
// clamped kernel k(z) = max(|z|^2, eps^2)^{-(d-2)/2}.

struct CoulombParams {
  RowMatrix target_samples;  // M x d
  double eps_ker = 5e-2;
};

class CoulombMmd final : public Objective {
 public:
  explicit CoulombMmd(CoulombParams params);

  ObjectiveKind kind() const override { return ObjectiveKind::coulomb_mmd; }
  Index particle_dim() const override { return params_.target_samples.cols(); }
  double value(const ParticleEnsemble& mu) const override;
  TangentField grad(const ParticleEnsemble& mu) const override;
  bool has_hessian_blocks() const override { return true; }
  Matrix m_block(const ParticleEnsemble& mu, Index i) const override;
  Matrix k_block(const ParticleEnsemble& mu, Index i, Index j) const override;

  const CoulombParams& params() const { return params_; }
  double target_self_energy() const { return target_term_; }

  // Clamped kernel and its derivatives; derivatives vanish inside the clamp.
  double kernel(const Vector& z) const;
  Vector kernel_grad(const Vector& z) const;
  Matrix kernel_hess(const Vector& z) const;

 private:
  CoulombParams params_;
  double target_term_ = 0.0;  // (1/(M(M-1))) sum_{l != r} k(y_l - y_r)
};

/// Target samples for the symmetric multi-mode Coulomb benchmark: sample s
/// sits at modes[s % modes] plus isotropic Gaussian noise.
RowMatrix make_mode_mixture(const RowMatrix& modes, double noise, Index count, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Mean-field two-layer network objectives. A particle is theta = (a, w) with
// a in R^k (output weights) and w in R^l (input weights);
// h_mu(z) = (1/N) sum_j a_j sigma(w_j . z).

enum class Activation { tanh, relu };

struct NetParams {
  RowMatrix inputs;             // n x l, samples z_s
  RowMatrix teacher_particles;  // N* x (k + l)
  Activation activation = Activation::tanh;
  Index feature_dim = 0;        // k
  Index input_dim = 0;          // l
  Matrix teacher_linear;        // k x k, icl only (T hat)
  double ridge = 1e-6;          // icl only
};

/// Draws inputs, teacher particles and (optionally) the teacher linear layer
/// from the documented distributions using `seed`.
NetParams make_net_params(Index input_dim, Index feature_dim, Index samples, Index teacher_count,
                          Activation activation, bool with_linear, std::uint64_t seed);

class NetworkObjective : public Objective {
 public:
  explicit NetworkObjective(NetParams params);

  Index particle_dim() const override { return params_.feature_dim + params_.input_dim; }
  const NetParams& params() const { return params_; }

  /// Student features h_mu(z_s), one row per sample.
  RowMatrix features(const ParticleEnsemble& mu) const;
  /// Teacher features h_{mu*}(z_s), one row per sample.
  const RowMatrix& teacher_features() const { return teacher_features_; }

 protected:
  struct Activations {
    RowMatrix act;   // N x n, sigma(w_j . z_s)
    RowMatrix dact;  // N x n, sigma'(w_j . z_s)
  };
  Activations activations(const RowMatrix& particles, bool with_derivative) const;
  RowMatrix features_from(const RowMatrix& particles, const RowMatrix& act) const;
  // Chain rule from dF/dh_s (rows of feature_grad) to N * dF/dtheta_j.
  TangentField chain_to_particles(const ParticleEnsemble& mu, const Activations& acts,
                                  const RowMatrix& feature_grad) const;

  NetParams params_;
  RowMatrix teacher_features_;
};

class MatrixDecomposition final : public NetworkObjective {
 public:
  explicit MatrixDecomposition(NetParams params);

  ObjectiveKind kind() const override { return ObjectiveKind::matrix_decomp; }
  double value(const ParticleEnsemble& mu) const override;
  TangentField grad(const ParticleEnsemble& mu) const override;
};

class InContextFeatureLearning final : public NetworkObjective {
 public:
  explicit InContextFeatureLearning(NetParams params);

  ObjectiveKind kind() const override { return ObjectiveKind::icl; }
  double value(const ParticleEnsemble& mu) const override;
  TangentField grad(const ParticleEnsemble& mu) const override;

  /// 1/2 Tr(Sigma_{*,*}), the value attained when student and teacher
  /// features are uncorrelated.
  double teacher_energy() const;

 private:
  struct Moments {
    Matrix sigma_mm;  // Sigma_{mu,mu}
    Matrix sigma_ms;  // Sigma_{mu,*}
    Matrix precision; // regularized inverse of Sigma_{mu,mu}
    double ridge_coeff;
  };
  Moments moments(const RowMatrix& h) const;
};

// ---------------------------------------------------------------------------

/// Builds an objective from its JSON description (the `objective` section of
/// a run config). Same description and seed give bit-identical embedded data.
ObjectivePtr make_objective(const nlohmann::json& spec);

}  // namespace wsfn
