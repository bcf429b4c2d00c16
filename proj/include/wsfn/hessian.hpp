#pragma once

#include "wsfn/objectives.hpp"
#include "wsfn/spectral.hpp"

namespace wsfn {

enum class HvpMode { exact_blocks, fd_transport };

std::string_view to_string(HvpMode mode);

/// The Wasserstein Hessian of an objective at a fixed ensemble, acting on
/// tangent fields. Holds references: the objective and ensemble must outlive it.
///
/// exact_blocks computes M_i v_i + (1/N) sum_j A[i,j] v_j (assembling the dense
/// matrix once when N*d is below the cap). fd_transport differentiates the
/// gradient along the push (Id + t v)_# mu with a centered difference.
class HessianOperator {
 public:
  HessianOperator(const Objective& obj, const ParticleEnsemble& mu, HvpMode mode, double fd_step = 1e-4,
                  Index dense_cap = kDefaultDenseCap);

  /// exact_blocks when the objective exposes blocks, fd_transport otherwise.
  static HvpMode default_mode(const Objective& obj) {
    return obj.has_hessian_blocks() ? HvpMode::exact_blocks : HvpMode::fd_transport;
  }

  TangentField apply(const TangentField& v) const;
  Vector apply_flat(const Vector& v) const;
  LinearOperator as_operator() const;

  /// blockdiag(M_i) + (1/N)[A[i,j]] in particle-major flattened coordinates.
  /// In fd_transport mode the matrix is built column by column and symmetrized.
  Matrix assemble_dense() const;

  HvpMode mode() const { return mode_; }
  const Objective& objective() const { return obj_; }
  const ParticleEnsemble& ensemble() const { return mu_; }

 private:
  Vector exact_apply(const Vector& v) const;
  Vector fd_apply(const Vector& v) const;

  const Objective& obj_;
  const ParticleEnsemble& mu_;
  HvpMode mode_;
  double fd_step_;
  Index cap_;
  Matrix dense_;  // cached exact matrix (empty when not assembled)
};

/// (1/N)[A[i,j]] as a dense (Nd)x(Nd) matrix.
Matrix assemble_kernel_dense(const Objective& obj, const ParticleEnsemble& mu, Index cap = kDefaultDenseCap);

/// Iteration budget of the Lanczos fallback used by min_eig_kernel above the
/// dense cap.
inline constexpr Index kMinEigLanczosBudget = 200;

/// Smallest eigenvalue of the flattened kernel operator (1/N)[A[i,j]].
double min_eig_kernel(const Objective& obj, const ParticleEnsemble& mu, Index cap = kDefaultDenseCap);

struct HessianConstants {
  double C_M = 0.0;  // max_i |M_i|_2
  double C_K = 0.0;  // Hilbert-Schmidt norm of the empirical kernel
};

HessianConstants estimate_constants(const Objective& obj, const ParticleEnsemble& mu);

}  // namespace wsfn
