#pragma once

#include <functional>

#include "wsfn/measure.hpp"

namespace wsfn {

/// Symmetric linear map on flattened particle coordinates.
using LinearOperator = std::function<Vector(const Vector&)>;

struct LanczosState {
  Vector alphas;  // diagonal of T, length m
  Vector betas;   // off-diagonal of T, length m - 1
  Matrix basis;   // n x m, orthonormal columns
  double v_norm = 0.0;
  double breakdown_tol = 0.0;
  bool broke_down = false;

  Index depth() const { return alphas.size(); }
};

/// Lanczos tridiagonalization started from v, with full reorthogonalization
/// (classical Gram-Schmidt applied twice) at every step. Stops early once the
/// next off-diagonal entry falls below 1e-12 * |v|.
LanczosState lanczos(const LinearOperator& apply, const Vector& v, Index m);

/// |v| Q f(T) e_1 for a scalar function f applied through the eigen
/// decomposition of the Lanczos tridiagonal.
Vector lanczos_apply(const LinearOperator& apply, const Vector& v, Index m,
                     const std::function<double(double)>& f);

/// Approximates (H^2 + beta I)^{-1/2} v with an m-step Krylov space of H.
Vector lanczos_apply_inv_sqrt(const LinearOperator& apply, const Vector& v, double beta_reg, Index m);

inline constexpr Index kDefaultDenseCap = 4096;

/// Dense oracle: Q diag((lambda^2 + beta)^{-1/2}) Q^T v. The input is
/// symmetrized as (A + A^T)/2 before the eigensolve.
Vector dense_inv_sqrt(const Matrix& a, const Vector& v, double beta_reg, Index cap = kDefaultDenseCap);

/// Smallest eigenvalue of a symmetric operator estimated from an m-step
/// Lanczos run (full reorthogonalization) started at `start`.
double lanczos_min_eigenvalue(const LinearOperator& apply, const Vector& start, Index m);

}  // namespace wsfn
