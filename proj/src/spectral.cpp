#include "wsfn/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "wsfn/errors.hpp"

namespace wsfn {

namespace {

Eigen::SelfAdjointEigenSolver<Matrix> tridiagonal_eigen(const LanczosState& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  es.computeFromTridiagonal(s.alphas, s.betas, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw NumericError("lanczos: tridiagonal eigensolve failed");
  return es;
}

}  // namespace

LanczosState lanczos(const LinearOperator& apply, const Vector& v, Index m) {
  if (m < 1) throw ConfigError("lanczos: depth must be at least 1");
  const double vn = v.norm();
  if (!(vn > 0.0)) throw NumericError("lanczos: starting vector is zero");
  if (!std::isfinite(vn)) throw NumericError("lanczos: starting vector is not finite");
  const Index n = v.size();
  m = std::min(m, n);

  LanczosState s;
  s.v_norm = vn;
  s.breakdown_tol = 1e-12 * vn;
  s.basis.resize(n, m);
  std::vector<double> alphas;
  std::vector<double> betas;
  s.basis.col(0) = v / vn;
  for (Index j = 0; j < m; ++j) {
    Vector w = apply(s.basis.col(j));
    if (w.size() != n) throw ShapeError("lanczos: operator changed the vector length");
    if (!w.allFinite()) throw NumericError("lanczos: operator returned non-finite values");
    const double alpha = s.basis.col(j).dot(w);
    alphas.push_back(alpha);
    // Two passes of classical Gram-Schmidt against the whole basis.
    for (int pass = 0; pass < 2; ++pass) {
      const auto q = s.basis.leftCols(j + 1);
      w -= q * (q.transpose() * w);
    }
    if (j + 1 == m) break;
    const double beta = w.norm();
    if (beta < s.breakdown_tol) {
      s.broke_down = true;
      break;
    }
    betas.push_back(beta);
    s.basis.col(j + 1) = w / beta;
  }
  const Index depth = static_cast<Index>(alphas.size());
  s.alphas = Eigen::Map<Vector>(alphas.data(), depth);
  s.betas = Eigen::Map<Vector>(betas.data(), depth - 1);
  s.basis.conservativeResize(n, depth);
  return s;
}

Vector lanczos_apply(const LinearOperator& apply, const Vector& v, Index m,
                     const std::function<double(double)>& f) {
  const LanczosState s = lanczos(apply, v, m);
  const auto es = tridiagonal_eigen(s);
  const Matrix& z = es.eigenvectors();
  Vector fz(s.depth());
  for (Index i = 0; i < s.depth(); ++i) fz(i) = f(es.eigenvalues()(i));
  // f(T) e_1 = Z diag(f) Z^T e_1
  const Vector coeff = z * fz.cwiseProduct(z.row(0).transpose());
  Vector out = s.v_norm * (s.basis * coeff);
  if (!out.allFinite()) throw NumericError("lanczos: non-finite result");
  return out;
}

Vector lanczos_apply_inv_sqrt(const LinearOperator& apply, const Vector& v, double beta_reg, Index m) {
  if (!(beta_reg > 0.0)) throw ConfigError("lanczos_apply_inv_sqrt: beta must be positive");
  return lanczos_apply(apply, v, m, [beta_reg](double l) { return 1.0 / std::sqrt(l * l + beta_reg); });
}

Vector dense_inv_sqrt(const Matrix& a, const Vector& v, double beta_reg, Index cap) {
  if (a.rows() != a.cols() || a.rows() != v.size()) throw ShapeError("dense_inv_sqrt: shape mismatch");
  if (a.rows() > cap) {
    throw UnsupportedError("dense_inv_sqrt: dimension " + std::to_string(a.rows()) + " exceeds cap " +
                           std::to_string(cap));
  }
  if (!(beta_reg > 0.0)) throw ConfigError("dense_inv_sqrt: beta must be positive");
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) throw NumericError("dense_inv_sqrt: eigensolve failed");
  const Vector f = es.eigenvalues().unaryExpr([beta_reg](double l) { return 1.0 / std::sqrt(l * l + beta_reg); });
  return es.eigenvectors() * f.cwiseProduct(es.eigenvectors().transpose() * v);
}

double lanczos_min_eigenvalue(const LinearOperator& apply, const Vector& start, Index m) {
  const LanczosState s = lanczos(apply, start, m);
  return tridiagonal_eigen(s).eigenvalues()(0);
}

}  // namespace wsfn
