#include "wsfn/hessian.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "wsfn/errors.hpp"

namespace wsfn {

std::string_view to_string(HvpMode mode) {
  return mode == HvpMode::exact_blocks ? "exact_blocks" : "fd_transport";
}

namespace {

void require_blocks(const Objective& obj, const char* what) {
  if (!obj.has_hessian_blocks()) {
    throw CapabilityError(std::string(what) + " needs explicit Hessian blocks, which " +
                          std::string(to_string(obj.kind())) + " does not provide");
  }
}

void check_cap(Index n, Index cap, const char* what) {
  if (n > cap) {
    throw UnsupportedError(std::string(what) + ": N*d = " + std::to_string(n) + " exceeds the dense cap " +
                           std::to_string(cap));
  }
}

}  // namespace

HessianOperator::HessianOperator(const Objective& obj, const ParticleEnsemble& mu, HvpMode mode,
                                 double fd_step, Index dense_cap)
    : obj_(obj), mu_(mu), mode_(mode), fd_step_(fd_step), cap_(dense_cap) {
  obj_.check_dim(mu_);
  if (mode_ == HvpMode::exact_blocks) {
    require_blocks(obj_, "exact_blocks Hessian");
    const Index n = mu_.count() * mu_.dim();
    if (n <= cap_) {
      Matrix k = assemble_kernel_dense(obj_, mu_, cap_);
      const Index d = mu_.dim();
      for (Index i = 0; i < mu_.count(); ++i) k.block(i * d, i * d, d, d) += obj_.m_block(mu_, i);
      dense_ = std::move(k);
    }
  } else if (!(fd_step_ > 0.0)) {
    throw ConfigError("fd_transport Hessian: fd_step must be positive");
  }
}

TangentField HessianOperator::apply(const TangentField& v) const {
  if (v.count() != mu_.count() || v.dim() != mu_.dim()) throw ShapeError("hvp: field shape does not match ensemble");
  return TangentField::from_flat(apply_flat(v.flat()), mu_.dim());
}

Vector HessianOperator::apply_flat(const Vector& v) const {
  if (v.size() != mu_.count() * mu_.dim()) throw ShapeError("hvp: flattened field has the wrong length");
  Vector out = mode_ == HvpMode::exact_blocks ? exact_apply(v) : fd_apply(v);
  if (!out.allFinite()) throw NumericError("hvp: non-finite Hessian-vector product");
  return out;
}

LinearOperator HessianOperator::as_operator() const {
  return [this](const Vector& v) { return apply_flat(v); };
}

Vector HessianOperator::exact_apply(const Vector& v) const {
  if (dense_.size() > 0) return dense_ * v;
  const Index n = mu_.count();
  const Index d = mu_.dim();
  Vector out = Vector::Zero(n * d);
  for (Index i = 0; i < n; ++i) {
    Vector acc = obj_.m_block(mu_, i) * v.segment(i * d, d);
    Vector kacc = Vector::Zero(d);
    for (Index j = 0; j < n; ++j) kacc += obj_.k_block(mu_, i, j) * v.segment(j * d, d);
    out.segment(i * d, d) = acc + kacc / static_cast<double>(n);
  }
  return out;
}

Vector HessianOperator::fd_apply(const Vector& v) const {
  const double vmax = v.cwiseAbs().maxCoeff();
  if (vmax == 0.0) return Vector::Zero(v.size());
  const double pmax = mu_.positions().cwiseAbs().maxCoeff();
  const double t = fd_step_ * (1.0 + pmax) / std::max(1.0, vmax);
  const Vector x = mu_.flat();
  const Index d = mu_.dim();
  const Vector gp = obj_.grad(ParticleEnsemble::from_flat(x + t * v, d)).flat();
  const Vector gm = obj_.grad(ParticleEnsemble::from_flat(x - t * v, d)).flat();
  return (gp - gm) / (2.0 * t);
}

Matrix HessianOperator::assemble_dense() const {
  const Index n = mu_.count() * mu_.dim();
  check_cap(n, cap_, "assemble_dense");
  if (dense_.size() > 0) return dense_;
  Matrix h(n, n);
  for (Index c = 0; c < n; ++c) h.col(c) = apply_flat(Vector::Unit(n, c));
  if (mode_ == HvpMode::fd_transport) h = 0.5 * (h + h.transpose()).eval();
  return h;
}

Matrix assemble_kernel_dense(const Objective& obj, const ParticleEnsemble& mu, Index cap) {
  require_blocks(obj, "kernel assembly");
  obj.check_dim(mu);
  const Index n = mu.count();
  const Index d = mu.dim();
  check_cap(n * d, cap, "assemble_kernel_dense");
  Matrix k(n * d, n * d);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) k.block(i * d, j * d, d, d) = inv_n * obj.k_block(mu, i, j);
  }
  return k;
}

double min_eig_kernel(const Objective& obj, const ParticleEnsemble& mu, Index cap) {
  require_blocks(obj, "min_eig_kernel");
  obj.check_dim(mu);
  const Index n = mu.count();
  const Index d = mu.dim();
  if (n * d <= cap) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(assemble_kernel_dense(obj, mu, cap), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("min_eig_kernel: eigensolve failed");
    return es.eigenvalues()(0);
  }
  const LinearOperator kop = [&](const Vector& v) {
    Vector out = Vector::Zero(n * d);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) out.segment(i * d, d) += obj.k_block(mu, i, j) * v.segment(j * d, d);
    }
    return Vector(out / static_cast<double>(n));
  };
  // Deterministic, generic start vector.
  Vector start(n * d);
  for (Index i = 0; i < start.size(); ++i) start(i) = std::sin(1.0 + 0.7 * static_cast<double>(i));
  return lanczos_min_eigenvalue(kop, start, kMinEigLanczosBudget);
}

HessianConstants estimate_constants(const Objective& obj, const ParticleEnsemble& mu) {
  require_blocks(obj, "estimate_constants");
  obj.check_dim(mu);
  const Index n = mu.count();
  HessianConstants c;
  double hs = 0.0;
  for (Index i = 0; i < n; ++i) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(obj.m_block(mu, i), Eigen::EigenvaluesOnly);
    c.C_M = std::max(c.C_M, es.eigenvalues().cwiseAbs().maxCoeff());
    for (Index j = 0; j < n; ++j) hs += obj.k_block(mu, i, j).squaredNorm();
  }
  c.C_K = std::sqrt(hs) / static_cast<double>(n);
  return c;
}

}  // namespace wsfn
