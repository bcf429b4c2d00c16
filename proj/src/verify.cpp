#include "wsfn/verify.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "wsfn/errors.hpp"
#include "wsfn/hessian.hpp"
#include "wsfn/optimize.hpp"
#include "wsfn/perturb.hpp"
#include "wsfn/rng.hpp"
#include "wsfn/spectral.hpp"

namespace wsfn {

std::string_view to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::skipped: return "skipped";
  }
  return "unknown";
}

bool CheckReport::passed() const {
  return std::none_of(rows.begin(), rows.end(), [](const CheckResult& r) { return r.status == CheckStatus::fail; });
}

namespace {

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", x);
  return buf;
}

}  // namespace

std::string CheckReport::table() const {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %-7s  %-13s     %-13s  %s\n", static_cast<int>(width), "check", "status",
                "measured", "tolerance", "seed");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-*s  %-7s  %-13s  %-2s %-13s  %llu\n", static_cast<int>(width),
                  r.name.c_str(), std::string(to_string(r.status)).c_str(), sci(r.measured).c_str(),
                  r.comparison.c_str(), sci(r.tolerance).c_str(), static_cast<unsigned long long>(r.seed));
    os << line;
    if (r.status != CheckStatus::pass && !r.detail.empty()) os << "    " << r.detail << "\n";
  }
  os << "overall: " << (passed() ? "pass" : "fail") << "\n";
  return os.str();
}

nlohmann::json CheckReport::to_json() const {
  nlohmann::json j;
  j["overall"] = passed() ? "pass" : "fail";
  j["checks"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["checks"].push_back({{"name", r.name},
                           {"status", to_string(r.status)},
                           {"measured", r.measured},
                           {"tolerance", r.tolerance},
                           {"comparison", r.comparison},
                           {"seed", r.seed},
                           {"detail", r.detail}});
  }
  return j;
}

// ---------------------------------------------------------------------------

double grad_fd_error(const Objective& obj, const ParticleEnsemble& mu, double rel_step) {
  const Vector analytic = obj.grad(mu).flat();
  const Vector x = mu.flat();
  const Index d = mu.dim();
  const double n = static_cast<double>(mu.count());
  Vector fd(x.size());
  for (Index k = 0; k < x.size(); ++k) {
    const double h = rel_step * (1.0 + std::abs(x(k)));
    Vector xp = x;
    Vector xm = x;
    xp(k) += h;
    xm(k) -= h;
    const double fp = obj.value(ParticleEnsemble::from_flat(xp, d));
    const double fm = obj.value(ParticleEnsemble::from_flat(xm, d));
    fd(k) = n * (fp - fm) / (2.0 * h);
  }
  const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-300);
  return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

ObjectivePtr make_check_objective(ObjectiveKind kind, std::uint64_t seed) {
  switch (kind) {
    case ObjectiveKind::potential: {
      PotentialParams p;
      p.shape = PotentialParams::Shape::quartic;
      p.center = Vector::Zero(3);
      p.center << 0.3, -0.2, 0.1;
      return std::make_shared<PotentialEnergy>(p);
    }
    case ObjectiveKind::interaction: {
      InteractionParams p;
      p.kernel = InteractionParams::Kernel::gaussian;
      p.dim = 2;
      p.amplitude = 1.0;
      p.width = 0.8;
      p.confinement = 0.5;
      return std::make_shared<InteractionEnergy>(p);
    }
    case ObjectiveKind::coulomb_mmd: {
      RowMatrix modes(2, 3);
      modes << 1.5, 0, 0, -1.5, 0, 0;
      CoulombParams p;
      p.target_samples = make_mode_mixture(modes, 0.5, 30, seed);
      p.eps_ker = 5e-2;
      return std::make_shared<CoulombMmd>(std::move(p));
    }
    case ObjectiveKind::matrix_decomp:
      return std::make_shared<MatrixDecomposition>(make_net_params(4, 3, 40, 3, Activation::tanh, false, seed));
    case ObjectiveKind::icl:
      return std::make_shared<InContextFeatureLearning>(make_net_params(4, 3, 40, 3, Activation::tanh, true, seed));
  }
  throw ConfigError("unknown objective kind");
}

ParticleEnsemble make_check_ensemble(const Objective& obj, Index n, std::uint64_t seed) {
  Rng rng = make_stream(seed, {0xe5e});
  const Index d = obj.particle_dim();
  if (obj.kind() == ObjectiveKind::matrix_decomp || obj.kind() == ObjectiveKind::icl) {
    return ParticleEnsemble(standard_normal_matrix(n, d, rng) * 0.7);
  }
  if (obj.kind() != ObjectiveKind::coulomb_mmd) return ParticleEnsemble(standard_normal_matrix(n, d, rng));
  // Keep every pair well outside the kernel clamp so the objective is smooth
  // around the sample.
  const auto& c = static_cast<const CoulombMmd&>(obj);
  const double min_sep = 4.0 * c.params().eps_ker;
  for (;;) {
    RowMatrix x = standard_normal_matrix(n, d, rng);
    bool ok = true;
    for (Index i = 0; i < n && ok; ++i) {
      for (Index j = i + 1; j < n && ok; ++j) ok = (x.row(i) - x.row(j)).norm() > min_sep;
      for (Index l = 0; l < c.params().target_samples.rows() && ok; ++l) {
        ok = (x.row(i) - c.params().target_samples.row(l)).norm() > min_sep;
      }
    }
    if (ok) return ParticleEnsemble(std::move(x));
  }
}

namespace {

constexpr ObjectiveKind kAllKinds[] = {ObjectiveKind::potential, ObjectiveKind::interaction,
                                       ObjectiveKind::coulomb_mmd, ObjectiveKind::matrix_decomp,
                                       ObjectiveKind::icl};
constexpr ObjectiveKind kAnalyticKinds[] = {ObjectiveKind::potential, ObjectiveKind::interaction,
                                            ObjectiveKind::coulomb_mmd};

struct Outcome {
  double measured;
  double tolerance;
  bool upper = true;  // pass iff measured <= tolerance (else measured >= tolerance)
  std::string detail;
};

using CheckFn = std::function<Outcome(std::uint64_t)>;

Vector random_flat(Index n, Rng& rng) {
  RowMatrix m = standard_normal_matrix(n, 1, rng);
  return Eigen::Map<Vector>(m.data(), n);
}

Matrix random_symmetric(Index n, Rng& rng) {
  const RowMatrix a = standard_normal_matrix(n, n, rng);
  return (a + a.transpose()) / std::sqrt(2.0 * static_cast<double>(n));
}

// Symmetric matrix with prescribed spectrum.
Matrix with_spectrum(const Vector& eigs, Rng& rng) {
  const Index n = eigs.size();
  Eigen::HouseholderQR<Matrix> qr(Matrix(standard_normal_matrix(n, n, rng)));
  const Matrix q = qr.householderQ();
  return q * eigs.asDiagonal() * q.transpose();
}

ObjectivePtr quadratic_potential(const Vector& center, const Vector& curvature) {
  PotentialParams p;
  p.center = center;
  p.curvature = curvature;
  return std::make_shared<PotentialEnergy>(p);
}

ObjectivePtr saddle_interaction(Index dim) {
  // Confinement 1 with a repulsive quadratic kernel of scale -3: eigenvalue 1
  // on constant fields and -2 on mean-zero fields; the origin is critical.
  InteractionParams p;
  p.dim = dim;
  p.scale = -3.0;
  p.confinement = 1.0;
  return std::make_shared<InteractionEnergy>(p);
}

ParticleEnsemble constant_ensemble(const Vector& point, Index n) {
  RowMatrix x(n, point.size());
  for (Index i = 0; i < n; ++i) x.row(i) = point.transpose();
  return ParticleEnsemble(std::move(x));
}

std::string kind_list_detail(const std::map<std::string, double>& worst) {
  std::string s;
  for (const auto& [k, v] : worst) s += (s.empty() ? "" : ", ") + k + "=" + sci(v);
  return s;
}

// ---------------------------------------------------------------------------

Outcome check_grad_fd(std::uint64_t seed) {
  double worst = 0.0;
  std::map<std::string, double> per;
  for (ObjectiveKind kind : kAllKinds) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto obj = make_check_objective(kind, seed + s);
      const auto mu = make_check_ensemble(*obj, 10, seed + 100 + s);
      const double e = grad_fd_error(*obj, mu);
      per[std::string(to_string(kind))] = std::max(per[std::string(to_string(kind))], e);
      worst = std::max(worst, e);
    }
  }
  return {worst, 1e-5, true, kind_list_detail(per)};
}

Outcome check_hessian_symmetry(std::uint64_t seed) {
  double worst = 0.0;
  for (ObjectiveKind kind : kAnalyticKinds) {
    const auto obj = make_check_objective(kind, seed);
    const auto mu = make_check_ensemble(*obj, 8, seed + 1);
    const HessianOperator h(*obj, mu, HvpMode::exact_blocks, 1e-4, 0);  // blockwise path
    Rng rng = make_stream(seed, {2});
    for (int rep = 0; rep < 5; ++rep) {
      const TangentField v(standard_normal_matrix(mu.count(), mu.dim(), rng));
      const TangentField w(standard_normal_matrix(mu.count(), mu.dim(), rng));
      const double asym = std::abs(l2_inner(h.apply(v), w) - l2_inner(v, h.apply(w)));
      worst = std::max(worst, asym / (1.0 + l2_norm(v) * l2_norm(w)));
    }
  }
  return {worst, 1e-10, true, {}};
}

Outcome check_fd_hvp_symmetry(std::uint64_t seed) {
  double worst = 0.0;
  for (ObjectiveKind kind : kAllKinds) {
    const auto obj = make_check_objective(kind, seed);
    const auto mu = make_check_ensemble(*obj, 8, seed + 1);
    const HessianOperator h(*obj, mu, HvpMode::fd_transport);
    Rng rng = make_stream(seed, {3});
    const TangentField v(standard_normal_matrix(mu.count(), mu.dim(), rng));
    const TangentField w(standard_normal_matrix(mu.count(), mu.dim(), rng));
    const double asym = std::abs(l2_inner(h.apply(v), w) - l2_inner(v, h.apply(w)));
    worst = std::max(worst, asym / (1.0 + l2_norm(v) * l2_norm(w)));
  }
  return {worst, 1e-5, true, {}};
}

Outcome check_dense_matvec(std::uint64_t seed) {
  double worst = 0.0;
  for (ObjectiveKind kind : kAnalyticKinds) {
    const auto obj = make_check_objective(kind, seed);
    const auto mu = make_check_ensemble(*obj, 8, seed + 1);
    const HessianOperator blockwise(*obj, mu, HvpMode::exact_blocks, 1e-4, 0);
    const HessianOperator cached(*obj, mu, HvpMode::exact_blocks);
    const Matrix dense = cached.assemble_dense();
    worst = std::max(worst, (dense - dense.transpose()).cwiseAbs().maxCoeff());
    Rng rng = make_stream(seed, {4});
    for (int rep = 0; rep < 3; ++rep) {
      const Vector v = random_flat(dense.rows(), rng);
      const Vector hv = blockwise.apply_flat(v);
      worst = std::max(worst, (dense * v - hv).cwiseAbs().maxCoeff() / std::max(1.0, hv.cwiseAbs().maxCoeff()));
    }
  }
  return {worst, 1e-12, true, {}};
}

Outcome check_fd_hvp_agreement(std::uint64_t seed) {
  const auto obj = make_check_objective(ObjectiveKind::coulomb_mmd, seed);
  const auto mu = make_check_ensemble(*obj, 10, seed + 1);
  const HessianOperator exact(*obj, mu, HvpMode::exact_blocks);
  const HessianOperator fd(*obj, mu, HvpMode::fd_transport);
  Rng rng = make_stream(seed, {5});
  double worst = 0.0;
  for (int rep = 0; rep < 3; ++rep) {
    const TangentField v(standard_normal_matrix(mu.count(), mu.dim(), rng));
    const TangentField he = exact.apply(v);
    worst = std::max(worst, l2_norm(fd.apply(v) - he) / l2_norm(he));
  }
  return {worst, 1e-4, true, {}};
}

double expansion_remainder(const Objective& obj, const ParticleEnsemble& mu, const TangentField& v, double t) {
  const HessianOperator h(obj, mu, HvpMode::exact_blocks);
  const double f0 = obj.value(mu);
  const double ft = obj.value(push(mu, v, t));
  return std::abs(ft - f0 - t * l2_inner(obj.grad(mu), v) - 0.5 * t * t * l2_inner(h.apply(v), v));
}

Outcome check_second_order_expansion(std::uint64_t seed) {
  double worst = std::numeric_limits<double>::infinity();
  std::map<std::string, double> per;
  for (ObjectiveKind kind : kAnalyticKinds) {
    const auto obj = make_check_objective(kind, seed);
    const auto mu = make_check_ensemble(*obj, 8, seed + 1);
    Rng rng = make_stream(seed, {6});
    const TangentField v(standard_normal_matrix(mu.count(), mu.dim(), rng));
    const double t = 2e-2 / std::max(1.0, l2_norm(v));
    const double ratio = expansion_remainder(*obj, mu, v, t) / expansion_remainder(*obj, mu, v, t / 2);
    per[std::string(to_string(kind))] = ratio;
    worst = std::min(worst, ratio);
  }
  return {worst, 6.0, false, kind_list_detail(per)};
}

Outcome check_min_eig_lanczos(std::uint64_t seed) {
  const auto obj = make_check_objective(ObjectiveKind::coulomb_mmd, seed);
  const auto mu = make_check_ensemble(*obj, 10, seed + 1);
  const double dense = min_eig_kernel(*obj, mu);
  const double iterative = min_eig_kernel(*obj, mu, 0);
  return {std::abs(dense - iterative), 1e-8, true, "dense " + sci(dense) + ", lanczos " + sci(iterative)};
}

Outcome check_lanczos_oracle(std::uint64_t seed) {
  Rng rng = make_stream(seed, {7});
  double worst = 0.0;
  for (Index n : {8, 16, 32, 64}) {
    const Matrix a = random_symmetric(n, rng);
    const Vector v = random_flat(n, rng);
    const Vector dense = dense_inv_sqrt(a, v, 0.1);
    const Vector lz = lanczos_apply_inv_sqrt([&](const Vector& x) { return Vector(a * x); }, v, 0.1, n);
    worst = std::max(worst, (lz - dense).norm() / dense.norm());
  }
  return {worst, 1e-8, true, {}};
}

Outcome check_lanczos_monotone(std::uint64_t seed) {
  Rng rng = make_stream(seed, {8});
  const Index n = 32;
  Vector eigs(n);
  for (Index i = 0; i < n; ++i) eigs(i) = 1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  const Matrix a = with_spectrum(eigs, rng);
  const Vector v = random_flat(n, rng);
  const Vector dense = dense_inv_sqrt(a, v, 1.0);
  double prev = std::numeric_limits<double>::infinity();
  double worst_increase = 0.0;
  std::string detail;
  for (Index m : {Index(2), Index(4), Index(8), n}) {
    const Vector lz = lanczos_apply_inv_sqrt([&](const Vector& x) { return Vector(a * x); }, v, 1.0, m);
    const double err = (lz - dense).norm() / dense.norm();
    if (std::isfinite(prev)) worst_increase = std::max(worst_increase, err - prev);
    prev = err;
    detail += (detail.empty() ? "" : ", ") + ("m=" + std::to_string(m) + ":" + sci(err));
  }
  return {worst_increase, 0.0, true, detail};
}

Outcome check_lanczos_eigenvector(std::uint64_t seed) {
  Rng rng = make_stream(seed, {9});
  const Index n = 12;
  const Matrix a = random_symmetric(n, rng);
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const double beta = 0.25;
  double worst = 0.0;
  for (Index k = 0; k < n; ++k) {
    const Vector e = es.eigenvectors().col(k);
    const double lam = es.eigenvalues()(k);
    const Vector out = lanczos_apply_inv_sqrt([&](const Vector& x) { return Vector(a * x); }, e, beta, 2);
    worst = std::max(worst, (out - e / std::sqrt(lam * lam + beta)).cwiseAbs().maxCoeff());
  }
  return {worst, 1e-8, true, {}};
}

Outcome check_gp_covariance(std::uint64_t seed) {
  // The two-particle quadratic interaction instance and a Gaussian-kernel one.
  InteractionParams quad;
  quad.dim = 1;
  InteractionParams gauss;
  gauss.kernel = InteractionParams::Kernel::gaussian;
  gauss.dim = 2;
  gauss.width = 0.8;
  const InteractionEnergy obj_q(quad);
  const InteractionEnergy obj_g(gauss);
  RowMatrix xq(2, 1);
  xq << 0.0, 2.0;
  RowMatrix xg(3, 2);
  xg << 0.0, 0.0, 0.7, -0.2, -0.3, 0.5;
  const int samples = 100000;
  double worst = 0.0;  // max over entries of |emp - C| / max(5% |C|, 3 SE)
  int idx = 0;
  for (const auto& [obj, x] : {std::pair<const Objective*, RowMatrix>{&obj_q, xq}, {&obj_g, xg}}) {
    const ParticleEnsemble mu(x);
    const Index n = mu.count() * mu.dim();
    const Matrix a = assemble_kernel_dense(*obj, mu) * static_cast<double>(mu.count());
    const Matrix c = a * a.transpose() / static_cast<double>(mu.count());
    Rng rng = make_stream(seed, {10, static_cast<std::uint64_t>(idx++)});
    Matrix acc = Matrix::Zero(n, n);
    for (int s = 0; s < samples; ++s) {
      const Vector xi = sample_gp(*obj, mu, rng).flat();
      acc.noalias() += xi * xi.transpose();
    }
    const Matrix emp = acc / samples;
    for (Index p = 0; p < n; ++p) {
      for (Index q = 0; q < n; ++q) {
        const double se = std::sqrt((c(p, p) * c(q, q) + c(p, q) * c(p, q)) / samples);
        const double tol = std::max(0.05 * std::abs(c(p, q)), 3.0 * se);
        worst = std::max(worst, std::abs(emp(p, q) - c(p, q)) / tol);
      }
    }
  }
  return {worst, 1.0, true, "max |empirical - C| / max(5% |C|, 3 standard errors)"};
}

Outcome check_gp_norm_law(std::uint64_t seed) {
  InteractionParams gauss;
  gauss.kernel = InteractionParams::Kernel::gaussian;
  gauss.dim = 2;
  gauss.width = 0.8;
  const InteractionEnergy obj(gauss);
  RowMatrix x(4, 2);
  x << 0.0, 0.0, 0.7, -0.2, -0.3, 0.5, 0.4, 0.9;
  const ParticleEnsemble mu(x);
  double expected = 0.0;
  for (Index i = 0; i < mu.count(); ++i) {
    for (Index j = 0; j < mu.count(); ++j) expected += obj.k_block(mu, i, j).squaredNorm();
  }
  expected /= static_cast<double>(mu.count() * mu.count());
  Rng rng = make_stream(seed, {11});
  const int samples = 100000;
  double acc = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double nrm = l2_norm(sample_gp(obj, mu, rng));
    acc += nrm * nrm;
  }
  return {std::abs(acc / samples - expected) / expected, 0.02, true, "expected " + sci(expected)};
}

Outcome check_descent_lemma(std::uint64_t seed) {
  Vector center(3);
  center << 0.5, -1.0, 0.2;
  Vector curv(3);
  curv << 1.0, -0.5, 2.0;
  const auto obj = quadratic_potential(center, curv);
  Rng rng = make_stream(seed, {12});
  ParticleEnsemble mu(standard_normal_matrix(5, 3, rng));
  OptimizerConfig cfg;
  cfg.beta = 1e-2;
  cfg.tau = std::sqrt(cfg.beta) / curv.cwiseAbs().maxCoeff();
  cfg.lanczos_m = mu.count() * mu.dim();
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 200; ++k) {
    const TangentField dir = wsfn_direction(*obj, mu, cfg);
    const double before = obj->value(mu);
    ParticleEnsemble next = push(mu, dir, -cfg.tau);
    // (H^2 + beta)^{-1/2} grad has the same L2 norm as the preconditioned
    // gradient in the inequality.
    const double slack = before - cfg.tau * std::sqrt(cfg.beta) / 2.0 * std::pow(l2_norm(dir), 2) - obj->value(next);
    worst = std::min(worst, slack);
    mu = std::move(next);
  }
  return {worst, -1e-10, false, "minimum slack over 200 steps"};
}

Outcome check_wgf_monotone(std::uint64_t seed) {
  Vector center(2);
  center << 1.0, -2.0;
  Vector curv(2);
  curv << 1.0, 0.3;
  const auto obj = quadratic_potential(center, curv);
  Rng rng = make_stream(seed, {13});
  ParticleEnsemble mu(standard_normal_matrix(6, 2, rng) * 3.0);
  double worst_increase = -std::numeric_limits<double>::infinity();
  double prev = obj->value(mu);
  for (int k = 0; k < 100; ++k) {
    mu = step_wgf(*obj, mu, 1.0);
    const double f = obj->value(mu);
    worst_increase = std::max(worst_increase, f - prev);
    prev = f;
  }
  return {worst_increase, 0.0, true, "largest per-step loss increase"};
}

Outcome check_wsfn_linear_rate(std::uint64_t seed) {
  Vector center(2);
  center << 0.5, -0.25;
  const auto obj = quadratic_potential(center, Vector::Ones(2));
  Rng rng = make_stream(seed, {14});
  ParticleEnsemble mu(standard_normal_matrix(6, 2, rng));
  const ParticleEnsemble target = constant_ensemble(center, 6);
  OptimizerConfig cfg;
  cfg.tau = 0.5;
  cfg.beta = 0.3;
  cfg.lanczos_m = 4;
  const double factor = 1.0 - cfg.tau / std::sqrt(1.0 + cfg.beta);
  double worst = 0.0;
  double prev = w2_exact(mu, target);
  for (int k = 0; k < 20; ++k) {
    mu = step_wsfn(*obj, mu, cfg);
    const double cur = w2_exact(mu, target);
    worst = std::max(worst, std::abs(cur / prev - factor));
    prev = cur;
  }
  return {worst, 1e-12, true, "expected factor " + sci(factor)};
}

Outcome check_newton_one_step(std::uint64_t seed) {
  Vector center(3);
  center << 1.0, 2.0, -1.0;
  Vector curv(3);
  curv << 0.5, 2.0, 4.0;
  const auto obj = quadratic_potential(center, curv);
  Rng rng = make_stream(seed, {15});
  const ParticleEnsemble mu(standard_normal_matrix(5, 3, rng) * 2.0);
  const ParticleEnsemble next = step_newton(*obj, mu, 1.0);
  return {w2_exact(next, constant_ensemble(center, 5)), 1e-10, true, {}};
}

Outcome check_wsfn_quartic_rate(std::uint64_t) {
  // V = x^4/4 in one dimension, minimizer 0, tau = 1. The ratio test uses
  // C = L_H / sqrt(beta) with L_H = 6 * radius, the Lipschitz constant of
  // V'' = 3x^2 on [-radius, radius].
  PotentialParams p;
  p.shape = PotentialParams::Shape::quartic;
  p.center = Vector::Zero(1);
  const PotentialEnergy obj(p);
  OptimizerConfig cfg;
  cfg.tau = 1.0;
  cfg.beta = 1e-4;
  cfg.lanczos_m = 1;
  const double radius = 0.5;
  const double c = 6.0 * radius / std::sqrt(cfg.beta);
  RowMatrix x(1, 1);
  x << radius;
  ParticleEnsemble mu(x);
  double worst = 0.0;
  std::string detail;
  for (int k = 0; k < 5; ++k) {
    const double e = std::abs(mu.positions()(0, 0));
    mu = step_wsfn(obj, mu, cfg);
    const double e_next = std::abs(mu.positions()(0, 0));
    const double ratio = e_next / (e * e);
    worst = std::max(worst, ratio / c);
    detail += (detail.empty() ? "e_{n+1}/e_n^2: " : ", ") + sci(ratio);
  }
  return {worst, 1.0, true, detail + " (C = " + sci(c) + ")"};
}

Outcome check_saddle_multipliers(std::uint64_t) {
  const auto obj = saddle_interaction(2);
  const ParticleEnsemble star = constant_ensemble(Vector::Zero(2), 3);
  const Matrix h = HessianOperator(*obj, star, HvpMode::exact_blocks).assemble_dense();
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const double tau = 0.3;
  const double amp = 0.1;
  OptimizerConfig cfg;
  cfg.tau = tau;
  cfg.beta = 0.5;
  cfg.lanczos_m = h.rows();
  double worst = 0.0;
  bool saw_negative = false;
  for (Index k = 0; k < h.rows(); ++k) {
    const Vector e = es.eigenvectors().col(k);
    const double lam = es.eigenvalues()(k);
    saw_negative = saw_negative || lam < 0.0;
    const ParticleEnsemble mu = ParticleEnsemble::from_flat(amp * e, 2);
    auto multiplier = [&](const ParticleEnsemble& next) { return next.flat().dot(e) / amp; };
    worst = std::max(worst, std::abs(multiplier(step_wgf(*obj, mu, tau)) - (1.0 - tau * lam)));
    worst = std::max(worst, std::abs(multiplier(step_newton(*obj, mu, tau)) - (1.0 - tau)));
    worst = std::max(worst, std::abs(multiplier(step_wsfn(*obj, mu, cfg)) -
                                     (1.0 - tau * lam / std::sqrt(lam * lam + cfg.beta))));
  }
  return {worst, 1e-8, true, saw_negative ? "includes negative-curvature directions" : "no negative direction"};
}

Outcome check_lm_limits(std::uint64_t seed) {
  Vector center(2);
  center << 0.5, -1.0;
  Vector curv(2);
  curv << 1.0, 3.0;
  const auto obj = quadratic_potential(center, curv);
  Rng rng = make_stream(seed, {16});
  const ParticleEnsemble mu(standard_normal_matrix(4, 2, rng));
  auto displacement = [&](const ParticleEnsemble& next) { return Vector(next.flat() - mu.flat()); };
  const Vector small = displacement(step_lm(*obj, mu, 1e-3));
  const Vector gd = displacement(step_wgf(*obj, mu, 1e-3));
  const Vector large = displacement(step_lm(*obj, mu, 1e3));
  const Vector newton = displacement(step_newton(*obj, mu, 1.0));
  const double e_small = (small - gd).norm() / gd.norm() / 0.05;
  const double e_large = (large - newton).norm() / newton.norm() / 0.01;
  return {std::max(e_small, e_large), 1.0, true,
          "relative deviation / tolerance: tau=1e-3 " + sci(e_small) + ", tau=1e3 " + sci(e_large)};
}

Outcome check_w2_1d_vs_exact(std::uint64_t seed) {
  Rng rng = make_stream(seed, {17});
  double worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    const ParticleEnsemble a(standard_normal_matrix(30, 1, rng));
    const ParticleEnsemble b(standard_normal_matrix(30, 1, rng) * 2.0);
    worst = std::max(worst, std::abs(w2_1d(a, b) - w2_exact(a, b)));
  }
  return {worst, 1e-12, true, {}};
}

Outcome check_w2_triangle(std::uint64_t seed) {
  Rng rng = make_stream(seed, {18});
  double worst = -std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 5; ++rep) {
    const ParticleEnsemble a(standard_normal_matrix(20, 2, rng));
    const ParticleEnsemble b(standard_normal_matrix(20, 2, rng));
    const ParticleEnsemble c(standard_normal_matrix(20, 2, rng));
    worst = std::max(worst, w2_exact(a, c) - w2_exact(a, b) - w2_exact(b, c));
  }
  return {worst, 1e-12, true, "largest d(a,c) - d(a,b) - d(b,c)"};
}

Outcome check_translation_invariance(std::uint64_t seed) {
  InteractionParams p;
  p.kernel = InteractionParams::Kernel::gaussian;
  p.dim = 2;
  const InteractionEnergy obj(p);
  Rng rng = make_stream(seed, {19});
  const ParticleEnsemble mu(standard_normal_matrix(8, 2, rng));
  const TangentField shift(RowMatrix::Constant(8, 2, 1.7));
  const ParticleEnsemble moved = push(mu, shift, 1.0);
  const double dv = std::abs(obj.value(moved) - obj.value(mu));
  const double dg = l2_norm(obj.grad(moved) - obj.grad(mu));
  return {std::max(dv, dg), 1e-12, true, {}};
}

Outcome check_params_formulas(std::uint64_t) {
  TheoryConstants t;
  t.C_H = 1.0;
  ParamOptions o;
  o.zeta_ep = 0.04;
  o.hessian_norm = 1.0;
  const TheoryParams p = theoretical_params(t, 1.0, 1.0, 1e-3, o);
  double worst = std::abs(p.tau - 1.0);
  worst = std::max(worst, std::abs(p.delta_tilde - 1.0 / std::sqrt(2.0)));
  worst = std::max(worst, std::abs(p.kappa - std::sqrt(2.0 * std::log(100.0))));
  return {worst, 1e-12, true, {}};
}

Outcome check_kappa_resample_cap(std::uint64_t seed) {
  const auto obj = saddle_interaction(1);
  RowMatrix x(3, 1);
  x << -0.5, 0.1, 0.6;
  const ParticleEnsemble mu(x);
  PerturbationSpec spec;
  spec.kappa = 1e-4;  // far below the first percentile of |xi|
  Rng rng = make_stream(seed, {20});
  try {
    perturb(*obj, mu, spec, rng);
  } catch (const NumericError&) {
    return {1.0, 1.0, false, "resample cap reached as expected"};
  }
  return {0.0, 1.0, false, "a draw met an implausibly small kappa"};
}

const std::map<std::string, CheckFn>& registry() {
  static const std::map<std::string, CheckFn> r = {
      {"dense_matvec", check_dense_matvec},
      {"descent_lemma", check_descent_lemma},
      {"fd_hvp_agreement", check_fd_hvp_agreement},
      {"fd_hvp_symmetry", check_fd_hvp_symmetry},
      {"gp_covariance", check_gp_covariance},
      {"gp_norm_law", check_gp_norm_law},
      {"grad_fd", check_grad_fd},
      {"hessian_symmetry", check_hessian_symmetry},
      {"kappa_resample_cap", check_kappa_resample_cap},
      {"lanczos_eigenvector", check_lanczos_eigenvector},
      {"lanczos_monotone", check_lanczos_monotone},
      {"lanczos_oracle", check_lanczos_oracle},
      {"lm_limits", check_lm_limits},
      {"min_eig_lanczos", check_min_eig_lanczos},
      {"newton_one_step", check_newton_one_step},
      {"params_formulas", check_params_formulas},
      {"saddle_multipliers", check_saddle_multipliers},
      {"second_order_expansion", check_second_order_expansion},
      {"translation_invariance", check_translation_invariance},
      {"w2_1d_vs_exact", check_w2_1d_vs_exact},
      {"w2_triangle", check_w2_triangle},
      {"wgf_monotone", check_wgf_monotone},
      {"wsfn_linear_rate", check_wsfn_linear_rate},
      {"wsfn_quartic_rate", check_wsfn_quartic_rate},
  };
  return r;
}

}  // namespace

std::vector<std::string> check_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

CheckReport run_property_suite(const std::vector<std::string>& selection, std::uint64_t seed, unsigned jobs) {
  std::vector<std::string> names = selection.empty() ? check_names() : selection;
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  for (const auto& n : names) {
    if (!registry().count(n)) throw ConfigError("unknown check '" + n + "'");
  }
  CheckReport report;
  report.rows.resize(names.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < names.size(); i = next++) {
      CheckResult& r = report.rows[i];
      r.name = names[i];
      r.seed = seed;
      try {
        const Outcome o = registry().at(names[i])(seed);
        r.measured = o.measured;
        r.tolerance = o.tolerance;
        r.comparison = o.upper ? "<=" : ">=";
        const bool ok = o.upper ? o.measured <= o.tolerance : o.measured >= o.tolerance;
        r.status = ok ? CheckStatus::pass : CheckStatus::fail;
        r.detail = o.detail;
      } catch (const std::exception& e) {
        r.status = CheckStatus::fail;
        r.measured = std::numeric_limits<double>::quiet_NaN();
        r.detail = std::string("exception: ") + e.what();
      }
    }
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, names.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return report;
}

}  // namespace wsfn
