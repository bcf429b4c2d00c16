#include "wsfn/objectives.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <string>

#include "wsfn/errors.hpp"
#include "wsfn/rng.hpp"

namespace wsfn {

std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::potential: return "potential";
    case ObjectiveKind::interaction: return "interaction";
    case ObjectiveKind::coulomb_mmd: return "coulomb_mmd";
    case ObjectiveKind::matrix_decomp: return "matrix_decomp";
    case ObjectiveKind::icl: return "icl";
  }
  return "unknown";
}

ObjectiveKind objective_kind_from_string(std::string_view name) {
  for (auto k : {ObjectiveKind::potential, ObjectiveKind::interaction, ObjectiveKind::coulomb_mmd,
                 ObjectiveKind::matrix_decomp, ObjectiveKind::icl}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown objective kind '" + std::string(name) + "'");
}

Matrix Objective::m_block(const ParticleEnsemble&, Index) const {
  throw CapabilityError(std::string(to_string(kind())) +
                        " has no explicit Hessian blocks; use the fd_transport Hessian-vector product");
}

Matrix Objective::k_block(const ParticleEnsemble&, Index, Index) const {
  throw CapabilityError(std::string(to_string(kind())) +
                        " has no explicit Hessian blocks; use the fd_transport Hessian-vector product");
}

void Objective::check_dim(const ParticleEnsemble& mu) const {
  if (mu.dim() != particle_dim()) {
    throw ShapeError(std::string(to_string(kind())) + " expects particles in dimension " +
                     std::to_string(particle_dim()) + ", got " + std::to_string(mu.dim()));
  }
}

void Objective::check_index(const ParticleEnsemble& mu, Index i) const {
  if (i < 0 || i >= mu.count()) {
    throw ShapeError("particle index " + std::to_string(i) + " out of range for " +
                     std::to_string(mu.count()) + " particles");
  }
}

// ---------------------------------------------------------------------------

PotentialEnergy::PotentialEnergy(PotentialParams params) : params_(std::move(params)) {
  if (params_.center.size() < 1) throw ConfigError("potential: dimension must be positive");
  if (params_.shape == PotentialParams::Shape::quadratic) {
    if (params_.curvature.size() == 0) params_.curvature = Vector::Ones(params_.center.size());
    if (params_.curvature.size() != params_.center.size()) {
      throw ConfigError("potential: curvature and center lengths differ");
    }
  }
}

double PotentialEnergy::value(const ParticleEnsemble& mu) const {
  check_dim(mu);
  double total = 0.0;
  for (Index i = 0; i < mu.count(); ++i) {
    const Vector z = mu.particle(i).transpose() - params_.center;
    if (params_.shape == PotentialParams::Shape::quadratic) {
      total += 0.5 * (params_.curvature.array() * z.array().square()).sum();
    } else {
      total += 0.25 * z.array().pow(4).sum();
    }
  }
  return total / static_cast<double>(mu.count());
}

TangentField PotentialEnergy::grad(const ParticleEnsemble& mu) const {
  check_dim(mu);
  TangentField g = TangentField::zeros(mu.count(), mu.dim());
  for (Index i = 0; i < mu.count(); ++i) {
    const Vector z = mu.particle(i).transpose() - params_.center;
    if (params_.shape == PotentialParams::Shape::quadratic) {
      g.at(i) = (params_.curvature.array() * z.array()).matrix().transpose();
    } else {
      g.at(i) = z.array().cube().matrix().transpose();
    }
  }
  return g;
}

Matrix PotentialEnergy::m_block(const ParticleEnsemble& mu, Index i) const {
  check_dim(mu);
  check_index(mu, i);
  if (params_.shape == PotentialParams::Shape::quadratic) {
    return params_.curvature.asDiagonal();
  }
  const Vector z = mu.particle(i).transpose() - params_.center;
  return (3.0 * z.array().square()).matrix().asDiagonal();
}

Matrix PotentialEnergy::k_block(const ParticleEnsemble& mu, Index i, Index j) const {
  check_dim(mu);
  check_index(mu, i);
  check_index(mu, j);
  return Matrix::Zero(mu.dim(), mu.dim());
}

// ---------------------------------------------------------------------------

InteractionEnergy::InteractionEnergy(InteractionParams params) : params_(params) {
  if (params_.dim < 1) throw ConfigError("interaction: dimension must be positive");
  if (params_.kernel == InteractionParams::Kernel::gaussian && !(params_.width > 0.0)) {
    throw ConfigError("interaction: gaussian width must be positive");
  }
}

double InteractionEnergy::kernel(const Vector& z) const {
  if (params_.kernel == InteractionParams::Kernel::quadratic) return 0.5 * params_.scale * z.squaredNorm();
  const double s2 = params_.width * params_.width;
  return params_.amplitude * std::exp(-z.squaredNorm() / (2.0 * s2));
}

Vector InteractionEnergy::kernel_grad(const Vector& z) const {
  if (params_.kernel == InteractionParams::Kernel::quadratic) return params_.scale * z;
  const double s2 = params_.width * params_.width;
  const double e = params_.amplitude * std::exp(-z.squaredNorm() / (2.0 * s2));
  return (-e / s2) * z;
}

Matrix InteractionEnergy::kernel_hess(const Vector& z) const {
  const Index d = z.size();
  if (params_.kernel == InteractionParams::Kernel::quadratic) {
    return params_.scale * Matrix::Identity(d, d);
  }
  const double s2 = params_.width * params_.width;
  const double e = params_.amplitude * std::exp(-z.squaredNorm() / (2.0 * s2));
  return (e / s2) * (z * z.transpose() / s2 - Matrix::Identity(d, d));
}

double InteractionEnergy::value(const ParticleEnsemble& mu) const {
  check_dim(mu);
  const Index n = mu.count();
  double pair = 0.0;
  double conf = 0.0;
  for (Index i = 0; i < n; ++i) {
    conf += 0.5 * params_.confinement * mu.particle(i).squaredNorm();
    for (Index j = 0; j < n; ++j) {
      pair += kernel((mu.particle(i) - mu.particle(j)).transpose());
    }
  }
  const double nn = static_cast<double>(n);
  return conf / nn + 0.5 * pair / (nn * nn);
}

TangentField InteractionEnergy::grad(const ParticleEnsemble& mu) const {
  check_dim(mu);
  const Index n = mu.count();
  TangentField g = TangentField::zeros(n, mu.dim());
  for (Index i = 0; i < n; ++i) {
    Vector acc = Vector::Zero(mu.dim());
    for (Index j = 0; j < n; ++j) acc += kernel_grad((mu.particle(i) - mu.particle(j)).transpose());
    g.at(i) = (params_.confinement * mu.particle(i).transpose() + acc / static_cast<double>(n)).transpose();
  }
  return g;
}

Matrix InteractionEnergy::m_block(const ParticleEnsemble& mu, Index i) const {
  check_dim(mu);
  check_index(mu, i);
  const Index d = mu.dim();
  Matrix acc = Matrix::Zero(d, d);
  for (Index j = 0; j < mu.count(); ++j) acc += kernel_hess((mu.particle(i) - mu.particle(j)).transpose());
  return params_.confinement * Matrix::Identity(d, d) + acc / static_cast<double>(mu.count());
}

Matrix InteractionEnergy::k_block(const ParticleEnsemble& mu, Index i, Index j) const {
  check_dim(mu);
  check_index(mu, i);
  check_index(mu, j);
  return -kernel_hess((mu.particle(i) - mu.particle(j)).transpose());
}

// ---------------------------------------------------------------------------

CoulombMmd::CoulombMmd(CoulombParams params) : params_(std::move(params)) {
  const Index d = params_.target_samples.cols();
  if (d < 3) throw ConfigError("coulomb_mmd requires dimension d >= 3, got " + std::to_string(d));
  if (params_.target_samples.rows() < 1) throw ConfigError("coulomb_mmd needs at least one target sample");
  if (!(params_.eps_ker > 0.0)) throw ConfigError("coulomb_mmd: eps_ker must be positive");
  if (!params_.target_samples.allFinite()) throw ConfigError("coulomb_mmd: target samples must be finite");
  const Index m = params_.target_samples.rows();
  if (m > 1) {
    double s = 0.0;
    for (Index l = 0; l < m; ++l) {
      for (Index r = 0; r < m; ++r) {
        if (l != r) s += kernel((params_.target_samples.row(l) - params_.target_samples.row(r)).transpose());
      }
    }
    target_term_ = s / (static_cast<double>(m) * static_cast<double>(m - 1));
  }
}

double CoulombMmd::kernel(const Vector& z) const {
  const double d = static_cast<double>(z.size());
  const double eps2 = params_.eps_ker * params_.eps_ker;
  const double r2 = std::max(z.squaredNorm(), eps2);
  return std::pow(r2, -(d - 2.0) / 2.0);
}

Vector CoulombMmd::kernel_grad(const Vector& z) const {
  const double r2 = z.squaredNorm();
  if (r2 <= params_.eps_ker * params_.eps_ker) return Vector::Zero(z.size());
  const double d = static_cast<double>(z.size());
  return (-(d - 2.0) * std::pow(r2, -d / 2.0)) * z;
}

Matrix CoulombMmd::kernel_hess(const Vector& z) const {
  const Index dim = z.size();
  const double r2 = z.squaredNorm();
  if (r2 <= params_.eps_ker * params_.eps_ker) return Matrix::Zero(dim, dim);
  const double d = static_cast<double>(dim);
  const double rd = std::pow(r2, -d / 2.0);
  return -(d - 2.0) * (rd * Matrix::Identity(dim, dim) - (d * rd / r2) * (z * z.transpose()));
}

double CoulombMmd::value(const ParticleEnsemble& mu) const {
  check_dim(mu);
  const Index n = mu.count();
  const Index m = params_.target_samples.rows();
  const double d = static_cast<double>(mu.dim());
  double self = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i != j) self += kernel((mu.particle(i) - mu.particle(j)).transpose());
    }
  }
  double cross = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index l = 0; l < m; ++l) cross += kernel((mu.particle(i) - params_.target_samples.row(l)).transpose());
  }
  const double nn = static_cast<double>(n);
  const double self_term = n > 1 ? self / (nn * (nn - 1.0)) : 0.0;
  const double cross_term = 2.0 * cross / (nn * static_cast<double>(m));
  return (self_term - cross_term + target_term_) / (d - 2.0);
}

TangentField CoulombMmd::grad(const ParticleEnsemble& mu) const {
  check_dim(mu);
  const Index n = mu.count();
  const Index m = params_.target_samples.rows();
  const double d = static_cast<double>(mu.dim());
  TangentField g = TangentField::zeros(n, mu.dim());
  for (Index i = 0; i < n; ++i) {
    Vector self = Vector::Zero(mu.dim());
    for (Index j = 0; j < n; ++j) {
      if (j != i) self += kernel_grad((mu.particle(i) - mu.particle(j)).transpose());
    }
    Vector cross = Vector::Zero(mu.dim());
    for (Index l = 0; l < m; ++l) cross += kernel_grad((mu.particle(i) - params_.target_samples.row(l)).transpose());
    Vector gi = -cross / static_cast<double>(m);
    if (n > 1) gi += self / static_cast<double>(n - 1);
    g.at(i) = (2.0 / (d - 2.0) * gi).transpose();
  }
  return g;
}

Matrix CoulombMmd::m_block(const ParticleEnsemble& mu, Index i) const {
  check_dim(mu);
  check_index(mu, i);
  const Index n = mu.count();
  const Index m = params_.target_samples.rows();
  const Index dim = mu.dim();
  const double d = static_cast<double>(dim);
  Matrix self = Matrix::Zero(dim, dim);
  for (Index j = 0; j < n; ++j) {
    if (j != i) self += kernel_hess((mu.particle(i) - mu.particle(j)).transpose());
  }
  Matrix cross = Matrix::Zero(dim, dim);
  for (Index l = 0; l < m; ++l) cross += kernel_hess((mu.particle(i) - params_.target_samples.row(l)).transpose());
  Matrix out = -cross / static_cast<double>(m);
  if (n > 1) out += self / static_cast<double>(n - 1);
  return 2.0 / (d - 2.0) * out;
}

Matrix CoulombMmd::k_block(const ParticleEnsemble& mu, Index i, Index j) const {
  check_dim(mu);
  check_index(mu, i);
  check_index(mu, j);
  const Index n = mu.count();
  const Index dim = mu.dim();
  if (i == j || n < 2) return Matrix::Zero(dim, dim);
  const double d = static_cast<double>(dim);
  const double nn = static_cast<double>(n);
  // The U-statistic excludes i == j and weights pairs by 1/(N-1); written
  // against the (1/N) sum_j convention this is an N/(N-1) factor.
  return (-2.0 / (d - 2.0) * nn / (nn - 1.0)) *
         kernel_hess((mu.particle(i) - mu.particle(j)).transpose());
}

RowMatrix make_mode_mixture(const RowMatrix& modes, double noise, Index count, std::uint64_t seed) {
  if (modes.rows() < 1) throw ConfigError("mode mixture needs at least one mode");
  if (count < 1) throw ConfigError("mode mixture needs a positive sample count");
  if (noise < 0.0) throw ConfigError("mode mixture noise must be non-negative");
  Rng rng = make_stream(seed, {0x7a11e7});
  RowMatrix out = standard_normal_matrix(count, modes.cols(), rng) * noise;
  for (Index s = 0; s < count; ++s) out.row(s) += modes.row(s % modes.rows());
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double activate(Activation a, double u) {
  return a == Activation::tanh ? std::tanh(u) : (u > 0.0 ? u : 0.0);
}

double activate_prime(Activation a, double u) {
  if (a == Activation::tanh) {
    const double t = std::tanh(u);
    return 1.0 - t * t;
  }
  return u > 0.0 ? 1.0 : 0.0;
}

}  // namespace

NetParams make_net_params(Index input_dim, Index feature_dim, Index samples, Index teacher_count,
                          Activation activation, bool with_linear, std::uint64_t seed) {
  if (input_dim < 1 || feature_dim < 1 || samples < 1 || teacher_count < 1) {
    throw ConfigError("network objective dimensions and counts must be positive");
  }
  NetParams p;
  p.activation = activation;
  p.feature_dim = feature_dim;
  p.input_dim = input_dim;
  Rng inputs_rng = make_stream(seed, {1});
  p.inputs = standard_normal_matrix(samples, input_dim, inputs_rng);
  Rng teacher_rng = make_stream(seed, {2});
  p.teacher_particles = standard_normal_matrix(teacher_count, feature_dim + input_dim, teacher_rng) /
                        std::sqrt(static_cast<double>(feature_dim + input_dim));
  if (with_linear) {
    Rng linear_rng = make_stream(seed, {3});
    p.teacher_linear = standard_normal_matrix(feature_dim, feature_dim, linear_rng) /
                       std::sqrt(static_cast<double>(feature_dim));
  }
  return p;
}

NetworkObjective::NetworkObjective(NetParams params) : params_(std::move(params)) {
  const Index k = params_.feature_dim;
  const Index l = params_.input_dim;
  if (k < 1 || l < 1) throw ConfigError("network objective: feature and input dims must be positive");
  if (params_.inputs.rows() < 1 || params_.inputs.cols() != l) {
    throw ConfigError("network objective: inputs must be n x input_dim with n >= 1");
  }
  if (params_.teacher_particles.rows() < 1 || params_.teacher_particles.cols() != k + l) {
    throw ConfigError("network objective: teacher particles must have dimension k + l");
  }
  const Activations acts = activations(params_.teacher_particles, false);
  teacher_features_ = features_from(params_.teacher_particles, acts.act);
}

NetworkObjective::Activations NetworkObjective::activations(const RowMatrix& particles,
                                                            bool with_derivative) const {
  const Index k = params_.feature_dim;
  const Index l = params_.input_dim;
  // pre(j, s) = w_j . z_s
  const RowMatrix pre = particles.rightCols(l) * params_.inputs.transpose();
  Activations out;
  out.act = pre.unaryExpr([a = params_.activation](double u) { return activate(a, u); });
  if (with_derivative) {
    out.dact = pre.unaryExpr([a = params_.activation](double u) { return activate_prime(a, u); });
  }
  (void)k;
  return out;
}

RowMatrix NetworkObjective::features_from(const RowMatrix& particles, const RowMatrix& act) const {
  const Index k = params_.feature_dim;
  // h(s, :) = (1/N) sum_j act(j, s) a_j
  return act.transpose() * particles.leftCols(k) / static_cast<double>(particles.rows());
}

RowMatrix NetworkObjective::features(const ParticleEnsemble& mu) const {
  check_dim(mu);
  return features_from(mu.positions(), activations(mu.positions(), false).act);
}

TangentField NetworkObjective::chain_to_particles(const ParticleEnsemble& mu, const Activations& acts,
                                                  const RowMatrix& feature_grad) const {
  const Index k = params_.feature_dim;
  const Index l = params_.input_dim;
  const RowMatrix& theta = mu.positions();
  RowMatrix g(mu.count(), k + l);
  // N dF/da_j = sum_s g_s sigma(u_js)
  g.leftCols(k) = acts.act * feature_grad;
  // N dF/dw_j = sum_s (g_s . a_j) sigma'(u_js) z_s
  const RowMatrix coeff = (theta.leftCols(k) * feature_grad.transpose()).cwiseProduct(acts.dact);
  g.rightCols(l) = coeff * params_.inputs;
  return TangentField(std::move(g));
}

MatrixDecomposition::MatrixDecomposition(NetParams params) : NetworkObjective(std::move(params)) {}

double MatrixDecomposition::value(const ParticleEnsemble& mu) const {
  const RowMatrix h = features(mu);
  const RowMatrix& b = teacher_features_;
  double total = 0.0;
  for (Index s = 0; s < h.rows(); ++s) {
    const double hh = h.row(s).squaredNorm();
    const double bb = b.row(s).squaredNorm();
    const double hb = h.row(s).dot(b.row(s));
    total += hh * hh - 2.0 * hb * hb + bb * bb;
  }
  return total / static_cast<double>(h.rows());
}

TangentField MatrixDecomposition::grad(const ParticleEnsemble& mu) const {
  check_dim(mu);
  const Activations acts = activations(mu.positions(), true);
  const RowMatrix h = features_from(mu.positions(), acts.act);
  const RowMatrix& b = teacher_features_;
  const double n = static_cast<double>(h.rows());
  RowMatrix fg(h.rows(), h.cols());
  for (Index s = 0; s < h.rows(); ++s) {
    fg.row(s) = (4.0 / n) * (h.row(s).squaredNorm() * h.row(s) - h.row(s).dot(b.row(s)) * b.row(s));
  }
  return chain_to_particles(mu, acts, fg);
}

InContextFeatureLearning::InContextFeatureLearning(NetParams params)
    : NetworkObjective(std::move(params)) {
  const Index k = params_.feature_dim;
  if (params_.teacher_linear.rows() != k || params_.teacher_linear.cols() != k) {
    throw ConfigError("icl: teacher linear layer must be k x k");
  }
  if (!(params_.ridge >= 0.0)) throw ConfigError("icl: ridge must be non-negative");
  // h_{mu*}(z) = T_hat h_{mu_hat}(z)
  teacher_features_ = teacher_features_ * params_.teacher_linear.transpose();
}

double InContextFeatureLearning::teacher_energy() const {
  const double n = static_cast<double>(teacher_features_.rows());
  return 0.5 * teacher_features_.squaredNorm() / n;
}

InContextFeatureLearning::Moments InContextFeatureLearning::moments(const RowMatrix& h) const {
  const Index k = params_.feature_dim;
  const double n = static_cast<double>(h.rows());
  Moments m;
  m.sigma_mm = h.transpose() * h / n;
  m.sigma_ms = h.transpose() * teacher_features_ / n;
  m.ridge_coeff = params_.ridge / static_cast<double>(k);
  const double trace = m.sigma_mm.trace();
  const Matrix reg = m.sigma_mm + m.ridge_coeff * trace * Matrix::Identity(k, k);
  Eigen::LDLT<Matrix> ldlt(reg);
  const double max_pivot = ldlt.vectorD().cwiseAbs().maxCoeff();
  const double min_pivot = ldlt.vectorD().minCoeff();
  if (ldlt.info() != Eigen::Success || !(trace > 0.0) || !(min_pivot > 1e-14 * max_pivot)) {
    throw NumericError("icl: Sigma_{mu,mu} is singular even after ridge regularization (trace " +
                       std::to_string(trace) + ", smallest pivot " + std::to_string(min_pivot) +
                       "); student features are degenerate");
  }
  m.precision = ldlt.solve(Matrix::Identity(k, k));
  m.precision = 0.5 * (m.precision + m.precision.transpose());
  return m;
}

double InContextFeatureLearning::value(const ParticleEnsemble& mu) const {
  const RowMatrix h = features(mu);
  const Moments m = moments(h);
  const double explained = (m.sigma_ms.transpose() * m.precision * m.sigma_ms).trace();
  return teacher_energy() - 0.5 * explained;
}

TangentField InContextFeatureLearning::grad(const ParticleEnsemble& mu) const {
  check_dim(mu);
  const Index k = params_.feature_dim;
  const Activations acts = activations(mu.positions(), true);
  const RowMatrix h = features_from(mu.positions(), acts.act);
  const Moments m = moments(h);
  const double n = static_cast<double>(h.rows());
  const Matrix ps = m.precision * m.sigma_ms;  // P Sigma_{mu,*}
  const Matrix g = ps * ps.transpose();        // P Sigma_{mu,*} Sigma_{*,mu} P
  const Matrix lift = g + m.ridge_coeff * g.trace() * Matrix::Identity(k, k);
  // dF/dh_s = (1/n) [(G + c Tr(G) I) h_s - P Sigma_{mu,*} h*_s]
  const RowMatrix fg = (h * lift - teacher_features_ * ps.transpose()) / n;
  return chain_to_particles(mu, acts, fg);
}

// ---------------------------------------------------------------------------

namespace {

Vector json_vector(const nlohmann::json& j, const char* field) {
  if (!j.is_array()) throw ConfigError(std::string("objective.") + field + " must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

template <class T>
T field_or(const nlohmann::json& spec, const char* name, T fallback) {
  if (!spec.contains(name)) return fallback;
  try {
    return spec.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("objective.") + name + " has the wrong type");
  }
}

template <class T>
T required(const nlohmann::json& spec, const char* name) {
  if (!spec.contains(name)) throw ConfigError(std::string("objective.") + name + " is required");
  return field_or<T>(spec, name, T{});
}

Activation activation_from(const nlohmann::json& spec) {
  const auto name = field_or<std::string>(spec, "activation", "tanh");
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw ConfigError("objective.activation must be tanh or relu, got '" + name + "'");
}

}  // namespace

ObjectivePtr make_objective(const nlohmann::json& spec) {
  if (!spec.is_object()) throw ConfigError("objective spec must be a JSON object");
  const ObjectiveKind kind = objective_kind_from_string(required<std::string>(spec, "kind"));
  const auto seed = field_or<std::uint64_t>(spec, "seed", 0);
  std::shared_ptr<Objective> obj;
  switch (kind) {
    case ObjectiveKind::potential: {
      PotentialParams p;
      const auto shape = field_or<std::string>(spec, "shape", "quadratic");
      if (shape == "quadratic") {
        p.shape = PotentialParams::Shape::quadratic;
      } else if (shape == "quartic") {
        p.shape = PotentialParams::Shape::quartic;
      } else {
        throw ConfigError("objective.shape must be quadratic or quartic, got '" + shape + "'");
      }
      if (spec.contains("center")) {
        p.center = json_vector(spec["center"], "center");
      } else {
        const auto dim = required<long>(spec, "dim");
        if (dim < 1) throw ConfigError("objective.dim must be positive");
        p.center = Vector::Zero(dim);
      }
      if (spec.contains("curvature")) p.curvature = json_vector(spec["curvature"], "curvature");
      obj = std::make_shared<PotentialEnergy>(std::move(p));
      break;
    }
    case ObjectiveKind::interaction: {
      InteractionParams p;
      p.dim = required<long>(spec, "dim");
      if (p.dim < 1) throw ConfigError("objective.dim must be positive");
      const auto kernel = field_or<std::string>(spec, "kernel", "quadratic");
      if (kernel == "quadratic") {
        p.kernel = InteractionParams::Kernel::quadratic;
      } else if (kernel == "gaussian") {
        p.kernel = InteractionParams::Kernel::gaussian;
      } else {
        throw ConfigError("objective.kernel must be quadratic or gaussian, got '" + kernel + "'");
      }
      p.scale = field_or<double>(spec, "scale", 1.0);
      p.amplitude = field_or<double>(spec, "amplitude", 1.0);
      p.width = field_or<double>(spec, "width", 1.0);
      p.confinement = field_or<double>(spec, "confinement", 0.0);
      obj = std::make_shared<InteractionEnergy>(p);
      break;
    }
    case ObjectiveKind::coulomb_mmd: {
      CoulombParams p;
      p.eps_ker = field_or<double>(spec, "eps_ker", 5e-2);
      if (spec.contains("target_csv")) {
        p.target_samples = read_ensemble_csv(std::filesystem::path(spec["target_csv"].get<std::string>())).positions();
      } else {
        const auto dim = required<long>(spec, "dim");
        if (dim < 3) throw ConfigError("coulomb_mmd requires objective.dim >= 3, got " + std::to_string(dim));
        const auto count = required<long>(spec, "target_count");
        if (count < 1) throw ConfigError("objective.target_count must be positive");
        RowMatrix modes;
        if (spec.contains("modes")) {
          const auto& jm = spec["modes"];
          if (!jm.is_array() || jm.empty()) throw ConfigError("objective.modes must be a non-empty array");
          modes.resize(static_cast<Index>(jm.size()), dim);
          for (std::size_t r = 0; r < jm.size(); ++r) {
            const Vector row = json_vector(jm[r], "modes");
            if (row.size() != dim) throw ConfigError("objective.modes rows must have length dim");
            modes.row(static_cast<Index>(r)) = row.transpose();
          }
        } else {
          modes = RowMatrix::Zero(1, dim);
        }
        p.target_samples = make_mode_mixture(modes, field_or<double>(spec, "noise", 0.25), count, seed);
      }
      obj = std::make_shared<CoulombMmd>(std::move(p));
      break;
    }
    case ObjectiveKind::matrix_decomp:
    case ObjectiveKind::icl: {
      const auto input_dim = required<long>(spec, "input_dim");
      const auto feature_dim = required<long>(spec, "feature_dim");
      const auto samples = required<long>(spec, "samples");
      const auto teacher_count = field_or<long>(spec, "teacher_count", feature_dim);
      NetParams p = make_net_params(input_dim, feature_dim, samples, teacher_count, activation_from(spec),
                                    kind == ObjectiveKind::icl, seed);
      p.ridge = field_or<double>(spec, "ridge", 1e-6);
      if (kind == ObjectiveKind::icl) {
        obj = std::make_shared<InContextFeatureLearning>(std::move(p));
      } else {
        obj = std::make_shared<MatrixDecomposition>(std::move(p));
      }
      break;
    }
  }
  obj->set_seed(seed);
  return obj;
}

}  // namespace wsfn
