#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace wsfn {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Row i holds the d coordinates of particle i; flattening is particle-major.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Uniform empirical measure (1/N) sum_i delta_{x_i} on R^d.
///
/// Positions are validated on construction: at least one particle, positive
/// dimension, every coordinate finite. Weights are never stored.
class ParticleEnsemble {
 public:
  explicit ParticleEnsemble(RowMatrix positions);

  static ParticleEnsemble from_flat(const Vector& flat, Index dim);

  Index count() const { return positions_.rows(); }
  Index dim() const { return positions_.cols(); }
  double weight() const { return 1.0 / static_cast<double>(count()); }

  const RowMatrix& positions() const { return positions_; }
  auto particle(Index i) const { return positions_.row(i); }

  Vector flat() const;

 private:
  RowMatrix positions_;
};

/// Element of L^2_mu: one R^d vector per particle of the paired ensemble.
class TangentField {
 public:
  TangentField() = default;
  explicit TangentField(RowMatrix values);

  static TangentField zeros(Index count, Index dim);
  static TangentField from_flat(const Vector& flat, Index dim);

  Index count() const { return values_.rows(); }
  Index dim() const { return values_.cols(); }

  const RowMatrix& values() const { return values_; }
  RowMatrix& values() { return values_; }
  auto at(Index i) const { return values_.row(i); }
  auto at(Index i) { return values_.row(i); }

  Vector flat() const;
  bool all_finite() const { return values_.allFinite(); }

  TangentField& operator+=(const TangentField& other);
  TangentField& operator-=(const TangentField& other);
  TangentField& operator*=(double s);

 private:
  RowMatrix values_;
};

TangentField operator+(TangentField a, const TangentField& b);
TangentField operator-(TangentField a, const TangentField& b);
TangentField operator*(double s, TangentField a);

void require_same_shape(const TangentField& v, const TangentField& w);
void require_same_shape(const ParticleEnsemble& mu, const TangentField& v);

/// Empirical L^2_mu inner product (1/N) sum_i <v_i, w_i>.
double l2_inner(const TangentField& v, const TangentField& w);
double l2_norm(const TangentField& v);

/// Pushforward by Id + scale * v. The input ensemble is left untouched.
ParticleEnsemble push(const ParticleEnsemble& mu, const TangentField& v, double scale);

inline constexpr Index kDefaultAssignmentCap = 1000;

/// Exact W2 between equal-size uniform ensembles via linear assignment on
/// squared Euclidean costs (O(N^3) shortest augmenting paths).
double w2_exact(const ParticleEnsemble& a, const ParticleEnsemble& b,
                Index cap = kDefaultAssignmentCap);

/// Exact W2 in one dimension via sorted quantile matching.
double w2_1d(const ParticleEnsemble& a, const ParticleEnsemble& b);

/// Minimum-cost perfect assignment on a square cost matrix. Returns the
/// column assigned to each row.
std::vector<Index> solve_assignment(const Matrix& cost);

// CSV ensemble format: optional first line `# dim=<d> count=<N>`, a header
// `x0,...,x{d-1}`, then one row per particle.
ParticleEnsemble read_ensemble_csv(std::istream& in);
ParticleEnsemble read_ensemble_csv(const std::filesystem::path& path);
void write_ensemble_csv(std::ostream& out, const ParticleEnsemble& mu, bool with_sidecar = true);
void write_ensemble_csv(const std::filesystem::path& path, const ParticleEnsemble& mu,
                        bool with_sidecar = true);

}  // namespace wsfn
