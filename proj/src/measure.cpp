#include "wsfn/measure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include "wsfn/errors.hpp"

namespace wsfn {

namespace {

std::string shape_str(Index n, Index d) {
  return std::to_string(n) + "x" + std::to_string(d);
}

}  // namespace

ParticleEnsemble::ParticleEnsemble(RowMatrix positions) : positions_(std::move(positions)) {
  if (positions_.rows() < 1 || positions_.cols() < 1) {
    throw ShapeError("ensemble needs at least one particle and positive dimension, got " +
                     shape_str(positions_.rows(), positions_.cols()));
  }
  if (!positions_.allFinite()) {
    throw NumericError("ensemble positions contain NaN or Inf");
  }
}

ParticleEnsemble ParticleEnsemble::from_flat(const Vector& flat, Index dim) {
  if (dim < 1 || flat.size() % dim != 0) {
    throw ShapeError("flat vector of length " + std::to_string(flat.size()) +
                     " is not a multiple of dim " + std::to_string(dim));
  }
  RowMatrix m = Eigen::Map<const RowMatrix>(flat.data(), flat.size() / dim, dim);
  return ParticleEnsemble(std::move(m));
}

Vector ParticleEnsemble::flat() const {
  return Eigen::Map<const Vector>(positions_.data(), positions_.size());
}

TangentField::TangentField(RowMatrix values) : values_(std::move(values)) {}

TangentField TangentField::zeros(Index count, Index dim) {
  return TangentField(RowMatrix::Zero(count, dim));
}

TangentField TangentField::from_flat(const Vector& flat, Index dim) {
  if (dim < 1 || flat.size() % dim != 0) {
    throw ShapeError("flat vector of length " + std::to_string(flat.size()) +
                     " is not a multiple of dim " + std::to_string(dim));
  }
  return TangentField(Eigen::Map<const RowMatrix>(flat.data(), flat.size() / dim, dim));
}

Vector TangentField::flat() const {
  return Eigen::Map<const Vector>(values_.data(), values_.size());
}

TangentField& TangentField::operator+=(const TangentField& other) {
  require_same_shape(*this, other);
  values_ += other.values_;
  return *this;
}

TangentField& TangentField::operator-=(const TangentField& other) {
  require_same_shape(*this, other);
  values_ -= other.values_;
  return *this;
}

TangentField& TangentField::operator*=(double s) {
  values_ *= s;
  return *this;
}

TangentField operator+(TangentField a, const TangentField& b) { return a += b; }
TangentField operator-(TangentField a, const TangentField& b) { return a -= b; }
TangentField operator*(double s, TangentField a) { return a *= s; }

void require_same_shape(const TangentField& v, const TangentField& w) {
  if (v.count() != w.count() || v.dim() != w.dim()) {
    throw ShapeError("tangent field shapes differ: " + shape_str(v.count(), v.dim()) + " vs " +
                     shape_str(w.count(), w.dim()));
  }
}

void require_same_shape(const ParticleEnsemble& mu, const TangentField& v) {
  if (mu.count() != v.count() || mu.dim() != v.dim()) {
    throw ShapeError("field shape " + shape_str(v.count(), v.dim()) +
                     " does not match ensemble " + shape_str(mu.count(), mu.dim()));
  }
}

double l2_inner(const TangentField& v, const TangentField& w) {
  require_same_shape(v, w);
  if (v.count() == 0) return 0.0;
  return v.values().cwiseProduct(w.values()).sum() / static_cast<double>(v.count());
}

double l2_norm(const TangentField& v) { return std::sqrt(l2_inner(v, v)); }

ParticleEnsemble push(const ParticleEnsemble& mu, const TangentField& v, double scale) {
  require_same_shape(mu, v);
  if (!std::isfinite(scale)) throw NumericError("push scale is not finite");
  return ParticleEnsemble(mu.positions() + scale * v.values());
}

std::vector<Index> solve_assignment(const Matrix& cost) {
  // Hungarian method with row/column potentials; 1-based internally with a
  // virtual column 0 as the augmenting-path root.
  const Index n = cost.rows();
  if (cost.cols() != n) throw ShapeError("assignment cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> p(n + 1, 0), way(n + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> assignment(n, -1);
  for (Index j = 1; j <= n; ++j) {
    if (p[j] != 0) assignment[p[j] - 1] = j - 1;
  }
  return assignment;
}

double w2_exact(const ParticleEnsemble& a, const ParticleEnsemble& b, Index cap) {
  if (a.dim() != b.dim()) throw ShapeError("w2_exact: ensembles live in different dimensions");
  if (a.count() != b.count()) {
    throw UnsupportedError("w2_exact: only equal-count ensembles are supported (" +
                           std::to_string(a.count()) + " vs " + std::to_string(b.count()) + ")");
  }
  const Index n = a.count();
  if (n > cap) {
    throw UnsupportedError("w2_exact: " + std::to_string(n) + " particles exceeds assignment cap " +
                           std::to_string(cap));
  }
  Matrix cost(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) cost(i, j) = (a.particle(i) - b.particle(j)).squaredNorm();
  }
  const auto assignment = solve_assignment(cost);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) total += cost(i, assignment[i]);
  return std::sqrt(std::max(0.0, total / static_cast<double>(n)));
}

double w2_1d(const ParticleEnsemble& a, const ParticleEnsemble& b) {
  if (a.dim() != 1 || b.dim() != 1) throw ShapeError("w2_1d requires dim == 1");
  if (a.count() != b.count()) throw UnsupportedError("w2_1d requires equal counts");
  std::vector<double> xs(a.positions().data(), a.positions().data() + a.count());
  std::vector<double> ys(b.positions().data(), b.positions().data() + b.count());
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) total += (xs[i] - ys[i]) * (xs[i] - ys[i]);
  return std::sqrt(total / static_cast<double>(xs.size()));
}

ParticleEnsemble read_ensemble_csv(std::istream& in) {
  std::string line;
  Index declared_dim = -1;
  Index declared_count = -1;
  bool have_header = false;
  Index dim = 0;
  std::vector<double> data;
  Index rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream meta(line.substr(1));
      std::string token;
      while (meta >> token) {
        if (token.rfind("dim=", 0) == 0) declared_dim = std::stol(token.substr(4));
        if (token.rfind("count=", 0) == 0) declared_count = std::stol(token.substr(6));
      }
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!have_header) {
      for (std::size_t k = 0; k < cells.size(); ++k) {
        if (cells[k] != "x" + std::to_string(k)) {
          throw ConfigError("ensemble CSV header must be x0,...,x{d-1}; got '" + line + "'");
        }
      }
      dim = static_cast<Index>(cells.size());
      have_header = true;
      continue;
    }
    if (static_cast<Index>(cells.size()) != dim) {
      throw ConfigError("ensemble CSV row " + std::to_string(rows + 1) + " has " +
                        std::to_string(cells.size()) + " columns, expected " + std::to_string(dim));
    }
    for (const auto& c : cells) {
      try {
        data.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw ConfigError("ensemble CSV: cannot parse '" + c + "' as a number");
      }
    }
    ++rows;
  }
  if (!have_header) throw ConfigError("ensemble CSV: missing header row");
  if (declared_dim >= 0 && declared_dim != dim) {
    throw ConfigError("ensemble CSV: sidecar dim does not match header");
  }
  if (declared_count >= 0 && declared_count != rows) {
    throw ConfigError("ensemble CSV: sidecar count does not match number of rows");
  }
  RowMatrix m = Eigen::Map<RowMatrix>(data.data(), rows, dim);
  return ParticleEnsemble(std::move(m));
}

ParticleEnsemble read_ensemble_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ensemble file " + path.string());
  return read_ensemble_csv(in);
}

void write_ensemble_csv(std::ostream& out, const ParticleEnsemble& mu, bool with_sidecar) {
  if (with_sidecar) out << "# dim=" << mu.dim() << " count=" << mu.count() << "\n";
  for (Index k = 0; k < mu.dim(); ++k) out << (k ? "," : "") << "x" << k;
  out << "\n" << std::setprecision(17);
  for (Index i = 0; i < mu.count(); ++i) {
    for (Index k = 0; k < mu.dim(); ++k) out << (k ? "," : "") << mu.positions()(i, k);
    out << "\n";
  }
}

void write_ensemble_csv(const std::filesystem::path& path, const ParticleEnsemble& mu,
                        bool with_sidecar) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write ensemble file " + path.string());
  write_ensemble_csv(out, mu, with_sidecar);
}

}  // namespace wsfn
