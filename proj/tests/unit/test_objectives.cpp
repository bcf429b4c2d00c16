#include <gtest/gtest.h>

#include <cmath>

#include "wsfn/errors.hpp"
#include "wsfn/objectives.hpp"
#include "wsfn/rng.hpp"
#include "wsfn/verify.hpp"

using namespace wsfn;

namespace {

ParticleEnsemble pts(Index n, Index d, std::initializer_list<double> xs) {
  RowMatrix x(n, d);
  Index k = 0;
  for (double v : xs) x(k / d, k % d) = v, ++k;
  return ParticleEnsemble(x);
}

ObjectivePtr quad_interaction(Index dim) {
  return make_objective({{"kind", "interaction"}, {"dim", dim}, {"kernel", "quadratic"}});
}

}  // namespace

TEST(Potential, HandValues) {
  const auto obj = make_objective({{"kind", "potential"}, {"center", {0.0, 0.0}}});
  const auto mu = pts(2, 2, {1, 0, 0, 2});
  EXPECT_DOUBLE_EQ(obj->value(mu), 1.25);
  EXPECT_EQ(obj->grad(mu).values(), mu.positions());
  EXPECT_TRUE(obj->m_block(mu, 1).isIdentity(0.0));
  EXPECT_TRUE(obj->k_block(mu, 0, 1).isZero(0.0));
}

TEST(Potential, QuarticAndCurvature) {
  const auto quartic = make_objective({{"kind", "potential"}, {"shape", "quartic"}, {"dim", 1}});
  const auto mu = pts(1, 1, {2});
  EXPECT_DOUBLE_EQ(quartic->value(mu), 4.0);
  EXPECT_DOUBLE_EQ(quartic->grad(mu).values()(0, 0), 8.0);
  EXPECT_DOUBLE_EQ(quartic->m_block(mu, 0)(0, 0), 12.0);
  const auto aniso = make_objective({{"kind", "potential"}, {"center", {1.0, 0.0}}, {"curvature", {2.0, -1.0}}});
  const auto x = pts(1, 2, {2, 3});
  EXPECT_DOUBLE_EQ(aniso->value(x), 0.5 * 2.0 * 1.0 - 0.5 * 9.0);
  EXPECT_THROW(make_objective({{"kind", "potential"}, {"center", {1.0}}, {"curvature", {1.0, 2.0}}}), ConfigError);
}

TEST(Interaction, HandValues) {
  const auto obj = quad_interaction(1);
  const auto mu = pts(2, 1, {0, 2});
  EXPECT_DOUBLE_EQ(obj->value(mu), 0.5);
  EXPECT_DOUBLE_EQ(obj->grad(mu).values()(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(obj->grad(mu).values()(1, 0), 1.0);
  EXPECT_TRUE(obj->m_block(mu, 0).isIdentity(0.0));
  EXPECT_DOUBLE_EQ(obj->k_block(mu, 0, 1)(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(obj->k_block(mu, 1, 1)(0, 0), -1.0);
}

TEST(Interaction, ConfinementAddsToMultiplicationBlock) {
  const auto obj = make_objective({{"kind", "interaction"}, {"dim", 2}, {"scale", -3.0}, {"confinement", 1.0}});
  const auto mu = pts(3, 2, {0, 0, 1, 0, 0, 1});
  EXPECT_TRUE(obj->m_block(mu, 0).isApprox(-2.0 * Matrix::Identity(2, 2)));
  EXPECT_TRUE(obj->k_block(mu, 0, 2).isApprox(3.0 * Matrix::Identity(2, 2)));
}

TEST(Coulomb, MatchesDirectSummation) {
  RowMatrix y(3, 3);
  y << 2, 0, 0, -2, 0, 0, 0, 2, 1;
  const CoulombMmd obj({y, 5e-2});
  const auto mu = pts(2, 3, {0, 0, 5, 0, 4, -3});
  // Independent evaluation of the three-sum estimator with r^{-1} in d = 3.
  auto k = [](const Vector& z) { return 1.0 / z.norm(); };
  double xx = 2.0 * k(mu.particle(0) - mu.particle(1));
  double xy = 0.0;
  for (Index i = 0; i < 2; ++i)
    for (Index l = 0; l < 3; ++l) xy += k(mu.particle(i) - y.row(l));
  double yy = 0.0;
  for (Index l = 0; l < 3; ++l)
    for (Index r = 0; r < 3; ++r)
      if (l != r) yy += k(y.row(l) - y.row(r));
  const double expected = xx / 2.0 - 2.0 * xy / 6.0 + yy / 6.0;
  EXPECT_NEAR(obj.value(mu), expected, 1e-12);
}

TEST(Coulomb, ClampedPairsContributeNothing) {
  RowMatrix y(2, 3);
  y << 1e-3, 0, 0, 0, 1e-3, 0;
  const CoulombMmd obj({y, 5e-2});
  const auto mu = pts(1, 3, {0, 0, 0});
  EXPECT_TRUE(obj.m_block(mu, 0).isZero(0.0));
  EXPECT_TRUE(obj.grad(mu).values().isZero(0.0));
  EXPECT_DOUBLE_EQ(obj.kernel(Vector::Zero(3)), 20.0);
}

TEST(Coulomb, KernelBlockMatchesGradientJacobian) {
  const auto obj = make_check_objective(ObjectiveKind::coulomb_mmd, 11);
  const auto mu = make_check_ensemble(*obj, 6, 12);
  const Index d = 3;
  const double h = 1e-6;
  // Column derivative d grad_i / d x_j,c against M_i delta_ij + (1/N) A[i,j].
  for (Index j : {0, 3}) {
    for (Index c = 0; c < d; ++c) {
      Vector xp = mu.flat(), xm = mu.flat();
      xp(j * d + c) += h;
      xm(j * d + c) -= h;
      const Vector col = (obj->grad(ParticleEnsemble::from_flat(xp, d)).flat() -
                          obj->grad(ParticleEnsemble::from_flat(xm, d)).flat()) / (2 * h);
      for (Index i = 0; i < mu.count(); ++i) {
        Vector block = obj->k_block(mu, i, j).col(c) / static_cast<double>(mu.count());
        if (i == j) block += obj->m_block(mu, i).col(c);
        EXPECT_LT((col.segment(i * d, d) - block).norm(), 1e-6 * (1.0 + block.norm()));
      }
    }
  }
}

TEST(Coulomb, RejectsLowDimension) {
  EXPECT_THROW(make_objective({{"kind", "coulomb_mmd"}, {"dim", 2}, {"target_count", 10}}), ConfigError);
  EXPECT_THROW(CoulombMmd({RowMatrix::Zero(3, 2), 0.05}), ConfigError);
}

TEST(Coulomb, ModeMixtureAlternatesModes) {
  RowMatrix modes(2, 3);
  modes << 2, 0, 0, -2, 0, 0;
  const RowMatrix y = make_mode_mixture(modes, 0.0, 4, 1);
  EXPECT_DOUBLE_EQ(y(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(y(1, 0), -2.0);
  EXPECT_EQ(make_mode_mixture(modes, 0.25, 50, 9), make_mode_mixture(modes, 0.25, 50, 9));
}

TEST(Objectives, GradientMatchesFiniteDifferences) {
  for (auto kind : {ObjectiveKind::potential, ObjectiveKind::interaction, ObjectiveKind::coulomb_mmd,
                    ObjectiveKind::matrix_decomp, ObjectiveKind::icl}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto obj = make_check_objective(kind, seed);
      const auto mu = make_check_ensemble(*obj, 10, seed + 50);
      EXPECT_LT(grad_fd_error(*obj, mu), 1e-5) << to_string(kind) << " seed " << seed;
    }
  }
}

TEST(Objectives, DimensionMismatchThrows) {
  const auto obj = quad_interaction(2);
  EXPECT_THROW(obj->value(pts(2, 1, {0, 1})), ShapeError);
  EXPECT_THROW(obj->m_block(pts(2, 2, {0, 1, 2, 3}), 5), ShapeError);
}

TEST(Network, NoHessianBlocks) {
  const auto obj = make_check_objective(ObjectiveKind::matrix_decomp, 1);
  EXPECT_FALSE(obj->has_hessian_blocks());
  const auto mu = make_check_ensemble(*obj, 4, 2);
  EXPECT_THROW(obj->m_block(mu, 0), CapabilityError);
  EXPECT_THROW(obj->k_block(mu, 0, 0), CapabilityError);
}

TEST(Network, MatrixDecompositionZeroAtTeacher) {
  NetParams p = make_net_params(4, 3, 25, 6, Activation::tanh, false, 3);
  const MatrixDecomposition obj(p);
  // The teacher ensemble reproduces its own features exactly.
  EXPECT_NEAR(obj.value(ParticleEnsemble(p.teacher_particles)), 0.0, 1e-14);
  EXPECT_NEAR(obj.grad(ParticleEnsemble(p.teacher_particles)).values().cwiseAbs().maxCoeff(), 0.0, 1e-14);
}

TEST(Network, IclUncorrelatedFeaturesGiveTeacherEnergy) {
  // Inputs on two coordinate axes. With relu, student units only respond to
  // the second axis and teacher units only to the first, so no sample
  // activates both and the cross-covariance vanishes.
  NetParams p;
  p.activation = Activation::relu;
  p.feature_dim = 2;
  p.input_dim = 2;
  p.inputs.resize(4, 2);
  p.inputs << 1, 0, 2, 0, 0, 1, 0, -2;
  p.teacher_particles.resize(2, 4);
  p.teacher_particles << 1, 0.5, 1, 0, -0.3, 1, 0.5, 0;
  p.teacher_linear = Matrix::Identity(2, 2);
  const InContextFeatureLearning obj(p);
  RowMatrix student(2, 4);
  student << 1, 0, 0, 1, 0, 1, 0, -1;
  const ParticleEnsemble mu(student);
  const RowMatrix cross = obj.features(mu).transpose() * obj.teacher_features();
  ASSERT_TRUE(cross.isZero(0.0));
  EXPECT_NEAR(obj.value(mu), obj.teacher_energy(), 1e-14);
}

TEST(Network, IclDegenerateFeaturesThrow) {
  NetParams p = make_net_params(3, 2, 10, 2, Activation::tanh, true, 4);
  const InContextFeatureLearning obj(p);
  const ParticleEnsemble zero(RowMatrix::Zero(3, 5));
  EXPECT_THROW(obj.value(zero), NumericError);
}

TEST(Network, DataIsSeedDeterministic) {
  const nlohmann::json spec = {{"kind", "icl"}, {"input_dim", 4}, {"feature_dim", 2}, {"samples", 12}, {"seed", 5}};
  const auto a = make_objective(spec);
  const auto b = make_objective(spec);
  const auto& na = static_cast<const NetworkObjective&>(*a);
  const auto& nb = static_cast<const NetworkObjective&>(*b);
  EXPECT_EQ(na.params().inputs, nb.params().inputs);
  EXPECT_EQ(na.teacher_features(), nb.teacher_features());
  EXPECT_EQ(na.params().teacher_particles.rows(), 2);  // teacher count defaults to k
}

TEST(Factory, Errors) {
  EXPECT_THROW(make_objective({{"kind", "nope"}}), ConfigError);
  EXPECT_THROW(make_objective({{"dim", 2}}), ConfigError);
  EXPECT_THROW(make_objective({{"kind", "interaction"}, {"dim", 0}}), ConfigError);
  EXPECT_THROW(make_objective({{"kind", "matrix_decomp"}, {"input_dim", 3}, {"feature_dim", 2}, {"samples", 0}}),
               ConfigError);
  EXPECT_THROW(make_objective({{"kind", "icl"}, {"input_dim", 3}, {"feature_dim", 2}, {"samples", 5},
                               {"activation", "sigmoid"}}),
               ConfigError);
}
