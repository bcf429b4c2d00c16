#include <gtest/gtest.h>

#include <cmath>

#include "wsfn/errors.hpp"
#include "wsfn/perturb.hpp"
#include "wsfn/verify.hpp"

using namespace wsfn;

TEST(Perturb, PotentialHasZeroField) {
  const auto obj = make_objective({{"kind", "potential"}, {"dim", 2}});
  const ParticleEnsemble mu(RowMatrix::Random(5, 2));
  Rng rng = make_stream(1);
  EXPECT_TRUE(sample_gp(*obj, mu, rng).values().isZero(0.0));
  PerturbationSpec spec;
  spec.mode = PerturbMode::gp_rms_normalized;
  Rng rng2 = make_stream(1);
  const PerturbOutcome out = perturb(*obj, mu, spec, rng2);
  EXPECT_TRUE(out.zero_field);
  EXPECT_EQ(out.mu.positions(), mu.positions());
}

TEST(Perturb, SingleParticleIsScaledNormal) {
  // N = 1, d = 1 quadratic interaction: A = -scale, so xi = -scale * g.
  const auto obj = make_objective({{"kind", "interaction"}, {"dim", 1}, {"scale", 2.0}});
  const ParticleEnsemble mu(RowMatrix::Constant(1, 1, 0.3));
  Rng a = make_stream(42, {7});
  Rng b = make_stream(42, {7});
  const double g = standard_normal_matrix(1, 1, b)(0, 0);
  EXPECT_DOUBLE_EQ(sample_gp(*obj, mu, a).values()(0, 0), -2.0 * g);
}

TEST(Perturb, IsotropicMoments) {
  Rng rng = make_stream(3);
  const TangentField xi = sample_isotropic(4000, 3, rng);
  const auto& v = xi.values();
  EXPECT_NEAR(v.mean(), 0.0, 0.03);
  EXPECT_NEAR(v.array().square().mean(), 1.0, 0.03);
  Rng again = make_stream(3);
  EXPECT_EQ(sample_isotropic(4000, 3, again).values(), v);
}

TEST(Perturb, ZeroEtaLeavesEnsemble) {
  const ParticleEnsemble mu(RowMatrix::Random(4, 2));
  Rng rng = make_stream(5);
  PerturbationSpec spec;
  spec.eta = 0.0;
  EXPECT_EQ(apply_perturbation(mu, sample_isotropic(4, 2, rng), spec).positions(), mu.positions());
}

TEST(Perturb, RmsNormalizedStepLength) {
  const ParticleEnsemble mu(RowMatrix::Zero(1, 2));
  RowMatrix f(1, 2);
  f << 3, 4;
  PerturbationSpec spec;
  spec.mode = PerturbMode::gp_rms_normalized;
  spec.eta = 0.5;
  const auto moved = apply_perturbation(mu, TangentField(f), spec);
  EXPECT_DOUBLE_EQ(moved.positions()(0, 0), 0.3);
  EXPECT_DOUBLE_EQ(moved.positions()(0, 1), 0.4);
  spec.mode = PerturbMode::gp_hessian;
  EXPECT_DOUBLE_EQ(apply_perturbation(mu, TangentField(f), spec).positions()(0, 1), 2.0);
}

TEST(Perturb, KappaBoundIsEnforced) {
  const auto obj = make_check_objective(ObjectiveKind::interaction, 2);
  const auto mu = make_check_ensemble(*obj, 6, 3);
  PerturbationSpec spec;
  spec.kappa = 10.0;
  Rng rng = make_stream(9);
  const auto ok = perturb(*obj, mu, spec, rng);
  EXPECT_LE(ok.xi_norm, 10.0);
  EXPECT_EQ(ok.attempts, 1);
  spec.kappa = 1e-12;
  EXPECT_THROW(perturb(*obj, mu, spec, rng), NumericError);
}

TEST(Perturb, NetworkFallsBackToIsotropic) {
  const auto obj = make_check_objective(ObjectiveKind::matrix_decomp, 1);
  const auto mu = make_check_ensemble(*obj, 4, 2);
  PerturbationSpec spec;
  Rng rng = make_stream(1);
  const auto out = perturb(*obj, mu, spec, rng);
  EXPECT_TRUE(out.fell_back_to_isotropic);
  EXPECT_GT(out.xi_norm, 0.0);
  Rng rng2 = make_stream(1);
  EXPECT_THROW(sample_gp(*obj, mu, rng2), CapabilityError);
}

TEST(Perturb, SpecValidation) {
  PerturbationSpec spec;
  spec.eta = -1.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.eta = 0.1;
  spec.kappa = 0.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  EXPECT_EQ(perturb_mode_from_string(to_string(PerturbMode::gp_rms_normalized)), PerturbMode::gp_rms_normalized);
  EXPECT_THROW(perturb_mode_from_string("gaussian"), ConfigError);
}
