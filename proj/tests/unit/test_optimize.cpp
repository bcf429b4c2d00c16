#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "wsfn/errors.hpp"
#include "wsfn/optimize.hpp"

using namespace wsfn;

namespace {

ParticleEnsemble line(std::initializer_list<double> xs) {
  RowMatrix x(static_cast<Index>(xs.size()), 1);
  Index k = 0;
  for (double v : xs) x(k++, 0) = v;
  return ParticleEnsemble(x);
}

ObjectivePtr potential1d() { return make_objective({{"kind", "potential"}, {"dim", 1}}); }

}  // namespace

TEST(Steps, WgfOnPotential) {
  EXPECT_DOUBLE_EQ(step_wgf(*potential1d(), line({4}), 0.5).positions()(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(step_wgf(*potential1d(), line({4}), 0.0).positions()(0, 0), 4.0);
}

TEST(Steps, WgfOnInteractionMeetsInTheMiddle) {
  const auto obj = make_objective({{"kind", "interaction"}, {"dim", 1}});
  const auto out = step_wgf(*obj, line({0, 2}), 1.0);
  EXPECT_DOUBLE_EQ(out.positions()(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(out.positions()(1, 0), 1.0);
}

TEST(Steps, WsfnOnPotential) {
  OptimizerConfig cfg;
  cfg.tau = 1.0;
  cfg.beta = 3.0;
  cfg.lanczos_m = 2;
  EXPECT_NEAR(step_wsfn(*potential1d(), line({4}), cfg).positions()(0, 0), 2.0, 1e-14);
  // A vanishing gradient leaves the iterate in place.
  EXPECT_DOUBLE_EQ(step_wsfn(*potential1d(), line({0}), cfg).positions()(0, 0), 0.0);
}

TEST(Steps, NewtonReachesMinimizer) {
  const auto obj = make_objective({{"kind", "potential"}, {"center", {1.5, -2.0}}, {"curvature", {3.0, 0.2}}});
  RowMatrix x(3, 2);
  x << 0, 0, 4, 1, -3, 7;
  const auto out = step_newton(*obj, ParticleEnsemble(x), 1.0);
  for (Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(out.positions()(i, 0), 1.5, 1e-12);
    EXPECT_NEAR(out.positions()(i, 1), -2.0, 1e-12);
  }
}

TEST(Steps, NewtonRejectsSingularHessian) {
  const auto obj = make_objective({{"kind", "interaction"}, {"dim", 1}});
  EXPECT_THROW(step_newton(*obj, line({0, 2}), 1.0), NumericError);
}

TEST(Steps, LevenbergMarquardtWithIdentityHessian) {
  EXPECT_DOUBLE_EQ(step_lm(*potential1d(), line({4}), 1.0).positions()(0, 0), 2.0);
  const auto neg = make_objective({{"kind", "potential"}, {"dim", 1}, {"curvature", {-2.0}}});
  EXPECT_THROW(step_lm(*neg, line({1}), 1.0), NumericError);
  EXPECT_THROW(step_lm(*potential1d(), line({1}), 0.0), ConfigError);
}

TEST(Steps, WsfnGeometricContractionOnQuadratic) {
  const auto obj = make_objective({{"kind", "potential"}, {"dim", 2}});
  OptimizerConfig cfg;
  cfg.method = Method::wsfn;
  cfg.tau = 0.3;
  cfg.beta = 0.5;
  cfg.lanczos_m = 4;
  RowMatrix x(2, 2);
  x << 1, -2, 3, 0.5;
  ParticleEnsemble mu(x);
  const double factor = std::pow(1.0 - cfg.tau / std::sqrt(1.0 + cfg.beta), 2);
  double prev = obj->value(mu);
  for (int k = 0; k < 10; ++k) {
    mu = step(*obj, mu, cfg);
    const double now = obj->value(mu);
    EXPECT_NEAR(now / prev, factor, 1e-12);
    prev = now;
  }
}

TEST(Run, FirstPerturbationComesAfterNOut) {
  const auto obj = make_objective({{"kind", "interaction"}, {"dim", 1}});
  OptimizerConfig cfg;
  cfg.method = Method::pwgf;
  cfg.tau = 0.1;
  cfg.eps = 1e300;
  cfg.n_out = 3;
  cfg.max_iters = 6;
  cfg.halt_on_failed_episode = false;
  const auto rec = run(*obj, line({0, 1, 3}), cfg);
  ASSERT_EQ(rec.rows.size(), 7u);
  for (int n = 0; n < 4; ++n) EXPECT_EQ(rec.rows[n].event, Event::step) << n;
  EXPECT_EQ(rec.rows[4].event, Event::perturb);
  EXPECT_EQ(rec.rows[6].event, Event::terminate);
  EXPECT_EQ(rec.perturbations, 1);
  EXPECT_EQ(rec.termination, "max_iters");
}

TEST(Run, FailedEpisodeHaltsAtPerturbedPoint) {
  // F0 is huge, so the first episode counts as failed.
  const auto obj = make_objective({{"kind", "interaction"}, {"dim", 1}});
  OptimizerConfig cfg;
  cfg.method = Method::pwgf;
  cfg.tau = 0.1;
  cfg.eps = 1e300;
  cfg.n_out = 2;
  cfg.F0 = 1e10;
  cfg.max_iters = 50;
  const auto rec = run(*obj, line({0, 1, 3}), cfg);
  EXPECT_EQ(rec.termination, "failed_episode");
  EXPECT_EQ(rec.rows.back().iter, 5);
  EXPECT_EQ(rec.perturbations, 1);
}

TEST(Run, WgfLossIsMonotoneAndDeterministic) {
  const auto obj = make_objective({{"kind", "interaction"}, {"dim", 2}, {"kernel", "gaussian"}, {"confinement", 0.5}});
  RowMatrix x = RowMatrix::Random(6, 2);
  OptimizerConfig cfg;
  cfg.method = Method::wgf;
  cfg.tau = 0.05;
  cfg.max_iters = 40;
  const auto a = run(*obj, ParticleEnsemble(x), cfg);
  for (std::size_t i = 1; i < a.rows.size(); ++i) EXPECT_LE(a.rows[i].loss, a.rows[i - 1].loss + 1e-15);
  const auto b = run(*obj, ParticleEnsemble(x), cfg);
  EXPECT_EQ(a.final_ensemble.positions(), b.final_ensemble.positions());
}

TEST(Run, StepErrorsAreRecorded) {
  const auto obj = make_objective({{"kind", "interaction"}, {"dim", 1}});
  OptimizerConfig cfg;
  cfg.method = Method::newton;
  cfg.max_iters = 3;
  const auto rec = run(*obj, line({0, 2}), cfg);
  EXPECT_TRUE(rec.failed);
  EXPECT_EQ(rec.termination.rfind("error: ", 0), 0u);
}

TEST(Config, Validation) {
  OptimizerConfig cfg;
  cfg.tau = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.beta = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lanczos_m = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_EQ(method_from_string("wgf_isotropic"), Method::wgf_isotropic);
  EXPECT_THROW(method_from_string("adam"), ConfigError);
  EXPECT_EQ(trigger_from_string(to_string(Trigger::stagnation)), Trigger::stagnation);
}

TEST(Params, UnitConstants) {
  TheoryConstants t;
  ParamOptions o;
  o.zeta_ep = 0.5;
  const auto p = theoretical_params(t, 1.0, 1.0, 1e-3, o);
  EXPECT_DOUBLE_EQ(p.tau, 1.0);
  EXPECT_NEAR(p.delta_tilde, 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(p.kappa, std::sqrt(2.0 * std::log(8.0)), 1e-14);
  EXPECT_NEAR(p.c_abs, std::sqrt(2.0 * std::numbers::pi) * 0.5 / 4.0, 1e-15);
  const double lg = std::log(1.0 + p.delta_tilde);
  const double n_out =
      2.0 / lg * std::log(16.0 * std::sqrt(2.0) * p.kappa / (std::sqrt(std::numbers::e) * p.c_abs * std::sqrt(lg)));
  EXPECT_NEAR(p.n_out, n_out, 1e-12 * n_out);
  const double bracket = 0.5 + 2.0 / std::numbers::pi;
  const double f0 = std::pow(std::log(1.5), 2) / (144.0 * bracket * bracket * std::pow(n_out, 3));
  EXPECT_NEAR(p.F0, f0, 1e-12 * f0);
  const double eta = 2.0 * f0 / (p.kappa * (1e-3 + std::sqrt(1e-6 + 2.0 * f0)));
  EXPECT_NEAR(p.eta, eta, 1e-12 * eta);
  EXPECT_TRUE(p.admissible);
}

TEST(Params, FixedPointAndErrors) {
  TheoryConstants t;
  t.F_min = 1.0;
  const auto p = theoretical_params(t, 1e-2, 1e-1, 1e-3);
  EXPECT_NEAR(p.zeta_ep, 4.0 / 3.0 * t.zeta / std::ceil(t.F_min / p.F0), 1e-15);
  t.C_H = -1.0;
  EXPECT_THROW(theoretical_params(t, 1.0, 1.0, 1.0), ConfigError);
  TheoryConstants ok;
  EXPECT_THROW(theoretical_params(ok, 0.0, 1.0, 1.0), ConfigError);
  ParamOptions huge_c;
  huge_c.c_abs = 1e30;
  EXPECT_THROW(theoretical_params(ok, 1.0, 1.0, 1e-3, huge_c), NumericError);
}
