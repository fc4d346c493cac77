#include <gtest/gtest.h>

#include <cmath>

#include "tep/estimators.hpp"
#include "tep/models.hpp"
#include "tep/oracle.hpp"

using namespace tep;
namespace est = tep::estimators;

namespace {

struct Fixture {
  System sys{std::make_shared<models::SpinGlassModel>(6), models::SpinGlassModel::output_loss(5, 1.0)};
  ParamVector theta = models::SpinGlassModel(6).random_params(4, 0.6);
  Temperature temp{1.0};
};

sampler::ChainConfig gibbs(std::size_t chains, std::size_t steps, std::uint64_t seed) {
  sampler::ChainConfig c;
  c.kernel = sampler::Kernel::GibbsSweepBinary;
  c.n_chains = chains;
  c.n_steps = steps;
  c.burn_in = steps / 10;
  c.seed = seed;
  return c;
}

void expect_close(const ParamVector& a, const ParamVector& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "coordinate " << i;
}

// Fraction of coordinates within k standard errors of the reference.
double coverage(const est::GradEstimate& g, const ParamVector& ref, double k) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) ok += std::abs(g.grad[i] - ref[i]) <= k * g.std_err[i] + 1e-12;
  return static_cast<double>(ok) / static_cast<double>(ref.size());
}

}  // namespace

TEST(ExactSource, FormulasReproduceOracle) {
  Fixture f;
  est::ExactSource src(f.sys, f.theta, f.temp);
  expect_close(est::contrast(src, f.theta).grad, oracle::exact_grad_J_contrast(f.sys, f.theta, f.temp), 1e-13);
  const auto quad = QuadratureSpec::gauss_legendre(4);
  expect_close(est::covariance(src, f.theta, f.temp, quad).grad,
               oracle::exact_grad_J_covariance(f.sys, f.theta, f.temp, quad), 1e-13);
  expect_close(est::supervised(src, f.theta, f.temp).grad, oracle::exact_grad_supervised(f.sys, f.theta, f.temp),
               1e-13);
  const auto jb = oracle::exact_grad_J_beta(f.sys, f.theta, NudgeStrength(0.25), f.temp);
  const auto ep = est::classical_ep(src, f.theta, 0.25).grad;
  for (std::size_t i = 0; i < jb.size(); ++i) EXPECT_NEAR(ep[i], jb[i] / 0.25, 1e-12);
}

TEST(ExactSource, ZeroStandardErrors) {
  Fixture f;
  est::ExactSource src(f.sys, f.theta, f.temp);
  const auto g = est::contrast(src, f.theta);
  for (double se : g.std_err) EXPECT_EQ(se, 0.0);
  EXPECT_EQ(g.meta.betas, (std::vector<double>{0.0, 1.0}));
}

TEST(MonteCarlo, ContrastWithinStandardErrors) {
  Fixture f;
  const auto ref = oracle::exact_grad_J_contrast(f.sys, f.theta, f.temp);
  const auto g = est::grad_contrast_mc(f.sys, f.theta, f.temp, gibbs(8, 3000, 17));
  EXPECT_EQ(g.method, est::Method::ExpectationContrast);
  EXPECT_GE(coverage(g, ref, 4.0), 0.95);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_LT(g.std_err[i], 0.05);
}

TEST(MonteCarlo, CovarianceWithinStandardErrors) {
  Fixture f;
  const auto quad = QuadratureSpec::trapezoid(5);
  const auto ref = oracle::exact_grad_J_covariance(f.sys, f.theta, f.temp, quad);
  const auto g = est::grad_covariance_mc(f.sys, f.theta, f.temp, quad, gibbs(8, 3000, 19));
  EXPECT_GE(coverage(g, ref, 4.0), 0.95);
  EXPECT_EQ(g.meta.betas.size(), 5u);
  const auto p = est::grad_path_integral(f.sys, f.theta, f.temp, quad, gibbs(8, 3000, 19));
  EXPECT_EQ(p.method, est::Method::PathIntegral);
  EXPECT_EQ(p.grad, g.grad);
}

TEST(MonteCarlo, SupervisedWithinStandardErrors) {
  Fixture f;
  const auto ref = oracle::exact_grad_supervised(f.sys, f.theta, f.temp);
  const auto g = est::grad_supervised_mc(f.sys, f.theta, f.temp, gibbs(8, 3000, 23));
  EXPECT_GE(coverage(g, ref, 4.0), 0.95);
}

TEST(MonteCarlo, PhasesUseDistinctSeeds) {
  Fixture f;
  const auto g = est::grad_contrast_mc(f.sys, f.theta, f.temp, gibbs(2, 100, 1));
  ASSERT_EQ(g.meta.seeds.size(), 2u);
  EXPECT_NE(g.meta.seeds[0], g.meta.seeds[1]);
  EXPECT_EQ(g.meta.sample_counts[0], 2 * gibbs(2, 100, 1).kept_per_chain());
}

TEST(MonteCarlo, SerialAndParallelAgreeBitwise) {
  Fixture f;
  const auto a = est::grad_contrast_mc(f.sys, f.theta, f.temp, gibbs(4, 200, 3), std::nullopt, Exec::Serial);
  const auto b = est::grad_contrast_mc(f.sys, f.theta, f.temp, gibbs(4, 200, 3), std::nullopt, Exec::Parallel);
  EXPECT_EQ(a.grad, b.grad);
  EXPECT_EQ(a.std_err, b.std_err);
}

TEST(ClassicalEp, RejectsZeroBeta) {
  Fixture f;
  est::ExactSource src(f.sys, f.theta, f.temp);
  EXPECT_THROW(est::classical_ep(src, f.theta, 0.0), InputError);
  EXPECT_THROW(est::classical_ep(src, f.theta, 1.5), InputError);
}

TEST(ClassicalEp, SmallBetaApproachesSupervised) {
  Fixture f;
  est::ExactSource src(f.sys, f.theta, f.temp);
  const auto sup = est::supervised(src, f.theta, f.temp).grad;
  const auto ep = est::classical_ep(src, f.theta, 1e-5).grad;
  expect_close(ep, sup, 1e-4);
}

TEST(Covariance, NeedsTwoSamples) {
  Fixture f;
  auto c = gibbs(1, 2, 1);
  c.burn_in = 1;
  EXPECT_THROW(est::grad_supervised_mc(f.sys, f.theta, f.temp, c), est::EstimationError);
}

TEST(Average, MeansAndCombinesErrors) {
  est::GradEstimate a, b;
  a.grad = ParamVector(std::vector<double>{1.0, 2.0});
  a.std_err = {0.3, 0.0};
  b.grad = ParamVector(std::vector<double>{3.0, 4.0});
  b.std_err = {0.4, 0.0};
  const auto m = est::average({a, b});
  EXPECT_DOUBLE_EQ(m.grad[0], 2.0);
  EXPECT_DOUBLE_EQ(m.grad[1], 3.0);
  EXPECT_NEAR(m.std_err[0], 0.25, 1e-15);  // √(0.09 + 0.16) / 2
  EXPECT_THROW(est::average({}), est::EstimationError);
}

TEST(Continuous, ContrastOnQuadraticMatchesClosedForm) {
  // E = ½‖s − θ‖², ℓ = ½‖s‖²: ρ_1 has mean θ/2, so ∇J = 𝔼_1[θ − s] − 𝔼_0[θ − s] = θ/2.
  System sys{std::make_shared<models::QuadraticModel>(2),
             Loss([](std::span<const double> s) { return 0.5 * (s[0] * s[0] + s[1] * s[1]); },
                  [](std::span<const double> s, std::span<double> g) { g[0] = s[0]; g[1] = s[1]; })};
  const ParamVector theta(std::vector<double>{1.0, -0.6});
  sampler::ChainConfig c;
  c.n_chains = 8;
  c.n_steps = 4000;
  c.burn_in = 400;
  c.seed = 5;
  const auto g = est::grad_contrast_mc(sys, theta, Temperature(0.5), c);
  EXPECT_GE(coverage(g, ParamVector(std::vector<double>{0.5, -0.3}), 4.0), 1.0);
}
