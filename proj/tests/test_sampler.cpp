#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "tep/models.hpp"
#include "tep/oracle.hpp"
#include "tep/rng.hpp"
#include "tep/sampler.hpp"

using namespace tep;
using sampler::ChainConfig;
using sampler::Kernel;

namespace {

System quadratic(std::size_t n) { return {std::make_shared<models::QuadraticModel>(n), Loss::zero()}; }

ChainConfig cfg(Kernel k, std::size_t chains, std::size_t steps, std::uint64_t seed) {
  ChainConfig c;
  c.kernel = k;
  c.n_chains = chains;
  c.n_steps = steps;
  c.burn_in = steps / 5;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Sampler, ConfigValidation) {
  auto c = cfg(Kernel::LangevinMetropolisAdjusted, 2, 10, 1);
  EXPECT_NO_THROW(c.validate());
  c.burn_in = 10;
  EXPECT_THROW(c.validate(), InputError);
  c = cfg(Kernel::LangevinMetropolisAdjusted, 0, 10, 1);
  EXPECT_THROW(c.validate(), InputError);
  c = cfg(Kernel::LangevinMetropolisAdjusted, 1, 10, 1);
  c.thin = 0;
  EXPECT_THROW(c.validate(), InputError);
  c.thin = 3;
  EXPECT_EQ(c.kept_per_chain(), 3u);  // steps 2, 5, 8 of the 8 kept
}

TEST(Sampler, KernelNames) {
  for (auto k : {Kernel::LangevinUnadjusted, Kernel::LangevinMetropolisAdjusted, Kernel::GibbsSweepBinary}) {
    EXPECT_EQ(sampler::parse_kernel(sampler::kernel_name(k)), k);
  }
  EXPECT_THROW(sampler::parse_kernel("hmc"), InputError);
}

TEST(Sampler, SameSeedSameBatch) {
  const auto sys = quadratic(3);
  const ParamVector theta(std::vector<double>{0.5, -0.5, 1.0});
  const auto c = cfg(Kernel::LangevinMetropolisAdjusted, 3, 200, 42);
  const auto a = sampler::run_chains(sys, theta, 0.0, Temperature(1.0), c);
  const auto b = sampler::run_chains(sys, theta, 0.0, Temperature(1.0), c);
  EXPECT_EQ(a, b);
  auto c2 = c;
  c2.seed = 43;
  EXPECT_NE(a.data, sampler::run_chains(sys, theta, 0.0, Temperature(1.0), c2).data);
}

TEST(Sampler, SerialAndParallelAgreeBitwise) {
  const auto sys = quadratic(4);
  const ParamVector theta(std::vector<double>{0.1, 0.2, 0.3, 0.4});
  for (auto k : {Kernel::LangevinUnadjusted, Kernel::LangevinMetropolisAdjusted}) {
    const auto c = cfg(k, 5, 100, 7);
    EXPECT_EQ(sampler::run_chains(sys, theta, 0.0, Temperature(0.5), c, std::nullopt, Exec::Serial),
              sampler::run_chains(sys, theta, 0.0, Temperature(0.5), c, std::nullopt, Exec::Parallel));
  }
  System sg{std::make_shared<models::SpinGlassModel>(6), models::SpinGlassModel::output_loss(0, 1.0)};
  const auto th = models::SpinGlassModel(6).random_params(2);
  const auto c = cfg(Kernel::GibbsSweepBinary, 4, 100, 9);
  EXPECT_EQ(sampler::run_chains(sg, th, 0.5, Temperature(1.0), c, std::nullopt, Exec::Serial),
            sampler::run_chains(sg, th, 0.5, Temperature(1.0), c, std::nullopt, Exec::Parallel));
}

TEST(Sampler, BatchMetadata) {
  const auto sys = quadratic(2);
  const ParamVector theta(std::vector<double>{0.0, 0.0});
  auto c = cfg(Kernel::LangevinMetropolisAdjusted, 3, 50, 1);
  const auto b = sampler::run_chains(sys, theta, 0.0, Temperature(2.0), c);
  EXPECT_EQ(b.n_chains(), 3u);
  EXPECT_EQ(b.size(), 3 * c.kept_per_chain());
  EXPECT_EQ(b.theta_hash, theta.hash());
  EXPECT_EQ(b.temperature, 2.0);
  ASSERT_TRUE(b.acceptance_rate.has_value());
  EXPECT_GT(*b.acceptance_rate, 0.0);
  EXPECT_EQ(b.ess.size(), 3u);
  c.kernel = Kernel::LangevinUnadjusted;
  EXPECT_FALSE(sampler::run_chains(sys, theta, 0.0, Temperature(2.0), c).acceptance_rate.has_value());
}

TEST(Sampler, ClampedUnitsStayFixed) {
  System sys{std::make_shared<models::QuadraticModel>(3, std::vector<bool>{true, false, false}), Loss::zero()};
  const ParamVector theta(std::vector<double>{0.0, 0.0, 0.0});
  const auto init = StateVector::continuous({2.5, 0.0, 0.0});
  const auto b = sampler::run_chains(sys, theta, 0.0, Temperature(1.0),
                                     cfg(Kernel::LangevinMetropolisAdjusted, 2, 50, 3), init);
  for (std::size_t r = 0; r < b.size(); ++r) EXPECT_EQ(b.sample(r)[0], 2.5);
}

TEST(Sampler, GaussianMomentsWithinError) {
  const auto sys = quadratic(2);
  const ParamVector theta(std::vector<double>{1.0, -2.0});
  const double t = 0.5;
  const auto b = sampler::run_chains(sys, theta, 0.0, Temperature(t),
                                     cfg(Kernel::LangevinMetropolisAdjusted, 8, 4000, 11));
  const auto m = b.mean_state();
  double ess = 0.0;
  for (double e : b.ess) ess += e;
  const double se = std::sqrt(t / ess) * 2.0;  // ESS is measured on the objective, so be generous
  EXPECT_NEAR(m[0], 1.0, 4 * se);
  EXPECT_NEAR(m[1], -2.0, 4 * se);
  double var = 0.0;
  for (std::size_t r = 0; r < b.size(); ++r) var += std::pow(b.sample(r)[0] - m[0], 2);
  var /= static_cast<double>(b.size() - 1);
  EXPECT_NEAR(var, t, 0.1 * t);
}

TEST(Sampler, GibbsMatchesEnumeration) {
  System sys{std::make_shared<models::SpinGlassModel>(4), models::SpinGlassModel::output_loss(3, -1.0)};
  const auto theta = models::SpinGlassModel(4).random_params(5, 0.7);
  const Temperature t(1.0);
  const auto table = oracle::gibbs_table(sys, theta, NudgeStrength(0.6), t);
  const auto b = sampler::run_chains(sys, theta, 0.6, t, cfg(Kernel::GibbsSweepBinary, 8, 6000, 21));
  std::map<std::size_t, double> freq;
  for (std::size_t r = 0; r < b.size(); ++r) {
    std::size_t idx = 0;
    for (std::size_t j = 0; j < 4; ++j) idx |= (b.sample(r)[j] > 0 ? 1u : 0u) << j;
    freq[idx] += 1.0 / static_cast<double>(b.size());
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) tv += 0.5 * std::abs(freq[i] - table.probs[i]);
  EXPECT_LT(tv, 0.02);
}

TEST(Sampler, WrongKernelForModel) {
  const auto sys = quadratic(2);
  EXPECT_THROW(sampler::run_chains(sys, ParamVector(std::vector<double>{0.0, 0.0}), 0.0, Temperature(1.0),
                                   cfg(Kernel::GibbsSweepBinary, 1, 10, 1)),
               sampler::SamplerError);
  System sg{std::make_shared<models::SpinGlassModel>(3), Loss::zero()};
  EXPECT_THROW(sampler::run_chains(sg, models::SpinGlassModel(3).zero_params(), 0.0, Temperature(1.0),
                                   cfg(Kernel::LangevinUnadjusted, 1, 10, 1)),
               sampler::SamplerError);
}

TEST(Sampler, HugeUnadjustedStepDiverges) {
  System sys{std::make_shared<models::QuadraticModel>(2), Loss::zero()};
  auto c = cfg(Kernel::LangevinUnadjusted, 1, 2000, 1);
  c.step_size = 50.0;
  try {
    sampler::run_chains(sys, ParamVector(std::vector<double>{0.0, 0.0}), 0.0, Temperature(1.0), c);
    FAIL() << "expected DivergenceError";
  } catch (const sampler::DivergenceError& e) {
    EXPECT_EQ(e.step_size(), 50.0);
  }
}

TEST(Sampler, LowAcceptanceWarns) {
  System sys{std::make_shared<models::QuadraticModel>(2), Loss::zero()};
  auto c = cfg(Kernel::LangevinMetropolisAdjusted, 2, 200, 1);
  c.step_size = 20.0;
  const auto b = sampler::run_chains(sys, ParamVector(std::vector<double>{0.0, 0.0}), 0.0, Temperature(1.0), c);
  EXPECT_FALSE(b.warnings.empty());
}

TEST(Sampler, NudgedLangevinNeedsLossGradient) {
  System sys{std::make_shared<models::QuadraticModel>(1), Loss([](std::span<const double> s) { return s[0]; })};
  EXPECT_THROW(sampler::run_chains(sys, ParamVector(std::vector<double>{0.0}), 0.5, Temperature(1.0),
                                   cfg(Kernel::LangevinMetropolisAdjusted, 1, 10, 1)),
               sampler::SamplerError);
  EXPECT_NO_THROW(sampler::run_chains(sys, ParamVector(std::vector<double>{0.0}), 0.0, Temperature(1.0),
                                      cfg(Kernel::LangevinMetropolisAdjusted, 1, 10, 1)));
}

TEST(Relax, ReachesQuadraticMinimum) {
  System sys{std::make_shared<models::QuadraticModel>(2),
             Loss([](std::span<const double> s) { return 0.5 * s[0] * s[0]; },
                  [](std::span<const double> s, std::span<double> g) { g[0] = s[0]; g[1] = 0.0; })};
  // F = ½(s−θ)² + β½s₀²: minimum at s₀ = θ₀/(1+β).
  const auto r = sampler::relax_deterministic(sys, ParamVector(std::vector<double>{2.0, -1.0}), 1.0,
                                              StateVector::continuous({0.0, 0.0}), 0.5, 1000, 1e-12);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.state[0], 1.0, 1e-10);
  EXPECT_NEAR(r.state[1], -1.0, 1e-10);
}

TEST(Relax, ReportsNonConvergence) {
  const auto sys = quadratic(1);
  const auto r = sampler::relax_deterministic(sys, ParamVector(std::vector<double>{5.0}), 0.0, StateVector::continuous({0.0}),
                                              0.01, 3, 1e-12);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3u);
}

TEST(Ess, IndependentTraceIsNearLength) {
  Rng rng(3);
  std::normal_distribution<double> n01;
  std::vector<double> x(20000);
  for (double& v : x) v = n01(rng);
  EXPECT_NEAR(sampler::effective_sample_size(x) / 20000.0, 1.0, 0.1);
}

TEST(Ess, CorrelatedTraceIsShorter) {
  Rng rng(3);
  std::normal_distribution<double> n01;
  std::vector<double> x(20000);
  double v = 0.0;
  const double rho = 0.9;
  for (double& e : x) e = v = rho * v + std::sqrt(1 - rho * rho) * n01(rng);
  const double expected = 20000.0 * (1 - rho) / (1 + rho);
  EXPECT_NEAR(sampler::effective_sample_size(x) / expected, 1.0, 0.25);
}
