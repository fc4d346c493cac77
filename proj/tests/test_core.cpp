#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "tep/core.hpp"
#include "tep/models.hpp"
#include "tep/quadrature.hpp"
#include "tep/rng.hpp"

using namespace tep;

TEST(ParamVector, RejectsNonFiniteValues) {
  EXPECT_THROW(ParamVector(std::vector<double>{1.0, std::nan("")}), InputError);
  EXPECT_THROW(ParamVector(std::vector<double>{std::numeric_limits<double>::infinity()}), InputError);
}

TEST(ParamVector, LayoutMustTileTheVector) {
  EXPECT_NO_THROW(ParamVector(std::vector<double>{1, 2, 3}, {{"a", 0, 1}, {"b", 1, 2}}));
  EXPECT_THROW(ParamVector(std::vector<double>{1, 2, 3}, {{"a", 0, 1}, {"b", 2, 1}}), InputError);
  EXPECT_THROW(ParamVector(std::vector<double>{1, 2, 3}, {{"a", 0, 4}}), InputError);
}

TEST(ParamVector, SegmentLookup) {
  ParamVector p(std::vector<double>{1, 2, 3}, {{"a", 0, 1}, {"b", 1, 2}});
  EXPECT_EQ(p.segment_values("b")[1], 3.0);
  EXPECT_THROW(p.segment("missing"), InputError);
  auto q = p.with_values({4, 5, 6});
  EXPECT_EQ(q.layout(), p.layout());
  EXPECT_THROW(p.with_values({1, 2}), InputError);
}

TEST(ParamVector, HashSeparatesValues) {
  ParamVector a(std::vector<double>{1.0, 2.0});
  ParamVector b(std::vector<double>{1.0, 2.0000000001});
  ParamVector c(std::vector<double>{1.0, 2.0, 0.0});
  EXPECT_EQ(a.hash(), ParamVector(std::vector<double>{1.0, 2.0}).hash());
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
}

TEST(ScalarTypes, Validation) {
  EXPECT_THROW(Temperature(0.0), InputError);
  EXPECT_THROW(Temperature(-1.0), InputError);
  EXPECT_THROW(Temperature(std::nan("")), InputError);
  EXPECT_THROW(NudgeStrength(-0.1), InputError);
  EXPECT_THROW(NudgeStrength(std::numeric_limits<double>::infinity()), InputError);
  EXPECT_NO_THROW(NudgeStrength(0.0));
}

TEST(StateVector, BinaryRejectsOtherValues) {
  EXPECT_NO_THROW(StateVector::spins({-1, 1, 1}));
  EXPECT_THROW(StateVector::continuous({1.0, std::nan("")}), InputError);
}

TEST(Kernel, ObjectiveAddsNudgedLoss) {
  System sys{std::make_shared<models::TwoStateModel>(), models::TwoStateModel::loss()};
  ParamVector theta(std::vector<double>{1.0});
  const std::vector<double> s{1.0};
  EXPECT_DOUBLE_EQ(objective_kernel(sys, theta, NudgeStrength(0.5), s), 1.5);
  EXPECT_DOUBLE_EQ(objective_kernel(sys, theta, NudgeStrength(0.0), s), 1.0);
}

TEST(Kernel, NonFiniteEnergyNamesTheTerm) {
  auto model = std::make_shared<models::LinearModel>(1);
  System sys{model, Loss([](std::span<const double>) { return std::nan(""); })};
  ParamVector theta(std::vector<double>{1.0});
  const std::vector<double> s{1.0};
  try {
    objective_kernel(sys, theta, NudgeStrength(1.0), s);
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("loss"), std::string::npos) << e.what();
  }
}

TEST(Kernel, ShapeMismatchIsInputError) {
  auto model = std::make_shared<models::LinearModel>(3);
  System sys{model, Loss::zero()};
  ParamVector theta(std::vector<double>{1.0, 2.0, 3.0});
  const std::vector<double> s{1.0};
  EXPECT_THROW(objective_kernel(sys, theta, NudgeStrength(0.0), s), InputError);
  EXPECT_THROW(objective_kernel(sys, ParamVector(std::vector<double>{1.0}), NudgeStrength(0.0),
                                std::vector<double>{1, 2, 3}),
               InputError);
}

TEST(Loss, GradientRequired) {
  Loss l([](std::span<const double> s) { return s[0]; });
  std::vector<double> out(1);
  const std::vector<double> s{2.0};
  EXPECT_FALSE(l.has_gradient());
  EXPECT_THROW(l.grad_state(s, out), ModelError);
  EXPECT_DOUBLE_EQ(Loss::constant(3.0)(s), 3.0);
}

TEST(Rng, DeriveSeedIsPathSensitive) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a) {
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(derive_seed(7, {a, b}));
  }
  EXPECT_EQ(seen.size(), 400u);
  EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
  EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {2, 1}));
  EXPECT_NE(derive_seed(7, {1}), derive_seed(8, {1}));
}

TEST(Quadrature, WeightsSumToOne) {
  for (std::size_t k : {2, 3, 5, 9}) {
    for (auto q : {QuadratureSpec::trapezoid(k), QuadratureSpec::gauss_legendre(k)}) {
      double w = 0.0;
      for (double x : q.weights) w += x;
      EXPECT_NEAR(w, 1.0, 1e-14);
      EXPECT_EQ(q.size(), k);
    }
  }
}

TEST(Quadrature, TrapezoidIncludesEndpoints) {
  auto q = QuadratureSpec::trapezoid(5);
  EXPECT_DOUBLE_EQ(q.nodes.front(), 0.0);
  EXPECT_DOUBLE_EQ(q.nodes.back(), 1.0);
  EXPECT_DOUBLE_EQ(q.weights.front(), 0.125);
}

TEST(Quadrature, GaussIsExactForDegree2kMinus1) {
  for (std::size_t k : {2, 3, 5, 8}) {
    auto q = QuadratureSpec::gauss_legendre(k);
    const int deg = static_cast<int>(2 * k - 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += q.weights[i] * std::pow(q.nodes[i], deg);
    EXPECT_NEAR(sum, 1.0 / (deg + 1), 1e-13) << "k=" << k;
  }
}

TEST(Quadrature, TrapezoidConvergesQuadratically) {
  auto integrate = [](std::size_t k) {
    auto q = QuadratureSpec::trapezoid(k);
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += q.weights[i] * std::exp(q.nodes[i]);
    return std::abs(s - (std::exp(1.0) - 1.0));
  };
  const double order = std::log2(integrate(9) / integrate(17));
  EXPECT_NEAR(order, 2.0, 0.05);
}

TEST(Quadrature, RejectsMalformedRules) {
  EXPECT_THROW(QuadratureSpec::trapezoid(1), QuadratureError);
  EXPECT_THROW(QuadratureSpec::gauss_legendre(1), QuadratureError);
  QuadratureSpec bad{{0.0, 1.2}, {0.5, 0.5}};
  EXPECT_THROW(bad.validate(), QuadratureError);
  QuadratureSpec unsorted{{0.5, 0.2}, {0.5, 0.5}};
  EXPECT_THROW(unsorted.validate(), QuadratureError);
}

class GradientCheck : public ::testing::Test {
 protected:
  static constexpr double kH = 1e-6;
  static constexpr double kTol = 1e-6;
};

TEST_F(GradientCheck, Linear) {
  models::LinearModel m(4);
  ParamVector theta(std::vector<double>{0.3, -1.2, 2.0, 0.1});
  std::vector<double> s{1.0, 0.5, -0.7, 2.0};
  EXPECT_LT(check_grad_theta(m, theta, s, kH), kTol);
  EXPECT_LT(check_grad_state(m, theta, s, kH), kTol);
}

TEST_F(GradientCheck, Quadratic) {
  models::QuadraticModel m(3);
  ParamVector theta(std::vector<double>{0.3, -1.2, 2.0});
  std::vector<double> s{1.0, 0.5, -0.7};
  EXPECT_LT(check_grad_theta(m, theta, s, kH), kTol);
  EXPECT_LT(check_grad_state(m, theta, s, kH), kTol);
}

TEST_F(GradientCheck, SpinGlassTheta) {
  models::SpinGlassModel m(6);
  auto theta = m.random_params(3);
  std::vector<double> s{1, -1, 1, 1, -1, -1};
  EXPECT_LT(check_grad_theta(m, theta, s, kH), kTol);
}

TEST_F(GradientCheck, LayeredTanh) {
  models::LayeredTanhEnergyNet net({5, 4, 3});
  auto theta = net.init_params(9);
  Rng rng(4);
  std::normal_distribution<double> n01;
  std::vector<double> v(theta.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = theta[i] + 0.1 * n01(rng);
  theta = theta.with_values(v);
  std::vector<double> s(net.state_dim());
  for (double& x : s) x = n01(rng);
  EXPECT_LT(check_grad_theta(net, theta, s, kH), kTol);
  EXPECT_LT(check_grad_state(net, theta, s, kH), kTol);
}

TEST(Models, SpinGlassEnergyByHand) {
  models::SpinGlassModel m(3);
  std::vector<double> v(m.param_dim(), 0.0);
  v[m.pair_index(0, 1)] = 1.0;
  v[m.pair_index(1, 2)] = -2.0;
  v[3 + 2] = 0.5;  // field on unit 2
  ParamVector theta(v, m.param_layout());
  std::vector<double> s{1, -1, 1};
  // −(1·1·−1) − (−2·−1·1) − 0.5·1 = 1 − 2 − 0.5
  EXPECT_DOUBLE_EQ(m.energy(theta, s), -1.5);
  EXPECT_THROW(m.pair_index(1, 1), InputError);
}

TEST(Models, SpinGlassOutputLoss) {
  auto l = models::SpinGlassModel::output_loss(1, 1.0);
  EXPECT_DOUBLE_EQ(l(std::vector<double>{-1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(l(std::vector<double>{-1, -1}), 1.0);
}

TEST(Models, BoundEnergyMatchesUnbound) {
  models::LayeredTanhEnergyNet net({4, 3, 2});
  auto theta = net.init_params(2);
  std::vector<double> x{0.1, 0.9, 0.4, 0.0};
  auto s = net.make_state(x);
  s[4] = 0.3;
  s[7] = -0.8;
  auto bound = net.bind(theta, s);
  EXPECT_NEAR(bound->energy(s), net.energy(theta, s), 1e-12);
  std::vector<double> g1(s.size()), g2(s.size());
  bound->grad_state(s, g1);
  net.grad_state_energy(theta, s, g2);
  for (std::size_t i = x.size(); i < s.size(); ++i) EXPECT_NEAR(g1[i], g2[i], 1e-12);
}

TEST(Models, AccumulateMatchesLoop) {
  models::LayeredTanhEnergyNet net({3, 4, 2});
  auto theta = net.init_params(5);
  Rng rng(1);
  std::normal_distribution<double> n01;
  const std::size_t count = 5;
  std::vector<double> states(count * net.state_dim());
  for (double& x : states) x = n01(rng);
  std::vector<double> weights{0.1, 0.2, 0.3, 0.25, 0.15};
  std::vector<double> fast(net.param_dim(), 0.0), slow(net.param_dim(), 0.0), g(net.param_dim());
  net.accumulate_grad_theta(theta, states, weights, fast);
  for (std::size_t r = 0; r < count; ++r) {
    net.grad_theta_energy(theta, std::span<const double>(states).subspan(r * net.state_dim(), net.state_dim()), g);
    for (std::size_t i = 0; i < g.size(); ++i) slow[i] += weights[r] * g[i];
  }
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(fast[i], slow[i], 1e-12);
}

TEST(Models, ClampMaskCoversInputs) {
  models::LayeredTanhEnergyNet net({3, 2, 2});
  auto mask = net.clamp_mask();
  ASSERT_EQ(mask.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(mask[i], i < 3);
}

TEST(Models, FeedforwardForwardByHand) {
  models::LayerSizes sz{2, 1, 1};
  models::FeedforwardBaseline ff(sz);
  models::LayeredTanhEnergyNet net(sz);
  // Layout: W1 (2), W2 (1), b_h (1), b_o (1).
  ParamVector theta(std::vector<double>{0.5, -1.0, 2.0, 0.1, -0.3}, net.param_layout());
  std::vector<double> x{1.0, 0.5};
  const double h = std::tanh(0.5 - 0.5 + 0.1);
  EXPECT_NEAR(ff.forward(theta, x)[0], 2.0 * h - 0.3, 1e-14);
}

TEST(Models, BackpropMatchesFiniteDifference) {
  models::LayerSizes sz{4, 3, 2};
  models::FeedforwardBaseline ff(sz);
  models::LayeredTanhEnergyNet net(sz);
  auto theta = net.init_params(11);
  std::vector<double> x{0.2, -0.4, 0.9, 0.1};
  auto target = models::one_hot(1, 2);
  auto g = ff.backprop_grad(theta, x, target);
  const double h = 1e-6;
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    std::vector<double> up(theta.values().begin(), theta.values().end()), dn = up;
    up[i] += h;
    dn[i] -= h;
    const double fd = (ff.loss(theta.with_values(up), x, target) - ff.loss(theta.with_values(dn), x, target)) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[i]));
    scale = std::max(scale, std::abs(fd));
  }
  EXPECT_LT(worst / (scale + 1e-12), 1e-6);
}

TEST(Models, OneHot) {
  auto v = models::one_hot(2, 4);
  EXPECT_EQ(v, (std::vector<double>{0, 0, 1, 0}));
  EXPECT_THROW(models::one_hot(4, 4), InputError);
}
