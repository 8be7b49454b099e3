#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "lsef/error.hpp"
#include "lsef/ops.hpp"
#include "lsef/rao.hpp"
#include "lsef/verify/reference.hpp"
#include "test_util.hpp"

using namespace lsef;

namespace {

Tensor64 quadratic_leaf() { return parameter(Tensor64::from({2}, {3.0, 4.0})); }

Tensor64 half_square_norm(const Tensor64& w) { return scale(sum(mul(w, w)), 0.5); }

RaoConfig hand_config() {
  RaoConfig c;
  c.rho_base = 0.055;
  c.alpha = c.beta = c.gamma = 0.0;
  return c;
}

}  // namespace

TEST(RankSensitivity, IdentityIsFullRank) {
  auto r = rank_sensitivity(Tensor64::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}), 0.5);
  EXPECT_EQ(r.threshold, 0.5);
  EXPECT_EQ(r.rho, 1.0);
  ASSERT_EQ(r.spectrum.size(), 3u);
  for (double s : r.spectrum) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(RankSensitivity, ZeroTensorIsRankZero) {
  EXPECT_EQ(rank_sensitivity(Tensor64::zeros({4, 4}), 0.01).rho, 0.0);
  EXPECT_EQ(rank_sensitivity(Tensor64::zeros({3}), 0.01).rho, 0.0);
}

TEST(RankSensitivity, DiagonalCountsValuesAboveThreshold) {
  auto r = rank_sensitivity(Tensor64::from({3, 3}, {10, 0, 0, 0, 1, 0, 0, 0, 0.01}), 0.05);
  EXPECT_NEAR(r.threshold, 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(r.rho, 2.0 / 3.0);
}

TEST(RankSensitivity, SmallTensorsSkipTheDecomposition) {
  auto r = rank_sensitivity(Tensor64::from({2, 2}, {0, 0, 0, 1e-3}), 0.5);
  EXPECT_EQ(r.rho, 1.0);
  EXPECT_TRUE(r.spectrum.empty());
}

TEST(SparsitySensitivity, ExamplesAndDegenerateCases) {
  EXPECT_EQ(sparsity_sensitivity(Tensor64::zeros({5}), 0.1).rho, 1.0);
  EXPECT_EQ(sparsity_sensitivity(Tensor64::from({4}, {-2, 2, 2, -2}), 0.1).rho, 0.0);
  auto s = sparsity_sensitivity(Tensor64::from({4}, {1, 0.05, 0.5, 0.01}), 0.1);
  EXPECT_NEAR(s.threshold, 0.1, 1e-15);
  EXPECT_EQ(s.rho, 0.5);
}

TEST(Sensitivity, BoundedAndScaleInvariant) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto w = random_tensor({6, 5}, seed);
    const auto r0 = rank_sensitivity(w, 0.3);
    const auto s0 = sparsity_sensitivity(w, 0.2);
    EXPECT_GE(r0.rho, 0.0);
    EXPECT_LE(r0.rho, 1.0);
    EXPECT_GE(s0.rho, 0.0);
    EXPECT_LE(s0.rho, 1.0);
    for (double c : {0.25, 8.0, 1024.0}) {  // powers of two scale exactly
      auto wc = scale(w, c);
      EXPECT_EQ(rank_sensitivity(wc, 0.3).rho, r0.rho);
      EXPECT_EQ(sparsity_sensitivity(wc, 0.2).rho, s0.rho);
    }
  }
}

TEST(DynamicRadius, ArithmeticAndClamp) {
  EXPECT_EQ(dynamic_radius(0.05, 0.7, 0.3, 0.0, 0.0), 0.05);
  EXPECT_NEAR(dynamic_radius(0.05, 0.4, 0.2, 0.5, 0.5), 0.055, 1e-15);
  EXPECT_EQ(dynamic_radius(0.05, 0.0, 1.0, 0.5, 3.0), 0.0);
}

TEST(RaoConfig, ValidationRejectsBadBounds) {
  auto kind = [](RaoConfig c) {
    try {
      c.validate();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::verification;
  };
  RaoConfig c;
  EXPECT_NO_THROW(c.validate());
  c.rho_base = 0.9;
  EXPECT_EQ(kind(c), ErrorKind::configuration);
  c = {};
  c.alpha = -1;
  EXPECT_EQ(kind(c), ErrorKind::configuration);
  c = {};
  c.rho_min = 0.1;
  EXPECT_EQ(kind(c), ErrorKind::configuration);
  c = {};
  c.gamma = NAN;
  EXPECT_EQ(kind(c), ErrorKind::configuration);
}

TEST(RankAwareOptimizer, HandComputedFirstStep) {
  auto w = quadratic_leaf();
  RankAwareOptimizer<double> opt({{"w", w}}, OptimizerKind::rao, {BaseKind::sgd, 0.1}, hand_config());
  const double l0 = opt.step([&] { return half_square_norm(w); });
  EXPECT_DOUBLE_EQ(l0, 12.5);
  EXPECT_NEAR(w[0], 2.6967, 1e-9);
  EXPECT_NEAR(w[1], 3.5956, 1e-9);
  const auto& t = opt.last_report().tensors.at(0);
  EXPECT_NEAR(t.perturbation_norm, 0.055, 1e-9);
  EXPECT_DOUBLE_EQ(t.grad_norm, 5.0);
}

TEST(RankAwareOptimizer, QuadraticConvergesAndDecreasesToThreshold) {
  auto w = quadratic_leaf();
  RankAwareOptimizer<double> opt({{"w", w}}, OptimizerKind::rao, {BaseKind::sgd, 0.1}, hand_config());
  double prev = INFINITY;
  std::size_t reached = 0;
  for (std::size_t s = 1; s <= 500 && !reached; ++s) {
    const double l = opt.step([&] { return half_square_norm(w); });
    EXPECT_LT(l, prev) << "step " << s;
    prev = l;
    if (half_square_norm(w).item() < 1e-6) reached = s;
  }
  EXPECT_GT(reached, 0u);
}

TEST(RankAwareOptimizer, FixedRadiusSettlesNearTheRadiusScale) {
  // Once ||w|| falls to the order of rho, a fixed-radius step overshoots
  // the origin; the loss then stays bounded near rho^2 instead of decaying.
  auto w = quadratic_leaf();
  RankAwareOptimizer<double> opt({{"w", w}}, OptimizerKind::sam, {BaseKind::sgd, 0.1}, hand_config());
  for (int s = 0; s < 500; ++s) opt.step([&] { return half_square_norm(w); });
  const double l = half_square_norm(w).item();
  EXPECT_LT(l, 1e-4);
  EXPECT_EQ(opt.rho_base(), 0.055);
}

TEST(RankAwareOptimizer, NegativeFeedbackShrinksRadiusToFloor) {
  auto w = quadratic_leaf();
  RaoConfig c = hand_config();
  c.gamma = -0.5;
  c.rho_min = 1e-9;
  RankAwareOptimizer<double> opt({{"w", w}}, OptimizerKind::rao, {BaseKind::sgd, 0.1}, c);
  for (int s = 0; s < 500; ++s) opt.step([&] { return half_square_norm(w); });
  EXPECT_LT(half_square_norm(w).item(), 1e-12);
  EXPECT_GE(opt.rho_base(), c.rho_min);
}

TEST(RankAwareOptimizer, RadiusStaysWithinBounds) {
  auto net = reference::TwoLayerNet::make(3);
  RaoConfig c;
  c.gamma = 5.0;
  c.rho_max = 0.2;
  RankAwareOptimizer<double> opt(net.parameters(), OptimizerKind::rao, {BaseKind::sgd, 0.05}, c);
  for (int s = 0; s < 40; ++s) {
    opt.step([&] { return net.loss(); });
    EXPECT_GE(opt.rho_base(), c.rho_min);
    EXPECT_LE(opt.rho_base(), c.rho_max);
  }
}

TEST(RankAwareOptimizer, PerturbationNormEqualsDynamicRadius) {
  auto net = reference::TwoLayerNet::make(4);
  RankAwareOptimizer<double> opt(net.parameters(), OptimizerKind::rao, {BaseKind::sgd, 0.05});
  for (int s = 0; s < 5; ++s) {
    opt.step([&] { return net.loss(); });
    for (const auto& t : opt.last_report().tensors) {
      ASSERT_TRUE(t.perturbed) << t.name;
      EXPECT_NEAR(t.perturbation_norm, t.rho_dyn, 1e-9) << t.name;
      EXPECT_NEAR(t.rho_dyn, dynamic_radius(opt.last_report().rho_base, t.rho_r, t.rho_s, 0.5, 0.5), 1e-15);
    }
  }
}

TEST(RankAwareOptimizer, MatchesReferenceSamOverFiftySteps) {
  auto a = reference::TwoLayerNet::make(5);
  auto b = a.clone();
  RaoConfig c;
  c.gamma = 0;
  c.alpha = c.beta = 0;
  RankAwareOptimizer<double> opt(a.parameters(), OptimizerKind::rao, {BaseKind::sgd, 0.05}, c);
  for (int s = 0; s < 50; ++s) {
    opt.step([&] { return a.loss(); });
    reference::sam_step(b.parameters(), [&] { return b.loss(); }, 0.05, 0.05);
  }
  EXPECT_LE(reference::max_param_diff(a.parameters(), b.parameters()), 1e-12);
  // the trajectory actually moved
  EXPECT_GT(reference::max_param_diff(a.parameters(), reference::TwoLayerNet::make(5).parameters()), 1e-3);
}

TEST(RankAwareOptimizer, ZeroRadiusIsBitwiseTheBaseOptimizer) {
  for (BaseKind kind : {BaseKind::sgd, BaseKind::adam}) {
    auto a = reference::TwoLayerNet::make(6);
    auto b = a.clone();
    RaoConfig c;
    c.rho_base = 0;
    c.rho_min = 0;
    RankAwareOptimizer<double> opt(a.parameters(), OptimizerKind::rao, {kind, 0.02}, c);
    BaseOptimizer<double> base(b.parameters(), {kind, 0.02});
    for (int s = 0; s < 50; ++s) {
      opt.step([&] { return a.loss(); });
      for (auto p : b.parameters()) p.tensor.zero_grad();
      b.loss().backward();
      std::vector<std::vector<double>> g;
      for (const auto& p : b.parameters()) g.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
      base.update_all(g);
    }
    EXPECT_TRUE(reference::bitwise_equal(a.parameters(), b.parameters())) << to_string(kind);
  }
}

TEST(RankAwareOptimizer, BaseKindTakesOneEvaluation) {
  auto w = quadratic_leaf();
  int calls = 0;
  RankAwareOptimizer<double> opt({{"w", w}}, OptimizerKind::base, {BaseKind::sgd, 0.1});
  opt.step([&] {
    ++calls;
    return half_square_norm(w);
  });
  EXPECT_EQ(calls, 1);
  EXPECT_DOUBLE_EQ(w[0], 2.7);
}

TEST(RankAwareOptimizer, ZeroGradientTensorIsLeftUntouched) {
  auto w = quadratic_leaf();
  auto idle = parameter(Tensor64::from({3}, {1, 2, 3}));
  RankAwareOptimizer<double> opt({{"w", w}, {"idle", idle}}, OptimizerKind::rao, {BaseKind::adam, 0.1});
  for (int s = 0; s < 3; ++s) opt.step([&] { return add(half_square_norm(w), scale(sum(idle), 0.0)); });
  EXPECT_EQ(idle[0], 1.0);
  EXPECT_EQ(idle[2], 3.0);
  EXPECT_FALSE(opt.last_report().tensors[1].perturbed);
  EXPECT_TRUE(opt.last_report().tensors[0].perturbed);
}

TEST(RankAwareOptimizer, NonFiniteLossNamesThePhase) {
  auto w = quadratic_leaf();
  RankAwareOptimizer<double> opt({{"w", w}}, OptimizerKind::rao, {BaseKind::sgd, 0.1});
  int calls = 0;
  try {
    opt.step([&] {
      // finite at W, infinite at the perturbed point
      return ++calls == 1 ? half_square_norm(w) : scale(half_square_norm(w), std::numeric_limits<double>::infinity());
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::optimizer);
    EXPECT_NE(std::string(e.what()).find("second"), std::string::npos) << e.what();
  }
  // weights restored after the failed second phase
  EXPECT_EQ(w[0], 3.0);
  EXPECT_EQ(w[1], 4.0);
}

TEST(RankAwareOptimizer, NonTrainableParameterIsConfigurationError) {
  try {
    RankAwareOptimizer<double>({{"w", Tensor64::zeros({2})}}, OptimizerKind::rao, {BaseKind::sgd, 0.1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::configuration);
  }
}

TEST(SensitivityReport, LinesCarryEveryTensor) {
  auto net = reference::TwoLayerNet::make(7);
  RankAwareOptimizer<double> opt(net.parameters(), OptimizerKind::rao, {BaseKind::sgd, 0.05});
  opt.step([&] { return net.loss(); });
  const auto text = opt.last_report().to_lines();
  for (const char* name : {"tensor=w1 ", "tensor=b1 ", "tensor=w2 ", "tensor=b2 "})
    EXPECT_NE(text.find(name), std::string::npos) << name;
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}
