#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "lsef/error.hpp"
#include "lsef/ops.hpp"
#include "test_util.hpp"

using namespace lsef;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::verification;
}

}  // namespace

TEST(Tensor, ShapeMatchesPayload) {
  auto t = Tensor64::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.dim(1), 3u);
  EXPECT_EQ(kind_of([] { Tensor64::from({2, 2}, {1, 2, 3}); }), ErrorKind::dimension);
  EXPECT_EQ(kind_of([] { Tensor64::zeros({2, 0}); }), ErrorKind::dimension);
}

TEST(Tensor, FiniteCheckFlagsNanAndInf) {
  auto ok = Tensor64::full({3}, 1.0);
  EXPECT_TRUE(ok.all_finite());
  auto bad = Tensor64::from({2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
  EXPECT_FALSE(bad.all_finite());
  EXPECT_EQ(kind_of([&] { check_finite(bad, "probe"); }), ErrorKind::numerical);
  auto inf = Tensor32::from({1}, {std::numeric_limits<float>::infinity()});
  EXPECT_FALSE(inf.all_finite());
}

TEST(Tensor, OpResultsAreImmutable) {
  auto x = tu::param({2}, 1, "x");
  auto y = add(x, x);
  EXPECT_EQ(kind_of([&] { y.mutable_data(); }), ErrorKind::usage);
  EXPECT_NO_THROW(x.mutable_data());
}

TEST(Tensor, CastPreservesValuesAndShape) {
  auto x = Tensor64::from({2, 2}, {0.5, -1.25, 3.0, 4.0});
  auto f = x.cast<float>();
  EXPECT_EQ(f.shape(), x.shape());
  EXPECT_FLOAT_EQ(f[1], -1.25f);
}

TEST(Autograd, SumGivesOnes) {
  auto x = tu::param({3, 4}, 1, "x");
  sum(x).backward();
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Autograd, SquareSumGivesTwiceInput) {
  auto x = tu::param({5}, 2, "x");
  sum(mul(x, x)).backward();
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2.0 * x[i]);
}

TEST(Autograd, RepeatedBackwardAccumulates) {
  auto x = tu::param({4}, 3, "x");
  auto loss = sum(scale(x, 3.0));
  loss.backward();
  loss.backward();
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 6.0);
  x.zero_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(Autograd, NonScalarBackwardIsUsageError) {
  auto x = tu::param({2, 2}, 4, "x");
  auto y = mul(x, x);
  EXPECT_EQ(kind_of([&] { y.backward(); }), ErrorKind::usage);
}

TEST(Autograd, SharedSubgraphVisitedOnce) {
  // y feeds two branches; each rule must still run exactly once.
  auto x = tu::param({3}, 5, "x");
  auto y = sigmoid(x);
  auto loss = sum(add(mul(y, y), y));
  auto tape = Tape<double>::record(loss);
  for (std::size_t i = 0; i < tape.size(); ++i)
    for (std::size_t p : tape.entries()[i].parents) EXPECT_LT(p, i) << "parent after child";
  std::vector<double> seed{1.0};
  const std::size_t rules = tape.backward(seed);
  std::size_t ops = 0;
  for (const auto& e : tape.entries())
    if (!e.op.empty()) ++ops;
  EXPECT_EQ(rules, ops);
  for (std::size_t i = 0; i < 3; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-x[i]));
    EXPECT_NEAR(x.grad()[i], (2 * s + 1) * s * (1 - s), 1e-14);
  }
}

TEST(Autograd, NoGradGuardRecordsNothing) {
  auto x = tu::param({3}, 6, "x");
  Tensor64 y;
  {
    NoGradGuard g;
    EXPECT_FALSE(grad_enabled());
    y = sum(mul(x, x));
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_TRUE(y.is_leaf());
}

TEST(Autograd, FaultInjectionScalesOneRule) {
  auto x = tu::param({3}, 7, "x");
  fault::inject_backward("mul", 2.0);
  sum(mul(x, x)).backward();
  fault::clear();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 4.0 * x[i]);
  EXPECT_FALSE(fault::active());
}

TEST(Broadcast, SingletonAxesExpand) {
  auto a = Tensor64::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto b = Tensor64::from({1, 3}, {10, 20, 30});
  auto c = add(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 3}));
  EXPECT_EQ(c[4], 25.0);
  auto d = mul(a, Tensor64::from({2, 1}, {2, 3}));
  EXPECT_EQ(d[5], 18.0);
}

TEST(Broadcast, IncompatibleShapesAreDimensionErrors) {
  auto a = Tensor64::zeros({2, 3});
  EXPECT_EQ(kind_of([&] { add(a, Tensor64::zeros({3, 2})); }), ErrorKind::dimension);
  EXPECT_EQ(kind_of([&] { add(a, Tensor64::zeros({3})); }), ErrorKind::dimension);
  EXPECT_EQ(kind_of([&] { mul(a, Tensor64::zeros({2, 2})); }), ErrorKind::dimension);
}

TEST(Broadcast, GradientReducesOverExpandedAxes) {
  auto a = tu::param({2, 3}, 8, "a");
  auto b = tu::param({1, 3}, 9, "b");
  sum(mul(a, b)).backward();
  for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(b.grad()[j], a[j] + a[3 + j]);
}
