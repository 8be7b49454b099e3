#include <gtest/gtest.h>

#include <cmath>

#include "lsef/ddm.hpp"
#include "lsef/error.hpp"
#include "lsef/ops.hpp"
#include "lsef/verify/oracles.hpp"
#include "test_util.hpp"

using namespace lsef;

namespace {

void randomize(Tensor64& t, std::uint64_t seed, double amp = 1.0) {
  auto r = random_tensor(t.shape(), seed, "w");
  auto d = t.mutable_data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = amp * r[i];
}

DdmState<double> random_state(std::size_t c, std::size_t t, std::uint64_t seed) {
  auto s = DdmState<double>::init(c, t, seed);
  randomize(s.w1, seed + 100);
  randomize(s.w2, seed + 200);
  return s;
}

}  // namespace

TEST(DdmState, ShapesAndSaddleFreeInit) {
  auto s = DdmState<double>::init(8, 4, 1);
  EXPECT_EQ(s.graph_channels, 4u);
  EXPECT_EQ(s.w1.shape(), (Shape{4, 4}));
  EXPECT_EQ(s.psi_fuse.shape(), (Shape{8, 20, 1, 1, 1}));
  EXPECT_EQ(DdmState<double>::init(1, 2, 1).graph_channels, 1u);
  double w1 = 0;
  for (double v : s.w1.data()) w1 += std::abs(v);
  EXPECT_GT(w1, 0.0);
  for (double v : s.w2.data()) EXPECT_EQ(v, 0.0);
}

TEST(TemporalGate, ZeroWeightsHalveTheInput) {
  auto s = DdmState<double>::init(4, 3, 2);
  for (auto& v : s.w1.mutable_data()) v = 0.0;
  auto x = random_tensor({2, 4, 3, 4, 4}, 3);
  auto g = temporal_gate(x, s);
  for (double v : g.gate.data()) EXPECT_EQ(v, 0.5);
  EXPECT_EQ(tu::max_abs_diff(g.routed, scale(x, 0.5)), 0.0);
}

TEST(TemporalGate, NeverAmplifies) {
  auto s = random_state(4, 4, 4);
  auto x = random_tensor({2, 4, 4, 3, 3}, 5);
  auto g = temporal_gate(x, s);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_LE(std::abs(g.routed[i]), std::abs(x[i]));
  for (double v : g.gate.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(TemporalGate, MatchesLoopOracle) {
  auto s = random_state(4, 5, 6);
  auto x = random_tensor({3, 4, 5, 3, 4}, 7);
  EXPECT_LE(oracle::max_abs_diff(oracle::ddm_gate(x, s), temporal_gate(x, s).gate.data()), 1e-9);
}

TEST(GraphInteract, SingleNodeReturnsProjection) {
  auto s = DdmState<double>::init(4, 2, 8);
  auto x = random_tensor({1, 4, 2, 1, 1}, 9);
  auto g = graph_interact_detailed(x, s);
  for (double v : g.affinity.data()) EXPECT_EQ(v, 1.0);
  // out (1, C_g, T, 1, 1) holds o_hat (T, C_g, 1)
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t t = 0; t < 2; ++t) EXPECT_NEAR(g.out[c * 2 + t], g.o_hat[t * 2 + c], 1e-15);
}

TEST(GraphInteract, RowsStochasticAndColumnsUnit) {
  auto s = DdmState<double>::init(8, 3, 10);
  auto x = random_tensor({2, 8, 3, 4, 4}, 11);
  auto g = graph_interact_detailed(x, s);
  const std::size_t n = 16;
  for (std::size_t r = 0; r < g.affinity.numel() / n; ++r) {
    double total = 0;
    for (std::size_t j = 0; j < n; ++j) total += g.affinity[r * n + j];
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
  const std::size_t cg = s.graph_channels;
  for (const auto* m : {&g.g_hat, &g.o_hat})
    for (std::size_t b = 0; b < 6; ++b)
      for (std::size_t j = 0; j < n; ++j) {
        double ss = 0;
        for (std::size_t c = 0; c < cg; ++c) ss += (*m)[(b * cg + c) * n + j] * (*m)[(b * cg + c) * n + j];
        EXPECT_NEAR(std::sqrt(ss), 1.0, 1e-6);
      }
  EXPECT_GE(projection_overlap(g), 0.0);
  EXPECT_LE(projection_overlap(g), 1.0 + 1e-12);
}

TEST(GraphInteract, MatchesLoopOracle) {
  struct Case { std::size_t b, c, t, h, w; };
  for (const Case k : {Case{1, 4, 1, 2, 2}, Case{2, 4, 2, 4, 4}, Case{1, 6, 3, 3, 2}}) {
    auto s = random_state(k.c, k.t, 12);
    auto x = random_tensor({k.b, k.c, k.t, k.h, k.w}, 13);
    auto g = graph_interact_detailed(x, s);
    const auto ref = oracle::ddm_graph(x, s);
    EXPECT_LE(oracle::max_abs_diff(ref.out, g.out.data()), 1e-9);
    EXPECT_LE(oracle::max_abs_diff(ref.affinity, g.affinity.data()), 1e-9);
  }
}

TEST(DdmForward, ZeroInputGivesZero) {
  auto s = random_state(4, 2, 14);
  auto y = ddm_forward(Tensor64::zeros({2, 4, 2, 3, 3}), s);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(DdmForward, PreservesShape) {
  for (std::size_t b : {1u, 2u})
    for (std::size_t c : {4u, 8u})
      for (std::size_t t : {2u, 4u})
        for (std::size_t hw : {4u, 6u}) {
          auto s = DdmState<double>::init(c, t, 15);
          auto x = random_tensor({b, c, t, hw, hw}, 16);
          EXPECT_EQ(ddm_forward(x, s).shape(), x.shape());
        }
}

TEST(DdmForward, FrameCountMismatchIsDimensionError) {
  auto s = DdmState<double>::init(4, 3, 17);
  try {
    ddm_forward(Tensor64::zeros({1, 4, 2, 3, 3}), s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension);
  }
}

TEST(DdmForward, Gradients) {
  auto s = random_state(4, 2, 18);
  auto x = tu::param({1, 4, 2, 4, 4}, 19, "x");
  auto inputs = s.parameters();
  inputs.push_back({"x", x});
  const auto r = gradient_check([&] { return weighted_sum(ddm_forward(x, s), 20); }, inputs);
  EXPECT_TRUE(all_passed(r)) << describe(r);
}
