#include <gtest/gtest.h>

#include <cmath>

#include "lsef/cim.hpp"
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

CimState<double> random_state(std::size_t c, std::uint64_t seed) {
  auto s = CimState<double>::init(c, seed);
  randomize(s.temp_weight, seed + 1);
  randomize(s.temp_bias, seed + 2, 0.5);
  randomize(s.residual_scale, seed + 3);
  return s;
}

}  // namespace

TEST(CimState, ShapesAndNeutralInit) {
  auto s = CimState<double>::init(8, 1);
  EXPECT_EQ(s.attn_channels, 4u);
  ASSERT_EQ(s.scale_kernels.size(), 3u);
  EXPECT_EQ(s.scale_kernels[2].shape(), (Shape{8, 1, 3, 5, 5}));
  EXPECT_EQ(s.fuse_kernel.shape(), (Shape{8, 24, 1, 1, 1}));
  EXPECT_EQ(s.residual_scale[0], 0.0);
  EXPECT_EQ(CimState<double>::init(1, 1).attn_channels, 1u);
  try {
    CimState<double>::init(4, 1, {{{1, 2, 1}}, 64});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::configuration);
  }
}

TEST(Multiscale, SingleIdentityBranchIsIdentity) {
  auto s = CimState<double>::init(3, 2, {{{1, 1, 1}}, 64});
  for (auto& v : s.scale_kernels[0].mutable_data()) v = 1.0;
  auto f = s.fuse_kernel.mutable_data();
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = i % 4 == 0 ? 1.0 : 0.0;  // 3x3 identity
  auto x = random_tensor({2, 3, 2, 4, 4}, 3);
  EXPECT_EQ(tu::max_abs_diff(multiscale(x, s), x), 0.0);
}

TEST(Multiscale, ConstantStaysConstantWithUnitSumBranches) {
  auto s = CimState<double>::init(2, 4);
  for (auto& k : s.scale_kernels) {
    auto d = k.mutable_data();
    const std::size_t per = d.size() / 2;
    for (std::size_t c = 0; c < 2; ++c) {
      double total = 0;
      for (std::size_t i = 0; i < per; ++i) total += d[c * per + i] = 1.0 + 0.5 * std::sin(double(i + c));
      for (std::size_t i = 0; i < per; ++i) d[c * per + i] /= total;
    }
  }
  auto y = multiscale(Tensor64::full({1, 2, 3, 5, 5}, 1.0), s);
  // every output channel equals its fuse-row sum
  for (std::size_t o = 0; o < 2; ++o) {
    double row = 0;
    for (std::size_t i = 0; i < 6; ++i) row += s.fuse_kernel[o * 6 + i];
    for (std::size_t p = 0; p < 75; ++p) EXPECT_NEAR(y[o * 75 + p], row, 1e-12);
  }
}

TEST(Multiscale, MatchesPerBranchLoopOracle) {
  auto s = CimState<double>::init(3, 5, {{{1, 1, 1}, {3, 3, 3}, {5, 5, 5}}, 64});
  auto x = random_tensor({2, 3, 5, 6, 7}, 6);
  for (std::size_t k = 0; k < 3; ++k) {
    auto branch = conv3d(x, s.scale_kernels[k], {3, {1, 1, 1}, Padding::reflect});
    EXPECT_LE(oracle::max_abs_diff(oracle::depthwise_reflect(x, s.scale_kernels[k]), branch.data()), 1e-9)
        << "branch " << k;
  }
  EXPECT_LE(oracle::max_abs_diff(oracle::cim_multiscale(x, s), multiscale(x, s).data()), 1e-9);
}

TEST(TemporalAttention, ZeroWeightsGiveOneHalf) {
  auto s = CimState<double>::init(4, 7);
  auto x = random_tensor({2, 4, 5, 3, 3}, 8);
  const auto attn = temporal_attention(x, s);
  for (double v : attn.data()) EXPECT_EQ(v, 0.5);
  EXPECT_EQ(tu::max_abs_diff(temporal_recalibrate(x, s), scale(x, 0.5)), 0.0);
}

TEST(TemporalAttention, StrictlyInsideUnitIntervalAndMatchesOracle) {
  auto s = random_state(4, 9);
  auto x = random_tensor({3, 4, 6, 3, 3}, 10);
  auto a = temporal_attention(x, s);
  for (double v : a.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_LE(oracle::max_abs_diff(oracle::cim_attention(x, s), a.data()), 1e-12);
}

TEST(TemporalAttention, SingleFrameIsScalarAffine) {
  auto s = random_state(2, 11);
  auto x = random_tensor({2, 2, 1, 3, 3}, 12);
  auto a = temporal_attention(x, s);
  const double wsum = s.temp_weight[0] + s.temp_weight[1] + s.temp_weight[2];
  for (std::size_t b = 0; b < 2; ++b) {
    double ctx = 0;
    for (std::size_t i = 0; i < 18; ++i) ctx += x[b * 18 + i];
    ctx /= 18.0;
    EXPECT_NEAR(a[b], 1.0 / (1.0 + std::exp(-(wsum * ctx + s.temp_bias[0]))), 1e-14);
  }
}

TEST(NonlocalGraph, SingleNode) {
  auto s = random_state(4, 13);
  auto x = random_tensor({2, 4, 1, 1, 1}, 14);
  auto g = nonlocal_graph_detailed(x, s);
  for (double v : g.affinity.data()) EXPECT_EQ(v, 1.0);
  // A = [[1]]: the aggregated value is the phi projection itself
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t o = 0; o < 4; ++o) {
      double upd = 0;
      for (std::size_t c = 0; c < 2; ++c) upd += s.graph_out[o * 2 + c] * g.values[b * 2 + c];
      EXPECT_NEAR(g.out[b * 4 + o], x[b * 4 + o] + s.residual_scale[0] * upd, 1e-14);
    }
}

TEST(NonlocalGraph, RowsStochasticForAnyAttentionWidth) {
  for (std::size_t c : {2u, 8u}) {  // C_a = 1 and 4
    auto s = random_state(c, 15);
    auto g = nonlocal_graph_detailed(random_tensor({2, c, 2, 3, 3}, 16), s);
    const std::size_t m = 18;
    for (std::size_t r = 0; r < 2 * m; ++r) {
      double total = 0;
      for (std::size_t j = 0; j < m; ++j) total += g.affinity[r * m + j];
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(NonlocalGraph, MatchesLoopOracle) {
  for (auto sh : {Shape{1, 4, 2, 3, 3}, Shape{2, 4, 2, 4, 4}, Shape{1, 6, 1, 2, 5}}) {
    auto s = random_state(sh[1], 17);
    auto x = random_tensor(sh, 18);
    auto g = nonlocal_graph_detailed(x, s);
    const auto ref = oracle::cim_nonlocal(x, s);
    EXPECT_LE(oracle::max_abs_diff(ref.out, g.out.data()), 1e-9);
    EXPECT_LE(oracle::max_abs_diff(ref.affinity, g.affinity.data()), 1e-9);
  }
}

TEST(NonlocalGraph, NodeCapIsResourceError) {
  auto s = CimState<double>::init(2, 19, {{{1, 1, 1}}, 16});
  try {
    nonlocal_graph(Tensor64::zeros({1, 2, 1, 4, 5}), s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::resource);
  }
}

TEST(CimForward, ZeroResidualReducesToRecalibration) {
  auto s = random_state(4, 20);
  s.residual_scale.mutable_data()[0] = 0.0;
  auto x = random_tensor({1, 4, 3, 3, 3}, 21);
  EXPECT_EQ(tu::max_abs_diff(cim_forward(x, s), temporal_recalibrate(multiscale(x, s), s)), 0.0);
}

TEST(CimForward, PreservesShape) {
  for (auto sh : {Shape{1, 4, 2, 3, 3}, Shape{2, 2, 5, 4, 6}, Shape{1, 8, 1, 5, 5}}) {
    auto s = CimState<double>::init(sh[1], 22);
    EXPECT_EQ(cim_forward(random_tensor(sh, 23), s).shape(), sh);
  }
}

TEST(CimForward, Gradients) {
  auto s = random_state(4, 24);
  auto x = tu::param({1, 4, 2, 3, 3}, 25, "x");
  auto inputs = s.parameters();
  inputs.push_back({"x", x});
  const auto r = gradient_check([&] { return weighted_sum(cim_forward(x, s), 26); }, inputs);
  EXPECT_TRUE(all_passed(r)) << describe(r);
}
