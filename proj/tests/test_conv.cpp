#include <gtest/gtest.h>

#include "lsef/error.hpp"
#include "lsef/kernels/kernels.hpp"
#include "lsef/ops.hpp"
#include "test_util.hpp"

using namespace lsef;
using tu::param;

namespace {

// Direct zero-padded grouped correlation.
Tensor64 conv_oracle(const Tensor64& x, const Tensor64& k, std::size_t groups, std::array<std::size_t, 3> st) {
  const auto& s = x.shape();
  const auto& ks = k.shape();
  const std::size_t co = ks[0], cig = ks[1];
  const std::size_t pt = (ks[2] - 1) / 2, ph = (ks[3] - 1) / 2, pw = (ks[4] - 1) / 2;
  const std::size_t ot = (s[2] + ks[2] - 1 - ks[2]) / st[0] + 1;
  const std::size_t oh = (s[3] + ks[3] - 1 - ks[3]) / st[1] + 1;
  const std::size_t ow = (s[4] + ks[4] - 1 - ks[4]) / st[2] + 1;
  std::vector<double> out(s[0] * co * ot * oh * ow, 0.0);
  const std::size_t cog = co / groups;
  for (std::size_t b = 0; b < s[0]; ++b)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t t = 0; t < ot; ++t)
        for (std::size_t h = 0; h < oh; ++h)
          for (std::size_t w = 0; w < ow; ++w) {
            double acc = 0;
            for (std::size_t ci = 0; ci < cig; ++ci) {
              const std::size_t c = (o / cog) * cig + ci;
              for (std::size_t a = 0; a < ks[2]; ++a)
                for (std::size_t bb = 0; bb < ks[3]; ++bb)
                  for (std::size_t cc = 0; cc < ks[4]; ++cc) {
                    const long it = static_cast<long>(t * st[0] + a) - static_cast<long>(pt);
                    const long ih = static_cast<long>(h * st[1] + bb) - static_cast<long>(ph);
                    const long iw = static_cast<long>(w * st[2] + cc) - static_cast<long>(pw);
                    if (it < 0 || ih < 0 || iw < 0 || it >= (long)s[2] || ih >= (long)s[3] || iw >= (long)s[4])
                      continue;
                    acc += x[(((b * s[1] + c) * s[2] + it) * s[3] + ih) * s[4] + iw] *
                           k[(((o * cig + ci) * ks[2] + a) * ks[3] + bb) * ks[4] + cc];
                  }
            }
            out[(((b * co + o) * ot + t) * oh + h) * ow + w] = acc;
          }
  return Tensor64::from({s[0], co, ot, oh, ow}, std::move(out));
}

}  // namespace

TEST(Conv3d, PointwiseIdentityPerChannel) {
  auto x = random_tensor({2, 4, 3, 5, 5}, 1);
  auto k = Tensor64::full({4, 1, 1, 1, 1}, 1.0);
  auto y = conv3d(x, k, {4, {1, 1, 1}, Padding::zeros});
  EXPECT_EQ(tu::max_abs_diff(x, y), 0.0);
}

TEST(Conv3d, AveragingKeepsConstantWithReflect) {
  auto x = Tensor64::full({1, 1, 3, 3, 3}, 1.0);
  auto k = Tensor64::full({1, 1, 3, 3, 3}, 1.0 / 27.0);
  auto y = conv3d(x, k, {1, {1, 1, 1}, Padding::reflect});
  for (double v : y.data()) EXPECT_NEAR(v, 1.0, 1e-15);
}

TEST(Conv3d, MatchesDirectOracle) {
  for (auto backend : {kernels::Backend::scalar, kernels::Backend::avx2}) {
    if (backend == kernels::Backend::avx2 && !kernels::avx2_available()) continue;
    kernels::ScopedBackend sb(backend);
    auto x = random_tensor({2, 4, 4, 6, 7}, 2, "x");
    struct Case { std::size_t co, ci_g, g, kt, kh, kw; std::array<std::size_t, 3> st; };
    for (const Case c : {Case{6, 4, 1, 3, 3, 3, {1, 1, 1}}, Case{4, 1, 4, 3, 3, 3, {1, 2, 2}},
                         Case{8, 2, 2, 1, 3, 5, {2, 1, 1}}, Case{5, 4, 1, 1, 1, 1, {1, 1, 1}},
                         Case{4, 4, 1, 2, 2, 2, {1, 1, 1}}}) {
      auto k = random_tensor({c.co, c.ci_g, c.kt, c.kh, c.kw}, 3, "k");
      auto y = conv3d(x, k, {c.g, c.st, Padding::zeros});
      auto ref = conv_oracle(x, k, c.g, c.st);
      ASSERT_EQ(y.shape(), ref.shape());
      EXPECT_LE(tu::max_abs_diff(y, ref), 1e-12) << "backend " << to_string(backend);
    }
  }
}

TEST(Conv3d, OutputExtentsFollowStrideArithmetic) {
  auto x = Tensor64::zeros({1, 2, 8, 16, 16});
  auto k = Tensor64::zeros({2, 1, 3, 3, 3});
  auto y = conv3d(x, k, {2, {1, 2, 2}, Padding::zeros});
  EXPECT_EQ(y.shape(), (Shape{1, 2, 8, 8, 8}));
}

TEST(Conv3d, ErrorsCarryTheRightKind) {
  auto x = Tensor64::zeros({1, 6, 2, 4, 4});
  try {
    conv3d(x, Tensor64::zeros({4, 1, 1, 1, 1}), {4, {1, 1, 1}, Padding::zeros});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::configuration);
  }
  try {
    conv3d(x, Tensor64::zeros({4, 5, 1, 1, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension);
  }
  try {
    conv3d(Tensor64::zeros({6, 2, 4, 4}), Tensor64::zeros({4, 6, 1, 1, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension);
  }
}

TEST(Conv3d, GradientRandomKernel) {
  auto x = param({2, 4, 4, 6, 6}, 4, "x");
  auto k = param({3, 4, 3, 3, 3}, 4, "k");
  const auto r = gradient_check([&] { return weighted_sum(conv3d(x, k), 1); }, {{"input", x}, {"kernel", k}},
                                {1e-5, 1e-4, 200});
  EXPECT_TRUE(all_passed(r)) << describe(r);
}

TEST(Conv3d, GradientGroupedStridedReflect) {
  auto x = param({1, 4, 3, 5, 6}, 5, "x");
  auto k = param({4, 2, 3, 3, 3}, 5, "k");
  const auto r = gradient_check(
      [&] { return weighted_sum(conv3d(x, k, {2, {1, 2, 2}, Padding::reflect}), 2); }, {{"input", x}, {"kernel", k}});
  EXPECT_TRUE(all_passed(r)) << describe(r);
}

TEST(Padding, ReflectIndexFolds) {
  EXPECT_EQ(reflect_index(-1, 5), 1u);
  EXPECT_EQ(reflect_index(5, 5), 3u);
  EXPECT_EQ(reflect_index(-6, 3), 2u);
  EXPECT_EQ(reflect_index(7, 3), 1u);
  EXPECT_EQ(reflect_index(-2, 1), 0u);
}

TEST(Padding, Pad3dReflectAndGradient) {
  auto x = param({1, 1, 2, 3, 3}, 6, "x");
  auto p = pad3d(x, {1, 1, 1}, {1, 1, 1}, Padding::reflect);
  EXPECT_EQ(p.shape(), (Shape{1, 1, 4, 5, 5}));
  // corner (0,0,0) of the padded volume mirrors input (1,1,1)
  EXPECT_EQ(p[0], x[(1 * 3 + 1) * 3 + 1]);
  const auto r = gradient_check([&] { return weighted_sum(pad3d(x, {2, 1, 0}, {0, 3, 1}, Padding::reflect), 3); },
                                {{"x", x}});
  EXPECT_TRUE(all_passed(r)) << describe(r);
}
