#include <gtest/gtest.h>

#include <cmath>

#include "lsef/error.hpp"
#include "lsef/linalg.hpp"
#include "test_util.hpp"

using namespace lsef;

TEST(Svd, IdentityGivesOnes) {
  auto s = svd_values(Tensor64::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  ASSERT_EQ(s.size(), 3u);
  for (double v : s) EXPECT_NEAR(v, 1.0, 1e-14);
}

TEST(Svd, DiagonalIsSortedMagnitudes) {
  auto s = svd_values(Tensor64::from({3, 3}, {3, 0, 0, 0, 0, 0, 0, 0, -5}));
  EXPECT_NEAR(s[0], 5.0, 1e-14);
  EXPECT_NEAR(s[1], 3.0, 1e-14);
  EXPECT_NEAR(s[2], 0.0, 1e-14);
}

TEST(Svd, FrobeniusIdentityOnRandomMatrices) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (const Shape shape : {Shape{6, 4}, Shape{4, 6}, Shape{9, 9}, Shape{3, 2, 2, 2}}) {
      auto m = random_tensor(shape, seed);
      auto s = svd_values(m);
      double fro = 0, sig = 0;
      for (double v : m.data()) fro += v * v;
      for (double v : s) sig += v * v;
      EXPECT_NEAR(sig / fro, 1.0, 1e-8);
      for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GE(s[i - 1], s[i]);
      for (double v : s) EXPECT_GE(v, 0.0);
    }
  }
}

TEST(Svd, KnownRankTwoSpectrum) {
  // u1 v1^T * 4 + u2 v2^T * 1.5 with orthonormal factors
  const double a = 1 / std::sqrt(2.0);
  std::vector<double> m(4 * 3, 0.0);
  const double u1[4] = {a, a, 0, 0}, u2[4] = {0, 0, a, -a};
  const double v1[3] = {1, 0, 0}, v2[3] = {0, 0.6, 0.8};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) m[i * 3 + j] = 4 * u1[i] * v1[j] + 1.5 * u2[i] * v2[j];
  auto s = svd_values(Tensor64::from({4, 3}, m));
  EXPECT_NEAR(s[0], 4.0, 1e-12);
  EXPECT_NEAR(s[1], 1.5, 1e-12);
  EXPECT_NEAR(s[2], 0.0, 1e-12);
}

TEST(Svd, MatricizationIsFirstAxisByRest) {
  EXPECT_EQ(matricize({4, 3, 2, 1}), (std::pair<std::size_t, std::size_t>{4, 6}));
  EXPECT_EQ(matricize({7}), (std::pair<std::size_t, std::size_t>{1, 7}));
}

TEST(Svd, SweepCapRaisesNumericalErrorWithDiagnostics) {
  auto m = random_tensor({8, 8}, 3);
  std::vector<double> v(m.data().begin(), m.data().end());
  SvdOptions o;
  o.max_sweeps = 1;
  o.tolerance = 1e-15;
  try {
    singular_values(v, 8, 8, o);
    FAIL() << "expected non-convergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
    EXPECT_NE(std::string(e.what()).find("sweep"), std::string::npos) << e.what();
  }
}
