#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "lsef/error.hpp"
#include "lsef/metrics.hpp"

using namespace lsef;

TEST(ClassMetrics, PerfectPredictions) {
  std::vector<int> y{0, 1, 2, 3, 4, 5, 6, 6};
  auto m = compute_war_uar(y, y);
  EXPECT_EQ(m.war, 1.0);
  EXPECT_EQ(m.uar, 1.0);
}

TEST(ClassMetrics, HandCountedExample) {
  std::vector<int> labels{0, 0, 0, 1}, preds{0, 0, 1, 1};
  auto m = compute_war_uar(preds, labels, 2);
  EXPECT_DOUBLE_EQ(m.war, 0.75);
  EXPECT_DOUBLE_EQ(m.recall[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.recall[1], 1.0);
  EXPECT_DOUBLE_EQ(m.uar, 5.0 / 6.0);
  EXPECT_EQ(m.support[0], 3u);
}

TEST(ClassMetrics, AbsentClassesDoNotDiluteRecall) {
  std::vector<int> labels{0, 0, 3}, preds{0, 1, 3};
  auto m = compute_war_uar(preds, labels, 7);
  EXPECT_DOUBLE_EQ(m.uar, (0.5 + 1.0) / 2.0);
}

TEST(ClassMetrics, InvariantUnderJointRelabeling) {
  std::vector<int> labels{0, 1, 1, 2, 2, 2, 3, 4, 5, 6, 6, 0};
  std::vector<int> preds{0, 2, 1, 2, 0, 2, 3, 3, 5, 6, 1, 0};
  const auto base = compute_war_uar(preds, labels);
  const std::vector<int> perm{3, 6, 0, 5, 1, 4, 2};
  std::vector<int> pl, pp;
  for (int v : labels) pl.push_back(perm[v]);
  for (int v : preds) pp.push_back(perm[v]);
  const auto moved = compute_war_uar(pp, pl);
  EXPECT_DOUBLE_EQ(moved.uar, base.uar);
  EXPECT_DOUBLE_EQ(moved.war, base.war);
}

TEST(ClassMetrics, ErrorKinds) {
  std::vector<int> a{0, 1}, b{0}, bad{0, 9}, none;
  auto kind = [](auto f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::verification;
  };
  EXPECT_EQ(kind([&] { compute_war_uar(a, b); }), ErrorKind::dimension);
  EXPECT_EQ(kind([&] { compute_war_uar(a, bad); }), ErrorKind::data);
  EXPECT_EQ(kind([&] { compute_war_uar(none, none); }), ErrorKind::usage);
}

TEST(Rmse, ExactMatchIsZero) {
  std::vector<double> t{0.1, -0.2, 0.3, 0.4, -0.5, 0.6};
  auto r = compute_rmse(t, t);
  EXPECT_EQ(r.valence, 0.0);
  EXPECT_EQ(r.arousal, 0.0);
  EXPECT_EQ(r.overall, 0.0);
}

TEST(Rmse, ValenceOffsetOnly) {
  std::vector<double> t{0.1, -0.2, 0.3, 0.4, -0.5, 0.6}, p = t;
  for (std::size_t i = 0; i < p.size(); i += 2) p[i] += 0.1;
  auto r = compute_rmse(p, t);
  EXPECT_NEAR(r.valence, 0.1, 1e-15);
  EXPECT_EQ(r.arousal, 0.0);
  EXPECT_NEAR(r.overall, 0.05, 1e-15);
}

TEST(Rmse, AccumulatorPoolsRowsBeforeTheRoot) {
  std::vector<double> t1{0, 0}, p1{1, 0}, t2{0, 0, 0, 0, 0, 0}, p2{0, 2, 0, 2, 0, 2};
  RmseAccumulator acc;
  acc.add(p1, t1);
  acc.add(p2, t2);
  auto r = acc.result();
  EXPECT_EQ(acc.rows(), 4u);
  EXPECT_DOUBLE_EQ(r.valence, std::sqrt(1.0 / 4.0));
  EXPECT_DOUBLE_EQ(r.arousal, std::sqrt(12.0 / 4.0));
}

TEST(Rmse, OverallIsTheMeanOfTheTwoAxes) {
  // Reported valence/arousal pair: 0.3094 and 0.2369 give 0.2732 overall.
  RmseMetrics m{0.3094, 0.2369, (0.3094 + 0.2369) / 2.0};
  EXPECT_EQ(std::round(m.overall * 1e4) / 1e4, 0.2732);
  std::vector<double> t{0, 0, 0, 0}, p{0.3, 0.1, -0.3, -0.1};
  auto r = compute_rmse(p, t);
  EXPECT_DOUBLE_EQ(r.overall, (r.valence + r.arousal) / 2.0);
}

TEST(MetricsBundle, FieldsNameEveryMetric) {
  MetricsBundle b;
  b.cls = compute_war_uar(std::vector<int>{0, 1}, std::vector<int>{0, 0}, 2);
  const auto f = b.to_fields("train_");
  EXPECT_NE(f.find("train_war=0.5"), std::string::npos) << f;
  EXPECT_NE(f.find("train_uar="), std::string::npos) << f;
  b.categorical = false;
  EXPECT_NE(b.to_fields().find("rmse="), std::string::npos);
}
