#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "lsef/backbone.hpp"
#include "lsef/error.hpp"
#include "lsef/ops.hpp"
#include "test_util.hpp"

using namespace lsef;

namespace {

BackboneConfig tiny(const std::string& modules, Head head = Head::categorical) {
  BackboneConfig c;
  c.widths = {4, 4, 6};
  c.frames = 4;
  c.height = c.width = 8;
  c.head = head;
  c.set_modules(modules);
  return c;
}

bool same_bits(const Tensor64& a, const Tensor64& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

// Nudge zero-initialized gates so every branch carries a gradient.
void activate(BackboneState<double>& s) {
  auto nudge = [](Tensor64& t, std::uint64_t seed) {
    auto r = random_tensor(t.shape(), seed, "nudge");
    auto d = t.mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += 0.3 * r[i];
  };
  if (s.sem) nudge(s.sem->lambda_raw, 1);
  if (s.ddm) nudge(s.ddm->w2, 2);
  if (s.cim) {
    nudge(s.cim->temp_weight, 3);
    nudge(s.cim->temp_bias, 4);
    nudge(s.cim->residual_scale, 5);
  }
  nudge(s.head_b, 6);
}

}  // namespace

TEST(BackboneConfig, ModuleListRoundTrip) {
  BackboneConfig c;
  c.set_modules("cim,sem");
  EXPECT_TRUE(c.use_sem);
  EXPECT_FALSE(c.use_ddm);
  EXPECT_EQ(c.modules(), "sem,cim");
  c.set_modules("none");
  EXPECT_EQ(c.modules(), "none");
  try {
    c.set_modules("sem,xyz");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::configuration);
  }
  auto d = tiny("sem,ddm,cim", Head::regression);
  auto back = BackboneConfig::from_config(d.to_config());
  EXPECT_EQ(back.fingerprint(), d.fingerprint());
  EXPECT_NE(tiny("sem").fingerprint(), tiny("ddm").fingerprint());
}

TEST(Backbone, OutputShapes) {
  auto c = tiny("sem,ddm,cim");
  auto s = BackboneState<double>::init(c, 1);
  auto x = random_tensor({2, 3, 4, 8, 8}, 2);
  EXPECT_EQ(backbone_forward(x, c, s).shape(), (Shape{2, 7}));
  EXPECT_EQ(backbone_features(x, c, s).shape(), (Shape{2, 6, 4, 4, 4}));
  auto r = tiny("sem,ddm,cim", Head::regression);
  auto sr = BackboneState<double>::init(r, 1);
  auto y = backbone_forward(x, r, sr);
  EXPECT_EQ(y.shape(), (Shape{2, 4, 2}));
  for (double v : y.data()) EXPECT_LE(std::abs(v), 1.0);
}

TEST(Backbone, InputShapeMismatchIsDimensionError) {
  auto c = tiny("none");
  auto s = BackboneState<double>::init(c, 1);
  try {
    backbone_forward(Tensor64::zeros({1, 3, 5, 8, 8}), c, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension);
  }
}

TEST(Backbone, TogglingABlockLeavesOtherInitsUntouched) {
  auto full = BackboneState<double>::init(tiny("sem,ddm,cim"), 9);
  auto bare = BackboneState<double>::init(tiny("none"), 9);
  auto ddm_only = BackboneState<double>::init(tiny("ddm"), 9);
  EXPECT_TRUE(same_bits(full.pw2, bare.pw2));
  EXPECT_TRUE(same_bits(full.dw3, bare.dw3));
  EXPECT_TRUE(same_bits(full.head_w, bare.head_w));
  EXPECT_TRUE(same_bits(full.ddm->w1, ddm_only.ddm->w1));
  EXPECT_TRUE(same_bits(full.ddm->psi_fuse, ddm_only.ddm->psi_fuse));
  EXPECT_FALSE(bare.sem || bare.ddm || bare.cim);
  EXPECT_EQ(full.parameters().size(), bare.parameters().size() + 4 + 7 + 10);
}

TEST(Backbone, DisabledBlockStateIsIgnoredWithWarning) {
  auto with = tiny("sem,ddm,cim");
  auto s = BackboneState<double>::init(with, 3);
  auto bare = tiny("none");
  const auto warnings = check_states(bare, s);
  EXPECT_EQ(warnings.size(), 3u);
  auto plain = BackboneState<double>::init(bare, 3);
  auto x = random_tensor({1, 3, 4, 8, 8}, 4);
  EXPECT_TRUE(same_bits(backbone_forward(x, bare, s), backbone_forward(x, bare, plain)));
}

TEST(Backbone, MissingEnabledStateIsConfigurationError) {
  auto s = BackboneState<double>::init(tiny("none"), 3);
  try {
    backbone_forward(random_tensor({1, 3, 4, 8, 8}, 4), tiny("cim"), s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::configuration);
    EXPECT_NE(std::string(e.what()).find("CIM"), std::string::npos) << e.what();
  }
}

TEST(HeadLoss, ClosedForms) {
  Targets<double> t;
  t.labels = {0, 3, 6};
  EXPECT_NEAR(head_loss(Tensor64::zeros({3, 7}), t, Head::categorical).item(), std::log(7.0), 1e-12);
  std::vector<double> confident(21, -300.0);
  for (std::size_t b = 0; b < 3; ++b) confident[b * 7 + t.labels[b]] = 300.0;
  EXPECT_NEAR(head_loss(Tensor64::from({3, 7}, confident), t, Head::categorical).item(), 0.0, 1e-12);
  Targets<double> r;
  r.trajectory = random_tensor({2, 4, 2}, 5);
  EXPECT_EQ(head_loss(r.trajectory, r, Head::regression).item(), 0.0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto c = tiny("sem,ddm,cim", Head::regression);
  auto s = BackboneState<double>::init(c, 11);
  activate(s);
  std::stringstream buf;
  make_checkpoint(c, s).write(buf);
  auto back = restore_checkpoint<double>(io::Archive::read(buf));
  EXPECT_EQ(back.config.fingerprint(), c.fingerprint());
  const auto a = s.parameters(), b = back.state.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_TRUE(same_bits(a[i].tensor, b[i].tensor)) << a[i].name;
  }
  auto x = random_tensor({1, 3, 4, 8, 8}, 12);
  EXPECT_TRUE(same_bits(backbone_forward(x, c, s), backbone_forward(x, back.config, back.state)));
}

TEST(Checkpoint, TamperedFingerprintOrShapeIsDataError) {
  auto c = tiny("ddm");
  auto s = BackboneState<double>::init(c, 13);
  auto ar = make_checkpoint(c, s);
  auto bad = ar;
  bad.metadata["config.model.widths"] = "4,4,8";
  try {
    restore_checkpoint<double>(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
  auto wrong = ar;
  wrong.put("head.w", Tensor64::zeros({7, 5}));
  try {
    restore_checkpoint<double>(wrong);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
}

TEST(Backbone, EndToEndGradients) {
  for (Head head : {Head::categorical, Head::regression}) {
    auto c = tiny("sem,ddm,cim", head);
    auto s = BackboneState<double>::init(c, 14);
    activate(s);
    auto x = tu::param({1, 3, 4, 8, 8}, 15, "x");
    auto inputs = s.parameters();
    inputs.push_back({"input", x});
    const auto r = gradient_check([&] { return weighted_sum(backbone_forward(x, c, s), 16); }, inputs,
                                  {1e-5, 1e-4, 24, 17});
    EXPECT_TRUE(all_passed(r)) << to_string(head) << "\n" << describe(r);
  }
}
