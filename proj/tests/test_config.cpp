#include <gtest/gtest.h>

#include "lsef/config.hpp"
#include "lsef/error.hpp"
#include "lsef/train.hpp"

using namespace lsef;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::verification;
}

}  // namespace

TEST(Config, SectionsFlattenToDottedKeys) {
  auto c = parse_config("# comment\nseed = 3\n[train]\nepochs=5 \n  batch = 4 # trailing\n[rao]\ngamma = -0.2\n");
  EXPECT_EQ(c.at("seed"), "3");
  EXPECT_EQ(c.at("train.epochs"), "5");
  EXPECT_EQ(c.at("train.batch"), "4");
  EXPECT_EQ(get_double(c, "rao.gamma", 0), -0.2);
  EXPECT_EQ(get_u64(c, "train.missing", 9), 9u);
}

TEST(Config, MalformedLinesReportTheLine) {
  try {
    parse_config("a = 1\n[oops\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::configuration);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_EQ(kind_of([] { parse_config("novalue\n"); }), ErrorKind::configuration);
  EXPECT_EQ(kind_of([] { parse_config("a = 1\na = 2\n"); }), ErrorKind::configuration);
}

TEST(Config, TypedAccessorsRejectJunk) {
  ConfigMap c{{"n", "12x"}, {"d", "abc"}, {"b", "maybe"}, {"neg", "-3"}};
  EXPECT_EQ(kind_of([&] { get_u64(c, "n", 0); }), ErrorKind::configuration);
  EXPECT_EQ(kind_of([&] { get_u64(c, "neg", 0); }), ErrorKind::configuration);
  EXPECT_EQ(kind_of([&] { get_double(c, "d", 0); }), ErrorKind::configuration);
  EXPECT_EQ(kind_of([&] { get_bool(c, "b", false); }), ErrorKind::configuration);
}

TEST(Config, FingerprintIgnoresOrderAndFormatting) {
  auto a = parse_config("x = 1\ny = 2\n");
  auto b = parse_config("y=2\n\n# c\nx =1\n");
  EXPECT_EQ(config_fingerprint(a), config_fingerprint(b));
  EXPECT_EQ(canonical_text(a), "x=1\ny=2\n");
  b["y"] = "3";
  EXPECT_NE(config_fingerprint(a), config_fingerprint(b));
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Config, MergeOverridesLaterWins) {
  auto m = merge({{"a", "1"}, {"b", "2"}}, {{"b", "3"}, {"c", "4"}});
  EXPECT_EQ(m.at("a"), "1");
  EXPECT_EQ(m.at("b"), "3");
  EXPECT_EQ(m.at("c"), "4");
}

TEST(Config, DoublesRoundTripExactly) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_EQ(kind_of([] { load_config_file("/nonexistent/lsef.conf"); }), ErrorKind::io);
}

TEST(TrainConfig, RoundTripAndUnknownKeys) {
  TrainConfig t;
  t.epochs = 3;
  t.optimizer = OptimizerKind::sam;
  t.rao.gamma = 0.25;
  t.model.set_modules("sem,cim");
  t.precision = Precision::f64;
  auto back = TrainConfig::from_config(t.to_config());
  EXPECT_EQ(back.epochs, 3u);
  EXPECT_EQ(back.optimizer, OptimizerKind::sam);
  EXPECT_EQ(back.rao.gamma, 0.25);
  EXPECT_EQ(back.model.modules(), "sem,cim");
  EXPECT_EQ(back.precision, Precision::f64);
  EXPECT_EQ(canonical_text(back.to_config()), canonical_text(t.to_config()));
  auto cfg = t.to_config();
  cfg["train.epoks"] = "4";
  EXPECT_EQ(kind_of([&] { TrainConfig::from_config(cfg); }), ErrorKind::configuration);
}

TEST(TrainConfig, CosineScheduleEndpoints) {
  TrainConfig t;
  t.epochs = 5;
  t.base.lr = 0.02;
  EXPECT_EQ(t.lr_at(3), 0.02);
  t.schedule = LrSchedule::cosine;
  t.lr_floor = 0.1;
  EXPECT_DOUBLE_EQ(t.lr_at(1), 0.02);
  EXPECT_DOUBLE_EQ(t.lr_at(3), 0.02 * 0.55);
  EXPECT_DOUBLE_EQ(t.lr_at(5), 0.002);
  for (std::size_t e = 1; e < 5; ++e) EXPECT_GT(t.lr_at(e), t.lr_at(e + 1));
  auto back = TrainConfig::from_config(t.to_config());
  EXPECT_EQ(back.schedule, LrSchedule::cosine);
  EXPECT_EQ(back.lr_floor, 0.1);
  t.lr_floor = 0;
  EXPECT_EQ(kind_of([&] { t.validate(); }), ErrorKind::configuration);
  auto cfg = TrainConfig{}.to_config();
  cfg["train.schedule"] = "step";
  EXPECT_EQ(kind_of([&] { TrainConfig::from_config(cfg); }), ErrorKind::configuration);
}
