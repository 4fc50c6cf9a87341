#include <gtest/gtest.h>

#include "fdgan/config.hpp"

using namespace fdgan;

TEST(Config, DefaultsMirrorReferenceSettings) {
  const TrainConfig c;
  EXPECT_EQ(c.adam.lr, 2e-3);
  EXPECT_EQ(c.weights.l1, 2.0);
  EXPECT_EQ(c.weights.ssim, 1.0);
  EXPECT_EQ(c.weights.perceptual, 2.0);
  EXPECT_EQ(c.weights.adversarial, 0.1);
  EXPECT_EQ(c.freq.lf_size, 15u);
  EXPECT_EQ(c.freq.lf_sigma, 3.0);
  EXPECT_EQ(c.haze.light_min, 0.5);
  EXPECT_EQ(c.haze.beta_max, 2.0);
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, ParsesKeysCommentsAndLists) {
  TrainConfig c;
  apply_config_text(c, "# comment\n  lr = 0.001  \nmode = fusion-hf # trailing\n\nnet_decoder = 8, 8,4\n");
  EXPECT_EQ(c.adam.lr, 0.001);
  EXPECT_EQ(c.mode, Mode::FusionHf);
  EXPECT_EQ(c.net.decoder, (std::array<std::size_t, 3>{8, 8, 4}));
}

TEST(Config, UnknownKeyIsHardError) {
  TrainConfig c;
  try {
    apply_config_text(c, "lr = 0.1\nlearning_rate = 0.2\n", "run.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("learning_rate"), std::string::npos);
    EXPECT_NE(msg.find("run.cfg:2"), std::string::npos);
  }
}

TEST(Config, BadValuesRejected) {
  TrainConfig c;
  EXPECT_THROW(apply_config_text(c, "iterations = many\n"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "lr = 1e-3x\n"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "net_disc = 1,2,3\n"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "mode = fusion\n"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "just words\n"), ConfigError);
}

TEST(Config, ValidationCatchesImpossibleRuns) {
  TrainConfig c;
  c.adam.lr = 0.0;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.iterations = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.image_size = 60;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.freq.lf_size = 14;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, EchoReproducesEveryValue) {
  TrainConfig c;
  apply_config_text(c,
                    "lr = 0.0012345678901234567\nseed = 99\nhaze_beta_min = 1.25\n"
                    "mode = gan\ntrain_dir = /tmp/some dir\nssim_k2 = 0.031\n");
  const std::string echo = format_config(c);
  TrainConfig back;
  apply_config_text(back, echo);
  EXPECT_EQ(format_config(back), echo);
  EXPECT_EQ(back.adam.lr, c.adam.lr);
  EXPECT_EQ(back.train_dir, "/tmp/some dir");
  EXPECT_EQ(back.mode, Mode::PlainGan);
  for (const auto& key : config_key_names()) {
    EXPECT_EQ(get_config_value(back, key), get_config_value(c, key)) << key;
  }
}

TEST(Config, EveryKeyIsSettable) {
  const TrainConfig defaults;
  for (const auto& key : config_key_names()) {
    TrainConfig c;
    EXPECT_NO_THROW(set_config_value(c, key, get_config_value(defaults, key))) << key;
  }
}
