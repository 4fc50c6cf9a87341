#include <gtest/gtest.h>

#include <random>

#include "fdgan/gradcheck.hpp"
#include "fdgan/nets.hpp"
#include "oracles.hpp"

using namespace fdgan;

TEST(DenseBlock, ChannelBookkeeping) {
  const NetConfig cfg;
  std::mt19937_64 rng(1);
  std::size_t in = cfg.stem;
  for (int b = 0; b < 3; ++b) {
    DenseBlock<float> block(in, cfg.growth, cfg.block_layers, rng);
    for (std::size_t i = 0; i < cfg.block_layers; ++i) {
      EXPECT_EQ(block.layers()[i].conv().spec().in_channels, in + i * cfg.growth);
      EXPECT_EQ(block.layer_input_channels(i), in + i * cfg.growth);
    }
    const Tensor out = block.forward(oracle::random_image({1, in, 8, 8}, rng));
    EXPECT_EQ(out.shape().c, in + cfg.block_layers * cfg.growth);
    in = block.out_channels();
  }
}

TEST(Generator, ShapesAndRange) {
  Generator<float> gen(NetConfig{}, 3);
  std::mt19937_64 rng(2);
  const Tensor out = gen.forward(oracle::random_image({2, 3, 64, 64}, rng));
  EXPECT_EQ(out.shape(), (Shape{2, 3, 64, 64}));
  EXPECT_EQ(gen.deepest_shape(), (Shape{2, NetConfig{}.bottleneck, 8, 8}));
  for (float v : out.values()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Generator, RangeHoldsForWildInputs) {
  Generator<float> gen(NetConfig{}, 3);
  gen.set_training(false);
  std::mt19937_64 rng(4);
  const Tensor out = gen.forward(oracle::random_image({1, 3, 16, 16}, rng, -20, 20));
  for (float v : out.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Generator, IndivisibleSizeNamesMultiple) {
  Generator<float> gen(NetConfig{}, 3);
  try {
    gen.forward(Tensor(Shape{1, 3, 20, 16}));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("multiples of 8"), std::string::npos);
  }
}

TEST(Generator, SeedDeterminism) {
  std::mt19937_64 rng(5);
  const Tensor x = oracle::random_image({1, 3, 32, 32}, rng);
  Generator<float> a(NetConfig{}, 9), b(NetConfig{}, 9);
  a.set_training(false);
  b.set_training(false);
  EXPECT_EQ(a.forward(x), b.forward(x));
}

TEST(Generator, FiniteDifferences) {
  Generator<float> gen(NetConfig{}, 3);
  gen.set_training(false);
  std::mt19937_64 rng(6);
  const auto r = grad_check("gen", gen, oracle::random_image({1, 3, 16, 16}, rng), 5e-3,
                            GradCheckOptions{1e-6, 8, 3});
  EXPECT_TRUE(r.passed()) << r;
}

TEST(Fusion, ChannelCounts) {
  const Tensor img(Shape{1, 3, 16, 16}, 0.4f);
  EXPECT_EQ(assemble_fusion_input(img, DiscInput::Full).channels.shape().c, 7u);
  EXPECT_EQ(assemble_fusion_input(img, DiscInput::LfOnly).channels.shape().c, 6u);
  EXPECT_EQ(assemble_fusion_input(img, DiscInput::HfOnly).channels.shape().c, 4u);
  EXPECT_EQ(assemble_fusion_input(img, DiscInput::ImageOnly).channels.shape().c, 3u);
}

TEST(Fusion, ConstantGrayImage) {
  const Tensor img(Shape{1, 3, 16, 16}, 0.4f);
  const auto parts = split_channels(assemble_fusion_input(img, DiscInput::Full).channels, {3, 3, 1});
  for (float v : parts[1].values()) EXPECT_NEAR(v, 0.4f, 1e-6);
  for (float v : parts[2].values()) EXPECT_NEAR(v, 0.0f, 1e-6);
}

TEST(Discriminator, OutputStrictlyBetweenZeroAndOne) {
  Discriminator<float> disc(DiscInput::Full, NetConfig{}, 4);
  std::mt19937_64 rng(7);
  // 10k random samples in batches of 100.
  for (int b = 0; b < 100; ++b) {
    const Tensor p = disc.forward(oracle::random_image({100, 7, 16, 16}, rng, -3, 3));
    ASSERT_EQ(p.shape(), (Shape{100, 1, 1, 1}));
    for (float v : p.values()) {
      ASSERT_GT(v, 0.0f);
      ASSERT_LT(v, 1.0f);
    }
  }
}

TEST(Discriminator, ChannelMismatchRejected) {
  Discriminator<float> disc(DiscInput::HfOnly, NetConfig{}, 4);
  EXPECT_THROW(disc.forward(Tensor(Shape{1, 7, 16, 16})), ShapeError);
  EXPECT_THROW(disc.forward(assemble_fusion_input(Tensor(Shape{1, 3, 16, 16}), DiscInput::LfOnly)),
               ShapeError);
}

TEST(Discriminator, VariantsDifferOnlyInFirstConv) {
  Discriminator<float> full(DiscInput::Full, NetConfig{}, 4);
  Discriminator<float> hf(DiscInput::HfOnly, NetConfig{}, 4);
  const auto pf = full.parameters();
  const auto ph = hf.parameters();
  ASSERT_EQ(pf.size(), ph.size());
  for (std::size_t i = 0; i < pf.size(); ++i) {
    EXPECT_EQ(pf[i].name, ph[i].name);
    if (pf[i].name == "disc.stage0.conv.weight") {
      EXPECT_EQ(pf[i].tensor->shape().c, 7u);
      EXPECT_EQ(ph[i].tensor->shape().c, 4u);
    } else {
      EXPECT_EQ(pf[i].tensor->shape(), ph[i].tensor->shape()) << pf[i].name;
    }
  }
}

TEST(Discriminator, GradientReachesImageSlice) {
  Discriminator<float> disc(DiscInput::Full, NetConfig{}, 4);
  disc.set_training(false);
  std::mt19937_64 rng(8);
  const Tensor img = oracle::random_image({1, 3, 16, 16}, rng);
  const auto sample = assemble_fusion_input(img, DiscInput::Full);
  disc.forward(sample);
  const Tensor g = assemble_fusion_input_backward(disc.backward(Tensor(Shape{1, 1, 1, 1}, 1.0f)),
                                                  DiscInput::Full);
  double mag = 0.0;
  for (float v : g.values()) mag += std::abs(v);
  EXPECT_GT(mag, 0.0);

  Discriminator<double> twin(disc);
  twin.set_training(false);
  auto d_of = [&](const Tensor& x) {
    return twin.forward(assemble_fusion_input(x.cast<double>(), DiscInput::Full))[0];
  };
  Tensor up = img, down = img;
  up[100] += 1e-3f;
  down[100] -= 1e-3f;
  const double numeric = (d_of(up) - d_of(down)) / (static_cast<double>(up[100]) - down[100]);
  EXPECT_NEAR(numeric, g[100], 1e-3 * std::max(1.0, std::abs(numeric)) + 1e-5);
}

TEST(Discriminator, FiniteDifferences) {
  Discriminator<float> disc(DiscInput::Full, NetConfig{}, 4);
  disc.set_training(false);
  std::mt19937_64 rng(9);
  const auto r = grad_check("disc", disc, oracle::random_image({1, 7, 16, 16}, rng), 5e-3,
                            GradCheckOptions{1e-6, 8, 3});
  EXPECT_TRUE(r.passed()) << r;
}

TEST(Discriminator, SeedDeterminism) {
  std::mt19937_64 rng(10);
  const Tensor x = oracle::random_image({2, 6, 32, 32}, rng);
  Discriminator<float> a(DiscInput::LfOnly, NetConfig{}, 5), b(DiscInput::LfOnly, NetConfig{}, 5);
  EXPECT_EQ(a.forward(x), b.forward(x));
}
