#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fdgan/gradcheck.hpp"
#include "fdgan/objective.hpp"
#include "oracles.hpp"

using namespace fdgan;

TEST(L1, Basics) {
  std::mt19937_64 rng(41);
  const Tensor x = oracle::random_image({2, 3, 8, 8}, rng);
  EXPECT_EQ(l1_loss(x, x).value, 0.0);
  EXPECT_DOUBLE_EQ(l1_loss(Tensor(Shape{1, 3, 4, 4}), Tensor(Shape{1, 3, 4, 4}, 0.5f)).value, 0.5);
  const Tensor y = oracle::random_image({2, 3, 8, 8}, rng);
  EXPECT_NEAR(l1_loss(x, y).value, oracle::l1(x, y), 1e-6);
  EXPECT_THROW(l1_loss(x, Tensor(Shape{2, 3, 8, 7})), ShapeError);
}

TEST(Ssim, SelfSimilarityIsOne) {
  std::mt19937_64 rng(42);
  const Tensor x = oracle::random_image({2, 3, 16, 16}, rng);
  EXPECT_NEAR(ssim(x, x), 1.0, 1e-6);
}

TEST(Ssim, ConstantImagesClosedForm) {
  const Tensor x(Shape{1, 3, 16, 16}, 0.5f);
  const Tensor y(Shape{1, 3, 16, 16}, 0.25f);
  EXPECT_NEAR(ssim(x, y), oracle::kConstantSsimHalfQuarter, 1e-4);
}

TEST(Ssim, SymmetricAndBounded) {
  std::mt19937_64 rng(43);
  for (int i = 0; i < 20; ++i) {
    const Tensor x = oracle::random_image({1, 3, 16, 16}, rng);
    const Tensor y = oracle::random_image({1, 3, 16, 16}, rng);
    const double a = ssim(x, y);
    EXPECT_NEAR(a, ssim(y, x), 1e-6);
    EXPECT_LT(a, 1.0);
    const double l = ssim_loss(x, y).value;
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, 2.0);
  }
}

TEST(Ssim, TooSmallRejected) {
  EXPECT_THROW(ssim(Tensor(Shape{1, 3, 8, 8}), Tensor(Shape{1, 3, 8, 8})), ShapeError);
}

TEST(Ssim, LossGradientVanishesAtOptimum) {
  std::mt19937_64 rng(44);
  const Tensor x = oracle::random_image({1, 3, 16, 16}, rng);
  const auto l = ssim_loss(x, x);
  EXPECT_NEAR(l.value, 0.0, 1e-6);
  for (float g : l.grad.values()) EXPECT_NEAR(g, 0.0f, 1e-6);
}

TEST(Ssim, FiniteDifferences) {
  std::mt19937_64 rng(45);
  const Tensor y = oracle::random_image({1, 3, 14, 14}, rng);
  const auto y64 = y.cast<double>();
  const auto r = grad_check_loss(
      "ssim", [&](const Tensor& x) { return ssim_loss(x, y); },
      [&](const BasicTensor<double>& x) { return ssim_loss(x, y64).value; },
      oracle::random_image({1, 3, 14, 14}, rng), 1e-3);
  EXPECT_TRUE(r.passed()) << r;
}

TEST(Perceptual, ZeroForIdenticalAndNonNegative) {
  FeatureExtractor<float> f;
  std::mt19937_64 rng(46);
  const Tensor x = oracle::random_image({1, 3, 12, 12}, rng);
  EXPECT_EQ(perceptual_loss(x, x, f).value, 0.0);
  EXPECT_GE(perceptual_loss(x, oracle::random_image({1, 3, 12, 12}, rng), f).value, 0.0);
}

TEST(Perceptual, ExtractorIsFixedAcrossInstances) {
  FeatureExtractor<float> a, b;
  ParamList<float> pa, pb;
  a.collect_buffers(pa, "f");
  b.collect_buffers(pb, "f");
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i].tensor, *pb[i].tensor);
}

TEST(Perceptual, FiniteDifferences) {
  FeatureExtractor<float> f;
  FeatureExtractor<double> f64(f);
  std::mt19937_64 rng(47);
  const Tensor y = oracle::random_image({1, 3, 8, 8}, rng);
  const auto y64 = y.cast<double>();
  const auto r = grad_check_loss(
      "perceptual", [&](const Tensor& x) { return perceptual_loss(x, y, f); },
      [&](const BasicTensor<double>& x) { return perceptual_loss(x, y64, f64).value; },
      oracle::random_image({1, 3, 8, 8}, rng), 1e-3, GradCheckOptions{1e-6, 0, 1});
  EXPECT_TRUE(r.passed()) << r;
}

TEST(Adversarial, ClosedFormsAndLimits) {
  EXPECT_NEAR(adversarial_loss_g(Tensor(Shape{2, 1, 1, 1}, 0.5f)).value, std::log(0.5), 1e-7);
  EXPECT_NEAR(adversarial_loss_g(Tensor(Shape{1, 1, 1, 1}, 0.0f)).value, 0.0, 1e-6);
  double prev = 1.0;
  for (float d = 0.05f; d < 1.0f; d += 0.05f) {
    const double v = adversarial_loss_g(Tensor(Shape{1, 1, 1, 1}, d)).value;
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_TRUE(std::isfinite(adversarial_loss_g(Tensor(Shape{1, 1, 1, 1}, 1.0f)).value));
}

TEST(Adversarial, DiscriminatorLossValues) {
  const Tensor half(Shape{3, 1, 1, 1}, 0.5f);
  EXPECT_NEAR(discriminator_loss(half, half).value, 2 * std::log(2.0), 1e-6);
  const auto perfect = discriminator_loss(Tensor(Shape{1, 1, 1, 1}, 1.0f), Tensor(Shape{1, 1, 1, 1}, 0.0f));
  EXPECT_NEAR(perfect.value, 0.0, 1e-6);
  std::mt19937_64 rng(48);
  for (int i = 0; i < 50; ++i) {
    const auto l = discriminator_loss(oracle::random_image({4, 1, 1, 1}, rng),
                                      oracle::random_image({4, 1, 1, 1}, rng));
    EXPECT_GE(l.value, 0.0);
  }
}

TEST(TotalLoss, WorkedExample) {
  const LossParts parts{0.1, 0.2, 0.05, -0.6931};
  EXPECT_NEAR(total_loss(parts, LossWeights{}), oracle::kTotalLossExample, 1e-6);
  EXPECT_EQ(total_loss(LossParts{}, LossWeights{}), 0.0);
}

TEST(TotalLoss, LinearInWeights) {
  const LossParts parts{0.3, 0.1, 0.7, -0.2};
  LossWeights w;
  const double base = total_loss(parts, w);
  w.l1 += 1.0;
  EXPECT_NEAR(total_loss(parts, w) - base, parts.l1, 1e-12);
}

TEST(TotalLoss, NonFiniteTermIsNamed) {
  try {
    total_loss(LossParts{0.1, std::nan(""), 0.0, 0.0}, LossWeights{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("ssim"), std::string::npos);
  }
}

TEST(Psnr, ClosedForm) {
  const BasicTensor<double> x(Shape{1, 3, 4, 4}, 1.0);
  const BasicTensor<double> y(Shape{1, 3, 4, 4}, 0.9);
  EXPECT_NEAR(psnr(x, y), 20.0, 1e-6);
  EXPECT_TRUE(std::isinf(psnr(x, x)));
}

TEST(Psnr, DecreasingInError) {
  const Tensor x(Shape{1, 1, 4, 4}, 0.5f);
  double prev = std::numeric_limits<double>::infinity();
  for (float e = 0.01f; e < 0.5f; e += 0.05f) {
    const double p = psnr(x, Tensor(Shape{1, 1, 4, 4}, 0.5f + e));
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Metrics, NestedNoiseNeverImproves) {
  std::mt19937_64 rng(49);
  const Tensor clean = oracle::random_image({1, 3, 32, 32}, rng, 0.25, 0.75);
  const Tensor noise = oracle::random_image({1, 3, 32, 32}, rng, -1, 1);
  double last_psnr = std::numeric_limits<double>::infinity();
  double last_ssim = 1.0 + 1e-9;
  for (int level = 1; level <= 10; ++level) {
    Tensor noisy = clean;
    axpy(noisy, 0.025f * static_cast<float>(level), noise);
    const double p = psnr(noisy, clean);
    const double s = ssim(noisy, clean);
    EXPECT_LT(p, last_psnr) << "level " << level;
    EXPECT_LT(s, last_ssim) << "level " << level;
    last_psnr = p;
    last_ssim = s;
  }
}
