#pragma once

#include <chrono>
#include <random>
#include <string>
#include <vector>

#include "fdgan/freq.hpp"
#include "fdgan/gradcheck.hpp"
#include "fdgan/layers.hpp"
#include "fdgan/nets.hpp"
#include "fdgan/objective.hpp"

namespace fdgan {

inline constexpr double kOpTolerance = 1e-3;
inline constexpr double kNetTolerance = 5e-3;

// Adapters giving the stateless frequency and fusion operations the block interface grad_check
// expects.
template <class T>
struct LowFrequencyBlock {
  FreqConfig cfg;
  LowFrequencyBlock() = default;
  explicit LowFrequencyBlock(FreqConfig c) : cfg(c) {}
  template <class U>
  explicit LowFrequencyBlock(const LowFrequencyBlock<U>& o) : cfg(o.cfg) {}
  BasicTensor<T> forward(const BasicTensor<T>& x) { return extract_lf(x, cfg); }
  BasicTensor<T> backward(const BasicTensor<T>& g) { return extract_lf_backward(g, cfg); }
  void collect(ParamList<T>&, const std::string&) {}
};

template <class T>
struct GrayscaleBlock {
  GrayscaleBlock() = default;
  template <class U>
  explicit GrayscaleBlock(const GrayscaleBlock<U>&) {}
  BasicTensor<T> forward(const BasicTensor<T>& x) { return to_grayscale(x); }
  BasicTensor<T> backward(const BasicTensor<T>& g) { return to_grayscale_backward(g); }
  void collect(ParamList<T>&, const std::string&) {}
};

template <class T>
struct LaplacianBlock {
  LaplacianBlock() = default;
  template <class U>
  explicit LaplacianBlock(const LaplacianBlock<U>&) {}
  BasicTensor<T> forward(const BasicTensor<T>& x) { return laplacian(x); }
  BasicTensor<T> backward(const BasicTensor<T>& g) { return laplacian_backward(g); }
  void collect(ParamList<T>&, const std::string&) {}
};

template <class T>
struct HighFrequencyBlock {
  HighFrequencyBlock() = default;
  template <class U>
  explicit HighFrequencyBlock(const HighFrequencyBlock<U>&) {}
  BasicTensor<T> forward(const BasicTensor<T>& x) { return extract_hf(x); }
  BasicTensor<T> backward(const BasicTensor<T>& g) { return extract_hf_backward(g); }
  void collect(ParamList<T>&, const std::string&) {}
};

/// Concatenates the input with its own square so both halves carry distinct gradients.
template <class T>
struct ConcatBlock {
  ConcatBlock() = default;
  template <class U>
  explicit ConcatBlock(const ConcatBlock<U>&) {}
  BasicTensor<T> forward(const BasicTensor<T>& x) {
    x_ = x;
    BasicTensor<T> sq(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) sq[i] = x[i] * x[i];
    return concat_channels(x, sq);
  }
  BasicTensor<T> backward(const BasicTensor<T>& g) {
    auto parts = split_channels(g, {x_.shape().c, x_.shape().c});
    for (std::size_t i = 0; i < x_.size(); ++i) parts[0][i] += 2 * x_[i] * parts[1][i];
    return parts[0];
  }
  void collect(ParamList<T>&, const std::string&) {}

 private:
  BasicTensor<T> x_;
};

template <class T>
struct FusionBlock {
  DiscInput variant = DiscInput::Full;
  FreqConfig cfg;
  FusionBlock() = default;
  FusionBlock(DiscInput v, FreqConfig c) : variant(v), cfg(c) {}
  template <class U>
  explicit FusionBlock(const FusionBlock<U>& o) : variant(o.variant), cfg(o.cfg) {}
  BasicTensor<T> forward(const BasicTensor<T>& x) {
    return assemble_fusion_input(x, variant, cfg).channels;
  }
  BasicTensor<T> backward(const BasicTensor<T>& g) {
    return assemble_fusion_input_backward(g, variant, cfg);
  }
  void collect(ParamList<T>&, const std::string&) {}
};

namespace detail {

inline Tensor random_tensor(const Shape& s, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(s);
  for (auto& v : t.values()) v = static_cast<float>(d(rng));
  return t;
}

/// Values of magnitude in [0.1, 1] with random sign, kept clear of activation kinks.
inline Tensor kink_free_tensor(const Shape& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(s);
  for (auto& v : t.values()) v = static_cast<float>(sign(rng) ? mag(rng) : -mag(rng));
  return t;
}

/// A few training-mode passes so normalization statistics differ from their initial values,
/// then evaluation mode.
template <class Net>
void settle_statistics(Net& net, const Shape& s, std::mt19937_64& rng) {
  net.set_training(true);
  for (int i = 0; i < 3; ++i) net.forward(random_tensor(Shape{4, s.c, s.h, s.w}, rng, 0.0, 1.0));
  net.set_training(false);
}

}  // namespace detail

struct GradSuiteOptions {
  std::uint64_t seed = 7;
  // Coordinates sampled per parameter group for whole networks.
  std::size_t network_coords = 24;
};

/// Finite-difference checks of every layer type, both networks and every differentiable loss.
inline std::vector<GradReport> gradcheck_all(const GradSuiteOptions& o = {}) {
  std::vector<GradReport> out;
  std::mt19937_64 rng(o.seed);
  const GradCheckOptions smooth{1e-3, 0, o.seed};
  const GradCheckOptions kinked{1e-6, 0, o.seed};
  const GradCheckOptions network{1e-6, o.network_coords, o.seed};

  {
    Conv2d<float> conv(ConvSpec{3, 4, 3, 1, 1}, rng);
    out.push_back(grad_check("conv3x3", conv, detail::random_tensor({2, 3, 6, 6}, rng, -1, 1), kOpTolerance, smooth));
  }
  {
    Conv2d<float> conv(ConvSpec{2, 3, 4, 2, 1}, rng);
    out.push_back(grad_check("conv4x4_stride2", conv, detail::random_tensor({2, 2, 8, 8}, rng, -1, 1), kOpTolerance, smooth));
  }
  {
    BatchNorm2d<float> bn(3);
    out.push_back(grad_check("batchnorm_train", bn, detail::random_tensor({2, 3, 4, 4}, rng, -1, 1), kOpTolerance, smooth));
  }
  {
    BatchNorm2d<float> bn(3);
    bn.forward(detail::random_tensor({4, 3, 4, 4}, rng, -1, 2));
    bn.set_training(false);
    out.push_back(grad_check("batchnorm_eval", bn, detail::random_tensor({2, 3, 4, 4}, rng, -1, 1), kOpTolerance, smooth));
  }
  {
    LeakyRelu<float> act(0.2);
    out.push_back(grad_check("leaky_relu", act, detail::kink_free_tensor({2, 3, 4, 4}, rng), kOpTolerance, kinked));
  }
  {
    Relu<float> act;
    out.push_back(grad_check("relu", act, detail::kink_free_tensor({2, 3, 4, 4}, rng), kOpTolerance, kinked));
  }
  {
    Sigmoid<float> act;
    out.push_back(grad_check("sigmoid", act, detail::random_tensor({2, 3, 4, 4}, rng, -3, 3), kOpTolerance, smooth));
  }
  {
    MaxPool2x2<float> pool;
    out.push_back(grad_check("maxpool2x2", pool, detail::random_tensor({2, 3, 6, 6}, rng, -1, 1), kOpTolerance, kinked));
  }
  {
    UpsampleNearest2x<float> up;
    out.push_back(grad_check("upsample2x", up, detail::random_tensor({2, 3, 3, 4}, rng, -1, 1), kOpTolerance, smooth));
  }
  {
    ConcatBlock<float> cat;
    out.push_back(grad_check("concat_channels", cat, detail::random_tensor({2, 2, 4, 4}, rng, -1, 1), kOpTolerance, smooth));
  }
  {
    ConvBnAct<float> unit(ConvSpec{3, 4, 3, 1, 1}, 0.2, rng);
    out.push_back(grad_check("conv_bn_lrelu", unit, detail::random_tensor({2, 3, 6, 6}, rng, -1, 1), kOpTolerance, kinked));
  }
  {
    DenseBlock<float> block(3, 2, 3, rng);
    out.push_back(grad_check("dense_block", block, detail::random_tensor({2, 3, 6, 6}, rng, -1, 1), kOpTolerance, kinked));
  }
  {
    LowFrequencyBlock<float> lf(FreqConfig{});
    out.push_back(grad_check("lowpass_gaussian", lf, detail::random_tensor({1, 3, 12, 12}, rng, 0, 1), kOpTolerance, smooth));
  }
  {
    GrayscaleBlock<float> gray;
    out.push_back(grad_check("grayscale", gray, detail::random_tensor({2, 3, 5, 5}, rng, 0, 1), kOpTolerance, smooth));
  }
  {
    LaplacianBlock<float> lap;
    out.push_back(grad_check("laplacian", lap, detail::random_tensor({2, 1, 6, 6}, rng, 0, 1), kOpTolerance, smooth));
  }
  {
    HighFrequencyBlock<float> hf;
    out.push_back(grad_check("highpass_laplacian", hf, detail::random_tensor({1, 3, 8, 8}, rng, 0, 1), kOpTolerance, smooth));
  }
  for (DiscInput v : {DiscInput::HfOnly, DiscInput::LfOnly, DiscInput::Full}) {
    FusionBlock<float> fusion(v, FreqConfig{});
    out.push_back(grad_check("fusion_input_" + to_string(v), fusion,
                             detail::random_tensor({1, 3, 16, 16}, rng, 0, 1), kOpTolerance, smooth));
  }

  {
    Generator<float> gen(NetConfig{}, o.seed);
    detail::settle_statistics(gen, {1, 3, 16, 16}, rng);
    Generator<double> twin(gen);
    twin.set_training(false);
    out.push_back(grad_check("generator", gen, twin, detail::random_tensor({1, 3, 16, 16}, rng, 0, 1),
                             kNetTolerance, network));
  }
  for (DiscInput v : {DiscInput::Full, DiscInput::ImageOnly}) {
    Discriminator<float> disc(v, NetConfig{}, o.seed + 1);
    const std::size_t c = input_channels(v);
    detail::settle_statistics(disc, {1, c, 16, 16}, rng);
    Discriminator<double> twin(disc);
    twin.set_training(false);
    out.push_back(grad_check("discriminator_" + to_string(v), disc, twin,
                             detail::random_tensor({1, c, 16, 16}, rng, 0, 1), kNetTolerance, network));
  }

  const Shape img{2, 3, 16, 16};
  const Tensor target = detail::random_tensor(img, rng, 0, 1);
  const BasicTensor<double> target64 = target.cast<double>();
  out.push_back(grad_check_loss(
      "l1_loss", [&](const Tensor& x) { return l1_loss(x, target); },
      [&](const BasicTensor<double>& x) { return l1_loss(x, target64).value; },
      detail::random_tensor(img, rng, 0, 1), kOpTolerance, kinked));
  out.push_back(grad_check_loss(
      "ssim_loss", [&](const Tensor& x) { return ssim_loss(x, target); },
      [&](const BasicTensor<double>& x) { return ssim_loss(x, target64).value; },
      detail::random_tensor(img, rng, 0, 1), kOpTolerance, smooth));
  {
    FeatureExtractor<float> feat;
    FeatureExtractor<double> feat64(feat);
    out.push_back(grad_check_loss(
        "perceptual_loss", [&](const Tensor& x) { return perceptual_loss(x, target, feat); },
        [&](const BasicTensor<double>& x) { return perceptual_loss(x, target64, feat64).value; },
        detail::random_tensor(img, rng, 0, 1), kOpTolerance, kinked));
  }
  const Tensor probs = detail::random_tensor({4, 1, 1, 1}, rng, 0.05, 0.95);
  out.push_back(grad_check_loss(
      "adversarial_loss_g", [](const Tensor& p) { return adversarial_loss_g(p); },
      [](const BasicTensor<double>& p) { return adversarial_loss_g(p).value; }, probs,
      kOpTolerance, GradCheckOptions{1e-5, 0, o.seed}));
  out.push_back(grad_check_loss(
      "discriminator_loss_real", [](const Tensor& p) { return discriminator_real_term(p); },
      [](const BasicTensor<double>& p) { return discriminator_real_term(p).value; }, probs,
      kOpTolerance, GradCheckOptions{1e-5, 0, o.seed}));
  out.push_back(grad_check_loss(
      "discriminator_loss_fake", [](const Tensor& p) { return discriminator_fake_term(p); },
      [](const BasicTensor<double>& p) { return discriminator_fake_term(p).value; }, probs,
      kOpTolerance, GradCheckOptions{1e-5, 0, o.seed}));
  return out;
}

}  // namespace fdgan
