#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "fdgan/freq.hpp"
#include "fdgan/gradcheck.hpp"
#include "fdgan/layers.hpp"
#include "fdgan/tensor.hpp"

namespace fdgan {

struct LossWeights {
  double l1 = 2.0;
  double ssim = 1.0;
  double perceptual = 2.0;
  double adversarial = 0.1;
};

struct LossParts {
  double l1 = 0.0;
  double ssim = 0.0;
  double perceptual = 0.0;
  double adversarial = 0.0;
};

inline double total_loss(const LossParts& p, const LossWeights& w) {
  const std::pair<const char*, double> terms[] = {
      {"l1", p.l1}, {"ssim", p.ssim}, {"perceptual", p.perceptual}, {"adversarial", p.adversarial}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) throw Error(std::string("total_loss: non-finite ") + name + " term");
  }
  return w.l1 * p.l1 + w.ssim * p.ssim + w.perceptual * p.perceptual + w.adversarial * p.adversarial;
}

/// Mean absolute difference; gradient is wrt `x`.
template <class T>
LossValue<T> l1_loss(const BasicTensor<T>& x, const BasicTensor<T>& y) {
  require_same_shape(x.shape(), y.shape(), "l1_loss");
  LossValue<T> out{0.0, BasicTensor<T>(x.shape())};
  const double inv = 1.0 / static_cast<double>(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - y[i];
    acc += std::abs(d);
    out.grad[i] = static_cast<T>(d > 0 ? inv : (d < 0 ? -inv : 0.0));
  }
  out.value = acc * inv;
  return out;
}

struct SsimConfig {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

namespace detail {

// Separable "valid" correlation of an h x w plane: output is (h-k+1) x (w-k+1).
inline std::vector<double> filter_valid(const std::vector<double>& in, std::size_t h, std::size_t w,
                                        const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  const std::size_t oh = h - k + 1;
  const std::size_t ow = w - k + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t u = 0; u < k; ++u) acc += taps[u] * in[y * w + x + u];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t u = 0; u < k; ++u) acc += taps[u] * rows[(y + u) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

inline std::vector<double> filter_valid_adjoint(const std::vector<double>& g, std::size_t h,
                                                std::size_t w, const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  const std::size_t oh = h - k + 1;
  const std::size_t ow = w - k + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      for (std::size_t u = 0; u < k; ++u) rows[(y + u) * ow + x] += taps[u] * g[y * ow + x];
    }
  }
  std::vector<double> out(h * w, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      for (std::size_t u = 0; u < k; ++u) out[y * w + x + u] += taps[u] * rows[y * ow + x];
    }
  }
  return out;
}

}  // namespace detail

/// Mean SSIM over every window position, channel and sample, with the gradient wrt `x`.
/// Windows are Gaussian and never leave the image.
template <class T>
LossValue<T> ssim_with_grad(const BasicTensor<T>& x, const BasicTensor<T>& y,
                            const SsimConfig& cfg = {}, bool want_grad = true) {
  require_same_shape(x.shape(), y.shape(), "ssim");
  const Shape s = x.shape();
  if (s.h < cfg.window || s.w < cfg.window) {
    throw ShapeError("ssim: image " + s.str() + " smaller than the " + std::to_string(cfg.window) +
                     "x" + std::to_string(cfg.window) + " window");
  }
  const auto taps = gaussian_taps(cfg.window, cfg.sigma);
  const double c1 = cfg.c1();
  const double c2 = cfg.c2();
  const std::size_t oh = s.h - cfg.window + 1;
  const std::size_t ow = s.w - cfg.window + 1;
  const double count = static_cast<double>(s.n * s.c * oh * ow);

  LossValue<T> out{0.0, BasicTensor<T>(want_grad ? s : Shape{})};
  double total = 0.0;
  std::vector<double> xs(s.plane()), ys(s.plane()), xx(s.plane()), yy(s.plane()), xy(s.plane());
  std::vector<double> d_mx(oh * ow), d_exx(oh * ow), d_exy(oh * ow);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      auto px = x.plane(n, c);
      auto py = y.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) {
        xs[i] = px[i];
        ys[i] = py[i];
        xx[i] = xs[i] * xs[i];
        yy[i] = ys[i] * ys[i];
        xy[i] = xs[i] * ys[i];
      }
      const auto mx = detail::filter_valid(xs, s.h, s.w, taps);
      const auto my = detail::filter_valid(ys, s.h, s.w, taps);
      const auto exx = detail::filter_valid(xx, s.h, s.w, taps);
      const auto eyy = detail::filter_valid(yy, s.h, s.w, taps);
      const auto exy = detail::filter_valid(xy, s.h, s.w, taps);
      for (std::size_t i = 0; i < mx.size(); ++i) {
        const double a1 = 2 * mx[i] * my[i] + c1;
        const double a2 = 2 * (exy[i] - mx[i] * my[i]) + c2;
        const double b1 = mx[i] * mx[i] + my[i] * my[i] + c1;
        const double b2 = (exx[i] - mx[i] * mx[i]) + (eyy[i] - my[i] * my[i]) + c2;
        const double v = (a1 * a2) / (b1 * b2);
        total += v;
        const double da1 = a2 / (b1 * b2);
        const double da2 = a1 / (b1 * b2);
        const double db1 = -v / b1;
        const double db2 = -v / b2;
        d_mx[i] = (2 * my[i] * (da1 - da2) + 2 * mx[i] * (db1 - db2)) / count;
        d_exx[i] = db2 / count;
        d_exy[i] = 2 * da2 / count;
      }
      if (!want_grad) continue;
      const auto g_mx = detail::filter_valid_adjoint(d_mx, s.h, s.w, taps);
      const auto g_exx = detail::filter_valid_adjoint(d_exx, s.h, s.w, taps);
      const auto g_exy = detail::filter_valid_adjoint(d_exy, s.h, s.w, taps);
      auto g = out.grad.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) {
        g[i] = static_cast<T>(g_mx[i] + 2 * xs[i] * g_exx[i] + ys[i] * g_exy[i]);
      }
    }
  }
  out.value = total / count;
  return out;
}

template <class T>
double ssim(const BasicTensor<T>& x, const BasicTensor<T>& y, const SsimConfig& cfg = {}) {
  return ssim_with_grad(x, y, cfg, false).value;
}

template <class T>
LossValue<T> ssim_loss(const BasicTensor<T>& x, const BasicTensor<T>& y, const SsimConfig& cfg = {}) {
  auto s = ssim_with_grad(x, y, cfg);
  for (auto& g : s.grad.values()) g = -g;
  s.value = 1.0 - s.value;
  return s;
}

/// Frozen two-stage conv/ReLU feature map standing in for a pretrained perceptual network.
template <class T>
class FeatureExtractor {
 public:
  static constexpr std::uint64_t kSeed = 0xfea7u;

  FeatureExtractor() {
    std::mt19937_64 rng(kSeed);
    conv1_ = Conv2d<T>(ConvSpec{3, 16, 3, 1, 1}, rng);
    conv2_ = Conv2d<T>(ConvSpec{16, 32, 3, 1, 1}, rng);
    conv1_.set_frozen(true);
    conv2_.set_frozen(true);
  }

  template <class U>
  explicit FeatureExtractor(const FeatureExtractor<U>& o) : conv1_(o.conv1()), conv2_(o.conv2()) {
    conv1_.set_frozen(true);
    conv2_.set_frozen(true);
  }

  const Conv2d<T>& conv1() const { return conv1_; }
  const Conv2d<T>& conv2() const { return conv2_; }

  BasicTensor<T> forward(const BasicTensor<T>& x) {
    return relu2_.forward(conv2_.forward(relu1_.forward(conv1_.forward(x))));
  }
  BasicTensor<T> backward(const BasicTensor<T>& g) {
    return conv1_.backward(relu1_.backward(conv2_.backward(relu2_.backward(g))));
  }

  void collect_buffers(ParamList<T>& buffers, const std::string& prefix) {
    buffers.push_back({prefix + ".conv1.weight", &conv1_.weight()});
    buffers.push_back({prefix + ".conv1.bias", &conv1_.bias()});
    buffers.push_back({prefix + ".conv2.weight", &conv2_.weight()});
    buffers.push_back({prefix + ".conv2.bias", &conv2_.bias()});
  }

 private:
  Conv2d<T> conv1_;
  Relu<T> relu1_;
  Conv2d<T> conv2_;
  Relu<T> relu2_;
};

/// Mean absolute difference of extractor features; gradient is wrt `x`.
template <class T>
LossValue<T> perceptual_loss(const BasicTensor<T>& x, const BasicTensor<T>& y,
                             FeatureExtractor<T>& features) {
  require_same_shape(x.shape(), y.shape(), "perceptual_loss");
  const auto fy = features.forward(y);
  const auto fx = features.forward(x);
  auto l = l1_loss(fx, fy);
  return {l.value, features.backward(l.grad)};
}

constexpr double kProbEpsilon = 1e-7;

inline double clamp_prob(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

/// mean log(1 - D(fake)); gradient is wrt the discriminator outputs.
template <class T>
LossValue<T> adversarial_loss_g(const BasicTensor<T>& d_fake) {
  LossValue<T> out{0.0, BasicTensor<T>(d_fake.shape())};
  const double inv = 1.0 / static_cast<double>(d_fake.size());
  for (std::size_t i = 0; i < d_fake.size(); ++i) {
    const double raw = d_fake[i];
    const double p = clamp_prob(raw);
    out.value += std::log(1.0 - p) * inv;
    const bool clamped = raw < kProbEpsilon || raw > 1.0 - kProbEpsilon;
    out.grad[i] = static_cast<T>(clamped ? 0.0 : -inv / (1.0 - p));
  }
  return out;
}

/// -mean log D(real); gradient wrt the discriminator outputs.
template <class T>
LossValue<T> discriminator_real_term(const BasicTensor<T>& d_real) {
  LossValue<T> out{0.0, BasicTensor<T>(d_real.shape())};
  const double inv = 1.0 / static_cast<double>(d_real.size());
  for (std::size_t i = 0; i < d_real.size(); ++i) {
    const double raw = d_real[i];
    const double p = clamp_prob(raw);
    out.value -= std::log(p) * inv;
    const bool clamped = raw < kProbEpsilon || raw > 1.0 - kProbEpsilon;
    out.grad[i] = static_cast<T>(clamped ? 0.0 : -inv / p);
  }
  return out;
}

/// -mean log(1 - D(fake)); the negation of the generator's adversarial term.
template <class T>
LossValue<T> discriminator_fake_term(const BasicTensor<T>& d_fake) {
  auto out = adversarial_loss_g(d_fake);
  out.value = -out.value;
  for (auto& g : out.grad.values()) g = -g;
  return out;
}

template <class T>
struct DiscriminatorLoss {
  double value = 0.0;
  BasicTensor<T> grad_real;
  BasicTensor<T> grad_fake;
};

/// -mean log D(real) - mean log(1 - D(fake)).
template <class T>
DiscriminatorLoss<T> discriminator_loss(const BasicTensor<T>& d_real, const BasicTensor<T>& d_fake) {
  auto r = discriminator_real_term(d_real);
  auto f = discriminator_fake_term(d_fake);
  return {r.value + f.value, std::move(r.grad), std::move(f.grad)};
}

/// Peak signal-to-noise ratio in dB for images in [0, 1]; +infinity for identical images.
template <class T>
double psnr(const BasicTensor<T>& x, const BasicTensor<T>& y) {
  require_same_shape(x.shape(), y.shape(), "psnr");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - y[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace fdgan
