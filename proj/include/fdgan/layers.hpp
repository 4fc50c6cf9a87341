#pragma once

#include <Eigen/Core>

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <utility>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fdgan/tensor.hpp"

namespace fdgan {

namespace detail {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

}  // namespace detail

struct ConvSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;
  // Off for convs feeding a batch norm, whose mean subtraction would cancel the bias.
  bool bias = true;

  bool operator==(const ConvSpec&) const = default;
};

namespace detail {

inline std::size_t conv_out_dim(std::size_t in, const ConvSpec& s) {
  const auto padded = in + 2 * s.padding;
  if (padded < s.kernel || s.stride == 0) return 0;
  return (padded - s.kernel) / s.stride + 1;
}

// Range [lo, hi) of output columns whose input column ox*stride + v - padding lies inside [0, w).
inline std::pair<std::size_t, std::size_t> valid_columns(std::size_t v, std::size_t w,
                                                         std::size_t out_w, const ConvSpec& s) {
  const auto shift = static_cast<std::ptrdiff_t>(v) - static_cast<std::ptrdiff_t>(s.padding);
  const auto stride = static_cast<std::ptrdiff_t>(s.stride);
  std::ptrdiff_t lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
  std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(w) - 1 - shift;
  hi = hi < 0 ? 0 : hi / stride + 1;
  lo = std::min<std::ptrdiff_t>(lo, static_cast<std::ptrdiff_t>(out_w));
  hi = std::clamp<std::ptrdiff_t>(hi, lo, static_cast<std::ptrdiff_t>(out_w));
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Unfolds one C x H x W sample into a (C*k*k) x (Ho*Wo) patch matrix.
template <class T>
void im2col(const T* x, std::size_t channels, std::size_t h, std::size_t w, const ConvSpec& s,
            std::size_t out_h, std::size_t out_w, T* cols) {
  const std::size_t k = s.kernel;
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t u = 0; u < k; ++u) {
      for (std::size_t v = 0; v < k; ++v) {
        T* row = cols + ((c * k + u) * k + v) * plane;
        const auto [lo, hi] = valid_columns(v, w, out_w, s);
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * s.stride + u) -
                          static_cast<std::ptrdiff_t>(s.padding);
          T* dst = row + oy * out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + out_w, T{0});
            continue;
          }
          const T* src = x + (c * h + static_cast<std::size_t>(iy)) * w + v;
          std::fill(dst, dst + lo, T{0});
          for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] = src[static_cast<std::ptrdiff_t>(ox * s.stride) - static_cast<std::ptrdiff_t>(s.padding)];
          std::fill(dst + hi, dst + out_w, T{0});
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patch gradients back onto the sample.
template <class T>
void col2im(const T* cols, std::size_t channels, std::size_t h, std::size_t w, const ConvSpec& s,
            std::size_t out_h, std::size_t out_w, T* x) {
  const std::size_t k = s.kernel;
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t u = 0; u < k; ++u) {
      for (std::size_t v = 0; v < k; ++v) {
        const T* row = cols + ((c * k + u) * k + v) * plane;
        const auto [lo, hi] = valid_columns(v, w, out_w, s);
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * s.stride + u) -
                          static_cast<std::ptrdiff_t>(s.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          T* dst = x + (c * h + static_cast<std::size_t>(iy)) * w + v;
          const T* src = row + oy * out_w;
          for (std::size_t ox = lo; ox < hi; ++ox) dst[static_cast<std::ptrdiff_t>(ox * s.stride) - static_cast<std::ptrdiff_t>(s.padding)] += src[ox];
        }
      }
    }
  }
}

}  // namespace detail

/// 2-D cross-correlation layer with weights (C_out, C_in, k, k) and one bias per output channel.
template <class T>
class Conv2d {
 public:
  Conv2d() = default;

  explicit Conv2d(ConvSpec spec)
      : spec_(spec),
        weight_(Shape{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel}),
        bias_(Shape{1, spec.out_channels, 1, 1}) {
    if (spec.in_channels == 0 || spec.out_channels == 0 || spec.kernel == 0 || spec.stride == 0) {
      throw ShapeError("conv2d: channels, kernel and stride must be positive");
    }
    weight_.ensure_grad();
    bias_.ensure_grad();
  }

  /// He-normal weights scaled by fan-in, zero bias.
  Conv2d(ConvSpec spec, std::mt19937_64& rng) : Conv2d(spec) {
    const double fan_in = static_cast<double>(spec.in_channels * spec.kernel * spec.kernel);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (auto& v : weight_.values()) v = static_cast<T>(dist(rng));
  }

  template <class U>
  explicit Conv2d(const Conv2d<U>& other)
      : spec_(other.spec()), weight_(other.weight().template cast<T>()),
        bias_(other.bias().template cast<T>()) {
    weight_.ensure_grad();
    bias_.ensure_grad();
  }

  const ConvSpec& spec() const { return spec_; }
  /// Frozen layers only propagate gradients to their input.
  void set_frozen(bool on) { frozen_ = on; }
  bool frozen() const { return frozen_; }
  BasicTensor<T>& weight() { return weight_; }
  const BasicTensor<T>& weight() const { return weight_; }
  BasicTensor<T>& bias() { return bias_; }
  const BasicTensor<T>& bias() const { return bias_; }

  Shape output_shape(const Shape& in) const {
    if (in.c != spec_.in_channels) {
      throw ShapeError("conv2d: input " + in.str() + " has " + std::to_string(in.c) +
                       " channels, weights " + weight_.shape().str() + " expect " +
                       std::to_string(spec_.in_channels));
    }
    Shape out{in.n, spec_.out_channels, detail::conv_out_dim(in.h, spec_),
              detail::conv_out_dim(in.w, spec_)};
    if (out.h == 0 || out.w == 0) {
      throw ShapeError("conv2d: input " + in.str() + " too small for weights " +
                       weight_.shape().str());
    }
    return out;
  }

  /// Computes the correlation without caching the input.
  BasicTensor<T> apply(const BasicTensor<T>& x) const {
    const Shape out_shape = output_shape(x.shape());
    BasicTensor<T> out(out_shape);
    const std::size_t rows = spec_.in_channels * spec_.kernel * spec_.kernel;
    const std::size_t plane = out_shape.plane();
    std::vector<T> cols(rows * plane);
    detail::ConstMatrixMap<T> w(weight_.data(), spec_.out_channels, rows);
    const Shape in = x.shape();
    for (std::size_t n = 0; n < in.n; ++n) {
      detail::im2col(x.data() + n * in.c * in.plane(), in.c, in.h, in.w, spec_, out_shape.h,
                     out_shape.w, cols.data());
      detail::ConstMatrixMap<T> patches(cols.data(), rows, plane);
      detail::MatrixMap<T> o(out.data() + n * out_shape.c * plane, spec_.out_channels, plane);
      o.noalias() = w * patches;
      if (spec_.bias) {
        for (std::size_t oc = 0; oc < spec_.out_channels; ++oc) o.row(oc).array() += bias_[oc];
      }
    }
    return out;
  }

  BasicTensor<T> forward(const BasicTensor<T>& x) {
    auto out = apply(x);
    input_ = x;
    return out;
  }

  /// Gradient wrt `x`; accumulates weight and bias gradients.
  BasicTensor<T> backward_from(const BasicTensor<T>& x, const BasicTensor<T>& grad_out) {
    const Shape out_shape = output_shape(x.shape());
    require_same_shape(grad_out.shape(), out_shape, "conv2d backward");
    weight_.ensure_grad();
    bias_.ensure_grad();
    const Shape in = x.shape();
    const std::size_t rows = spec_.in_channels * spec_.kernel * spec_.kernel;
    const std::size_t plane = out_shape.plane();
    std::vector<T> cols(frozen_ ? 0 : rows * plane);
    std::vector<T> dcols(rows * plane);
    BasicTensor<T> grad_in(in);
    detail::ConstMatrixMap<T> w(weight_.data(), spec_.out_channels, rows);
    detail::MatrixMap<T> dw(weight_.grad().data(), spec_.out_channels, rows);
    for (std::size_t n = 0; n < in.n; ++n) {
      detail::ConstMatrixMap<T> g(grad_out.data() + n * out_shape.c * plane, spec_.out_channels,
                                  plane);
      if (!frozen_) {
        detail::im2col(x.data() + n * in.c * in.plane(), in.c, in.h, in.w, spec_, out_shape.h,
                       out_shape.w, cols.data());
        detail::ConstMatrixMap<T> patches(cols.data(), rows, plane);
        dw.noalias() += g * patches.transpose();
        if (spec_.bias) {
          // Fixed-order sums: a vectorized reduction would round differently with buffer alignment.
          const T* gp = grad_out.data() + n * out_shape.c * plane;
          for (std::size_t oc = 0; oc < spec_.out_channels; ++oc) {
            T acc = 0;
            for (std::size_t i = 0; i < plane; ++i) acc += gp[oc * plane + i];
            bias_.grad()[oc] += acc;
          }
        }
      }
      detail::MatrixMap<T> dc(dcols.data(), rows, plane);
      dc.noalias() = w.transpose() * g;
      detail::col2im(dcols.data(), in.c, in.h, in.w, spec_, out_shape.h, out_shape.w,
                     grad_in.data() + n * in.c * in.plane());
    }
    return grad_in;
  }

  BasicTensor<T> backward(const BasicTensor<T>& grad_out) {
    if (!input_) throw Error("conv2d backward: no cached forward input");
    return backward_from(*input_, grad_out);
  }

  void collect(ParamList<T>& params, const std::string& prefix) {
    params.push_back({prefix + ".weight", &weight_});
    if (spec_.bias) params.push_back({prefix + ".bias", &bias_});
  }
  void collect_buffers(ParamList<T>&, const std::string&) {}
  void set_training(bool) {}
  void clear_cache() { input_.reset(); }

 private:
  ConvSpec spec_;
  BasicTensor<T> weight_;
  BasicTensor<T> bias_;
  bool frozen_ = false;
  std::optional<BasicTensor<T>> input_;
};

template <class T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x, const Conv2d<T>& layer) {
  return layer.apply(x);
}

template <class T>
BasicTensor<T> conv2d_backward(const BasicTensor<T>& x, Conv2d<T>& layer,
                               const BasicTensor<T>& grad_out) {
  return layer.backward_from(x, grad_out);
}

/// Per-channel batch normalization. Train mode normalizes with batch statistics and updates the
/// running estimates; eval mode uses the running estimates only.
template <class T>
class BatchNorm2d {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm2d() = default;
  explicit BatchNorm2d(std::size_t channels)
      : gamma_(Shape{1, channels, 1, 1}, T{1}), beta_(Shape{1, channels, 1, 1}),
        running_mean_(Shape{1, channels, 1, 1}), running_var_(Shape{1, channels, 1, 1}, T{1}) {
    gamma_.ensure_grad();
    beta_.ensure_grad();
  }

  template <class U>
  explicit BatchNorm2d(const BatchNorm2d<U>& o)
      : gamma_(o.gamma().template cast<T>()), beta_(o.beta().template cast<T>()),
        running_mean_(o.running_mean().template cast<T>()),
        running_var_(o.running_var().template cast<T>()), training_(o.training()),
        track_running_(o.tracking()) {
    gamma_.ensure_grad();
    beta_.ensure_grad();
  }

  std::size_t channels() const { return gamma_.size(); }
  bool training() const { return training_; }
  bool tracking() const { return track_running_; }
  void set_training(bool on) { training_ = on; }
  /// When off, train-mode forwards still use batch statistics but leave running estimates alone.
  void set_tracking(bool on) { track_running_ = on; }

  BasicTensor<T>& gamma() { return gamma_; }
  const BasicTensor<T>& gamma() const { return gamma_; }
  BasicTensor<T>& beta() { return beta_; }
  const BasicTensor<T>& beta() const { return beta_; }
  BasicTensor<T>& running_mean() { return running_mean_; }
  const BasicTensor<T>& running_mean() const { return running_mean_; }
  BasicTensor<T>& running_var() { return running_var_; }
  const BasicTensor<T>& running_var() const { return running_var_; }

  BasicTensor<T> forward(const BasicTensor<T>& x) {
    const Shape s = x.shape();
    if (s.c != channels()) {
      throw ShapeError("batchnorm: input " + x.shape().str() + " vs " + std::to_string(channels()) +
                       " channels");
    }
    const std::size_t count = s.n * s.plane();
    Cache cache;
    cache.train = training_;
    cache.xhat = BasicTensor<T>(s);
    cache.inv_std.assign(s.c, 0.0);
    BasicTensor<T> out(s);
    for (std::size_t c = 0; c < s.c; ++c) {
      double mu = 0.0;
      double var = 0.0;
      if (training_) {
        for (std::size_t n = 0; n < s.n; ++n) {
          for (T v : x.plane(n, c)) mu += v;
        }
        mu /= static_cast<double>(count);
        for (std::size_t n = 0; n < s.n; ++n) {
          for (T v : x.plane(n, c)) var += (v - mu) * (v - mu);
        }
        var /= static_cast<double>(count);
        if (track_running_) {
          const double unbiased = count > 1 ? var * count / (count - 1) : var;
          running_mean_[c] = static_cast<T>((1 - kMomentum) * running_mean_[c] + kMomentum * mu);
          running_var_[c] =
              static_cast<T>((1 - kMomentum) * running_var_[c] + kMomentum * unbiased);
        }
      } else {
        mu = running_mean_[c];
        var = running_var_[c];
      }
      const double inv_std = 1.0 / std::sqrt(var + kEpsilon);
      cache.inv_std[c] = inv_std;
      for (std::size_t n = 0; n < s.n; ++n) {
        auto in = x.plane(n, c);
        auto xh = cache.xhat.plane(n, c);
        auto o = out.plane(n, c);
        for (std::size_t i = 0; i < in.size(); ++i) {
          const double h = (in[i] - mu) * inv_std;
          xh[i] = static_cast<T>(h);
          o[i] = static_cast<T>(gamma_[c] * h + beta_[c]);
        }
      }
    }
    cache_ = std::move(cache);
    return out;
  }

  BasicTensor<T> backward(const BasicTensor<T>& grad_out) {
    if (!cache_) throw Error("batchnorm backward: no cached forward");
    const Cache& cache = *cache_;
    const Shape s = cache.xhat.shape();
    require_same_shape(grad_out.shape(), s, "batchnorm backward");
    gamma_.ensure_grad();
    beta_.ensure_grad();
    const double count = static_cast<double>(s.n * s.plane());
    BasicTensor<T> grad_in(s);
    for (std::size_t c = 0; c < s.c; ++c) {
      double sum_g = 0.0;
      double sum_gx = 0.0;
      for (std::size_t n = 0; n < s.n; ++n) {
        auto g = grad_out.plane(n, c);
        auto xh = cache.xhat.plane(n, c);
        for (std::size_t i = 0; i < g.size(); ++i) {
          sum_g += g[i];
          sum_gx += static_cast<double>(g[i]) * xh[i];
        }
      }
      gamma_.grad()[c] += static_cast<T>(sum_gx);
      beta_.grad()[c] += static_cast<T>(sum_g);
      const double scale = gamma_[c] * cache.inv_std[c];
      for (std::size_t n = 0; n < s.n; ++n) {
        auto g = grad_out.plane(n, c);
        auto xh = cache.xhat.plane(n, c);
        auto gi = grad_in.plane(n, c);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (cache.train) {
            gi[i] = static_cast<T>(scale * (g[i] - sum_g / count - xh[i] * sum_gx / count));
          } else {
            gi[i] = static_cast<T>(scale * g[i]);
          }
        }
      }
    }
    return grad_in;
  }

  void collect(ParamList<T>& params, const std::string& prefix) {
    params.push_back({prefix + ".gamma", &gamma_});
    params.push_back({prefix + ".beta", &beta_});
  }
  void collect_buffers(ParamList<T>& buffers, const std::string& prefix) {
    buffers.push_back({prefix + ".running_mean", &running_mean_});
    buffers.push_back({prefix + ".running_var", &running_var_});
  }
  void clear_cache() { cache_.reset(); }

 private:
  struct Cache {
    bool train = true;
    BasicTensor<T> xhat;
    std::vector<double> inv_std;
  };

  BasicTensor<T> gamma_;
  BasicTensor<T> beta_;
  BasicTensor<T> running_mean_;
  BasicTensor<T> running_var_;
  bool training_ = true;
  bool track_running_ = true;
  std::optional<Cache> cache_;
};

/// Elementwise activation with slope `negative_slope` below zero (0 gives plain ReLU).
template <class T>
class LeakyRelu {
 public:
  explicit LeakyRelu(double negative_slope = 0.0) : slope_(negative_slope) {}
  template <class U>
  explicit LeakyRelu(const LeakyRelu<U>& o) : slope_(o.slope()) {}

  BasicTensor<T> forward(const BasicTensor<T>& x) {
    BasicTensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0 ? x[i] : static_cast<T>(slope_ * x[i]);
    input_ = x;
    return out;
  }

  BasicTensor<T> backward(const BasicTensor<T>& grad_out) {
    if (!input_) throw Error("relu backward: no cached forward input");
    require_same_shape(grad_out.shape(), input_->shape(), "relu backward");
    BasicTensor<T> g(grad_out.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = (*input_)[i] > 0 ? grad_out[i] : static_cast<T>(slope_ * grad_out[i]);
    }
    return g;
  }

  double slope() const { return slope_; }
  void collect(ParamList<T>&, const std::string&) {}
  void collect_buffers(ParamList<T>&, const std::string&) {}
  void set_training(bool) {}
  void clear_cache() { input_.reset(); }

 private:
  double slope_;
  std::optional<BasicTensor<T>> input_;
};

template <class T>
class Relu : public LeakyRelu<T> {
 public:
  Relu() : LeakyRelu<T>(0.0) {}
  template <class U>
  explicit Relu(const Relu<U>&) : LeakyRelu<T>(0.0) {}
};

template <class T>
class Sigmoid {
 public:
  Sigmoid() = default;
  template <class U>
  explicit Sigmoid(const Sigmoid<U>&) {}

  BasicTensor<T> forward(const BasicTensor<T>& x) {
    BasicTensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      out[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x[i]))));
    }
    output_ = out;
    return out;
  }

  BasicTensor<T> backward(const BasicTensor<T>& grad_out) {
    if (!output_) throw Error("sigmoid backward: no cached forward output");
    require_same_shape(grad_out.shape(), output_->shape(), "sigmoid backward");
    BasicTensor<T> g(grad_out.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T y = (*output_)[i];
      g[i] = grad_out[i] * y * (T{1} - y);
    }
    return g;
  }

  void collect(ParamList<T>&, const std::string&) {}
  void collect_buffers(ParamList<T>&, const std::string&) {}
  void set_training(bool) {}
  void clear_cache() { output_.reset(); }

 private:
  std::optional<BasicTensor<T>> output_;
};

/// 2x2 max pooling with stride 2; H and W must be even.
template <class T>
class MaxPool2x2 {
 public:
  MaxPool2x2() = default;
  template <class U>
  explicit MaxPool2x2(const MaxPool2x2<U>&) {}

  BasicTensor<T> forward(const BasicTensor<T>& x) {
    const Shape s = x.shape();
    if (s.h % 2 != 0 || s.w % 2 != 0 || s.h == 0 || s.w == 0) {
      throw ShapeError("maxpool2x2: spatial dims of " + s.str() + " must be even");
    }
    Shape os{s.n, s.c, s.h / 2, s.w / 2};
    BasicTensor<T> out(os);
    argmax_.assign(os.size(), 0);
    for (std::size_t n = 0; n < s.n; ++n) {
      for (std::size_t c = 0; c < s.c; ++c) {
        for (std::size_t y = 0; y < os.h; ++y) {
          for (std::size_t xw = 0; xw < os.w; ++xw) {
            std::size_t best = x.index(n, c, 2 * y, 2 * xw);
            for (std::size_t dy = 0; dy < 2; ++dy) {
              for (std::size_t dx = 0; dx < 2; ++dx) {
                const std::size_t idx = x.index(n, c, 2 * y + dy, 2 * xw + dx);
                if (x[idx] > x[best]) best = idx;
              }
            }
            const std::size_t o = out.index(n, c, y, xw);
            out[o] = x[best];
            argmax_[o] = best;
          }
        }
      }
    }
    in_shape_ = s;
    return out;
  }

  BasicTensor<T> backward(const BasicTensor<T>& grad_out) {
    if (!in_shape_) throw Error("maxpool2x2 backward: no cached forward");
    require_same_shape(grad_out.shape(),
                       Shape{in_shape_->n, in_shape_->c, in_shape_->h / 2, in_shape_->w / 2},
                       "maxpool2x2 backward");
    BasicTensor<T> g(*in_shape_);
    for (std::size_t o = 0; o < grad_out.size(); ++o) g[argmax_[o]] += grad_out[o];
    return g;
  }

  void collect(ParamList<T>&, const std::string&) {}
  void collect_buffers(ParamList<T>&, const std::string&) {}
  void set_training(bool) {}
  void clear_cache() { in_shape_.reset(); }

 private:
  std::vector<std::size_t> argmax_;
  std::optional<Shape> in_shape_;
};

template <class T>
BasicTensor<T> upsample_nearest2x(const BasicTensor<T>& x) {
  const Shape s = x.shape();
  BasicTensor<T> out(Shape{s.n, s.c, s.h * 2, s.w * 2});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < 2 * s.h; ++y) {
        for (std::size_t xw = 0; xw < 2 * s.w; ++xw) out(n, c, y, xw) = x(n, c, y / 2, xw / 2);
      }
    }
  }
  return out;
}

template <class T>
BasicTensor<T> upsample_nearest2x_backward(const BasicTensor<T>& grad_out) {
  const Shape s = grad_out.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("upsample backward: gradient " + s.str() + " has odd spatial dims");
  }
  BasicTensor<T> g(Shape{s.n, s.c, s.h / 2, s.w / 2});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t xw = 0; xw < s.w; ++xw) g(n, c, y / 2, xw / 2) += grad_out(n, c, y, xw);
      }
    }
  }
  return g;
}

template <class T>
class UpsampleNearest2x {
 public:
  UpsampleNearest2x() = default;
  template <class U>
  explicit UpsampleNearest2x(const UpsampleNearest2x<U>&) {}

  BasicTensor<T> forward(const BasicTensor<T>& x) { return upsample_nearest2x(x); }
  BasicTensor<T> backward(const BasicTensor<T>& g) { return upsample_nearest2x_backward(g); }
  void collect(ParamList<T>&, const std::string&) {}
  void collect_buffers(ParamList<T>&, const std::string&) {}
  void set_training(bool) {}
  void clear_cache() {}
};

template <class T>
BasicTensor<T> concat_channels(const std::vector<const BasicTensor<T>*>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape first = parts.front()->shape();
  std::size_t channels = 0;
  for (const auto* p : parts) {
    const Shape s = p->shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: " + s.str() + " vs " + first.str());
    }
    channels += s.c;
  }
  BasicTensor<T> out(Shape{first.n, channels, first.h, first.w});
  const std::size_t plane = first.plane();
  T* dst = out.data();
  for (std::size_t n = 0; n < first.n; ++n) {
    for (const auto* p : parts) {
      const std::size_t len = p->shape().c * plane;
      const T* src = p->data() + n * len;
      dst = std::copy(src, src + len, dst);
    }
  }
  return out;
}

template <class T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return concat_channels<T>({&a, &b});
}

/// Inverse of concat_channels: splits a tensor into consecutive channel groups.
template <class T>
std::vector<BasicTensor<T>> split_channels(const BasicTensor<T>& x,
                                           const std::vector<std::size_t>& channels) {
  const Shape s = x.shape();
  std::size_t total = 0;
  for (auto c : channels) total += c;
  if (total != s.c) {
    throw ShapeError("split_channels: " + s.str() + " cannot split into " + std::to_string(total) +
                     " channels");
  }
  std::vector<BasicTensor<T>> out;
  out.reserve(channels.size());
  for (auto c : channels) out.emplace_back(Shape{s.n, c, s.h, s.w});
  const std::size_t plane = s.plane();
  const T* src = x.data();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < channels.size(); ++i) {
      const std::size_t len = channels[i] * plane;
      std::copy(src, src + len, out[i].data() + n * len);
      src += len;
    }
  }
  return out;
}

/// Conv -> BatchNorm -> (Leaky)ReLU, the building unit of both networks.
template <class T>
class ConvBnAct {
 public:
  ConvBnAct() = default;
  ConvBnAct(ConvSpec spec, double slope, std::mt19937_64& rng)
      : conv_(without_bias(spec), rng), bn_(spec.out_channels), act_(slope) {}

  template <class U>
  explicit ConvBnAct(const ConvBnAct<U>& o)
      : conv_(o.conv()), bn_(o.bn()), act_(o.act().slope()) {}

  BasicTensor<T> forward(const BasicTensor<T>& x) {
    return act_.forward(bn_.forward(conv_.forward(x)));
  }
  BasicTensor<T> backward(const BasicTensor<T>& g) {
    return conv_.backward(bn_.backward(act_.backward(g)));
  }

  const Conv2d<T>& conv() const { return conv_; }
  Conv2d<T>& conv() { return conv_; }
  const BatchNorm2d<T>& bn() const { return bn_; }
  BatchNorm2d<T>& bn() { return bn_; }
  const LeakyRelu<T>& act() const { return act_; }

  void collect(ParamList<T>& params, const std::string& prefix) {
    conv_.collect(params, prefix + ".conv");
    bn_.collect(params, prefix + ".bn");
  }
  void collect_buffers(ParamList<T>& buffers, const std::string& prefix) {
    bn_.collect_buffers(buffers, prefix + ".bn");
  }
  void set_training(bool on) { bn_.set_training(on); }
  void clear_cache() {
    conv_.clear_cache();
    bn_.clear_cache();
    act_.clear_cache();
  }

 private:
  static ConvSpec without_bias(ConvSpec s) {
    s.bias = false;
    return s;
  }

  Conv2d<T> conv_;
  BatchNorm2d<T> bn_;
  LeakyRelu<T> act_;
};

}  // namespace fdgan
