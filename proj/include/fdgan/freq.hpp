#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fdgan/tensor.hpp"

// Low/high frequency decomposition used as discriminator priors. Both extractors are fixed linear
// maps, so each has an exact adjoint used for backpropagation.

namespace fdgan {

struct FreqConfig {
  std::size_t lf_size = 15;
  double lf_sigma = 3.0;

  bool operator==(const FreqConfig&) const = default;
};

/// Square kernel stored row-major, `size` x `size`.
struct Kernel2d {
  std::size_t size = 0;
  std::vector<double> weights;

  double at(std::ptrdiff_t dy, std::ptrdiff_t dx) const {
    const auto r = static_cast<std::ptrdiff_t>(size / 2);
    return weights[static_cast<std::size_t>((dy + r) * static_cast<std::ptrdiff_t>(size) + dx + r)];
  }
};

inline void validate_gaussian(std::size_t size, double sigma) {
  if (size < 3 || size % 2 == 0) {
    throw Error("gaussian kernel size must be odd and >= 3, got " + std::to_string(size));
  }
  if (!(sigma > 0.0)) throw Error("gaussian sigma must be positive");
}

/// Normalized 1-D Gaussian taps; the 2-D kernel is their outer product.
inline std::vector<double> gaussian_taps(std::size_t size, double sigma) {
  validate_gaussian(size, sigma);
  const auto r = static_cast<std::ptrdiff_t>(size / 2);
  std::vector<double> taps;
  double total = 0.0;
  for (std::ptrdiff_t u = -r; u <= r; ++u) {
    taps.push_back(std::exp(-static_cast<double>(u * u) / (2 * sigma * sigma)));
    total += taps.back();
  }
  for (auto& t : taps) t /= total;
  return taps;
}

inline Kernel2d gaussian_kernel(std::size_t size, double sigma) {
  validate_gaussian(size, sigma);
  const auto r = static_cast<std::ptrdiff_t>(size / 2);
  Kernel2d k{size, {}};
  double total = 0.0;
  for (std::ptrdiff_t u = -r; u <= r; ++u) {
    for (std::ptrdiff_t v = -r; v <= r; ++v) {
      k.weights.push_back(std::exp(-static_cast<double>(u * u + v * v) / (2 * sigma * sigma)));
      total += k.weights.back();
    }
  }
  for (auto& w : k.weights) w /= total;
  return k;
}

/// Mirror index without repeating the edge sample (…, 2, 1 | 0, 1, 2, … | n-2, n-3, …).
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  if (i < 0) i = -i;
  if (i >= m) i = 2 * m - 2 - i;
  return static_cast<std::size_t>(i);
}

namespace detail {

inline void require_reflectable(const Shape& s, std::size_t radius, const char* what) {
  if (s.h <= radius || s.w <= radius) {
    throw ShapeError(std::string(what) + ": image " + s.str() + " too small for reflect radius " +
                     std::to_string(radius));
  }
}

// Correlates every plane with `taps` along rows (horizontal) or columns, reflect-padded.
template <class T>
BasicTensor<T> correlate_1d(const BasicTensor<T>& x, const std::vector<double>& taps,
                            bool horizontal) {
  const Shape s = x.shape();
  const auto r = static_cast<std::ptrdiff_t>(taps.size() / 2);
  BasicTensor<T> out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      auto in = x.plane(n, c);
      auto o = out.plane(n, c);
      for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t xw = 0; xw < s.w; ++xw) {
          double acc = 0.0;
          for (std::ptrdiff_t u = -r; u <= r; ++u) {
            const std::size_t yy = horizontal ? y : reflect_index(static_cast<std::ptrdiff_t>(y) + u, s.h);
            const std::size_t xx = horizontal ? reflect_index(static_cast<std::ptrdiff_t>(xw) + u, s.w) : xw;
            acc += taps[static_cast<std::size_t>(u + r)] * in[yy * s.w + xx];
          }
          o[y * s.w + xw] = static_cast<T>(acc);
        }
      }
    }
  }
  return out;
}

template <class T>
BasicTensor<T> correlate_1d_adjoint(const BasicTensor<T>& g, const std::vector<double>& taps,
                                    bool horizontal) {
  const Shape s = g.shape();
  const auto r = static_cast<std::ptrdiff_t>(taps.size() / 2);
  BasicTensor<T> out(s);
  std::vector<double> acc(s.plane());
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      auto in = g.plane(n, c);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t xw = 0; xw < s.w; ++xw) {
          const double gv = in[y * s.w + xw];
          for (std::ptrdiff_t u = -r; u <= r; ++u) {
            const std::size_t yy = horizontal ? y : reflect_index(static_cast<std::ptrdiff_t>(y) + u, s.h);
            const std::size_t xx = horizontal ? reflect_index(static_cast<std::ptrdiff_t>(xw) + u, s.w) : xw;
            acc[yy * s.w + xx] += taps[static_cast<std::size_t>(u + r)] * gv;
          }
        }
      }
      auto o = out.plane(n, c);
      for (std::size_t i = 0; i < acc.size(); ++i) o[i] = static_cast<T>(acc[i]);
    }
  }
  return out;
}

constexpr double kLaplacian[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};

}  // namespace detail

/// Gaussian blur of every channel (separable), reflect-padded.
template <class T>
BasicTensor<T> extract_lf(const BasicTensor<T>& img, const FreqConfig& cfg = {}) {
  const auto taps = gaussian_taps(cfg.lf_size, cfg.lf_sigma);
  detail::require_reflectable(img.shape(), cfg.lf_size / 2, "extract_lf");
  return detail::correlate_1d(detail::correlate_1d(img, taps, true), taps, false);
}

template <class T>
BasicTensor<T> extract_lf_backward(const BasicTensor<T>& grad, const FreqConfig& cfg = {}) {
  const auto taps = gaussian_taps(cfg.lf_size, cfg.lf_sigma);
  detail::require_reflectable(grad.shape(), cfg.lf_size / 2, "extract_lf backward");
  return detail::correlate_1d_adjoint(detail::correlate_1d_adjoint(grad, taps, false), taps, true);
}

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

template <class T>
BasicTensor<T> to_grayscale(const BasicTensor<T>& img) {
  const Shape s = img.shape();
  if (s.c != 3) throw ShapeError("to_grayscale: expected 3 channels, got " + s.str());
  BasicTensor<T> out(Shape{s.n, 1, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    auto r = img.plane(n, 0);
    auto g = img.plane(n, 1);
    auto b = img.plane(n, 2);
    auto o = out.plane(n, 0);
    for (std::size_t i = 0; i < o.size(); ++i) {
      o[i] = static_cast<T>(kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i]);
    }
  }
  return out;
}

template <class T>
BasicTensor<T> to_grayscale_backward(const BasicTensor<T>& grad) {
  const Shape s = grad.shape();
  if (s.c != 1) throw ShapeError("to_grayscale backward: expected 1 channel, got " + s.str());
  BasicTensor<T> out(Shape{s.n, 3, s.h, s.w});
  const double weights[3] = {kLumaR, kLumaG, kLumaB};
  for (std::size_t n = 0; n < s.n; ++n) {
    auto g = grad.plane(n, 0);
    for (std::size_t c = 0; c < 3; ++c) {
      auto o = out.plane(n, c);
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = static_cast<T>(weights[c] * g[i]);
    }
  }
  return out;
}

/// 4-neighbour Laplacian of every channel, reflect-padded.
template <class T>
BasicTensor<T> laplacian(const BasicTensor<T>& x) {
  const Shape s = x.shape();
  detail::require_reflectable(s, 1, "laplacian");
  BasicTensor<T> out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      auto in = x.plane(n, c);
      auto o = out.plane(n, c);
      for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t xw = 0; xw < s.w; ++xw) {
          double acc = 0.0;
          for (std::ptrdiff_t u = -1; u <= 1; ++u) {
            for (std::ptrdiff_t v = -1; v <= 1; ++v) {
              const double k = detail::kLaplacian[u + 1][v + 1];
              if (k == 0.0) continue;
              acc += k * in[reflect_index(static_cast<std::ptrdiff_t>(y) + u, s.h) * s.w +
                            reflect_index(static_cast<std::ptrdiff_t>(xw) + v, s.w)];
            }
          }
          o[y * s.w + xw] = static_cast<T>(acc);
        }
      }
    }
  }
  return out;
}

template <class T>
BasicTensor<T> laplacian_backward(const BasicTensor<T>& grad) {
  const Shape s = grad.shape();
  detail::require_reflectable(s, 1, "laplacian backward");
  BasicTensor<T> out(s);
  std::vector<double> acc(s.plane());
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      auto g = grad.plane(n, c);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t xw = 0; xw < s.w; ++xw) {
          for (std::ptrdiff_t u = -1; u <= 1; ++u) {
            for (std::ptrdiff_t v = -1; v <= 1; ++v) {
              const double k = detail::kLaplacian[u + 1][v + 1];
              if (k == 0.0) continue;
              acc[reflect_index(static_cast<std::ptrdiff_t>(y) + u, s.h) * s.w +
                  reflect_index(static_cast<std::ptrdiff_t>(xw) + v, s.w)] += k * g[y * s.w + xw];
            }
          }
        }
      }
      auto o = out.plane(n, c);
      for (std::size_t i = 0; i < acc.size(); ++i) o[i] = static_cast<T>(acc[i]);
    }
  }
  return out;
}

/// Signed edge response of the luma channel.
template <class T>
BasicTensor<T> extract_hf(const BasicTensor<T>& img) {
  return laplacian(to_grayscale(img));
}

template <class T>
BasicTensor<T> extract_hf_backward(const BasicTensor<T>& grad) {
  return to_grayscale_backward(laplacian_backward(grad));
}

/// Low-frequency RGB image and signed high-frequency luma edges of one image.
template <class T>
struct FrequencyPair {
  BasicTensor<T> lf;
  BasicTensor<T> hf;
};

template <class T>
FrequencyPair<T> decompose(const BasicTensor<T>& img, const FreqConfig& cfg = {}) {
  return {extract_lf(img, cfg), extract_hf(img)};
}

/// Maps HF values from [-4, 4] onto [0, 1] for viewing; clamps outside that range.
template <class T>
BasicTensor<T> hf_for_display(const BasicTensor<T>& hf) {
  BasicTensor<T> out(hf.shape());
  for (std::size_t i = 0; i < hf.size(); ++i) {
    out[i] = static_cast<T>(std::clamp((static_cast<double>(hf[i]) + 4.0) / 8.0, 0.0, 1.0));
  }
  return out;
}

}  // namespace fdgan
