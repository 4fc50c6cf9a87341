#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fdgan/tensor.hpp"

namespace fdgan {

/// Atmospheric light and scattering coefficient of a homogeneous atmosphere.
struct HazeParams {
  double atmospheric_light = 1.0;
  double beta = 1.0;
};

struct HazeRanges {
  double light_min = 0.5;
  double light_max = 1.0;
  double beta_min = 1.2;
  double beta_max = 2.0;
};

/// t(x) = exp(-beta * d(x)).
template <class T>
BasicTensor<T> transmission_from_depth(const BasicTensor<T>& depth, double beta) {
  if (!(beta > 0.0)) throw Error("transmission_from_depth: beta must be positive");
  if (depth.shape().c != 1) {
    throw ShapeError("transmission_from_depth: depth must have 1 channel, got " + depth.shape().str());
  }
  BasicTensor<T> t(depth.shape());
  for (std::size_t i = 0; i < depth.size(); ++i) {
    t[i] = static_cast<T>(std::exp(-beta * static_cast<double>(depth[i])));
  }
  return t;
}

/// I(x) = J(x) t(x) + A (1 - t(x)), with the same A for every channel.
template <class T>
BasicTensor<T> synthesize_hazy(const BasicTensor<T>& clear, const BasicTensor<T>& transmission,
                               double atmospheric_light) {
  const Shape s = clear.shape();
  const Shape ts = transmission.shape();
  if (ts.n != s.n || ts.c != 1 || ts.h != s.h || ts.w != s.w) {
    throw ShapeError("synthesize_hazy: image " + s.str() + " vs transmission " + ts.str());
  }
  BasicTensor<T> hazy(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    auto t = transmission.plane(n, 0);
    for (std::size_t c = 0; c < s.c; ++c) {
      auto j = clear.plane(n, c);
      auto out = hazy.plane(n, c);
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double tv = t[i];
        out[i] = static_cast<T>(j[i] * tv + atmospheric_light * (1.0 - tv));
      }
    }
  }
  return hazy;
}

template <class Rng>
HazeParams sample_haze_params(Rng& rng, const HazeRanges& ranges = {}) {
  std::uniform_real_distribution<double> light(ranges.light_min, ranges.light_max);
  std::uniform_real_distribution<double> beta(ranges.beta_min, ranges.beta_max);
  HazeParams p;
  p.atmospheric_light = light(rng);
  p.beta = beta(rng);
  return p;
}

struct PairedSample {
  std::size_t id = 0;
  Tensor hazy;          // 1x3xHxW
  Tensor clear;         // 1x3xHxW
  Tensor transmission;  // 1x1xHxW
  Tensor depth;         // 1x1xHxW
  HazeParams params;
};

namespace detail {

struct Rgb {
  double r, g, b;
};

template <class Rng>
Rgb random_color(Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  const double r = d(rng);
  const double g = d(rng);
  const double b = d(rng);
  return {r, g, b};
}

inline void paint(Tensor& img, std::size_t y, std::size_t x, const Rgb& c) {
  img(0, 0, y, x) = static_cast<float>(c.r);
  img(0, 1, y, x) = static_cast<float>(c.g);
  img(0, 2, y, x) = static_cast<float>(c.b);
}

}  // namespace detail

/// Procedural clear scene plus matching depth: a gradient backdrop receding with a depth ramp and a
/// handful of textured rectangles and discs, each at its own (nearer) depth.
inline void render_scene(std::mt19937_64& rng, std::size_t h, std::size_t w, Tensor& clear,
                         Tensor& depth) {
  using detail::Rgb;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  clear = Tensor(Shape{1, 3, h, w});
  depth = Tensor(Shape{1, 1, h, w});

  const Rgb top = detail::random_color(rng, 0.3, 1.0);
  const Rgb bottom = detail::random_color(rng, 0.0, 0.7);
  const double angle = unit(rng) * 2.0 * std::numbers::pi;
  const double gx = std::cos(angle);
  const double gy = std::sin(angle);
  const bool radial = unit(rng) < 0.3;
  const double cx = unit(rng);
  const double cy = unit(rng);
  const double stripe_freq = 2.0 + 10.0 * unit(rng);
  const double stripe_amp = 0.08 * unit(rng);

  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double u = (x + 0.5) / static_cast<double>(w);
      const double v = (y + 0.5) / static_cast<double>(h);
      const double a = std::clamp(0.5 + 0.5 * (gx * (u - 0.5) + gy * (v - 0.5)) * 2.0, 0.0, 1.0);
      const double texture = stripe_amp * std::sin(2.0 * std::numbers::pi * stripe_freq * (u + v));
      const Rgb c{a * top.r + (1 - a) * bottom.r + texture, a * top.g + (1 - a) * bottom.g + texture,
                  a * top.b + (1 - a) * bottom.b + texture};
      detail::paint(clear, y, x, c);
      // Far at the top of the frame, near at the bottom, or receding from a vanishing point.
      depth(0, 0, y, x) = static_cast<float>(
          radial ? 1.0 - std::min(1.0, std::hypot(u - cx, v - cy) / 0.9) : 1.0 - 0.8 * v);
    }
  }

  std::uniform_int_distribution<int> object_count(3, 6);
  const int objects = object_count(rng);
  for (int k = 0; k < objects; ++k) {
    const Rgb base = detail::random_color(rng);
    const bool disc = unit(rng) < 0.5;
    const double ox = unit(rng);
    const double oy = unit(rng);
    const double sx = 0.08 + 0.25 * unit(rng);
    const double sy = 0.08 + 0.25 * unit(rng);
    const double obj_depth = 0.05 + 0.6 * unit(rng);
    const double check = 3.0 + 6.0 * unit(rng);
    const double check_amp = unit(rng) < 0.5 ? 0.15 * unit(rng) : 0.0;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double u = (x + 0.5) / static_cast<double>(w);
        const double v = (y + 0.5) / static_cast<double>(h);
        const double du = (u - ox) / sx;
        const double dv = (v - oy) / sy;
        const bool inside = disc ? du * du + dv * dv <= 1.0 : std::abs(du) <= 1.0 && std::abs(dv) <= 1.0;
        if (!inside) continue;
        const double pattern =
            ((static_cast<int>(std::floor(du * check)) + static_cast<int>(std::floor(dv * check))) & 1)
                ? check_amp
                : -check_amp;
        detail::paint(clear, y, x, {base.r + pattern, base.g + pattern, base.b + pattern});
        depth(0, 0, y, x) = static_cast<float>(std::min<double>(depth(0, 0, y, x), obj_depth));
      }
    }
  }

  for (auto& v : clear.values()) v = std::clamp(v, 0.0f, 1.0f);
  float lo = depth[0];
  float hi = depth[0];
  for (float d : depth.values()) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  const float span = hi - lo;
  for (auto& d : depth.values()) d = span > 0 ? (d - lo) / span : 0.0f;
}

/// Per-sample stream derived from (seed, index), independent of generation order.
inline std::mt19937_64 sample_rng(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

inline PairedSample generate_sample(std::size_t index, std::size_t h, std::size_t w,
                                    std::uint64_t seed, const HazeRanges& ranges = {}) {
  auto rng = sample_rng(seed, index);
  PairedSample s;
  s.id = index;
  render_scene(rng, h, w, s.clear, s.depth);
  s.params = sample_haze_params(rng, ranges);
  s.transmission = transmission_from_depth(s.depth, s.params.beta);
  s.hazy = synthesize_hazy(s.clear, s.transmission, s.params.atmospheric_light);
  return s;
}

inline std::vector<PairedSample> generate_toy_corpus(std::size_t count, std::size_t h, std::size_t w,
                                                     std::uint64_t seed,
                                                     const HazeRanges& ranges = {},
                                                     std::size_t first_index = 0) {
  if (count < 1) throw Error("generate_toy_corpus: count must be at least 1");
  if (h < 16 || w < 16) {
    throw Error("generate_toy_corpus: image size " + std::to_string(h) + "x" + std::to_string(w) +
                " is below the 16 px minimum");
  }
  std::vector<PairedSample> corpus;
  corpus.reserve(count);
  for (std::size_t i = 0; i < count; ++i) corpus.push_back(generate_sample(first_index + i, h, w, seed, ranges));
  return corpus;
}

}  // namespace fdgan
