#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "fdgan/freq.hpp"
#include "fdgan/layers.hpp"
#include "fdgan/tensor.hpp"

namespace fdgan {

/// Channel widths of both networks.
struct NetConfig {
  std::size_t stem = 16;
  std::size_t growth = 8;
  std::size_t block_layers = 4;
  std::size_t bottleneck = 64;
  std::array<std::size_t, 3> decoder{32, 16, 16};
  std::array<std::size_t, 4> disc{16, 32, 64, 64};

  bool operator==(const NetConfig&) const = default;
};

/// What the discriminator sees next to the image itself.
enum class DiscInput { ImageOnly, HfOnly, LfOnly, Full };

inline std::size_t input_channels(DiscInput v) {
  switch (v) {
    case DiscInput::ImageOnly: return 3;
    case DiscInput::HfOnly: return 4;
    case DiscInput::LfOnly: return 6;
    case DiscInput::Full: return 7;
  }
  return 0;
}

inline std::string to_string(DiscInput v) {
  switch (v) {
    case DiscInput::ImageOnly: return "image";
    case DiscInput::HfOnly: return "hf";
    case DiscInput::LfOnly: return "lf";
    case DiscInput::Full: return "full";
  }
  return "?";
}

inline DiscInput disc_input_from_string(const std::string& s) {
  if (s == "image") return DiscInput::ImageOnly;
  if (s == "hf") return DiscInput::HfOnly;
  if (s == "lf") return DiscInput::LfOnly;
  if (s == "full") return DiscInput::Full;
  throw Error("unknown discriminator input '" + s + "' (expected image, hf, lf or full)");
}

/// Each inner layer consumes the concatenation of the block input and every earlier layer output;
/// the block emits the concatenation of all of them.
template <class T>
class DenseBlock {
 public:
  DenseBlock() = default;
  DenseBlock(std::size_t in_channels, std::size_t growth, std::size_t layers, std::mt19937_64& rng)
      : in_channels_(in_channels), growth_(growth) {
    for (std::size_t i = 0; i < layers; ++i) {
      layers_.emplace_back(ConvSpec{layer_input_channels(i), growth, 3, 1, 1}, 0.0, rng);
    }
  }

  template <class U>
  explicit DenseBlock(const DenseBlock<U>& o)
      : in_channels_(o.in_channels()), growth_(o.growth()) {
    for (const auto& l : o.layers()) layers_.emplace_back(l);
  }

  std::size_t in_channels() const { return in_channels_; }
  std::size_t growth() const { return growth_; }
  std::size_t layer_input_channels(std::size_t i) const { return in_channels_ + i * growth_; }
  std::size_t out_channels() const { return in_channels_ + layers_.size() * growth_; }
  const std::vector<ConvBnAct<T>>& layers() const { return layers_; }
  std::vector<ConvBnAct<T>>& layers() { return layers_; }

  BasicTensor<T> forward(const BasicTensor<T>& x) {
    std::vector<BasicTensor<T>> feats;
    feats.reserve(layers_.size() + 1);
    feats.push_back(x);
    for (auto& layer : layers_) {
      std::vector<const BasicTensor<T>*> parts;
      for (const auto& f : feats) parts.push_back(&f);
      feats.push_back(layer.forward(concat_channels(parts)));
    }
    std::vector<const BasicTensor<T>*> parts;
    for (const auto& f : feats) parts.push_back(&f);
    return concat_channels(parts);
  }

  BasicTensor<T> backward(const BasicTensor<T>& grad) {
    std::vector<std::size_t> widths{in_channels_};
    widths.insert(widths.end(), layers_.size(), growth_);
    auto grads = split_channels(grad, widths);
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const auto g_in = layers_[i].backward(grads[i + 1]);
      std::vector<std::size_t> in_widths{in_channels_};
      in_widths.insert(in_widths.end(), i, growth_);
      auto parts = split_channels(g_in, in_widths);
      for (std::size_t k = 0; k < parts.size(); ++k) grads[k] += parts[k];
    }
    return grads[0];
  }

  void collect(ParamList<T>& params, const std::string& prefix) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].collect(params, prefix + ".layer" + std::to_string(i));
    }
  }
  void collect_buffers(ParamList<T>& buffers, const std::string& prefix) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].collect_buffers(buffers, prefix + ".layer" + std::to_string(i));
    }
  }
  void set_training(bool on) {
    for (auto& l : layers_) l.set_training(on);
  }

 private:
  std::size_t in_channels_ = 0;
  std::size_t growth_ = 0;
  std::vector<ConvBnAct<T>> layers_;
};

/// Densely connected encoder-decoder mapping a hazy image straight to a clear one.
///
/// stem conv -> 3 x (dense block -> 2x2 max pool) -> bottleneck conv at 1/8 resolution
/// -> 3 x (nearest 2x upsample, concat the dense block output of that resolution -> conv)
/// -> conv to RGB -> sigmoid
template <class T>
class Generator {
 public:
  static constexpr std::size_t kStages = 3;
  static constexpr std::size_t kDivisor = 8;

  Generator() = default;
  Generator(const NetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    std::mt19937_64 rng(seed);
    stem_ = ConvBnAct<T>(ConvSpec{3, cfg.stem, 3, 1, 1}, 0.0, rng);
    std::size_t ch = cfg.stem;
    for (std::size_t i = 0; i < kStages; ++i) {
      blocks_.emplace_back(ch, cfg.growth, cfg.block_layers, rng);
      ch = blocks_.back().out_channels();
    }
    pools_.resize(kStages);
    bottleneck_ = ConvBnAct<T>(ConvSpec{ch, cfg.bottleneck, 3, 1, 1}, 0.0, rng);
    ch = cfg.bottleneck;
    for (std::size_t i = 0; i < kStages; ++i) {
      const std::size_t skip = blocks_[kStages - 1 - i].out_channels();
      decoder_.emplace_back(ConvSpec{ch + skip, cfg.decoder[i], 3, 1, 1}, 0.0, rng);
      ch = cfg.decoder[i];
    }
    head_ = Conv2d<T>(ConvSpec{ch, 3, 3, 1, 1}, rng);
  }

  template <class U>
  explicit Generator(const Generator<U>& o)
      : cfg_(o.config()), stem_(o.stem()), pools_(kStages), bottleneck_(o.bottleneck()),
        head_(o.head()) {
    for (const auto& b : o.blocks()) blocks_.emplace_back(b);
    for (const auto& d : o.decoder()) decoder_.emplace_back(d);
  }

  const NetConfig& config() const { return cfg_; }
  const ConvBnAct<T>& stem() const { return stem_; }
  const std::vector<DenseBlock<T>>& blocks() const { return blocks_; }
  const ConvBnAct<T>& bottleneck() const { return bottleneck_; }
  const std::vector<ConvBnAct<T>>& decoder() const { return decoder_; }
  const Conv2d<T>& head() const { return head_; }
  /// Shape of the bottleneck activation from the most recent forward.
  const Shape& deepest_shape() const { return deepest_; }

  BasicTensor<T> forward(const BasicTensor<T>& x) {
    const Shape s = x.shape();
    if (s.c != 3) throw ShapeError("generator: expected 3-channel input, got " + s.str());
    if (s.h == 0 || s.w == 0 || s.h % kDivisor != 0 || s.w % kDivisor != 0) {
      throw ShapeError("generator: input " + s.str() + " height and width must be multiples of " +
                       std::to_string(kDivisor));
    }
    auto h = stem_.forward(x);
    std::vector<BasicTensor<T>> skips;
    for (std::size_t i = 0; i < kStages; ++i) {
      skips.push_back(blocks_[i].forward(h));
      h = pools_[i].forward(skips.back());
    }
    h = bottleneck_.forward(h);
    deepest_ = h.shape();
    for (std::size_t i = 0; i < kStages; ++i) {
      h = decoder_[i].forward(concat_channels(upsample_nearest2x(h), skips[kStages - 1 - i]));
    }
    return sigmoid_.forward(head_.forward(h));
  }

  BasicTensor<T> backward(const BasicTensor<T>& grad) {
    auto g = head_.backward(sigmoid_.backward(grad));
    std::vector<BasicTensor<T>> skip_grads(kStages);
    for (std::size_t i = kStages; i-- > 0;) {
      const std::size_t skip = blocks_[kStages - 1 - i].out_channels();
      const auto gin = decoder_[i].backward(g);
      auto parts = split_channels(gin, {gin.shape().c - skip, skip});
      skip_grads[kStages - 1 - i] = std::move(parts[1]);
      g = upsample_nearest2x_backward(parts[0]);
    }
    g = bottleneck_.backward(g);
    for (std::size_t i = kStages; i-- > 0;) {
      auto gb = pools_[i].backward(g);
      gb += skip_grads[i];
      g = blocks_[i].backward(gb);
    }
    return stem_.backward(g);
  }

  void collect(ParamList<T>& params, const std::string& prefix) {
    stem_.collect(params, prefix + ".stem");
    for (std::size_t i = 0; i < kStages; ++i) blocks_[i].collect(params, prefix + ".block" + std::to_string(i));
    bottleneck_.collect(params, prefix + ".bottleneck");
    for (std::size_t i = 0; i < kStages; ++i) decoder_[i].collect(params, prefix + ".decoder" + std::to_string(i));
    head_.collect(params, prefix + ".head");
  }
  void collect_buffers(ParamList<T>& buffers, const std::string& prefix) {
    stem_.collect_buffers(buffers, prefix + ".stem");
    for (std::size_t i = 0; i < kStages; ++i) {
      blocks_[i].collect_buffers(buffers, prefix + ".block" + std::to_string(i));
    }
    bottleneck_.collect_buffers(buffers, prefix + ".bottleneck");
    for (std::size_t i = 0; i < kStages; ++i) {
      decoder_[i].collect_buffers(buffers, prefix + ".decoder" + std::to_string(i));
    }
  }
  ParamList<T> parameters() {
    ParamList<T> p;
    collect(p, "gen");
    return p;
  }
  ParamList<T> buffers() {
    ParamList<T> b;
    collect_buffers(b, "gen");
    return b;
  }

  void set_training(bool on) {
    stem_.set_training(on);
    for (auto& b : blocks_) b.set_training(on);
    bottleneck_.set_training(on);
    for (auto& d : decoder_) d.set_training(on);
  }

 private:
  NetConfig cfg_;
  ConvBnAct<T> stem_;
  std::vector<DenseBlock<T>> blocks_;
  std::vector<MaxPool2x2<T>> pools_;
  ConvBnAct<T> bottleneck_;
  std::vector<ConvBnAct<T>> decoder_;
  Conv2d<T> head_;
  Sigmoid<T> sigmoid_;
  Shape deepest_;
};

/// Image, optionally followed by its low- and high-frequency components, along channels.
template <class T>
struct FusionSample {
  DiscInput variant = DiscInput::Full;
  BasicTensor<T> channels;
};

template <class T>
FusionSample<T> assemble_fusion_input(const BasicTensor<T>& img, DiscInput variant,
                                      const FreqConfig& freq = {}) {
  if (img.shape().c != 3) throw ShapeError("fusion input: expected RGB image, got " + img.shape().str());
  switch (variant) {
    case DiscInput::ImageOnly: return {variant, img};
    case DiscInput::HfOnly: return {variant, concat_channels(img, extract_hf(img))};
    case DiscInput::LfOnly: return {variant, concat_channels(img, extract_lf(img, freq))};
    case DiscInput::Full: {
      const auto lf = extract_lf(img, freq);
      const auto hf = extract_hf(img);
      return {variant, concat_channels<T>({&img, &lf, &hf})};
    }
  }
  throw Error("fusion input: bad variant");
}

/// Gradient wrt the image given the gradient wrt the assembled sample.
template <class T>
BasicTensor<T> assemble_fusion_input_backward(const BasicTensor<T>& grad, DiscInput variant,
                                              const FreqConfig& freq = {}) {
  switch (variant) {
    case DiscInput::ImageOnly: return grad;
    case DiscInput::HfOnly: {
      auto parts = split_channels(grad, {3, 1});
      parts[0] += extract_hf_backward(parts[1]);
      return parts[0];
    }
    case DiscInput::LfOnly: {
      auto parts = split_channels(grad, {3, 3});
      parts[0] += extract_lf_backward(parts[1], freq);
      return parts[0];
    }
    case DiscInput::Full: {
      auto parts = split_channels(grad, {3, 3, 1});
      parts[0] += extract_lf_backward(parts[1], freq);
      parts[0] += extract_hf_backward(parts[2]);
      return parts[0];
    }
  }
  throw Error("fusion input backward: bad variant");
}

/// Four strided conv/BN/LeakyReLU stages, then a 1-channel conv and sigmoid averaged over space to
/// a single probability per sample (N x 1 x 1 x 1).
template <class T>
class Discriminator {
 public:
  static constexpr double kSlope = 0.2;
  static constexpr std::size_t kMinSize = 16;

  Discriminator() = default;
  Discriminator(DiscInput variant, const NetConfig& cfg, std::uint64_t seed)
      : variant_(variant), cfg_(cfg) {
    std::mt19937_64 rng(seed);
    std::size_t ch = input_channels(variant);
    for (std::size_t w : cfg.disc) {
      stages_.emplace_back(ConvSpec{ch, w, 4, 2, 1}, kSlope, rng);
      ch = w;
    }
    head_ = Conv2d<T>(ConvSpec{ch, 1, 3, 1, 1}, rng);
  }

  template <class U>
  explicit Discriminator(const Discriminator<U>& o)
      : variant_(o.variant()), cfg_(o.config()), head_(o.head()) {
    for (const auto& s : o.stages()) stages_.emplace_back(s);
  }

  DiscInput variant() const { return variant_; }
  const NetConfig& config() const { return cfg_; }
  const std::vector<ConvBnAct<T>>& stages() const { return stages_; }
  const Conv2d<T>& head() const { return head_; }

  BasicTensor<T> forward(const BasicTensor<T>& x) {
    const Shape s = x.shape();
    if (s.c != input_channels(variant_)) {
      throw ShapeError("discriminator (" + to_string(variant_) + ") expects " +
                       std::to_string(input_channels(variant_)) + " channels, got " + s.str());
    }
    if (s.h < kMinSize || s.w < kMinSize) {
      throw ShapeError("discriminator: input " + s.str() + " smaller than 16x16");
    }
    auto h = x;
    for (auto& st : stages_) h = st.forward(h);
    const auto p = sigmoid_.forward(head_.forward(h));
    map_shape_ = p.shape();
    BasicTensor<T> out(Shape{s.n, 1, 1, 1});
    for (std::size_t n = 0; n < s.n; ++n) {
      double acc = 0.0;
      for (T v : p.plane(n, 0)) acc += v;
      out[n] = static_cast<T>(acc / static_cast<double>(p.shape().plane()));
    }
    return out;
  }

  BasicTensor<T> forward(const FusionSample<T>& sample) {
    if (sample.variant != variant_) {
      throw ShapeError("discriminator is " + to_string(variant_) + " but sample is " +
                       to_string(sample.variant));
    }
    return forward(sample.channels);
  }

  BasicTensor<T> backward(const BasicTensor<T>& grad) {
    require_same_shape(grad.shape(), Shape{map_shape_.n, 1, 1, 1}, "discriminator backward");
    BasicTensor<T> g(map_shape_);
    const T scale = static_cast<T>(1.0 / static_cast<double>(map_shape_.plane()));
    for (std::size_t n = 0; n < map_shape_.n; ++n) {
      for (auto& v : g.plane(n, 0)) v = grad[n] * scale;
    }
    auto h = head_.backward(sigmoid_.backward(g));
    for (std::size_t i = stages_.size(); i-- > 0;) h = stages_[i].backward(h);
    return h;
  }

  void collect(ParamList<T>& params, const std::string& prefix) {
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      stages_[i].collect(params, prefix + ".stage" + std::to_string(i));
    }
    head_.collect(params, prefix + ".head");
  }
  void collect_buffers(ParamList<T>& buffers, const std::string& prefix) {
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      stages_[i].collect_buffers(buffers, prefix + ".stage" + std::to_string(i));
    }
  }
  ParamList<T> parameters() {
    ParamList<T> p;
    collect(p, "disc");
    return p;
  }
  ParamList<T> buffers() {
    ParamList<T> b;
    collect_buffers(b, "disc");
    return b;
  }

  void set_training(bool on) {
    for (auto& s : stages_) s.set_training(on);
  }
  void set_stat_tracking(bool on) {
    for (auto& s : stages_) s.bn().set_tracking(on);
  }

 private:
  DiscInput variant_ = DiscInput::Full;
  NetConfig cfg_;
  std::vector<ConvBnAct<T>> stages_;
  Conv2d<T> head_;
  Sigmoid<T> sigmoid_;
  Shape map_shape_;
};

}  // namespace fdgan
