#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fdgan/freq.hpp"
#include "fdgan/haze.hpp"
#include "fdgan/nets.hpp"
#include "fdgan/objective.hpp"
#include "fdgan/tensor.hpp"

namespace fdgan {

/// Training regimes of the ablation: no adversary, a plain image discriminator, and the three
/// fusion discriminators.
enum class Mode { Baseline, PlainGan, FusionHf, FusionLf, FusionFull };

inline constexpr Mode kAllModes[] = {Mode::Baseline, Mode::PlainGan, Mode::FusionHf, Mode::FusionLf,
                                     Mode::FusionFull};

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::Baseline: return "baseline";
    case Mode::PlainGan: return "gan";
    case Mode::FusionHf: return "fusion-hf";
    case Mode::FusionLf: return "fusion-lf";
    case Mode::FusionFull: return "fusion-full";
  }
  return "?";
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "baseline" || s == "nogan") return Mode::Baseline;
  if (s == "gan" || s == "plain") return Mode::PlainGan;
  if (s == "fusion-hf" || s == "hf") return Mode::FusionHf;
  if (s == "fusion-lf" || s == "lf") return Mode::FusionLf;
  if (s == "fusion-full" || s == "full") return Mode::FusionFull;
  throw Error("unknown variant '" + s + "' (expected baseline, gan, fusion-hf, fusion-lf or fusion-full)");
}

inline bool uses_adversary(Mode m) { return m != Mode::Baseline; }

inline DiscInput disc_input(Mode m) {
  switch (m) {
    case Mode::PlainGan: return DiscInput::ImageOnly;
    case Mode::FusionHf: return DiscInput::HfOnly;
    case Mode::FusionLf: return DiscInput::LfOnly;
    default: return DiscInput::Full;
  }
}

struct AdamConfig {
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of every parameter from its accumulated gradient.
template <class T>
void adam_step(const ParamList<T>& params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor->size(), 0.0);
      state.v.emplace_back(p.tensor->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw Error("adam_step: optimizer state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (!p.tensor->has_grad() || p.tensor->size() != state.m[i].size()) {
      throw Error("adam_step: gradient/state shape mismatch for " + p.name);
    }
    for (T g : p.tensor->grad()) {
      if (!std::isfinite(g)) throw Error("adam_step: non-finite gradient in " + p.name);
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].tensor->values();
    auto grads = params[i].tensor->grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double g = grads[k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
      const double update = cfg.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
      values[k] = static_cast<T>(values[k] - update);
    }
  }
}

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 4;
  std::size_t iterations = 2000;
  std::uint64_t seed = 1;
  Mode mode = Mode::FusionFull;
  LossWeights weights;
  FreqConfig freq;
  SsimConfig ssim;
  NetConfig net;
  HazeRanges haze;
  std::size_t image_size = 64;
  std::size_t train_count = 200;
  std::size_t eval_count = 20;
  std::string train_dir;  // empty: synthesize in memory
  std::string eval_dir;
  std::size_t checkpoint_every = 100;
  std::size_t keep_checkpoints = 3;
};

/// Independent sub-seeds fanned out from the run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return sample_rng(seed, stream)();
}

namespace seed_stream {
constexpr std::uint64_t kGenerator = 1;
constexpr std::uint64_t kDiscriminator = 2;
constexpr std::uint64_t kBatches = 3;
}  // namespace seed_stream

/// Everything a training run mutates.
struct Model {
  Mode mode = Mode::FusionFull;
  NetConfig net;
  FreqConfig freq;
  Generator<float> gen;
  Discriminator<float> disc;
  FeatureExtractor<float> features;
  AdamState gen_opt;
  AdamState disc_opt;
  std::uint64_t step = 0;

  Model(Mode m, const NetConfig& n, const FreqConfig& f, std::uint64_t seed)
      : mode(m), net(n), freq(f), gen(n, derive_seed(seed, seed_stream::kGenerator)),
        disc(disc_input(m), n, derive_seed(seed, seed_stream::kDiscriminator)) {}

  explicit Model(const TrainConfig& cfg) : Model(cfg.mode, cfg.net, cfg.freq, cfg.seed) {}
};

struct StepReport {
  std::uint64_t step = 0;
  LossParts parts;
  double d_loss = 0.0;
  double total = 0.0;
};

/// One alternating update: a discriminator step on real/fake fusion samples (skipped without an
/// adversary), then a generator step on the weighted objective.
inline StepReport train_step(Model& model, const Tensor& hazy, const Tensor& clear,
                             const TrainConfig& cfg) {
  require_same_shape(hazy.shape(), clear.shape(), "train_step");
  StepReport report;
  const bool adversarial = uses_adversary(model.mode);
  const DiscInput variant = disc_input(model.mode);

  model.gen.set_training(true);
  const Tensor fake = model.gen.forward(hazy);

  if (adversarial) {
    auto dparams = model.disc.parameters();
    zero_grads(dparams);
    model.disc.set_training(true);
    model.disc.set_stat_tracking(true);
    const auto real_sample = assemble_fusion_input(clear, variant, model.freq);
    const auto fake_sample = assemble_fusion_input(fake, variant, model.freq);
    const auto real_term = discriminator_real_term(model.disc.forward(real_sample));
    model.disc.backward(real_term.grad);
    const auto fake_term = discriminator_fake_term(model.disc.forward(fake_sample));
    model.disc.backward(fake_term.grad);
    adam_step(dparams, model.disc_opt, cfg.adam);
    report.d_loss = real_term.value + fake_term.value;
  }

  auto gparams = model.gen.parameters();
  zero_grads(gparams);
  const auto l1 = l1_loss(fake, clear);
  const auto ls = ssim_loss(fake, clear, cfg.ssim);
  const auto lp = perceptual_loss(fake, clear, model.features);
  report.parts.l1 = l1.value;
  report.parts.ssim = ls.value;
  report.parts.perceptual = lp.value;

  Tensor grad(fake.shape());
  axpy(grad, static_cast<float>(cfg.weights.l1), l1.grad);
  axpy(grad, static_cast<float>(cfg.weights.ssim), ls.grad);
  axpy(grad, static_cast<float>(cfg.weights.perceptual), lp.grad);

  if (adversarial) {
    auto dparams = model.disc.parameters();
    model.disc.set_stat_tracking(false);
    const auto sample = assemble_fusion_input(fake, variant, model.freq);
    const Tensor p = model.disc.forward(sample);
    const auto lg = adversarial_loss_g(p);
    report.parts.adversarial = lg.value;
    const Tensor g_sample = model.disc.backward(lg.grad);
    // Discriminator parameter gradients from this pass are discarded.
    zero_grads(dparams);
    model.disc.set_stat_tracking(true);
    const Tensor g_img = assemble_fusion_input_backward(g_sample, variant, model.freq);
    axpy(grad, static_cast<float>(cfg.weights.adversarial), g_img);
  }

  LossWeights effective = cfg.weights;
  if (!adversarial) effective.adversarial = 0.0;
  report.total = total_loss(report.parts, effective);
  if (!std::isfinite(report.total)) throw Error("train_step: non-finite total loss");

  model.gen.backward(grad);
  adam_step(gparams, model.gen_opt, cfg.adam);
  report.step = ++model.step;
  return report;
}

/// Reshuffles the corpus every epoch; deterministic for a given seed.
class BatchSampler {
 public:
  BatchSampler(std::size_t corpus_size, std::uint64_t seed) : order_(corpus_size), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    pos_ = order_.size();
  }

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> out;
    while (out.size() < batch) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
  std::size_t pos_ = 0;
};

inline std::pair<Tensor, Tensor> make_batch(const std::vector<PairedSample>& corpus,
                                            const std::vector<std::size_t>& idx) {
  std::vector<const Tensor*> hazy;
  std::vector<const Tensor*> clear;
  for (auto i : idx) {
    hazy.push_back(&corpus[i].hazy);
    clear.push_back(&corpus[i].clear);
  }
  return {stack_batch(hazy), stack_batch(clear)};
}

struct TrainHooks {
  std::function<void(const StepReport&, double seconds)> on_step;
  /// Returns a description of where the checkpoint went, quoted if a later step fails.
  std::function<std::string(Model&)> on_checkpoint;
};

struct TrainSummary {
  double initial_l1 = 0.0;
  double final_running_l1 = 0.0;
  std::size_t steps = 0;
};

inline constexpr std::size_t kRunningWindow = 50;

/// Runs `cfg.iterations` train steps over the corpus.
inline TrainSummary train(Model& model, const std::vector<PairedSample>& corpus,
                          const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  if (corpus.empty()) throw Error("train: empty corpus");
  if (cfg.iterations < 1) throw Error("train: iterations must be at least 1");
  BatchSampler sampler(corpus.size(), derive_seed(cfg.seed, seed_stream::kBatches));
  TrainSummary summary;
  std::vector<double> window;
  std::string last_good = "none written yet";
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    auto [hazy, clear] = make_batch(corpus, sampler.next(cfg.batch_size));
    StepReport report;
    try {
      report = train_step(model, hazy, clear, cfg);
    } catch (const Error& e) {
      throw Error(std::string(e.what()) + " at step " + std::to_string(model.step + 1) +
                  "; last good checkpoint: " + last_good);
    }
    if (it == 0) summary.initial_l1 = report.parts.l1;
    window.push_back(report.parts.l1);
    if (window.size() > kRunningWindow) window.erase(window.begin());
    if (hooks.on_step) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      hooks.on_step(report, secs);
    }
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && report.step % cfg.checkpoint_every == 0) {
      last_good = hooks.on_checkpoint(model);
    }
  }
  summary.steps = cfg.iterations;
  summary.final_running_l1 =
      std::accumulate(window.begin(), window.end(), 0.0) / static_cast<double>(window.size());
  return summary;
}

/// Pads with reflection to a multiple of `multiple`, runs the generator in eval mode, crops back.
inline Tensor dehaze(Generator<float>& gen, const Tensor& img, std::size_t multiple = 8) {
  const Shape s = img.shape();
  const std::size_t ph = (multiple - s.h % multiple) % multiple;
  const std::size_t pw = (multiple - s.w % multiple) % multiple;
  if ((ph > 0 && ph >= s.h) || (pw > 0 && pw >= s.w)) {
    throw ShapeError("dehaze: image " + s.str() + " too small to pad");
  }
  Tensor padded(Shape{s.n, s.c, s.h + ph, s.w + pw});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < s.h + ph; ++y) {
        for (std::size_t x = 0; x < s.w + pw; ++x) {
          padded(n, c, y, x) = img(n, c, reflect_index(static_cast<std::ptrdiff_t>(y), s.h),
                                   reflect_index(static_cast<std::ptrdiff_t>(x), s.w));
        }
      }
    }
  }
  gen.set_training(false);
  const Tensor out = gen.forward(padded);
  Tensor cropped(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t x = 0; x < s.w; ++x) cropped(n, c, y, x) = out(n, c, y, x);
      }
    }
  }
  return cropped;
}

struct ImageMetrics {
  std::size_t id = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalResult {
  std::vector<ImageMetrics> images;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

/// Scores `restore(sample)` against each clear image.
inline EvalResult evaluate(const std::vector<PairedSample>& corpus,
                           const std::function<Tensor(const PairedSample&)>& restore,
                           const SsimConfig& ssim_cfg = {}) {
  EvalResult r;
  for (const auto& s : corpus) {
    const Tensor out = restore(s);
    r.images.push_back({s.id, psnr(out, s.clear), ssim(out, s.clear, ssim_cfg)});
    r.mean_psnr += r.images.back().psnr;
    r.mean_ssim += r.images.back().ssim;
  }
  if (!corpus.empty()) {
    r.mean_psnr /= static_cast<double>(corpus.size());
    r.mean_ssim /= static_cast<double>(corpus.size());
  }
  return r;
}

inline EvalResult evaluate_generator(Generator<float>& gen, const std::vector<PairedSample>& corpus,
                                     const SsimConfig& ssim_cfg = {}) {
  return evaluate(corpus, [&](const PairedSample& s) { return dehaze(gen, s.hazy); }, ssim_cfg);
}

/// The do-nothing restoration: hazy input scored against ground truth.
inline EvalResult evaluate_hazy_input(const std::vector<PairedSample>& corpus,
                                      const SsimConfig& ssim_cfg = {}) {
  return evaluate(corpus, [](const PairedSample& s) { return s.hazy; }, ssim_cfg);
}

struct MatrixRow {
  std::string name;
  bool ok = false;
  std::string error;
  double psnr = 0.0;
  double ssim = 0.0;
  double initial_l1 = 0.0;
  double final_l1 = 0.0;
};

struct MatrixResult {
  MatrixRow hazy_input;
  std::vector<MatrixRow> rows;
};

/// Trains every mode on the same corpus and seed and evaluates each on the same eval set.
inline MatrixResult run_experiment_matrix(const TrainConfig& base,
                                          const std::vector<PairedSample>& train_set,
                                          const std::vector<PairedSample>& eval_set,
                                          const std::vector<Mode>& modes = {std::begin(kAllModes),
                                                                            std::end(kAllModes)},
                                          const std::function<void(const MatrixRow&)>& on_row = {}) {
  MatrixResult result;
  const auto hazy = evaluate_hazy_input(eval_set, base.ssim);
  result.hazy_input = {"hazy-input", true, "", hazy.mean_psnr, hazy.mean_ssim, 0.0, 0.0};
  for (Mode m : modes) {
    MatrixRow row;
    row.name = to_string(m);
    try {
      TrainConfig cfg = base;
      cfg.mode = m;
      Model model(cfg);
      const auto summary = train(model, train_set, cfg);
      const auto ev = evaluate_generator(model.gen, eval_set, cfg.ssim);
      row.ok = true;
      row.psnr = ev.mean_psnr;
      row.ssim = ev.mean_ssim;
      row.initial_l1 = summary.initial_l1;
      row.final_l1 = summary.final_running_l1;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    if (on_row) on_row(row);
    result.rows.push_back(row);
  }
  return result;
}

inline std::string format_number(double v, int precision) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

inline std::string format_matrix(const MatrixResult& m) {
  std::ostringstream os;
  os << std::left << std::setw(14) << "mode" << std::right << std::setw(10) << "PSNR" << std::setw(9)
     << "SSIM" << std::setw(11) << "L1 start" << std::setw(11) << "L1 end" << "\n";
  auto line = [&](const MatrixRow& r) {
    os << std::left << std::setw(14) << r.name << std::right;
    if (!r.ok) {
      os << "  FAILED: " << r.error << "\n";
      return;
    }
    os << std::setw(10) << format_number(r.psnr, 4) << std::setw(9) << format_number(r.ssim, 4);
    if (r.name == "hazy-input") {
      os << std::setw(11) << "-" << std::setw(11) << "-";
    } else {
      os << std::setw(11) << format_number(r.initial_l1, 5) << std::setw(11)
         << format_number(r.final_l1, 5);
    }
    os << "\n";
  };
  line(m.hazy_input);
  for (const auto& r : m.rows) line(r);
  return os.str();
}

}  // namespace fdgan
