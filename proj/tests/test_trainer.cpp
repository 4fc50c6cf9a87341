#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fdgan/trainer.hpp"
#include "oracles.hpp"

using namespace fdgan;

namespace {

TrainConfig small_config(Mode mode) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.image_size = 32;
  cfg.batch_size = 2;
  cfg.iterations = 3;
  return cfg;
}

std::vector<Tensor> snapshot(const ParamList<float>& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(*p.tensor);
  return out;
}

bool unchanged(const ParamList<float>& params, const std::vector<Tensor>& before) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!(*params[i].tensor == before[i])) return false;
  }
  return true;
}

}  // namespace

TEST(Modes, NamesRoundTrip) {
  for (Mode m : kAllModes) EXPECT_EQ(mode_from_string(to_string(m)), m);
  EXPECT_EQ(mode_from_string("nogan"), Mode::Baseline);
  EXPECT_THROW(mode_from_string("fusion"), Error);
  EXPECT_EQ(disc_input(Mode::PlainGan), DiscInput::ImageOnly);
  EXPECT_EQ(disc_input(Mode::FusionFull), DiscInput::Full);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor w(Shape{1, 1, 1, 3}, std::vector<float>{1, -2, 3});
  ParamList<float> params{{"w", &w}};
  zero_grads(params);
  AdamState st;
  adam_step(params, st, AdamConfig{});
  EXPECT_EQ(w, Tensor(Shape{1, 1, 1, 3}, std::vector<float>({1, -2, 3})));
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor w(Shape{1, 1, 1, 3}, std::vector<float>{0, 0, 0});
  ParamList<float> params{{"w", &w}};
  zero_grads(params);
  w.grad()[0] = 0.3f;
  w.grad()[1] = -5.0f;
  w.grad()[2] = 1e-3f;
  AdamState st;
  adam_step(params, st, AdamConfig{});
  EXPECT_NEAR(w[0], -2e-3, 1e-8);
  EXPECT_NEAR(w[1], 2e-3, 1e-8);
  EXPECT_NEAR(w[2], -2e-3, 1e-7);
}

TEST(Adam, NanGradientNamesGroup) {
  Tensor w(Shape{1, 1, 1, 1});
  ParamList<float> params{{"gen.head.weight", &w}};
  zero_grads(params);
  w.grad()[0] = std::nanf("");
  AdamState st;
  try {
    adam_step(params, st, AdamConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("gen.head.weight"), std::string::npos);
  }
  EXPECT_EQ(w[0], 0.0f);
}

TEST(TrainStep, BaselineLeavesDiscriminatorInert) {
  const auto cfg = small_config(Mode::Baseline);
  Model model(cfg);
  const auto corpus = generate_toy_corpus(4, 32, 32, 3);
  auto [hazy, clear] = make_batch(corpus, {0, 1});
  const auto dparams = model.disc.parameters();
  const auto before = snapshot(dparams);
  const auto r = train_step(model, hazy, clear, cfg);
  EXPECT_TRUE(unchanged(dparams, before));
  EXPECT_EQ(r.parts.adversarial, 0.0);
  EXPECT_EQ(r.total, cfg.weights.l1 * r.parts.l1 + cfg.weights.ssim * r.parts.ssim +
                         cfg.weights.perceptual * r.parts.perceptual);
}

TEST(TrainStep, FullModeUpdatesBothNetworks) {
  const auto cfg = small_config(Mode::FusionFull);
  Model model(cfg);
  EXPECT_EQ(model.disc.variant(), DiscInput::Full);
  EXPECT_EQ(model.disc.stages()[0].conv().spec().in_channels, 7u);
  const auto corpus = generate_toy_corpus(4, 32, 32, 3);
  auto [hazy, clear] = make_batch(corpus, {0, 1});
  const auto gparams = model.gen.parameters();
  const auto dparams = model.disc.parameters();
  const auto gbefore = snapshot(gparams);
  const auto dbefore = snapshot(dparams);
  const auto r = train_step(model, hazy, clear, cfg);
  EXPECT_FALSE(unchanged(gparams, gbefore));
  EXPECT_FALSE(unchanged(dparams, dbefore));
  EXPECT_GT(r.d_loss, 0.0);
  EXPECT_LT(r.parts.adversarial, 0.0);
  EXPECT_NEAR(r.total, total_loss(r.parts, cfg.weights), 1e-6);
}

TEST(TrainStep, PlainGanFeedsBareImage) {
  Model model(small_config(Mode::PlainGan));
  EXPECT_EQ(model.disc.stages()[0].conv().spec().in_channels, 3u);
}

TEST(TrainStep, OptimizersTouchDisjointParameters) {
  Model model(small_config(Mode::FusionFull));
  const auto gparams = model.gen.parameters();
  const auto dparams = model.disc.parameters();
  for (const auto& g : gparams)
    for (const auto& d : dparams) ASSERT_NE(g.tensor, d.tensor);
  const auto gbefore = snapshot(gparams);
  zero_grads(dparams);
  for (const auto& d : dparams) d.tensor->grad()[0] = 1.0f;
  adam_step(dparams, model.disc_opt, AdamConfig{});
  EXPECT_TRUE(unchanged(gparams, gbefore));
}

TEST(Train, SameSeedSameParameters) {
  auto cfg = small_config(Mode::FusionLf);
  cfg.iterations = 4;
  const auto corpus = generate_toy_corpus(6, 32, 32, 4);
  Model a(cfg), b(cfg);
  train(a, corpus, cfg);
  train(b, corpus, cfg);
  const auto pa = a.gen.parameters();
  const auto pb = b.gen.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i].tensor, *pb[i].tensor);
  const auto da = a.disc.parameters();
  const auto db = b.disc.parameters();
  for (std::size_t i = 0; i < da.size(); ++i) EXPECT_EQ(*da[i].tensor, *db[i].tensor);
}

TEST(Train, NonFiniteLossQuotesLastCheckpoint) {
  auto cfg = small_config(Mode::Baseline);
  cfg.iterations = 6;
  cfg.checkpoint_every = 2;
  auto corpus = generate_toy_corpus(2, 32, 32, 4);
  Model model(cfg);
  TrainHooks hooks;
  hooks.on_checkpoint = [&](Model& m) {
    if (m.step == 4) {
      for (auto& s : corpus) s.clear[0] = std::nanf("");
    }
    return "ckpt-" + std::to_string(m.step);
  };
  try {
    train(model, corpus, cfg, hooks);
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("last good checkpoint: ckpt-4"), std::string::npos) << msg;
  }
}

TEST(Train, RunningL1HalvesOnToyCorpus) {
  TrainConfig cfg;
  cfg.iterations = 300;
  const auto corpus = generate_toy_corpus(20, 64, 64, cfg.seed);
  Model model(cfg);
  const auto s = train(model, corpus, cfg);
  const double ratio = s.final_running_l1 / s.initial_l1;
  std::cout << "running L1 " << s.initial_l1 << " -> " << s.final_running_l1 << " (ratio " << ratio
            << ")\n";
  EXPECT_LT(ratio, 0.5);
}

TEST(Dehaze, PadAndCropKeepsDims) {
  Generator<float> gen(NetConfig{}, 2);
  std::mt19937_64 rng(7);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{16, 16}, {17, 23}, {30, 19}}) {
    const Tensor out = dehaze(gen, oracle::random_image({1, 3, h, w}, rng));
    EXPECT_EQ(out.shape(), (Shape{1, 3, h, w}));
  }
}

TEST(Evaluate, IdenticalPairsGiveSentinels) {
  const auto corpus = generate_toy_corpus(3, 32, 32, 5);
  const auto ev = evaluate(corpus, [](const PairedSample& s) { return s.clear; });
  EXPECT_TRUE(std::isinf(ev.mean_psnr));
  EXPECT_NEAR(ev.mean_ssim, 1.0, 1e-6);
  EXPECT_EQ(format_number(ev.mean_psnr, 3), "inf");
}

TEST(Matrix, FiveRowsReproducible) {
  auto cfg = small_config(Mode::FusionFull);
  cfg.iterations = 2;
  const auto train_set = generate_toy_corpus(4, 32, 32, 6);
  const auto eval_set = generate_toy_corpus(2, 32, 32, 6, {}, 4);
  const auto a = run_experiment_matrix(cfg, train_set, eval_set);
  const auto b = run_experiment_matrix(cfg, train_set, eval_set);
  ASSERT_EQ(a.rows.size(), 5u);
  for (const auto& r : a.rows) {
    EXPECT_TRUE(r.ok) << r.name << ": " << r.error;
    EXPECT_TRUE(std::isfinite(r.psnr));
    EXPECT_TRUE(std::isfinite(r.ssim));
  }
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].psnr, b.rows[i].psnr);
    EXPECT_EQ(a.rows[i].ssim, b.rows[i].ssim);
    EXPECT_EQ(a.rows[i].final_l1, b.rows[i].final_l1);
  }
  EXPECT_EQ(format_matrix(a), format_matrix(b));
}

TEST(Matrix, FailedCellDoesNotStopOthers) {
  auto cfg = small_config(Mode::FusionFull);
  cfg.iterations = 1;
  cfg.freq.lf_size = 41;  // too wide for 16x16 images: only modes using LF fail
  const auto train_set = generate_toy_corpus(2, 16, 16, 6);
  const auto eval_set = generate_toy_corpus(1, 16, 16, 6, {}, 2);
  const auto m = run_experiment_matrix(cfg, train_set, eval_set);
  ASSERT_EQ(m.rows.size(), 5u);
  for (const auto& r : m.rows) {
    const bool uses_lf = r.name == "fusion-lf" || r.name == "fusion-full";
    EXPECT_EQ(r.ok, !uses_lf) << r.name;
  }
  EXPECT_NE(format_matrix(m).find("FAILED"), std::string::npos);
}
