// fdgan: synthesize corpora, train and evaluate dehazing models, run the ablation matrix.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fdgan/checkpoint.hpp"
#include "fdgan/config.hpp"
#include "fdgan/gradsuite.hpp"
#include "fdgan/image_io.hpp"
#include "fdgan/trainer.hpp"

namespace fs = std::filesystem;
using namespace fdgan;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string variant;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool out_required) {
  cmd->add_option("--config", f.config, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "run seed (overrides the config)");
  auto* out = cmd->add_option("--out", f.out, "output directory");
  if (out_required) out->required();
  cmd->add_option("--variant", f.variant,
                  "baseline | gan | fusion-hf | fusion-lf | fusion-full");
  cmd->add_option("--set", f.overrides, "extra key=value overrides, applied last");
}

TrainConfig resolve_config(const CommonFlags& f) {
  TrainConfig cfg;
  if (!f.config.empty()) cfg = load_config(f.config);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }
  if (f.seed) cfg.seed = *f.seed;
  if (!f.variant.empty()) set_config_value(cfg, "mode", f.variant);
  validate(cfg);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!(out << text)) throw IoError("cannot write " + path.string());
}

void echo_config(const fs::path& dir, const TrainConfig& cfg) {
  write_text(dir / "config.txt", format_config(cfg));
}

nlohmann::json metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::vector<PairedSample> training_set(const TrainConfig& cfg) {
  if (!cfg.train_dir.empty()) return read_corpus(cfg.train_dir);
  return generate_toy_corpus(cfg.train_count, cfg.image_size, cfg.image_size, cfg.seed, cfg.haze);
}

// Evaluation images continue the training corpus's index sequence, so the two never overlap.
std::vector<PairedSample> evaluation_set(const TrainConfig& cfg) {
  if (!cfg.eval_dir.empty()) return read_corpus(cfg.eval_dir);
  return generate_toy_corpus(cfg.eval_count, cfg.image_size, cfg.image_size, cfg.seed, cfg.haze,
                             cfg.train_count);
}

Model load_model(const std::string& path, const std::string& requested_variant) {
  const auto ck = load_checkpoint(path);
  if (!requested_variant.empty()) {
    const Mode want = mode_from_string(requested_variant);
    if (want != ck.info.mode) {
      throw Error("checkpoint/architecture mismatch: " + path + " holds a " +
                  to_string(ck.info.mode) + " model but --variant " + to_string(want) +
                  " was requested");
    }
  }
  return model_from_checkpoint(ck);
}

int cmd_synth(const CommonFlags& f, std::size_t count, std::size_t size, std::size_t first) {
  TrainConfig cfg = resolve_config(f);
  const auto samples = generate_toy_corpus(count, size, size, cfg.seed, cfg.haze, first);
  const std::string manifest = write_corpus(f.out, samples, cfg.seed);
  echo_config(f.out, cfg);
  std::cout << "wrote " << samples.size() << " samples to " << f.out << " (manifest fnv1a "
            << std::hex << fnv1a(manifest) << std::dec << ")\n";
  return kOk;
}

int cmd_decompose(const CommonFlags& f, const std::string& image) {
  const TrainConfig cfg = resolve_config(f);
  const Tensor img = read_png(image);
  const auto pair = decompose(img, cfg.freq);
  const fs::path dir = f.out.empty() ? fs::path(image).parent_path() : fs::path(f.out);
  if (!dir.empty()) fs::create_directories(dir);
  write_png(dir / "lf.png", pair.lf);
  write_png(dir / "hf.png", hf_for_display(pair.hf));
  std::cout << "wrote " << (dir / "lf.png").string() << " and " << (dir / "hf.png").string() << "\n";
  return kOk;
}

int cmd_train(const CommonFlags& f) {
  const TrainConfig cfg = resolve_config(f);
  const fs::path out = f.out;
  fs::create_directories(out);
  echo_config(out, cfg);
  const auto corpus = training_set(cfg);
  Model model(cfg);
  std::ofstream log(out / "train_log.jsonl", std::ios::binary);
  if (!log) throw IoError("cannot write " + (out / "train_log.jsonl").string());
  TrainHooks hooks;
  hooks.on_step = [&](const StepReport& r, double secs) {
    nlohmann::json rec{{"step", r.step},
                       {"l1", r.parts.l1},
                       {"ssim_loss", r.parts.ssim},
                       {"perceptual", r.parts.perceptual},
                       {"adversarial", r.parts.adversarial},
                       {"d_loss", r.d_loss},
                       {"total", r.total},
                       {"wall_time", secs}};
    log << rec.dump() << "\n";
    if (r.step % 50 == 0 || r.step == cfg.iterations) {
      std::cout << "step " << r.step << "  L1 " << r.parts.l1 << "  total " << r.total << "  D "
                << r.d_loss << "  " << secs << "s\n";
    }
  };
  hooks.on_checkpoint = [&](Model& m) {
    return save_rotating(out / "checkpoints", m, cfg.keep_checkpoints).string();
  };
  const auto summary = train(model, corpus, cfg, hooks);
  save_checkpoint(out / "final.bin", model);
  std::cout << "running L1 " << summary.initial_l1 << " -> " << summary.final_running_l1
            << "; final checkpoint " << (out / "final.bin").string() << "\n";
  return kOk;
}

std::string format_eval(const EvalResult& r) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "id" << std::right << std::setw(10) << "PSNR" << std::setw(9)
     << "SSIM" << "\n";
  for (const auto& m : r.images) {
    os << std::left << std::setw(8) << m.id << std::right << std::setw(10) << format_number(m.psnr, 4)
       << std::setw(9) << format_number(m.ssim, 4) << "\n";
  }
  os << std::left << std::setw(8) << "mean" << std::right << std::setw(10)
     << format_number(r.mean_psnr, 4) << std::setw(9) << format_number(r.mean_ssim, 4) << "\n";
  return os.str();
}

int cmd_eval(const CommonFlags& f, const std::string& checkpoint, const std::string& corpus_dir,
             const std::string& input) {
  CommonFlags flags = f;
  std::string variant;
  if (!checkpoint.empty()) std::swap(variant, flags.variant);
  TrainConfig cfg = resolve_config(flags);
  if (!corpus_dir.empty()) cfg.eval_dir = corpus_dir;
  const auto corpus = evaluation_set(cfg);
  EvalResult result;
  if (!checkpoint.empty()) {
    Model model = load_model(checkpoint, variant);
    result = evaluate_generator(model.gen, corpus, cfg.ssim);
  } else if (input == "clear") {
    result = evaluate(corpus, [](const PairedSample& s) { return s.clear; }, cfg.ssim);
  } else {
    result = evaluate_hazy_input(corpus, cfg.ssim);
  }
  const std::string table = format_eval(result);
  std::cout << table;
  if (!f.out.empty()) {
    fs::create_directories(f.out);
    write_text(fs::path(f.out) / "metrics.txt", table);
    std::string records;
    for (const auto& m : result.images) {
      records += nlohmann::json{{"id", m.id}, {"psnr", metric(m.psnr)}, {"ssim", m.ssim}}.dump() + "\n";
    }
    records += nlohmann::json{{"id", "mean"}, {"psnr", metric(result.mean_psnr)},
                              {"ssim", result.mean_ssim}}.dump() + "\n";
    write_text(fs::path(f.out) / "metrics.jsonl", records);
  }
  return kOk;
}

int cmd_dehaze(const CommonFlags& f, const std::string& checkpoint, const std::string& image) {
  Model model = load_model(checkpoint, f.variant);
  const Tensor img = read_png(image);
  const Tensor out = dehaze(model.gen, img);
  const fs::path target = f.out.empty() ? fs::path(fs::path(image).replace_extension("").string() + "_dehazed.png")
                                        : fs::path(f.out);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  write_png(target, out);
  std::cout << "wrote " << target.string() << "\n";
  return kOk;
}

int cmd_gradcheck(const CommonFlags& f) {
  GradSuiteOptions opts;
  if (f.seed) opts.seed = *f.seed;
  const auto start = std::chrono::steady_clock::now();
  const auto reports = gradcheck_all(opts);
  std::ostringstream os;
  bool ok = true;
  for (const auto& r : reports) {
    os << r << "\n";
    ok = ok && r.passed();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  os << (ok ? "all " : "FAILURES among ") << reports.size() << " blocks, " << secs << "s\n";
  std::cout << os.str();
  if (!f.out.empty()) write_text(fs::path(f.out) / "gradcheck.txt", os.str());
  return ok ? kOk : kRuntime;
}

int cmd_ablate(const CommonFlags& f, const std::vector<std::string>& mode_names) {
  const TrainConfig cfg = resolve_config(f);
  std::vector<Mode> modes;
  for (const auto& m : mode_names) modes.push_back(mode_from_string(m));
  if (modes.empty()) modes.assign(std::begin(kAllModes), std::end(kAllModes));
  const auto train_set = training_set(cfg);
  const auto eval_set = evaluation_set(cfg);
  const auto result = run_experiment_matrix(cfg, train_set, eval_set, modes, [](const MatrixRow& r) {
    std::cout << "finished " << r.name << (r.ok ? "" : " (failed: " + r.error + ")") << "\n";
  });
  const std::string table = format_matrix(result);
  std::cout << table;
  if (!f.out.empty()) {
    fs::create_directories(f.out);
    echo_config(f.out, cfg);
    write_text(fs::path(f.out) / "ablation.txt", table);
    std::string records;
    auto record = [&](const MatrixRow& r) {
      nlohmann::json j{{"mode", r.name}, {"ok", r.ok}};
      if (r.ok) {
        j["psnr"] = metric(r.psnr);
        j["ssim"] = r.ssim;
        if (r.name != "hazy-input") {
          j["initial_l1"] = r.initial_l1;
          j["final_l1"] = r.final_l1;
        }
      } else {
        j["error"] = r.error;
      }
      records += j.dump() + "\n";
    };
    record(result.hazy_input);
    for (const auto& r : result.rows) record(r);
    write_text(fs::path(f.out) / "ablation.jsonl", records);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FD-GAN desk-scale dehazing toolkit"};
  app.require_subcommand(1);

  CommonFlags synth_f, decomp_f, train_f, eval_f, dehaze_f, grad_f, ablate_f;

  auto* synth = app.add_subcommand("synth", "render a paired hazy/clear toy corpus");
  add_common(synth, synth_f, true);
  std::size_t count = 20, size = 64, first = 0;
  synth->add_option("--count", count, "number of samples")->check(CLI::PositiveNumber);
  synth->add_option("--size", size, "image height and width")->check(CLI::Range(16, 4096));
  synth->add_option("--first-index", first, "index of the first sample");

  auto* decomp = app.add_subcommand("decompose", "write lf.png and hf.png for an image");
  add_common(decomp, decomp_f, false);
  std::string decomp_image;
  decomp->add_option("image", decomp_image, "input PNG")->required();

  auto* trn = app.add_subcommand("train", "train one model, writing a log and checkpoints");
  add_common(trn, train_f, true);

  auto* ev = app.add_subcommand("eval", "score a checkpoint (or the raw inputs) on a corpus");
  add_common(ev, eval_f, false);
  std::string eval_ckpt, eval_corpus, eval_input = "hazy";
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate")->check(CLI::ExistingFile);
  ev->add_option("--corpus", eval_corpus, "corpus directory (default: synthesized eval set)");
  ev->add_option("--input", eval_input, "without a checkpoint, score the hazy or clear images")
      ->check(CLI::IsMember({"hazy", "clear"}));

  auto* dh = app.add_subcommand("dehaze", "restore one image with a trained checkpoint");
  add_common(dh, dehaze_f, false);
  std::string dh_ckpt, dh_image;
  dh->add_option("--checkpoint", dh_ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  dh->add_option("image", dh_image, "input PNG")->required();

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every differentiable block");
  add_common(gc, grad_f, false);

  auto* ab = app.add_subcommand("ablate", "train and evaluate every mode on one corpus");
  add_common(ab, ablate_f, false);
  std::vector<std::string> modes;
  ab->add_option("--modes", modes, "subset of modes (default: all five)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*synth) return cmd_synth(synth_f, count, size, first);
    if (*decomp) return cmd_decompose(decomp_f, decomp_image);
    if (*trn) return cmd_train(train_f);
    if (*ev) return cmd_eval(eval_f, eval_ckpt, eval_corpus, eval_input);
    if (*dh) return cmd_dehaze(dehaze_f, dh_ckpt, dh_image);
    if (*gc) return cmd_gradcheck(grad_f);
    if (*ab) return cmd_ablate(ablate_f, modes);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
