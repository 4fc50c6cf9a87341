#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fdgan/trainer.hpp"

namespace fdgan {

/// Bad key, bad value or inconsistent settings; the CLI maps it to a usage error.
class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
  }
  return out;
}

template <std::size_t N>
std::array<std::size_t, N> parse_list(const std::string& key, const std::string& v) {
  std::array<std::size_t, N> out{};
  std::stringstream ss(v);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i == N) break;
    out[i++] = static_cast<std::size_t>(parse_uint(key, trim(item)));
  }
  if (i != N || std::getline(ss, item, ',')) {
    throw ConfigError("config key '" + key + "' needs exactly " + std::to_string(N) +
                      " comma-separated integers, got '" + v + "'");
  }
  return out;
}

template <std::size_t N>
std::string fmt_list(const std::array<std::size_t, N>& a) {
  std::string s;
  for (std::size_t i = 0; i < N; ++i) s += (i ? "," : "") + std::to_string(a[i]);
  return s;
}

struct ConfigKey {
  const char* name;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string& key, const std::string& value)> set;
};

#define FDGAN_DOUBLE_KEY(NAME, FIELD)                                               \
  ConfigKey {                                                                       \
    NAME, [](const TrainConfig& c) { return fmt_double(c.FIELD); },                 \
        [](TrainConfig& c, const std::string& k, const std::string& v) {            \
          c.FIELD = parse_double(k, v);                                             \
        }                                                                           \
  }
#define FDGAN_UINT_KEY(NAME, FIELD)                                                 \
  ConfigKey {                                                                       \
    NAME, [](const TrainConfig& c) { return std::to_string(c.FIELD); },             \
        [](TrainConfig& c, const std::string& k, const std::string& v) {            \
          c.FIELD = static_cast<decltype(c.FIELD)>(parse_uint(k, v));               \
        }                                                                           \
  }

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      FDGAN_UINT_KEY("seed", seed),
      ConfigKey{"mode", [](const TrainConfig& c) { return to_string(c.mode); },
                [](TrainConfig& c, const std::string&, const std::string& v) {
                  try {
                    c.mode = mode_from_string(v);
                  } catch (const Error& e) {
                    throw ConfigError(e.what());
                  }
                }},
      FDGAN_UINT_KEY("iterations", iterations),
      FDGAN_UINT_KEY("batch_size", batch_size),
      FDGAN_DOUBLE_KEY("lr", adam.lr),
      FDGAN_DOUBLE_KEY("adam_beta1", adam.beta1),
      FDGAN_DOUBLE_KEY("adam_beta2", adam.beta2),
      FDGAN_DOUBLE_KEY("adam_eps", adam.eps),
      FDGAN_DOUBLE_KEY("alpha_l1", weights.l1),
      FDGAN_DOUBLE_KEY("alpha_ssim", weights.ssim),
      FDGAN_DOUBLE_KEY("alpha_perceptual", weights.perceptual),
      FDGAN_DOUBLE_KEY("alpha_adversarial", weights.adversarial),
      FDGAN_UINT_KEY("lf_size", freq.lf_size),
      FDGAN_DOUBLE_KEY("lf_sigma", freq.lf_sigma),
      FDGAN_UINT_KEY("ssim_window", ssim.window),
      FDGAN_DOUBLE_KEY("ssim_sigma", ssim.sigma),
      FDGAN_DOUBLE_KEY("ssim_k1", ssim.k1),
      FDGAN_DOUBLE_KEY("ssim_k2", ssim.k2),
      FDGAN_DOUBLE_KEY("ssim_dynamic_range", ssim.dynamic_range),
      FDGAN_DOUBLE_KEY("haze_light_min", haze.light_min),
      FDGAN_DOUBLE_KEY("haze_light_max", haze.light_max),
      FDGAN_DOUBLE_KEY("haze_beta_min", haze.beta_min),
      FDGAN_DOUBLE_KEY("haze_beta_max", haze.beta_max),
      FDGAN_UINT_KEY("image_size", image_size),
      FDGAN_UINT_KEY("train_count", train_count),
      FDGAN_UINT_KEY("eval_count", eval_count),
      ConfigKey{"train_dir", [](const TrainConfig& c) { return c.train_dir; },
                [](TrainConfig& c, const std::string&, const std::string& v) { c.train_dir = v; }},
      ConfigKey{"eval_dir", [](const TrainConfig& c) { return c.eval_dir; },
                [](TrainConfig& c, const std::string&, const std::string& v) { c.eval_dir = v; }},
      FDGAN_UINT_KEY("checkpoint_every", checkpoint_every),
      FDGAN_UINT_KEY("keep_checkpoints", keep_checkpoints),
      FDGAN_UINT_KEY("net_stem", net.stem),
      FDGAN_UINT_KEY("net_growth", net.growth),
      FDGAN_UINT_KEY("net_block_layers", net.block_layers),
      FDGAN_UINT_KEY("net_bottleneck", net.bottleneck),
      ConfigKey{"net_decoder", [](const TrainConfig& c) { return fmt_list(c.net.decoder); },
                [](TrainConfig& c, const std::string& k, const std::string& v) {
                  c.net.decoder = parse_list<3>(k, v);
                }},
      ConfigKey{"net_disc", [](const TrainConfig& c) { return fmt_list(c.net.disc); },
                [](TrainConfig& c, const std::string& k, const std::string& v) {
                  c.net.disc = parse_list<4>(k, v);
                }},
  };
  return keys;
}

#undef FDGAN_DOUBLE_KEY
#undef FDGAN_UINT_KEY

}  // namespace detail

inline std::vector<std::string> config_key_names() {
  std::vector<std::string> out;
  for (const auto& k : detail::config_keys()) out.emplace_back(k.name);
  return out;
}

/// Sets one key; unknown keys and unparsable values throw ConfigError.
inline void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : detail::config_keys()) {
    if (key == k.name) {
      k.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

inline std::string get_config_value(const TrainConfig& cfg, const std::string& key) {
  for (const auto& k : detail::config_keys()) {
    if (key == k.name) return k.get(cfg);
  }
  throw ConfigError("unknown config key '" + key + "'");
}

/// Rejects settings no run could use.
inline void validate(const TrainConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(c.adam.lr > 0.0, "lr must be positive");
  need(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0, "adam_beta1 must lie in [0, 1)");
  need(c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0, "adam_beta2 must lie in [0, 1)");
  need(c.adam.eps > 0.0, "adam_eps must be positive");
  need(c.iterations >= 1, "iterations must be at least 1");
  need(c.batch_size >= 1, "batch_size must be at least 1");
  need(c.weights.l1 >= 0 && c.weights.ssim >= 0 && c.weights.perceptual >= 0 &&
           c.weights.adversarial >= 0,
       "loss weights must be non-negative");
  need(c.freq.lf_size >= 3 && c.freq.lf_size % 2 == 1, "lf_size must be odd and at least 3");
  need(c.freq.lf_sigma > 0.0, "lf_sigma must be positive");
  need(c.ssim.window >= 3 && c.ssim.window % 2 == 1, "ssim_window must be odd and at least 3");
  need(c.ssim.sigma > 0.0 && c.ssim.dynamic_range > 0.0, "ssim_sigma and ssim_dynamic_range must be positive");
  need(c.haze.light_min <= c.haze.light_max, "haze_light_min must not exceed haze_light_max");
  need(c.haze.beta_min <= c.haze.beta_max, "haze_beta_min must not exceed haze_beta_max");
  need(c.haze.beta_min > 0.0, "haze_beta_min must be positive");
  need(c.image_size >= 16 && c.image_size % Generator<float>::kDivisor == 0,
       "image_size must be a multiple of 8 and at least 16");
  need(c.image_size <= 4096, "image_size must be at most 4096");
  need(c.train_count >= 1 && c.eval_count >= 1, "train_count and eval_count must be at least 1");
  need(c.keep_checkpoints >= 1, "keep_checkpoints must be at least 1");
  need(c.net.stem >= 1 && c.net.growth >= 1 && c.net.block_layers >= 1 && c.net.bottleneck >= 1,
       "network widths must be positive");
  for (auto d : c.net.decoder) need(d >= 1, "net_decoder widths must be positive");
  for (auto d : c.net.disc) need(d >= 1, "net_disc widths must be positive");
}

/// Parses `key = value` lines; '#' starts a comment. Later keys override earlier ones.
inline void apply_config_text(TrainConfig& cfg, const std::string& text,
                              const std::string& origin = "config") {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline TrainConfig load_config(const std::string& path, TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  apply_config_text(base, os.str(), path);
  return base;
}

/// Every key with its effective value, in a form apply_config_text reads back unchanged.
inline std::string format_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& k : detail::config_keys()) out += std::string(k.name) + " = " + k.get(cfg) + "\n";
  return out;
}

}  // namespace fdgan
