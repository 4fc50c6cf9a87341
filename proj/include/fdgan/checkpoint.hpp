#pragma once

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdgan/image_io.hpp"
#include "fdgan/trainer.hpp"

namespace fdgan {

// Layout: a magic line, one line of JSON describing the architecture and the tensor table, then
// the raw little-endian float32 payload of every tensor in table order.
inline constexpr const char* kCheckpointMagic = "FDGAN-CHECKPOINT 1";

struct CheckpointInfo {
  Mode mode = Mode::FusionFull;
  NetConfig net;
  FreqConfig freq;
  std::uint64_t step = 0;
};

struct Checkpoint {
  CheckpointInfo info;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
      if (n == name) return &t;
    }
    return nullptr;
  }
};

/// Every tensor that defines a model: trainable weights, normalization statistics and the frozen
/// feature extractor.
inline ParamList<float> persisted_tensors(Model& model) {
  ParamList<float> all = model.gen.parameters();
  for (auto& b : model.gen.buffers()) all.push_back(b);
  for (auto& p : model.disc.parameters()) all.push_back(p);
  for (auto& b : model.disc.buffers()) all.push_back(b);
  model.features.collect_buffers(all, "feat");
  return all;
}

namespace detail {

inline nlohmann::json net_to_json(const NetConfig& n) {
  return {{"stem", n.stem},       {"growth", n.growth},   {"block_layers", n.block_layers},
          {"bottleneck", n.bottleneck}, {"decoder", n.decoder}, {"disc", n.disc}};
}

inline NetConfig net_from_json(const nlohmann::json& j) {
  NetConfig n;
  n.stem = j.at("stem").get<std::size_t>();
  n.growth = j.at("growth").get<std::size_t>();
  n.block_layers = j.at("block_layers").get<std::size_t>();
  n.bottleneck = j.at("bottleneck").get<std::size_t>();
  n.decoder = j.at("decoder").get<std::array<std::size_t, 3>>();
  n.disc = j.at("disc").get<std::array<std::size_t, 4>>();
  return n;
}

}  // namespace detail

inline std::string serialize_checkpoint(Model& model) {
  nlohmann::json header;
  header["mode"] = to_string(model.mode);
  header["variant"] = to_string(disc_input(model.mode));
  header["step"] = model.step;
  header["net"] = detail::net_to_json(model.net);
  header["freq"] = {{"lf_size", model.freq.lf_size}, {"lf_sigma", model.freq.lf_sigma}};
  std::string payload;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& p : persisted_tensors(model)) {
    const Shape s = p.tensor->shape();
    table.push_back({{"name", p.name}, {"shape", {s.n, s.c, s.h, s.w}}, {"offset", payload.size()}});
    const auto v = p.tensor->values();
    payload.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
  }
  header["tensors"] = table;
  return std::string(kCheckpointMagic) + "\n" + header.dump() + "\n" + payload;
}

inline Checkpoint parse_checkpoint(const std::string& bytes, const std::string& origin = "checkpoint") {
  const auto first = bytes.find('\n');
  if (first == std::string::npos || bytes.compare(0, first, kCheckpointMagic) != 0) {
    throw IoError(origin + ": not an FD-GAN checkpoint (bad magic line)");
  }
  const auto second = bytes.find('\n', first + 1);
  if (second == std::string::npos) throw IoError(origin + ": truncated header");
  Checkpoint ck;
  std::size_t base = second + 1;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(first + 1, second - first - 1));
    ck.info.mode = mode_from_string(header.at("mode").get<std::string>());
    ck.info.step = header.at("step").get<std::uint64_t>();
    ck.info.net = detail::net_from_json(header.at("net"));
    ck.info.freq.lf_size = header.at("freq").at("lf_size").get<std::size_t>();
    ck.info.freq.lf_sigma = header.at("freq").at("lf_sigma").get<double>();
    for (const auto& e : header.at("tensors")) {
      const auto dims = e.at("shape").get<std::vector<std::size_t>>();
      if (dims.size() != 4) throw IoError(origin + ": tensor shape must have 4 dims");
      Tensor t(Shape{dims[0], dims[1], dims[2], dims[3]});
      const std::size_t offset = e.at("offset").get<std::size_t>();
      const std::size_t nbytes = t.size() * sizeof(float);
      if (base + offset + nbytes > bytes.size()) {
        throw IoError(origin + ": payload truncated at " + e.at("name").get<std::string>());
      }
      std::memcpy(t.data(), bytes.data() + base + offset, nbytes);
      ck.tensors.emplace_back(e.at("name").get<std::string>(), std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(origin + ": malformed header: " + e.what());
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, Model& model) {
  const std::string bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
    throw IoError("cannot write checkpoint " + path.string());
  }
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_checkpoint(os.str(), path.string());
}

/// Copies checkpoint tensors into a model built for the same architecture.
inline void restore(Model& model, const Checkpoint& ck) {
  if (ck.info.mode != model.mode) {
    throw Error("checkpoint architecture mismatch: checkpoint was trained as " +
                to_string(ck.info.mode) + " (discriminator input " +
                to_string(disc_input(ck.info.mode)) + ") but model is " + to_string(model.mode) +
                " (discriminator input " + to_string(disc_input(model.mode)) + ")");
  }
  if (!(ck.info.net == model.net)) throw Error("checkpoint architecture mismatch: network widths differ");
  const auto targets = persisted_tensors(model);
  if (targets.size() != ck.tensors.size()) {
    throw Error("checkpoint architecture mismatch: " + std::to_string(ck.tensors.size()) +
                " tensors stored, model has " + std::to_string(targets.size()));
  }
  for (const auto& p : targets) {
    const Tensor* src = ck.find(p.name);
    if (!src) throw Error("checkpoint is missing tensor " + p.name);
    if (src->shape() != p.tensor->shape()) {
      throw Error("checkpoint tensor " + p.name + " has shape " + src->shape().str() +
                  ", model expects " + p.tensor->shape().str());
    }
    std::copy(src->values().begin(), src->values().end(), p.tensor->values().begin());
  }
  model.freq = ck.info.freq;
  model.step = ck.info.step;
}

/// Builds the model a checkpoint describes and loads its weights.
inline Model model_from_checkpoint(const Checkpoint& ck) {
  Model model(ck.info.mode, ck.info.net, ck.info.freq, 0);
  restore(model, ck);
  return model;
}

inline std::string checkpoint_name(std::uint64_t step) {
  std::ostringstream os;
  os << "ckpt_" << std::setw(6) << std::setfill('0') << step << ".bin";
  return os.str();
}

/// Writes ckpt_<step>.bin into `dir` and deletes all but the newest `keep` of them.
inline std::filesystem::path save_rotating(const std::filesystem::path& dir, Model& model,
                                           std::size_t keep) {
  std::filesystem::create_directories(dir);
  const auto path = dir / checkpoint_name(model.step);
  save_checkpoint(path, model);
  std::vector<std::filesystem::path> existing;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("ckpt_", 0) == 0 && e.path().extension() == ".bin") existing.push_back(e.path());
  }
  std::sort(existing.begin(), existing.end());
  while (keep > 0 && existing.size() > keep) {
    std::filesystem::remove(existing.front());
    existing.erase(existing.begin());
  }
  return path;
}

}  // namespace fdgan
