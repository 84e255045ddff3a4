#include "lgtd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace lgtd {

namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'L', 'G', 'T', 'D', 'C', 'K', 'P', 'T'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("truncated checkpoint (" + what + ")");
  return to_little(v);
}

const std::string kAdamM = "adam.m/";
const std::string kAdamV = "adam.v/";

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw std::out_of_range("checkpoint has no tensor '" + name + "'");
}

Checkpoint make_checkpoint(const LgtdModel& model, const RunConfig& config, const Trainer* trainer, int epoch) {
  Checkpoint c;
  c.config = config;
  c.config.model = model.config();
  c.epoch = epoch;
  for (const auto& [name, p] : model.parameters().entries()) c.tensors.emplace_back(name, p.value());
  if (trainer) {
    c.iteration = trainer->iteration();
    c.adam_steps = trainer->optimizer().steps();
    std::ostringstream rs;
    rs << trainer->rng();
    c.rng_state = rs.str();
    const auto& entries = model.parameters().entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      c.tensors.emplace_back(kAdamM + entries[i].first, trainer->optimizer().first_moments()[i]);
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      c.tensors.emplace_back(kAdamV + entries[i].first, trainer->optimizer().second_moments()[i]);
    }
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json header;
  header["config"] = json::parse(config_to_json(ckpt.config));
  header["epoch"] = ckpt.epoch;
  header["iteration"] = ckpt.iteration;
  header["adamSteps"] = ckpt.adam_steps;
  header["rngState"] = ckpt.rng_state;
  header["byteOrder"] = "little";
  json dir = json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    dir.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel();
  }
  header["tensors"] = dir;
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : ckpt.tensors) {
      for (double v : t.values()) put<double>(out, v);
    }
    if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint not found: " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw std::runtime_error(path.string() + " is not a checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto size = get<std::uint64_t>(in, "header size");
  std::string text(size, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(size))) throw std::runtime_error("truncated checkpoint header");
  const json header = json::parse(text);

  Checkpoint c;
  c.config = config_from_json(header.at("config").dump());
  c.epoch = header.at("epoch").get<int>();
  c.iteration = header.at("iteration").get<int>();
  c.adam_steps = header.at("adamSteps").get<long long>();
  c.rng_state = header.at("rngState").get<std::string>();
  for (const json& entry : header.at("tensors")) {
    Tensor t(entry.at("shape").get<Shape>());
    for (double& v : t.values()) v = get<double>(in, entry.at("name").get<std::string>());
    c.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  return c;
}

void load_parameters(LgtdModel& model, const Checkpoint& ckpt) {
  if (!(model.config() == ckpt.config.model)) {
    throw std::invalid_argument("checkpoint model config does not match the target model");
  }
  for (auto& [name, p] : model.parameters().entries()) {
    const Tensor& src = ckpt.tensor(name);
    if (src.shape() != p.shape()) {
      throw std::invalid_argument("checkpoint tensor " + name + " has shape " + shape_str(src.shape()) + ", model expects " +
                                  shape_str(p.shape()));
    }
    Var v = p;
    v.mutable_value() = src;
  }
}

std::unique_ptr<LgtdModel> model_from_checkpoint(const Checkpoint& ckpt) {
  auto model = std::make_unique<LgtdModel>(ckpt.config.model, 0);
  load_parameters(*model, ckpt);
  return model;
}

void restore_trainer(Trainer& trainer, const Checkpoint& ckpt) {
  if (ckpt.rng_state.empty()) throw std::invalid_argument("checkpoint carries no training state");
  const auto& entries = trainer.model().parameters().entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    trainer.optimizer().first_moments()[i] = ckpt.tensor(kAdamM + entries[i].first);
    trainer.optimizer().second_moments()[i] = ckpt.tensor(kAdamV + entries[i].first);
  }
  trainer.optimizer().set_steps(ckpt.adam_steps);
  trainer.set_iteration(ckpt.iteration);
  std::istringstream rs(ckpt.rng_state);
  rs >> trainer.rng();
  if (!rs) throw std::runtime_error("corrupt RNG state in checkpoint");
}

}  // namespace lgtd
