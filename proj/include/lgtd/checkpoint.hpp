#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lgtd/config.hpp"
#include "lgtd/model.hpp"
#include "lgtd/training.hpp"

namespace lgtd {

/// Parameters, optimiser moments, counters, config and RNG snapshot.
///
/// File layout: "LGTDCKPT", u32 version, u64 header size, a JSON header
/// (config, counters, RNG state, tensor directory with names, shapes and
/// element offsets), then every tensor as little-endian float64 in
/// directory order.
struct Checkpoint {
  RunConfig config;
  int epoch = 0;
  int iteration = 0;
  long long adam_steps = 0;
  std::string rng_state;  // std::mt19937_64 text form; empty without a trainer
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const;
};

constexpr std::uint32_t kCheckpointVersion = 1;

/// Snapshot of `model`; optimiser and RNG state come from `trainer` when given.
Checkpoint make_checkpoint(const LgtdModel& model, const RunConfig& config, const Trainer* trainer = nullptr,
                           int epoch = 0);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Builds the model described by the snapshot and copies its parameters in.
std::unique_ptr<LgtdModel> model_from_checkpoint(const Checkpoint& ckpt);
/// Copies parameters into an existing model with the same layout.
void load_parameters(LgtdModel& model, const Checkpoint& ckpt);
/// Restores Adam moments, step counters and the RNG.
void restore_trainer(Trainer& trainer, const Checkpoint& ckpt);

}  // namespace lgtd
