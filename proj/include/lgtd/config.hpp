#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lgtd/metrics.hpp"
#include "lgtd/model_config.hpp"
#include "lgtd/training.hpp"

namespace lgtd {

/// Everything a command needs, addressed by flat keys such as
/// "model.channels", "train.lrInit" or "eval.borderCrop".
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  EvalProtocol eval;
};

std::vector<std::string> config_keys();

/// Value of `key` rendered as JSON text.
std::string get_config_value(const RunConfig& cfg, const std::string& key);
/// Sets `key` from text; numbers and booleans are parsed as JSON, anything
/// else is taken as a string. Throws naming the key on bad keys or types.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& text);
/// "key=value" form of set_config_value.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Parses a JSON document. Sections may be nested ({"model": {"channels": 16}})
/// or flat ({"model.channels": 16}); unspecified keys keep their defaults.
RunConfig config_from_json(const std::string& text);
/// Applies only the keys present in `text` on top of `cfg`.
void merge_config_json(RunConfig& cfg, const std::string& text);
std::string config_to_json(const RunConfig& cfg);

/// "default" (published sizes), "micro" (gradient-check size) or "toy"
/// (desk-scale training: N=2, C=16, two LSABs).
RunConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

RunConfig load_config(const std::filesystem::path& path);
void write_config(const std::filesystem::path& path, const RunConfig& cfg);

}  // namespace lgtd
