#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lgtd/ablation.hpp"
#include "lgtd/config.hpp"
#include "lgtd/data.hpp"
#include "lgtd/metrics.hpp"
#include "lgtd/model.hpp"
#include "lgtd/training.hpp"

namespace lgtd {

constexpr const char* kOutputRootEnv = "LGTD_OUTPUT_ROOT";

/// $LGTD_OUTPUT_ROOT, or "runs" when unset.
std::filesystem::path output_root();
/// Absolute `out` is used as is; relative names land under output_root().
std::filesystem::path resolve_output(const std::string& out, const std::string& default_name);

/// Preset, then config file, then key=value overrides, then validation.
struct ConfigSource {
  std::string preset = "default";
  std::string config_file;
  std::vector<std::string> overrides;
};
RunConfig resolve_config(const ConfigSource& src);

/// Training/validation scenes: an on-disk dataset (manifest train/test split,
/// or every scene for training) or freshly synthesised clips.
struct DataSource {
  std::string dataset;
  int synth_clips = 16;
  int val_clips = 4;
  int synth_size = 0;    // HR side; 0 picks the smallest size that fits a patch
  int synth_frames = 0;  // 0 means 2N+1
  std::uint64_t synth_seed = 1000;
};
struct SceneSplit {
  std::vector<Clip> train, val;
};
SceneSplit load_scenes(const DataSource& src, const RunConfig& cfg);

struct TrainOptions {
  ConfigSource config;
  DataSource data;
  std::string out;
  std::string resume;  // checkpoint; its config replaces preset and file
  int print_every = 100;
};
struct TrainReport {
  std::filesystem::path dir;
  std::vector<LogRow> rows;
};
TrainReport cmd_train(const TrainOptions& opt, std::ostream& log);

struct EvalOptions {
  ConfigSource config;  // only eval.* matters
  std::vector<std::string> checkpoints;
  bool bicubic = false;
  int half_frames = 2;  // window for bicubic-only runs
  int scale = 4;
  std::string dataset;
  std::string out;
};
struct EvalRun {
  std::string label;
  int frames = 0;
  std::size_t params = 0;
  std::vector<SceneResult> scenes;
};
struct EvalReport {
  std::filesystem::path dir;
  std::vector<EvalRun> runs;
};
EvalReport cmd_eval(const EvalOptions& opt, std::ostream& log);

struct InferOptions {
  std::string checkpoint;
  std::string clip_dir;
  std::string out;
};
/// Returns the number of frames written.
int cmd_infer(const InferOptions& opt, std::ostream& log);

struct SynthOptions {
  std::uint64_t seed = 0;
  int count = 8;
  int test_count = 0;
  SynthParams params;
  std::string out;
};
std::filesystem::path cmd_synth(const SynthOptions& opt, std::ostream& log);

struct AblateOptions {
  ConfigSource config;
  DataSource data;
  std::vector<std::string> models;  // empty means the whole registry
  int iterations = 100;
  int stats_size = 160;
  std::string out;
};
struct AblateReport {
  std::filesystem::path dir;
  std::vector<AblationResult> results;
  double bicubic_psnr = 0;
};
AblateReport cmd_ablate(const AblateOptions& opt, std::ostream& log);

struct StatsOptions {
  ConfigSource config;
  std::string model = "Full";
  int height = 160;
  int width = 160;
  std::string out;
};
struct StatsReport {
  std::filesystem::path dir;
  std::size_t params = 0;
  double flops = 0;
  std::vector<LayerCost> layers;
};
StatsReport cmd_stats(const StatsOptions& opt, std::ostream& log);

struct ProfileOptions {
  std::string frames_dir;
  int row = 0;
  int stretch = 1;  // each time step repeated this many rows
  std::string out;  // PNG path
};
std::filesystem::path cmd_profile(const ProfileOptions& opt, std::ostream& log);

/// Sorted PNG frames of a directory.
std::vector<std::filesystem::path> list_png_frames(const std::filesystem::path& dir);

/// Parses `args` (without the program name) and runs one subcommand.
/// Returns 0 on success; 2 for usage or configuration errors, 3 for a
/// non-finite training loss, 1 for anything else, with a diagnostic on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lgtd
