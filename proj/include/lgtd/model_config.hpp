#pragma once

#include <string>

namespace lgtd {

enum class FusionMode { Diff, Concat };
enum class Direction { Both, Forward, Backward };
enum class ReconMode { Hybrid, ResBlock, LaOnly, SaOnly };

std::string to_string(FusionMode m);
std::string to_string(Direction d);
std::string to_string(ReconMode m);
FusionMode parse_fusion_mode(const std::string& s);
Direction parse_direction(const std::string& s);
ReconMode parse_recon_mode(const std::string& s);

struct LsabConfig {
  int num_blocks = 5;
  int heads = 4;
  int window = 8;
  int ca_reduction = 16;

  friend bool operator==(const LsabConfig&, const LsabConfig&) = default;
};

/// Width/depth/scale hyperparameters plus the ablation switches.
struct ModelConfig {
  int half_frames = 2;  // N; the clip holds 2N+1 frames
  int channels = 64;
  int scale = 4;
  int extractor_blocks = 5;
  LsabConfig lsab;
  double alpha = 0.5;
  double beta = 0.5;
  double max_displacement = 16.0;

  bool use_stdm = true;
  bool use_ltdm = true;
  bool use_dcu = true;
  FusionMode stdm_mode = FusionMode::Diff;
  FusionMode ltdm_mode = FusionMode::Diff;
  Direction ltdm_direction = Direction::Both;
  ReconMode recon_mode = ReconMode::Hybrid;
  // Adds the bicubic-upsampled target frame to the reconstruction output.
  bool global_skip = true;

  int frames() const { return 2 * half_frames + 1; }
  /// LR height/width must be multiples of this.
  int spatial_divisor() const;
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Micro configuration used by gradient checks and desk-scale tests.
ModelConfig micro_config();

}  // namespace lgtd
