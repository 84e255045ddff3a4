#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lgtd/coarse_align.hpp"
#include "lgtd/data.hpp"
#include "lgtd/dcu.hpp"
#include "lgtd/ltdm.hpp"
#include "lgtd/model_config.hpp"
#include "lgtd/reconstruction.hpp"
#include "lgtd/stdm.hpp"

namespace lgtd {

/// Intermediate features of one forward pass.
struct ForwardTrace {
  Var target_feature;  // f_t
  Var spatial;         // F_t
  Var short_term;      // g_s (undefined without the short-term branch)
  Var short_refined;   // F_s
  Var long_term;       // F_l (undefined without the long-term branch)
  Var refined;         // F^_t
  Var residual;        // reconstruction output before the skip
  Var output;          // I_SR (clamped when requested)
};

/// Full local-global temporal difference network.
class LgtdModel {
 public:
  LgtdModel(const ModelConfig& cfg, std::uint64_t seed);
  LgtdModel(const LgtdModel&) = delete;
  LgtdModel& operator=(const LgtdModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  /// Throws unless `frames` is a 2N+1 sequence of [3, H, W] maps whose size
  /// satisfies the divisibility constraints.
  void check_input(const std::vector<Var>& frames) const;

  ForwardTrace trace(const std::vector<Var>& frames, bool clamp_output) const;
  Var forward(const std::vector<Var>& frames, bool clamp_output = false) const {
    return trace(frames, clamp_output).output;
  }
  /// Inference without graph recording; output clamped to [0, 1].
  Frame infer(const Clip& lr_clip) const;

  const ShortTermModule* short_term() const { return stdm_ ? &*stdm_ : nullptr; }
  const FeatureExtractor* extractor() const { return extractor_ ? &*extractor_ : nullptr; }
  const CoarseAligner* aligner() const { return aligner_ ? &*aligner_ : nullptr; }
  const LongTermModule* long_term() const { return ltdm_ ? &*ltdm_ : nullptr; }
  const Reconstructor& reconstructor() const { return *recon_; }
  const Conv2d& target_conv() const { return target_conv_; }
  const Conv2d& spatial_conv() const { return spatial_conv_; }

 private:
  ModelConfig cfg_;
  ParameterSet params_;
  Conv2d target_conv_;   // f_t for the short-term branch
  Conv2d spatial_conv_;  // F_t, the DCU guide
  std::optional<ShortTermModule> stdm_;
  std::optional<FeatureExtractor> extractor_;
  std::optional<CoarseAligner> aligner_;
  std::optional<LongTermModule> ltdm_;
  std::optional<CompensationUnit> dcu_short_, dcu_long_;
  std::optional<ConcatFusion> fuse_short_, fuse_long_;
  std::optional<Reconstructor> recon_;
};

struct LayerCost {
  std::string name;
  std::size_t params = 0;
  double flops = 0;  // 2 x multiply-accumulates
};

/// Analytic per-layer parameter and FLOP counts for an LR input of H x W.
std::vector<LayerCost> layer_costs(const ModelConfig& cfg, int height, int width);
std::size_t param_count(const ModelConfig& cfg);
double flops_estimate(const ModelConfig& cfg, int height, int width);

}  // namespace lgtd
