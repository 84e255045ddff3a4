#pragma once

#include <vector>

#include "lgtd/data.hpp"
#include "lgtd/layers.hpp"
#include "lgtd/model_config.hpp"

namespace lgtd {

/// Wraps clip frames as graph leaves.
std::vector<Var> frame_vars(const Clip& clip, bool requires_grad = false);

/// Signed adjacent-frame differences ordered d^{-N} .. d^{-1}, d^{+1} .. d^{+N}.
/// For i < 0: I_{t+i} - I_{t+i+1}; for i > 0: I_{t+i} - I_{t+i-1}.
std::vector<Tensor> rgb_differences(const Clip& clip, int half_frames);
std::vector<Var> rgb_differences(const std::vector<Var>& frames);

struct DifferencePack {
  std::vector<Var> diffs;  // encoded d^i, [C, H/2, W/2]
  Var fused;               // D_s, [C, H/2, W/2]
};

/// Short-term temporal difference module: encodes adjacent-frame motion at
/// half resolution and injects it into the target feature in two stages.
class ShortTermModule {
 public:
  ShortTermModule(ParameterSet& params, const std::string& prefix, int channels, int half_frames, FusionMode mode,
                  Rng& rng);

  /// Per-neighbour raw inputs: RGB differences (Diff) or stacked frame pairs (Concat).
  std::vector<Var> raw_inputs(const std::vector<Var>& frames) const;
  /// Shared conv + x2 average pooling per map, then a fusion conv over the
  /// channel-concatenated maps.
  DifferencePack encode(const std::vector<Var>& raw) const;
  /// f_1 = f_t + Up(D_s);  g_s = Res1(f_1) + Up(Res2(D_s)).
  Var forward(const std::vector<Var>& frames, const Var& target_feature) const;

  const Conv2d& encoder() const { return encoder_; }
  const Conv2d& fusion() const { return fusion_; }

 private:
  int half_frames_;
  FusionMode mode_;
  Conv2d encoder_;
  Conv2d fusion_;
  ResidualBlock res1_;
  ResidualBlock res2_;
};

}  // namespace lgtd
