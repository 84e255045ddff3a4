#pragma once

#include <vector>

#include "lgtd/layers.hpp"

namespace lgtd {

/// Shared per-frame encoder: one 3x3 conv followed by residual blocks.
class FeatureExtractor {
 public:
  FeatureExtractor(ParameterSet& params, const std::string& prefix, int channels, int blocks, Rng& rng);

  Var operator()(const Var& frame) const;
  std::vector<Var> extract(const std::vector<Var>& frames) const;

  const Conv2d& head() const { return head_; }
  const std::vector<ResidualBlock>& blocks() const { return blocks_; }

 private:
  Conv2d head_;
  std::vector<ResidualBlock> blocks_;
};

/// Features aligned toward the centre frame; reversed() is F'_T.
struct AlignedStack {
  std::vector<Var> frames;

  std::vector<Var> reversed() const { return {frames.rbegin(), frames.rend()}; }
  std::size_t size() const { return frames.size(); }
};

/// Two-level deformable alignment. Offsets are predicted at half resolution
/// from [neighbour, target], upsampled (values doubled), refined at full
/// resolution, clamped to +-max_displacement and applied by a 3x3
/// deformable convolution shared across frames.
class CoarseAligner {
 public:
  CoarseAligner(ParameterSet& params, const std::string& prefix, int channels, double max_displacement, Rng& rng);

  Var predict_offsets(const Var& neighbour, const Var& target) const;
  Var align_one(const Var& neighbour, const Var& target) const;
  /// The target entry gets the deformable conv with zero offsets.
  AlignedStack align(const std::vector<Var>& features, int target_index) const;

  const Conv2d& deform() const { return deform_; }
  double max_displacement() const { return max_displacement_; }
  static constexpr int kKernel = 3;
  static constexpr int kOffsetChannels = 2 * kKernel * kKernel;

 private:
  double max_displacement_;
  Conv2d deform_;
  Conv2d coarse1_, coarse2_;
  Conv2d fine1_, fine2_;
};

}  // namespace lgtd
