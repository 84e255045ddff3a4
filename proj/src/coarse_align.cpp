#include "lgtd/coarse_align.hpp"

#include <stdexcept>
#include <string>

namespace lgtd {

FeatureExtractor::FeatureExtractor(ParameterSet& params, const std::string& prefix, int channels, int blocks, Rng& rng)
    : head_(params, prefix + ".head", 3, channels, 3, rng) {
  for (int b = 0; b < blocks; ++b) blocks_.emplace_back(params, prefix + ".block" + std::to_string(b), channels, rng);
}

Var FeatureExtractor::operator()(const Var& frame) const {
  Var x = head_(frame);
  for (const ResidualBlock& b : blocks_) x = b(x);
  return x;
}

std::vector<Var> FeatureExtractor::extract(const std::vector<Var>& frames) const {
  std::vector<Var> out;
  out.reserve(frames.size());
  for (const Var& f : frames) out.push_back((*this)(f));
  return out;
}

CoarseAligner::CoarseAligner(ParameterSet& params, const std::string& prefix, int channels, double max_displacement,
                             Rng& rng)
    : max_displacement_(max_displacement),
      deform_(params, prefix + ".deform", channels, channels, kKernel, rng),
      coarse1_(params, prefix + ".offset_coarse1", 2 * channels, channels, 3, rng),
      coarse2_(params, prefix + ".offset_coarse2", channels, kOffsetChannels, 3, rng, Init::Zero),
      fine1_(params, prefix + ".offset_fine1", 2 * channels + kOffsetChannels, channels, 3, rng),
      fine2_(params, prefix + ".offset_fine2", channels, kOffsetChannels, 3, rng, Init::Zero) {}

Var CoarseAligner::predict_offsets(const Var& neighbour, const Var& target) const {
  const Var pair_coarse = ops::concat_channels({ops::avg_pool2(neighbour), ops::avg_pool2(target)});
  const Var coarse = coarse2_(ops::leaky_relu(coarse1_(pair_coarse), 0.1));
  // Displacements measured in half-resolution pixels double at full resolution.
  const Var upsampled = ops::scale(ops::upsample_bilinear2(coarse), 2.0);
  const Var residual = fine2_(ops::leaky_relu(fine1_(ops::concat_channels({neighbour, target, upsampled})), 0.1));
  return ops::clamp(ops::add(upsampled, residual), -max_displacement_, max_displacement_);
}

Var CoarseAligner::align_one(const Var& neighbour, const Var& target) const {
  return ops::deform_conv2d(neighbour, predict_offsets(neighbour, target), deform_.weight, deform_.bias, kKernel / 2);
}

AlignedStack CoarseAligner::align(const std::vector<Var>& features, int target_index) const {
  if (target_index < 0 || target_index >= static_cast<int>(features.size())) {
    throw std::invalid_argument("target index " + std::to_string(target_index) + " outside stack of " +
                                std::to_string(features.size()));
  }
  AlignedStack stack;
  const Var& target = features[target_index];
  for (int k = 0; k < static_cast<int>(features.size()); ++k) {
    if (k == target_index) {
      const Shape& s = target.shape();
      const Var zero(Tensor({kOffsetChannels, s[1], s[2]}));
      stack.frames.push_back(ops::deform_conv2d(target, zero, deform_.weight, deform_.bias, kKernel / 2));
    } else {
      stack.frames.push_back(align_one(features[k], target));
    }
  }
  return stack;
}

}  // namespace lgtd
