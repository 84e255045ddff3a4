#include "lgtd/stdm.hpp"

#include <stdexcept>
#include <string>

namespace lgtd {

std::vector<Var> frame_vars(const Clip& clip, bool requires_grad) {
  std::vector<Var> out;
  out.reserve(clip.frames.size());
  for (const Frame& f : clip.frames) out.emplace_back(f, requires_grad);
  return out;
}

namespace {

void require_odd(std::size_t n) {
  if (n % 2 == 0) {
    throw std::invalid_argument("clip length " + std::to_string(n) + " is even; expected 2N+1 frames");
  }
}

// Index pairs (minuend, subtrahend) in d^{-N} .. d^{+N} order.
std::vector<std::pair<int, int>> difference_pairs(int half) {
  std::vector<std::pair<int, int>> pairs;
  const int t = half;
  for (int i = -half; i <= half; ++i) {
    if (i < 0) pairs.emplace_back(t + i, t + i + 1);
    if (i > 0) pairs.emplace_back(t + i, t + i - 1);
  }
  return pairs;
}

}  // namespace

std::vector<Tensor> rgb_differences(const Clip& clip, int half_frames) {
  require_odd(clip.frames.size());
  if (clip.length() != 2 * half_frames + 1) {
    throw std::invalid_argument("clip has " + std::to_string(clip.length()) + " frames, expected " +
                                std::to_string(2 * half_frames + 1));
  }
  std::vector<Tensor> out;
  for (auto [a, b] : difference_pairs(half_frames)) out.push_back(clip.frames[a] - clip.frames[b]);
  return out;
}

std::vector<Var> rgb_differences(const std::vector<Var>& frames) {
  require_odd(frames.size());
  std::vector<Var> out;
  for (auto [a, b] : difference_pairs(static_cast<int>(frames.size()) / 2)) out.push_back(ops::sub(frames[a], frames[b]));
  return out;
}

ShortTermModule::ShortTermModule(ParameterSet& params, const std::string& prefix, int channels, int half_frames,
                                 FusionMode mode, Rng& rng)
    : half_frames_(half_frames),
      mode_(mode),
      encoder_(params, prefix + ".encoder", mode == FusionMode::Diff ? 3 : 6, channels, 3, rng),
      fusion_(params, prefix + ".fusion", 2 * half_frames * channels, channels, 3, rng),
      res1_(params, prefix + ".res1", channels, rng),
      res2_(params, prefix + ".res2", channels, rng) {}

std::vector<Var> ShortTermModule::raw_inputs(const std::vector<Var>& frames) const {
  if (static_cast<int>(frames.size()) != 2 * half_frames_ + 1) {
    throw std::invalid_argument("short-term module expects " + std::to_string(2 * half_frames_ + 1) + " frames, got " +
                                std::to_string(frames.size()));
  }
  if (mode_ == FusionMode::Diff) return rgb_differences(frames);
  std::vector<Var> out;
  for (auto [a, b] : difference_pairs(half_frames_)) out.push_back(ops::concat_channels({frames[a], frames[b]}));
  return out;
}

DifferencePack ShortTermModule::encode(const std::vector<Var>& raw) const {
  if (raw.size() != static_cast<std::size_t>(2 * half_frames_)) {
    throw std::invalid_argument("expected " + std::to_string(2 * half_frames_) + " difference maps, got " +
                                std::to_string(raw.size()));
  }
  const Shape& s = raw[0].shape();
  for (const Var& r : raw) {
    if (r.shape() != s) throw std::invalid_argument("difference maps disagree in shape");
  }
  if (s[1] % 2 || s[2] % 2) {
    throw std::invalid_argument("difference maps are " + std::to_string(s[1]) + "x" + std::to_string(s[2]) +
                                "; pooling needs even height and width");
  }
  DifferencePack pack;
  for (const Var& r : raw) pack.diffs.push_back(ops::avg_pool2(encoder_(r)));
  pack.fused = fusion_(ops::concat_channels(pack.diffs));
  return pack;
}

Var ShortTermModule::forward(const std::vector<Var>& frames, const Var& target_feature) const {
  const DifferencePack pack = encode(raw_inputs(frames));
  const Var up = ops::upsample_bilinear2(pack.fused);
  if (up.shape() != target_feature.shape()) {
    throw std::invalid_argument("upsampled motion " + shape_str(up.shape()) + " does not match target feature " +
                                shape_str(target_feature.shape()));
  }
  const Var f1 = ops::add(target_feature, up);
  return ops::add(res1_(f1), ops::upsample_bilinear2(res2_(pack.fused)));
}

}  // namespace lgtd
