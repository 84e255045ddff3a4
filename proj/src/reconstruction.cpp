#include "lgtd/reconstruction.hpp"

#include <stdexcept>
#include <string>

namespace lgtd {

int upsample_stages(int scale) {
  int stages = 0;
  int s = scale;
  while (s > 1 && s % 2 == 0) {
    s /= 2;
    ++stages;
  }
  if (s != 1 || stages == 0) {
    throw std::invalid_argument("model.scale must be a power of two >= 2, got " + std::to_string(scale));
  }
  return stages;
}

ChannelAttention::ChannelAttention(ParameterSet& params, const std::string& prefix, int channels, int reduction,
                                   Rng& rng) {
  if (reduction <= 0 || channels < reduction) {
    throw std::invalid_argument("channel attention needs channels (" + std::to_string(channels) +
                                ") >= model.caReduction (" + std::to_string(reduction) + ")");
  }
  down_ = Conv2d(params, prefix + ".down", channels, channels / reduction, 1, rng);
  up_ = Conv2d(params, prefix + ".up", channels / reduction, channels, 1, rng);
}

Var ChannelAttention::scales(const Var& x) const {
  return ops::sigmoid(up_(ops::relu(down_(ops::global_avg_pool(x)))));
}

WindowAttention::WindowAttention(ParameterSet& params, const std::string& prefix, int channels, int heads, int window,
                                 Rng& rng)
    : channels_(channels),
      heads_(heads),
      window_(window),
      qkv_(params, prefix + ".qkv", channels, 3 * channels, 1, rng),
      proj_(params, prefix + ".proj", channels, channels, 1, rng, Init::Zero) {
  if (heads <= 0 || channels % heads) {
    throw std::invalid_argument("model.channels (" + std::to_string(channels) + ") must be divisible by model.msaHeads (" +
                                std::to_string(heads) + ")");
  }
  if (window <= 0) throw std::invalid_argument("model.windowSize must be positive");
}

std::vector<Var> WindowAttention::project(const Var& x) const {
  const Var qkv = qkv_(x);
  return {ops::slice_channels(qkv, 0, channels_), ops::slice_channels(qkv, channels_, 2 * channels_),
          ops::slice_channels(qkv, 2 * channels_, 3 * channels_)};
}

Var WindowAttention::operator()(const Var& x) const {
  const auto qkv = project(x);
  return proj_(ops::window_attention(qkv[0], qkv[1], qkv[2], heads_, window_));
}

Lsab::Lsab(ParameterSet& params, const std::string& prefix, int channels, const LsabConfig& cfg, ReconMode mode,
           Rng& rng)
    : mode_(mode) {
  if (mode == ReconMode::ResBlock) {
    res_.emplace(params, prefix + ".res", channels, rng);
    return;
  }
  if (mode == ReconMode::Hybrid || mode == ReconMode::LaOnly) {
    norm_.emplace(params, prefix + ".norm", channels);
    msa_.emplace(params, prefix + ".msa", channels, cfg.heads, cfg.window, rng);
  }
  if (mode == ReconMode::Hybrid || mode == ReconMode::SaOnly) {
    sa_conv_.emplace(params, prefix + ".sa_conv", channels, channels, 3, rng, Init::Zero);
    ca_.emplace(params, prefix + ".ca", channels, cfg.ca_reduction, rng);
  }
}

Var Lsab::long_branch(const Var& x) const { return ops::add(x, (*msa_)((*norm_)(x))); }

Var Lsab::short_branch(const Var& x) const { return ops::add(x, (*ca_)((*sa_conv_)(x))); }

Var Lsab::operator()(const Var& x) const {
  switch (mode_) {
    case ReconMode::Hybrid:
      return short_branch(long_branch(x));
    case ReconMode::LaOnly:
      return long_branch(x);
    case ReconMode::SaOnly:
      return short_branch(x);
    case ReconMode::ResBlock:
      return (*res_)(x);
  }
  throw std::logic_error("unknown reconstruction mode");
}

Reconstructor::Reconstructor(ParameterSet& params, const std::string& prefix, int channels, int scale,
                             const LsabConfig& cfg, ReconMode mode, Rng& rng)
    : scale_(scale) {
  const int stages = upsample_stages(scale);
  for (int b = 0; b < cfg.num_blocks; ++b) blocks_.emplace_back(params, prefix + ".lsab" + std::to_string(b), channels, cfg, mode, rng);
  body_ = Conv2d(params, prefix + ".body", channels, channels, 3, rng);
  for (int s = 0; s < stages; ++s) {
    upsample_.emplace_back(params, prefix + ".up" + std::to_string(s), channels, 4 * channels, 3, rng);
  }
  to_rgb_ = Conv2d(params, prefix + ".to_rgb", channels, 3, 3, rng, Init::Zero);
}

Var Reconstructor::operator()(const Var& feature) const {
  Var x = feature;
  for (const Lsab& b : blocks_) x = b(x);
  x = body_(x);
  for (const Conv2d& up : upsample_) x = ops::leaky_relu(ops::pixel_shuffle(up(x), 2), 0.1);
  return to_rgb_(x);
}

}  // namespace lgtd
