#pragma once

#include <optional>
#include <vector>

#include "lgtd/layers.hpp"
#include "lgtd/model_config.hpp"

namespace lgtd {

/// RCAN-style channel attention: x * sigmoid(up(relu(down(avgpool(x))))).
class ChannelAttention {
 public:
  ChannelAttention(ParameterSet& params, const std::string& prefix, int channels, int reduction, Rng& rng);
  Var scales(const Var& x) const;  // [C, 1, 1]
  Var operator()(const Var& x) const { return ops::mul_channel(x, scales(x)); }

 private:
  Conv2d down_, up_;
};

/// Multi-head self-attention inside non-overlapping windows with 1x1
/// Q/K/V/output projections; the output projection starts at zero.
class WindowAttention {
 public:
  WindowAttention(ParameterSet& params, const std::string& prefix, int channels, int heads, int window, Rng& rng);
  Var operator()(const Var& x) const;

  /// q, k, v projections of x (for inspection).
  std::vector<Var> project(const Var& x) const;
  const Conv2d& qkv() const { return qkv_; }
  const Conv2d& proj() const { return proj_; }
  int heads() const { return heads_; }
  int window() const { return window_; }

 private:
  int channels_, heads_, window_;
  Conv2d qkv_;
  Conv2d proj_;
};

/// Long-short attention block: y = x + MSA(LN(x)); out = y + CA(conv(y)).
/// Ablation modes keep one sub-block or swap in a plain residual block.
class Lsab {
 public:
  Lsab(ParameterSet& params, const std::string& prefix, int channels, const LsabConfig& cfg, ReconMode mode, Rng& rng);
  Var long_branch(const Var& x) const;   // x + MSA(LN(x))
  Var short_branch(const Var& x) const;  // x + CA(conv(x))
  Var operator()(const Var& x) const;

 private:
  ReconMode mode_;
  std::optional<LayerNorm> norm_;
  std::optional<WindowAttention> msa_;
  std::optional<Conv2d> sa_conv_;
  std::optional<ChannelAttention> ca_;
  std::optional<ResidualBlock> res_;
};

/// Stacked LSABs, a 3x3 conv, log2(r) stages of (conv to 4C, pixel shuffle x2,
/// LeakyReLU) and a zero-initialised conv to RGB. Output is not clamped.
class Reconstructor {
 public:
  Reconstructor(ParameterSet& params, const std::string& prefix, int channels, int scale, const LsabConfig& cfg,
                ReconMode mode, Rng& rng);
  Var operator()(const Var& feature) const;
  int scale() const { return scale_; }

 private:
  int scale_;
  std::vector<Lsab> blocks_;
  Conv2d body_;
  std::vector<Conv2d> upsample_;
  Conv2d to_rgb_;
};

int upsample_stages(int scale);  // log2(scale); rejects non powers of two

}  // namespace lgtd
