#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lgtd/ops.hpp"

namespace lgtd {

using Rng = std::mt19937_64;

/// Ordered registry of named trainable tensors owned by a model.
class ParameterSet {
 public:
  Var add(const std::string& name, Tensor init);

  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  std::size_t numel() const;
  std::size_t size() const { return entries_.size(); }
  Var find(const std::string& name) const;  // throws when absent

  void zero_grad();
  /// Replaces every parameter with N(0, stddev^2) noise (used to leave the
  /// zero-initialised regime in tests).
  void randomize(Rng& rng, double stddev);

 private:
  std::vector<std::pair<std::string, Var>> entries_;
};

enum class Init { Default, Zero };

/// Square-kernel stride-1 convolution with "same" padding.
struct Conv2d {
  Var weight;
  Var bias;
  int in = 0, out = 0, kernel = 0;

  Conv2d() = default;
  Conv2d(ParameterSet& params, const std::string& name, int in_channels, int out_channels, int kernel, Rng& rng,
         Init init = Init::Default);

  Var operator()(const Var& x) const { return ops::conv2d(x, weight, bias, kernel / 2); }
  static std::size_t param_count(int in_channels, int out_channels, int kernel) {
    return static_cast<std::size_t>(in_channels) * out_channels * kernel * kernel + out_channels;
  }
};

/// x + conv(relu(conv(x))), the tail conv zero-initialised.
struct ResidualBlock {
  Conv2d conv1, conv2;

  ResidualBlock() = default;
  ResidualBlock(ParameterSet& params, const std::string& name, int channels, Rng& rng);

  Var body(const Var& x) const { return conv2(ops::relu(conv1(x))); }
  Var operator()(const Var& x) const { return ops::add(x, body(x)); }
  static std::size_t param_count(int channels) { return 2 * Conv2d::param_count(channels, channels, 3); }
};

struct LayerNorm {
  Var gamma, beta;

  LayerNorm() = default;
  LayerNorm(ParameterSet& params, const std::string& name, int channels);
  Var operator()(const Var& x) const { return ops::layer_norm_channels(x, gamma, beta); }
};

}  // namespace lgtd
