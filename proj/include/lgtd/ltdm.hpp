#pragma once

#include <optional>
#include <utility>

#include "lgtd/coarse_align.hpp"
#include "lgtd/layers.hpp"
#include "lgtd/model_config.hpp"

namespace lgtd {

struct GlobalDifference {
  Var forward;   // D_f = F_L - F'_L
  Var backward;  // D_b = F'_L - F_L
};

GlobalDifference cross_difference(const Var& smoothed_forward, const Var& smoothed_backward);

/// One multi-scale activation branch:
/// att = sigmoid(conv(D + conv3(D) + up(conv3(pool(D))))).
struct ActivationBranch {
  Conv2d same_scale;
  Conv2d pooled_scale;
  Conv2d output;  // zero-initialised, so att == 0.5 at init

  ActivationBranch() = default;
  ActivationBranch(ParameterSet& params, const std::string& prefix, int channels, Rng& rng);
  Var operator()(const Var& difference) const;
};

/// Every intermediate of one long-term pass, for inspection and tests.
struct LongTermTrace {
  Var smoothed_forward;   // F_L
  Var smoothed_backward;  // F'_L
  Var diff_forward, diff_backward;
  Var att_forward, att_backward;  // undefined when that branch is disabled
  Var gate;                       // G
  Var output;                     // F_l
};

/// Long-term temporal difference module.
class LongTermModule {
 public:
  LongTermModule(ParameterSet& params, const std::string& prefix, int channels, int frames, const ModelConfig& cfg,
                 Rng& rng);

  /// 1x1 blend of the channel-stacked sequence followed by a 3x3 conv; both
  /// directions share these weights.
  Var smooth(const std::vector<Var>& sequence) const;
  /// Throw when the corresponding branch is disabled by the direction switch.
  Var activate_forward(const Var& d) const;
  Var activate_backward(const Var& d) const;

  LongTermTrace trace(const AlignedStack& stack) const;
  Var forward(const AlignedStack& stack) const { return trace(stack).output; }

  void set_balance(double alpha, double beta);
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

 private:
  int frames_;
  double alpha_, beta_;
  FusionMode mode_;
  Direction direction_;
  Conv2d blend_;
  Conv2d smooth_;
  std::optional<ActivationBranch> forward_branch_;
  std::optional<ActivationBranch> backward_branch_;
  std::optional<Conv2d> concat_fuse_;
};

}  // namespace lgtd
