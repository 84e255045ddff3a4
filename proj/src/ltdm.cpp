#include "lgtd/ltdm.hpp"

#include <stdexcept>
#include <string>

namespace lgtd {

GlobalDifference cross_difference(const Var& smoothed_forward, const Var& smoothed_backward) {
  require_same_shape(smoothed_forward.value(), smoothed_backward.value(), "cross_difference");
  return {ops::sub(smoothed_forward, smoothed_backward), ops::sub(smoothed_backward, smoothed_forward)};
}

ActivationBranch::ActivationBranch(ParameterSet& params, const std::string& prefix, int channels, Rng& rng)
    : same_scale(params, prefix + ".same_scale", channels, channels, 3, rng),
      pooled_scale(params, prefix + ".pooled_scale", channels, channels, 3, rng),
      output(params, prefix + ".output", channels, channels, 3, rng, Init::Zero) {}

Var ActivationBranch::operator()(const Var& d) const {
  const Shape& s = d.shape();
  if (s.size() != 3 || s[1] % 2 || s[2] % 2) {
    throw std::invalid_argument("activation branch needs even height and width, got " + shape_str(s));
  }
  const Var identity = d;
  const Var local = same_scale(d);
  const Var propagated = ops::upsample_bilinear2(pooled_scale(ops::avg_pool2(d)));
  return ops::sigmoid(output(ops::add(ops::add(identity, local), propagated)));
}

LongTermModule::LongTermModule(ParameterSet& params, const std::string& prefix, int channels, int frames,
                               const ModelConfig& cfg, Rng& rng)
    : frames_(frames),
      alpha_(cfg.alpha),
      beta_(cfg.beta),
      mode_(cfg.ltdm_mode),
      direction_(cfg.ltdm_direction),
      blend_(params, prefix + ".blend", frames * channels, channels, 1, rng),
      smooth_(params, prefix + ".smooth", channels, channels, 3, rng) {
  if (direction_ != Direction::Backward) forward_branch_.emplace(params, prefix + ".att_forward", channels, rng);
  if (direction_ != Direction::Forward) backward_branch_.emplace(params, prefix + ".att_backward", channels, rng);
  set_balance(cfg.alpha, cfg.beta);
  if (mode_ == FusionMode::Concat) concat_fuse_.emplace(params, prefix + ".concat_fuse", 2 * channels, channels, 3, rng);
}

void LongTermModule::set_balance(double alpha, double beta) {
  if (alpha < 0 || beta < 0) throw std::invalid_argument("balance coefficients alpha and beta must be >= 0");
  alpha_ = alpha;
  beta_ = beta;
}

Var LongTermModule::smooth(const std::vector<Var>& sequence) const {
  if (static_cast<int>(sequence.size()) != frames_) {
    throw std::invalid_argument("long-term module expects " + std::to_string(frames_) + " features, got " +
                                std::to_string(sequence.size()));
  }
  return smooth_(blend_(ops::concat_channels(sequence)));
}

Var LongTermModule::activate_forward(const Var& d) const {
  if (!forward_branch_) throw std::logic_error("forward activation branch is disabled (model.ltdmDirection=backward)");
  return (*forward_branch_)(d);
}

Var LongTermModule::activate_backward(const Var& d) const {
  if (!backward_branch_) throw std::logic_error("backward activation branch is disabled (model.ltdmDirection=forward)");
  return (*backward_branch_)(d);
}

LongTermTrace LongTermModule::trace(const AlignedStack& stack) const {
  LongTermTrace t;
  t.smoothed_forward = smooth(stack.frames);
  t.smoothed_backward = smooth(stack.reversed());

  Var input_f, input_b;
  if (mode_ == FusionMode::Diff) {
    const GlobalDifference d = cross_difference(t.smoothed_forward, t.smoothed_backward);
    t.diff_forward = d.forward;
    t.diff_backward = d.backward;
    input_f = d.forward;
    input_b = d.backward;
  } else {
    input_f = input_b = (*concat_fuse_)(ops::concat_channels({t.smoothed_forward, t.smoothed_backward}));
  }

  switch (direction_) {
    case Direction::Both:
      t.att_forward = activate_forward(input_f);
      t.att_backward = activate_backward(input_b);
      t.gate = ops::add(ops::scale(t.att_forward, alpha_), ops::scale(t.att_backward, beta_));
      break;
    case Direction::Forward:
      t.att_forward = activate_forward(input_f);
      t.gate = t.att_forward;
      break;
    case Direction::Backward:
      t.att_backward = activate_backward(input_b);
      t.gate = t.att_backward;
      break;
  }
  // F_l = F'_L * G + F'_L
  t.output = ops::add(ops::mul(t.smoothed_backward, t.gate), t.smoothed_backward);
  return t;
}

}  // namespace lgtd
