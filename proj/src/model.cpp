#include "lgtd/model.hpp"

#include <numeric>
#include <stdexcept>

namespace lgtd {

std::string to_string(FusionMode m) { return m == FusionMode::Diff ? "diff" : "concat"; }

std::string to_string(Direction d) {
  switch (d) {
    case Direction::Both:
      return "both";
    case Direction::Forward:
      return "forward";
    case Direction::Backward:
      return "backward";
  }
  return "?";
}

std::string to_string(ReconMode m) {
  switch (m) {
    case ReconMode::Hybrid:
      return "hybrid";
    case ReconMode::ResBlock:
      return "resblock";
    case ReconMode::LaOnly:
      return "laOnly";
    case ReconMode::SaOnly:
      return "saOnly";
  }
  return "?";
}

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "diff") return FusionMode::Diff;
  if (s == "concat") return FusionMode::Concat;
  throw std::invalid_argument("fusion mode must be diff|concat, got '" + s + "'");
}

Direction parse_direction(const std::string& s) {
  if (s == "both") return Direction::Both;
  if (s == "forward") return Direction::Forward;
  if (s == "backward") return Direction::Backward;
  throw std::invalid_argument("direction must be both|forward|backward, got '" + s + "'");
}

ReconMode parse_recon_mode(const std::string& s) {
  if (s == "hybrid") return ReconMode::Hybrid;
  if (s == "resblock") return ReconMode::ResBlock;
  if (s == "laOnly") return ReconMode::LaOnly;
  if (s == "saOnly") return ReconMode::SaOnly;
  throw std::invalid_argument("reconstruction mode must be hybrid|resblock|laOnly|saOnly, got '" + s + "'");
}

int ModelConfig::spatial_divisor() const {
  const bool attention = recon_mode == ReconMode::Hybrid || recon_mode == ReconMode::LaOnly;
  return attention && lsab.num_blocks > 0 ? std::lcm(2, lsab.window) : 2;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("invalid model config: " + field + " " + why);
  };
  if (half_frames < 1) fail("model.halfFrames", "must be >= 1");
  if (channels < 1) fail("model.channels", "must be >= 1");
  if (extractor_blocks < 0) fail("model.extractorBlocks", "must be >= 0");
  if (lsab.num_blocks < 0) fail("model.lsabBlocks", "must be >= 0");
  if (scale != 2 && scale != 4) fail("model.scale", "must be 2 or 4");
  if (alpha < 0) fail("model.alpha", "must be >= 0");
  if (beta < 0) fail("model.beta", "must be >= 0");
  if (max_displacement <= 0) fail("model.maxDisplacement", "must be > 0");
  const bool attention = recon_mode == ReconMode::Hybrid || recon_mode == ReconMode::LaOnly;
  const bool channel_att = recon_mode == ReconMode::Hybrid || recon_mode == ReconMode::SaOnly;
  if (attention && (lsab.heads < 1 || channels % lsab.heads != 0)) {
    fail("model.msaHeads", "must divide model.channels");
  }
  if (attention && lsab.window < 1) fail("model.windowSize", "must be >= 1");
  if (channel_att && (lsab.ca_reduction < 1 || channels < lsab.ca_reduction)) {
    fail("model.caReduction", "must be in [1, model.channels]");
  }
  if (!use_stdm && stdm_mode != FusionMode::Diff) fail("model.stdmMode", "is set but model.useSTDM is false");
  if (!use_ltdm && ltdm_mode != FusionMode::Diff) fail("model.ltdmMode", "is set but model.useLTDM is false");
  if (!use_ltdm && ltdm_direction != Direction::Both) fail("model.ltdmDirection", "is set but model.useLTDM is false");
  if (!use_stdm && !use_ltdm) fail("model.useSTDM", "and model.useLTDM cannot both be false");
}

ModelConfig micro_config() {
  ModelConfig c;
  c.half_frames = 1;
  c.channels = 4;
  c.scale = 2;
  c.extractor_blocks = 1;
  c.lsab = {1, 2, 4, 2};
  return c;
}

LgtdModel::LgtdModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const int c = cfg_.channels;
  spatial_conv_ = Conv2d(params_, "spatial_conv", 3, c, 3, rng);
  if (cfg_.use_stdm) {
    target_conv_ = Conv2d(params_, "target_conv", 3, c, 3, rng);
    stdm_.emplace(params_, "stdm", c, cfg_.half_frames, cfg_.stdm_mode, rng);
    if (cfg_.use_dcu) {
      dcu_short_.emplace(params_, "dcu_short", c, rng);
    } else {
      fuse_short_.emplace(params_, "fuse_short", c, rng);
    }
  }
  if (cfg_.use_ltdm) {
    extractor_.emplace(params_, "extractor", c, cfg_.extractor_blocks, rng);
    aligner_.emplace(params_, "align", c, cfg_.max_displacement, rng);
    ltdm_.emplace(params_, "ltdm", c, cfg_.frames(), cfg_, rng);
    if (cfg_.use_dcu) {
      dcu_long_.emplace(params_, "dcu_long", c, rng);
    } else {
      fuse_long_.emplace(params_, "fuse_long", c, rng);
    }
  }
  recon_.emplace(params_, "recon", c, cfg_.scale, cfg_.lsab, cfg_.recon_mode, rng);
}

void LgtdModel::check_input(const std::vector<Var>& frames) const {
  if (static_cast<int>(frames.size()) != cfg_.frames()) {
    throw std::invalid_argument("model expects " + std::to_string(cfg_.frames()) + " frames (2N+1 with N=" +
                                std::to_string(cfg_.half_frames) + "), got " + std::to_string(frames.size()));
  }
  const Shape& s = frames[0].shape();
  if (s.size() != 3 || s[0] != 3) throw std::invalid_argument("frames must be [3, H, W], got " + shape_str(s));
  for (const Var& f : frames) {
    if (f.shape() != s) throw std::invalid_argument("frames disagree in shape");
  }
  const int div = cfg_.spatial_divisor();
  if (s[1] % div || s[2] % div) {
    throw std::invalid_argument("LR size " + std::to_string(s[1]) + "x" + std::to_string(s[2]) +
                                " must be divisible by " + std::to_string(div));
  }
}

ForwardTrace LgtdModel::trace(const std::vector<Var>& frames, bool clamp_output) const {
  check_input(frames);
  ForwardTrace t;
  const Var& target = frames[cfg_.half_frames];
  t.spatial = spatial_conv_(target);
  t.short_refined = t.spatial;
  if (stdm_) {
    t.target_feature = target_conv_(target);
    t.short_term = stdm_->forward(frames, t.target_feature);
    t.short_refined = dcu_short_ ? (*dcu_short_)(t.spatial, t.short_term) : (*fuse_short_)(t.spatial, t.short_term);
  }
  t.refined = t.short_refined;
  if (ltdm_) {
    const AlignedStack stack = aligner_->align(extractor_->extract(frames), cfg_.half_frames);
    t.long_term = ltdm_->forward(stack);
    t.refined = dcu_long_ ? (*dcu_long_)(t.short_refined, t.long_term) : (*fuse_long_)(t.short_refined, t.long_term);
  }
  t.residual = (*recon_)(t.refined);
  Var out = t.residual;
  if (cfg_.global_skip) out = ops::add(out, bicubic_upsample(target, cfg_.scale));
  t.output = clamp_output ? ops::clamp(out, 0.0, 1.0) : out;
  return t;
}

Frame LgtdModel::infer(const Clip& lr_clip) const {
  NoGradGuard no_grad;
  return forward(frame_vars(lr_clip), true).value();
}

}  // namespace lgtd
