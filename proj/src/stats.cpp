#include <numeric>

#include "lgtd/model.hpp"

namespace lgtd {

namespace {

class CostSheet {
 public:
  void conv(const std::string& name, int cin, int cout, int k, double h, double w, int applications = 1) {
    rows_.push_back({name, Conv2d::param_count(cin, cout, k), 2.0 * cin * cout * k * k * h * w * applications});
  }
  void params_only(const std::string& name, std::size_t params) { rows_.push_back({name, params, 0.0}); }
  void flops_only(const std::string& name, double flops) { rows_.push_back({name, 0, flops}); }
  std::vector<LayerCost> take() { return std::move(rows_); }

 private:
  std::vector<LayerCost> rows_;
};

}  // namespace

std::vector<LayerCost> layer_costs(const ModelConfig& cfg, int height, int width) {
  cfg.validate();
  CostSheet s;
  const int c = cfg.channels;
  const int t = cfg.frames();
  const int pairs = 2 * cfg.half_frames;
  const double h = height, w = width, h2 = height / 2.0, w2 = width / 2.0;

  s.conv("spatial_conv", 3, c, 3, h, w);
  if (cfg.use_stdm) {
    s.conv("target_conv", 3, c, 3, h, w);
    s.conv("stdm.encoder", cfg.stdm_mode == FusionMode::Diff ? 3 : 6, c, 3, h, w, pairs);
    s.conv("stdm.fusion", pairs * c, c, 3, h2, w2);
    s.conv("stdm.res1", c, c, 3, h, w, 2);
    s.params_only("stdm.res1.second_conv", Conv2d::param_count(c, c, 3));
    s.conv("stdm.res2", c, c, 3, h2, w2, 2);
    s.params_only("stdm.res2.second_conv", Conv2d::param_count(c, c, 3));
    if (cfg.use_dcu) {
      s.conv("dcu_short", c, c, 3, h, w, 2);
      s.params_only("dcu_short.second_conv", Conv2d::param_count(c, c, 3));
    } else {
      s.conv("fuse_short", 2 * c, c, 3, h, w);
    }
  }
  if (cfg.use_ltdm) {
    s.conv("extractor.head", 3, c, 3, h, w, t);
    for (int b = 0; b < cfg.extractor_blocks; ++b) {
      s.conv("extractor.block" + std::to_string(b), c, c, 3, h, w, 2 * t);
      s.params_only("extractor.block" + std::to_string(b) + ".second_conv", Conv2d::param_count(c, c, 3));
    }
    const int off = CoarseAligner::kOffsetChannels;
    s.conv("align.deform", c, c, 3, h, w, t);
    s.conv("align.offset_coarse1", 2 * c, c, 3, h2, w2, t - 1);
    s.conv("align.offset_coarse2", c, off, 3, h2, w2, t - 1);
    s.conv("align.offset_fine1", 2 * c + off, c, 3, h, w, t - 1);
    s.conv("align.offset_fine2", c, off, 3, h, w, t - 1);
    s.conv("ltdm.blend", t * c, c, 1, h, w, 2);
    s.conv("ltdm.smooth", c, c, 3, h, w, 2);
    // Each activation branch: 3x3 convs at full scale (same, output) and half scale.
    std::vector<std::string> branches;
    if (cfg.ltdm_direction != Direction::Backward) branches.push_back("ltdm.att_forward");
    if (cfg.ltdm_direction != Direction::Forward) branches.push_back("ltdm.att_backward");
    for (const std::string& b : branches) {
      s.conv(b + ".same_scale", c, c, 3, h, w);
      s.conv(b + ".pooled_scale", c, c, 3, h2, w2);
      s.conv(b + ".output", c, c, 3, h, w);
    }
    if (cfg.ltdm_mode == FusionMode::Concat) s.conv("ltdm.concat_fuse", 2 * c, c, 3, h, w);
    if (cfg.use_dcu) {
      s.conv("dcu_long", c, c, 3, h, w, 2);
      s.params_only("dcu_long.second_conv", Conv2d::param_count(c, c, 3));
    } else {
      s.conv("fuse_long", 2 * c, c, 3, h, w);
    }
  }

  const LsabConfig& l = cfg.lsab;
  for (int b = 0; b < l.num_blocks; ++b) {
    const std::string p = "recon.lsab" + std::to_string(b);
    if (cfg.recon_mode == ReconMode::ResBlock) {
      s.conv(p + ".res", c, c, 3, h, w, 2);
      s.params_only(p + ".res.second_conv", Conv2d::param_count(c, c, 3));
      continue;
    }
    if (cfg.recon_mode == ReconMode::Hybrid || cfg.recon_mode == ReconMode::LaOnly) {
      s.params_only(p + ".norm", 2 * static_cast<std::size_t>(c));
      s.conv(p + ".msa.qkv", c, 3 * c, 1, h, w);
      // QK^T and AV: 2 * n * d MACs per token per head, twice.
      const double tokens = static_cast<double>(l.window) * l.window;
      s.flops_only(p + ".msa.attention", 2.0 * 2.0 * tokens * c * h * w);
      s.conv(p + ".msa.proj", c, c, 1, h, w);
    }
    if (cfg.recon_mode == ReconMode::Hybrid || cfg.recon_mode == ReconMode::SaOnly) {
      s.conv(p + ".sa_conv", c, c, 3, h, w);
      s.conv(p + ".ca.down", c, c / l.ca_reduction, 1, 1, 1);
      s.conv(p + ".ca.up", c / l.ca_reduction, c, 1, 1, 1);
    }
  }
  s.conv("recon.body", c, c, 3, h, w);
  const int stages = upsample_stages(cfg.scale);
  double sh = h, sw = w;
  for (int st = 0; st < stages; ++st) {
    s.conv("recon.up" + std::to_string(st), c, 4 * c, 3, sh, sw);
    sh *= 2;
    sw *= 2;
  }
  s.conv("recon.to_rgb", c, 3, 3, sh, sw);
  return s.take();
}

std::size_t param_count(const ModelConfig& cfg) {
  const auto rows = layer_costs(cfg, 8, 8);
  return std::accumulate(rows.begin(), rows.end(), std::size_t{0}, [](std::size_t a, const LayerCost& r) { return a + r.params; });
}

double flops_estimate(const ModelConfig& cfg, int height, int width) {
  const auto rows = layer_costs(cfg, height, width);
  return std::accumulate(rows.begin(), rows.end(), 0.0, [](double a, const LayerCost& r) { return a + r.flops; });
}

}  // namespace lgtd
