#include <algorithm>
#include <cmath>

#include "lgtd/data.hpp"

namespace lgtd {

namespace {

// Smooth value noise on a lattice with spacing `cell`.
class ValueNoise {
 public:
  ValueNoise(int height, int width, double cell, Rng& rng) : cell_(std::max(cell, 1.0)) {
    gh_ = static_cast<int>(std::ceil(height / cell_)) + 2;
    gw_ = static_cast<int>(std::ceil(width / cell_)) + 2;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    lattice_.resize(static_cast<std::size_t>(gh_) * gw_);
    for (double& v : lattice_) v = u(rng);
  }

  double operator()(double y, double x) const {
    const double fy = y / cell_, fx = x / cell_;
    const int iy = static_cast<int>(fy), ix = static_cast<int>(fx);
    const double ty = smooth(fy - iy), tx = smooth(fx - ix);
    const double a = at(iy, ix), b = at(iy, ix + 1), c = at(iy + 1, ix), d = at(iy + 1, ix + 1);
    return (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d);
  }

 private:
  static double smooth(double t) { return t * t * (3 - 2 * t); }
  double at(int y, int x) const { return lattice_[static_cast<std::size_t>(y) * gw_ + x]; }

  double cell_;
  int gh_ = 0, gw_ = 0;
  std::vector<double> lattice_;
};

}  // namespace

Frame synth_background(std::uint64_t seed, const SynthParams& p) {
  std::seed_seq seq{seed, std::uint64_t{0x6267}};
  Rng rng(seq);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int h = p.height, w = p.width;

  const ValueNoise coarse(h, w, p.texture_scale, rng);
  const ValueNoise medium(h, w, p.texture_scale / 3.0, rng);
  const ValueNoise fine(h, w, std::max(p.texture_scale / 8.0, 2.0), rng);
  const ValueNoise landuse(h, w, p.texture_scale * 1.5, rng);

  // Two land-cover palettes blended by a slow noise field.
  const double vegetation[3] = {0.25 + 0.1 * u(rng), 0.38 + 0.1 * u(rng), 0.22 + 0.08 * u(rng)};
  const double urban[3] = {0.55 + 0.1 * u(rng), 0.52 + 0.1 * u(rng), 0.50 + 0.1 * u(rng)};

  Frame bg({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double tex = 0.55 * coarse(y, x) + 0.3 * medium(y, x) + 0.15 * fine(y, x);
      const double mix = std::clamp((landuse(y, x) - 0.35) * 2.5, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        const double base = (1 - mix) * vegetation[c] + mix * urban[c];
        bg.at(c, y, x) = base * (0.6 + 0.8 * tex);
      }
    }

  // Buildings: axis-aligned blocks with sharp edges.
  const int buildings = std::max(2, (h * w) / 1200);
  for (int b = 0; b < buildings; ++b) {
    const int bw = 4 + static_cast<int>(u(rng) * 14), bh = 4 + static_cast<int>(u(rng) * 14);
    const int bx = static_cast<int>(u(rng) * std::max(1, w - bw)), by = static_cast<int>(u(rng) * std::max(1, h - bh));
    const double level = 0.3 + 0.6 * u(rng);
    const double tint[3] = {level, level * (0.92 + 0.1 * u(rng)), level * (0.88 + 0.12 * u(rng))};
    for (int y = by; y < std::min(h, by + bh); ++y)
      for (int x = bx; x < std::min(w, bx + bw); ++x)
        for (int c = 0; c < 3; ++c) bg.at(c, y, x) = tint[c] * (y == by || x == bx ? 0.8 : 1.0);
  }

  // Roads: straight bands of dark asphalt.
  const int roads = 2 + static_cast<int>(u(rng) * 2);
  for (int r = 0; r < roads; ++r) {
    const bool horizontal = u(rng) < 0.5;
    const int pos = static_cast<int>(u(rng) * (horizontal ? h : w));
    const int width = 2 + static_cast<int>(u(rng) * 3);
    const double tone = 0.15 + 0.15 * u(rng);
    for (int a = 0; a < (horizontal ? w : h); ++a)
      for (int t = 0; t < width; ++t) {
        const int y = horizontal ? pos + t : a, x = horizontal ? a : pos + t;
        if (y < 0 || y >= h || x < 0 || x >= w) continue;
        for (int c = 0; c < 3; ++c) bg.at(c, y, x) = tone;
      }
  }

  for (double& v : bg.values()) v = std::clamp(v, 0.0, 1.0);
  return bg;
}

Clip render_scene(const Frame& background, const std::vector<MovingObject>& objects, int frames) {
  constexpr int kSuper = 4;
  const int h = background.height(), w = background.width();
  Clip clip;
  for (int k = 0; k < frames; ++k) {
    Frame f = background;
    for (const MovingObject& o : objects) {
      const double ox = o.x0 + o.vx * k, oy = o.y0 + o.vy * k;
      const int y_lo = std::max(0, static_cast<int>(std::floor(oy)));
      const int y_hi = std::min(h - 1, static_cast<int>(std::ceil(oy + o.h)));
      const int x_lo = std::max(0, static_cast<int>(std::floor(ox)));
      const int x_hi = std::min(w - 1, static_cast<int>(std::ceil(ox + o.w)));
      for (int y = y_lo; y <= y_hi; ++y)
        for (int x = x_lo; x <= x_hi; ++x) {
          int hits = 0;
          for (int sy = 0; sy < kSuper; ++sy)
            for (int sx = 0; sx < kSuper; ++sx) {
              const double py = y + (sy + 0.5) / kSuper, px = x + (sx + 0.5) / kSuper;
              hits += (py >= oy && py < oy + o.h && px >= ox && px < ox + o.w) ? 1 : 0;
            }
          if (hits == 0) continue;
          const double alpha = static_cast<double>(hits) / (kSuper * kSuper);
          for (int c = 0; c < 3; ++c) f.at(c, y, x) = (1 - alpha) * f.at(c, y, x) + alpha * o.color[c];
        }
    }
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

SynthScene synth_scene_full(std::uint64_t seed, const SynthParams& p) {
  SynthScene scene;
  scene.background = synth_background(seed, p);

  std::seed_seq seq{seed, std::uint64_t{0x6f626a}};
  Rng rng(seq);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  constexpr double kPi = 3.14159265358979323846;
  for (int i = 0; i < p.num_objects; ++i) {
    MovingObject o;
    o.w = 3 + u(rng) * 5;
    o.h = 2 + u(rng) * 3;
    o.x0 = u(rng) * std::max(1.0, p.width - o.w);
    o.y0 = u(rng) * std::max(1.0, p.height - o.h);
    const double speed = u(rng) * std::max(0.0, p.max_speed);
    const double angle = u(rng) * 2 * kPi;
    o.vx = speed * std::cos(angle);
    o.vy = speed * std::sin(angle);
    const double bright = u(rng) < 0.5;
    for (double& c : o.color) c = bright ? 0.8 + 0.2 * u(rng) : 0.05 + 0.15 * u(rng);
    scene.objects.push_back(o);
  }
  scene.clip = render_scene(scene.background, scene.objects, p.frames);
  scene.clip.scene_id = "synth_" + std::to_string(seed);
  return scene;
}

Clip synth_scene(std::uint64_t seed, const SynthParams& params) { return synth_scene_full(seed, params).clip; }

}  // namespace lgtd
