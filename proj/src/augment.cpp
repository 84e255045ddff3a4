#include <stdexcept>
#include <string>

#include "lgtd/data.hpp"

namespace lgtd {

PatchOffset draw_patch_offset(int height, int width, int size, Rng& rng) {
  if (size <= 0 || size > height || size > width) {
    throw std::invalid_argument("patch size " + std::to_string(size) + " exceeds frame size " + std::to_string(height) +
                                "x" + std::to_string(width));
  }
  std::uniform_int_distribution<int> dy(0, height - size);
  std::uniform_int_distribution<int> dx(0, width - size);
  const int y = dy(rng);
  return {y, dx(rng)};
}

namespace {

Tensor crop(const Tensor& image, int y0, int x0, int h, int w) {
  Tensor out({image.dim(0), h, w});
  for (int c = 0; c < image.dim(0); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = image.at(c, y0 + y, x0 + x);
  return out;
}

}  // namespace

PairedSample crop_patch(const PairedSample& sample, int size, PatchOffset off) {
  const int h = sample.lr.height(), w = sample.lr.width();
  if (size <= 0 || size > h || size > w) {
    throw std::invalid_argument("patch size " + std::to_string(size) + " exceeds frame size " + std::to_string(h) + "x" +
                                std::to_string(w));
  }
  if (off.y < 0 || off.x < 0 || off.y + size > h || off.x + size > w) {
    throw std::invalid_argument("patch offset out of range");
  }
  PairedSample out{{{}, sample.lr.scene_id, sample.lr.start_index}, {}, sample.scale};
  for (const Frame& f : sample.lr.frames) out.lr.frames.push_back(crop(f, off.y, off.x, size, size));
  const int r = sample.scale;
  out.hr = crop(sample.hr, off.y * r, off.x * r, size * r, size * r);
  return out;
}

PairedSample sample_patch(const PairedSample& sample, int size, std::uint64_t seed) {
  Rng rng(seed);
  const PatchOffset off = draw_patch_offset(sample.lr.height(), sample.lr.width(), size, rng);
  return crop_patch(sample, size, off);
}

AugmentFlags draw_augment_flags(Rng& rng) {
  std::uniform_int_distribution<int> bit(0, 1);
  std::uniform_int_distribution<int> quarter(0, 3);
  AugmentFlags f;
  f.hflip = bit(rng) == 1;
  f.vflip = bit(rng) == 1;
  f.rot90k = quarter(rng);
  return f;
}

Tensor augment_image(const Tensor& image, const AugmentFlags& flags) {
  if (flags.rot90k < 0 || flags.rot90k > 3) {
    throw std::invalid_argument("rot90k must be in {0,1,2,3}, got " + std::to_string(flags.rot90k));
  }
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor cur(image.shape());
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int sy = flags.vflip ? h - 1 - y : y;
        const int sx = flags.hflip ? w - 1 - x : x;
        cur.at(ch, y, x) = image.at(ch, sy, sx);
      }
  for (int k = 0; k < flags.rot90k; ++k) {
    // Clockwise quarter turn: input (i, j) lands at (j, H - 1 - i).
    const int ch_h = cur.dim(1), ch_w = cur.dim(2);
    Tensor rot({c, ch_w, ch_h});
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < ch_h; ++i)
        for (int j = 0; j < ch_w; ++j) rot.at(ch, j, ch_h - 1 - i) = cur.at(ch, i, j);
    cur = std::move(rot);
  }
  return cur;
}

PairedSample augment(const PairedSample& sample, const AugmentFlags& flags) {
  PairedSample out{{{}, sample.lr.scene_id, sample.lr.start_index}, augment_image(sample.hr, flags), sample.scale};
  for (const Frame& f : sample.lr.frames) out.lr.frames.push_back(augment_image(f, flags));
  return out;
}

}  // namespace lgtd
