#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lgtd/data.hpp"

namespace lgtd {

double cubic_kernel(double x) {
  const double a = std::abs(x);
  const double a2 = a * a, a3 = a2 * a;
  if (a <= 1.0) return 1.5 * a3 - 2.5 * a2 + 1.0;
  if (a < 2.0) return -0.5 * a3 + 2.5 * a2 - 4.0 * a + 2.0;
  return 0.0;
}

namespace {

int mirror_index(int i, int n) {
  // Symmetric padding: ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

// One output sample is sum_t weights[t] * in[index[t]].
struct Contribution {
  std::vector<int> index;
  std::vector<double> weight;
};

// Antialiased integer downscale. Taps are stored in mirrored pairs around the
// output centre so flipped inputs give bitwise-flipped outputs.
struct PairedTaps {
  int factor;
  bool has_centre;
  double centre_weight;
  std::vector<double> pair_weight;  // distance p + 0.5 (even factor) or p + 1 (odd)
};

PairedTaps downsample_taps(int factor) {
  PairedTaps t{factor, factor % 2 == 1, 0.0, {}};
  double total = 0.0;
  if (t.has_centre) {
    t.centre_weight = cubic_kernel(0.0);
    total += t.centre_weight;
    for (int p = 1; p < 2 * factor; ++p) {
      const double w = cubic_kernel(static_cast<double>(p) / factor);
      t.pair_weight.push_back(w);
      total += 2 * w;
    }
  } else {
    for (int p = 0; p < 2 * factor; ++p) {
      const double w = cubic_kernel((p + 0.5) / factor);
      t.pair_weight.push_back(w);
      total += 2 * w;
    }
  }
  t.centre_weight /= total;
  for (double& w : t.pair_weight) w /= total;
  return t;
}

template <typename Get>
double downsample_one(const PairedTaps& t, int j, int n, Get get) {
  double acc = 0.0;
  if (t.has_centre) {
    const int c = j * t.factor + (t.factor - 1) / 2;
    acc = t.centre_weight * get(mirror_index(c, n));
    for (std::size_t p = 0; p < t.pair_weight.size(); ++p) {
      const int d = static_cast<int>(p) + 1;
      acc += t.pair_weight[p] * (get(mirror_index(c - d, n)) + get(mirror_index(c + d, n)));
    }
  } else {
    const int left0 = j * t.factor + t.factor / 2 - 1;
    const int right0 = j * t.factor + t.factor / 2;
    for (std::size_t p = 0; p < t.pair_weight.size(); ++p) {
      const int d = static_cast<int>(p);
      acc += t.pair_weight[p] * (get(mirror_index(left0 - d, n)) + get(mirror_index(right0 + d, n)));
    }
  }
  return acc;
}

std::vector<Contribution> upsample_contributions(int in, int factor) {
  std::vector<Contribution> out(static_cast<std::size_t>(in) * factor);
  for (int j = 0; j < in * factor; ++j) {
    const double u = (j + 0.5) / factor - 0.5;
    const int left = static_cast<int>(std::floor(u)) - 1;
    double total = 0.0;
    for (int t = 0; t < 4; ++t) {
      const double w = cubic_kernel(u - (left + t));
      out[j].index.push_back(mirror_index(left + t, in));
      out[j].weight.push_back(w);
      total += w;
    }
    for (double& w : out[j].weight) w /= total;
  }
  return out;
}

void require_image(const Tensor& image, const char* op) {
  if (image.rank() != 3) throw std::invalid_argument(std::string(op) + ": expected [C, H, W] image");
}

}  // namespace

Tensor bicubic_downsample(const Tensor& image, int factor) {
  require_image(image, "bicubic_downsample");
  if (factor < 1) throw std::invalid_argument("bicubic_downsample: factor must be >= 1");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h % factor || w % factor) {
    throw std::invalid_argument("degrade: frame size " + std::to_string(h) + "x" + std::to_string(w) +
                                " is not divisible by scale " + std::to_string(factor));
  }
  if (factor == 1) return image;
  const PairedTaps taps = downsample_taps(factor);
  const int ho = h / factor, wo = w / factor;
  Tensor rows({c, ho, w});
  for (int ch = 0; ch < c; ++ch)
    for (int x = 0; x < w; ++x)
      for (int y = 0; y < ho; ++y)
        rows.at(ch, y, x) = downsample_one(taps, y, h, [&](int i) { return image.at(ch, i, x); });
  Tensor out({c, ho, wo});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x) out.at(ch, y, x) = downsample_one(taps, x, w, [&](int i) { return rows.at(ch, y, i); });
  return out;
}

Tensor bicubic_upsample(const Tensor& image, int factor) {
  require_image(image, "bicubic_upsample");
  if (factor < 1) throw std::invalid_argument("bicubic_upsample: factor must be >= 1");
  if (factor == 1) return image;
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const auto cy = upsample_contributions(h, factor);
  const auto cx = upsample_contributions(w, factor);
  Tensor rows({c, h * factor, w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h * factor; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::size_t t = 0; t < cy[y].index.size(); ++t) acc += cy[y].weight[t] * image.at(ch, cy[y].index[t], x);
        rows.at(ch, y, x) = acc;
      }
  Tensor out({c, h * factor, w * factor});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h * factor; ++y)
      for (int x = 0; x < w * factor; ++x) {
        double acc = 0.0;
        for (std::size_t t = 0; t < cx[x].index.size(); ++t) acc += cx[x].weight[t] * rows.at(ch, y, cx[x].index[t]);
        out.at(ch, y, x) = acc;
      }
  return out;
}

Var bicubic_upsample(const Var& image, int factor) {
  Tensor out = bicubic_upsample(image.value(), factor);
  if (factor == 1) return image;
  const int c = image.value().dim(0), h = image.value().dim(1), w = image.value().dim(2);
  return make_result(std::move(out), {image}, [c, h, w, factor](Node& self) {
    // Transpose of the separable map: scatter columns, then rows.
    const auto cy = upsample_contributions(h, factor);
    const auto cx = upsample_contributions(w, factor);
    Tensor rows({c, h * factor, w});
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h * factor; ++y)
        for (int x = 0; x < w * factor; ++x) {
          const double g = self.grad.at(ch, y, x);
          for (std::size_t t = 0; t < cx[x].index.size(); ++t) rows.at(ch, y, cx[x].index[t]) += cx[x].weight[t] * g;
        }
    Tensor& gin = self.inputs[0]->grad_buffer();
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h * factor; ++y)
        for (int x = 0; x < w; ++x) {
          const double g = rows.at(ch, y, x);
          for (std::size_t t = 0; t < cy[y].index.size(); ++t) gin.at(ch, cy[y].index[t], x) += cy[y].weight[t] * g;
        }
  });
}

void validate_clip(const Clip& clip) {
  if (clip.frames.empty()) throw std::invalid_argument("clip is empty");
  if (clip.frames.size() % 2 == 0) {
    throw std::invalid_argument("clip length " + std::to_string(clip.frames.size()) + " is even; expected 2N+1 frames");
  }
  const Shape& s = clip.frames[0].shape();
  if (s.size() != 3 || s[0] != 3) throw std::invalid_argument("clip frames must be [3, H, W], got " + shape_str(s));
  for (const Frame& f : clip.frames) {
    if (f.shape() != s) throw std::invalid_argument("clip frames disagree in shape: " + shape_str(s) + " vs " + shape_str(f.shape()));
  }
}

Clip degrade(const Clip& hr_clip, int r) {
  Clip out{{}, hr_clip.scene_id, hr_clip.start_index};
  out.frames.reserve(hr_clip.frames.size());
  for (const Frame& f : hr_clip.frames) {
    Tensor lr = bicubic_downsample(f, r);
    for (double& v : lr.values()) v = std::clamp(v, 0.0, 1.0);
    out.frames.push_back(std::move(lr));
  }
  return out;
}

PairedSample make_paired_sample(const Clip& hr_clip, int r) {
  validate_clip(hr_clip);
  return PairedSample{degrade(hr_clip, r), hr_clip.center(), r};
}

}  // namespace lgtd
