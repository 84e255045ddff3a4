#pragma once

// Independent reference implementations used as oracles. These deliberately
// avoid the library's im2col / GEMM / fused kernels and loop directly over
// the definitions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <tuple>
#include <vector>

#include "lgtd/autograd.hpp"
#include "lgtd/tensor.hpp"

namespace testutil {

using lgtd::Shape;
using lgtd::Tensor;
using lgtd::Var;

/// Scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / ("lgtd_test_" + name)) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

inline Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(shape);
  for (double& v : t.values()) v = d(rng);
  return t;
}

inline Var leaf(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  return Var(random_tensor(shape, seed, lo, hi), true);
}

inline double zero_padded(const Tensor& x, int c, int y, int xx) {
  if (y < 0 || y >= x.dim(1) || xx < 0 || xx >= x.dim(2)) return 0.0;
  return x.at(c, y, xx);
}

/// Direct "same"-style convolution (cross-correlation) with zero padding.
inline Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int pad) {
  const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int cout = w.dim(0), k = w.dim(2);
  const int ho = h + 2 * pad - k + 1, wo = wd + 2 * pad - k + 1;
  Tensor out({cout, ho, wo});
  for (int co = 0; co < cout; ++co) {
    for (int y = 0; y < ho; ++y) {
      for (int xx = 0; xx < wo; ++xx) {
        double acc = b[co];
        for (int ci = 0; ci < cin; ++ci) {
          for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
              acc += w[((static_cast<std::size_t>(co) * cin + ci) * k + i) * k + j] *
                     zero_padded(x, ci, y - pad + i, xx - pad + j);
            }
          }
        }
        out.at(co, y, xx) = acc;
      }
    }
  }
  return out;
}

inline Tensor naive_relu(Tensor x) {
  for (double& v : x.values()) v = v > 0 ? v : 0;
  return x;
}

inline Tensor naive_sigmoid(Tensor x) {
  for (double& v : x.values()) v = 1.0 / (1.0 + std::exp(-v));
  return x;
}

inline Tensor naive_leaky(Tensor x, double slope) {
  for (double& v : x.values()) v = v > 0 ? v : slope * v;
  return x;
}

inline Tensor naive_avg_pool2(const Tensor& x) {
  Tensor out({x.dim(0), x.dim(1) / 2, x.dim(2) / 2});
  for (int c = 0; c < x.dim(0); ++c)
    for (int y = 0; y < out.dim(1); ++y)
      for (int xx = 0; xx < out.dim(2); ++xx)
        out.at(c, y, xx) = 0.25 * (x.at(c, 2 * y, 2 * xx) + x.at(c, 2 * y + 1, 2 * xx) + x.at(c, 2 * y, 2 * xx + 1) +
                                   x.at(c, 2 * y + 1, 2 * xx + 1));
  return out;
}

/// x2 bilinear upsampling, half-pixel centres (align_corners = false), edge clamp.
inline Tensor naive_upsample2(const Tensor& x) {
  const int h = x.dim(1), w = x.dim(2);
  Tensor out({x.dim(0), 2 * h, 2 * w});
  auto src = [](int o, int n) {
    double s = (o + 0.5) / 2.0 - 0.5;
    if (s < 0) s = 0;
    int i0 = static_cast<int>(std::floor(s));
    int i1 = std::min(i0 + 1, n - 1);
    return std::tuple<int, int, double>(i0, i1, s - i0);
  };
  for (int c = 0; c < x.dim(0); ++c)
    for (int y = 0; y < 2 * h; ++y)
      for (int xx = 0; xx < 2 * w; ++xx) {
        auto [y0, y1, ly] = src(y, h);
        auto [x0, x1, lx] = src(xx, w);
        out.at(c, y, xx) = (1 - ly) * ((1 - lx) * x.at(c, y0, x0) + lx * x.at(c, y0, x1)) +
                           ly * ((1 - lx) * x.at(c, y1, x0) + lx * x.at(c, y1, x1));
      }
  return out;
}

// Bilinear sampling with zeros outside, written independently of the library.
inline double sample_bilinear(const Tensor& x, int c, double py, double px) {
  const int y0 = static_cast<int>(std::floor(py)), x0 = static_cast<int>(std::floor(px));
  const double ly = py - y0, lx = px - x0;
  double acc = 0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx)
      acc += (dy ? ly : 1 - ly) * (dx ? lx : 1 - lx) * zero_padded(x, c, y0 + dy, x0 + dx);
  return acc;
}

inline Tensor naive_deform(const Tensor& x, const Tensor& off, const Tensor& w, const Tensor& b, int pad) {
  const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2), cout = w.dim(0), k = w.dim(2);
  Tensor out({cout, h, wd});
  for (int co = 0; co < cout; ++co)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < wd; ++xx) {
        double acc = b[co];
        for (int ci = 0; ci < cin; ++ci)
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
              const int tap = i * k + j;
              const double py = y - pad + i + off.at(2 * tap, y, xx);
              const double px = xx - pad + j + off.at(2 * tap + 1, y, xx);
              acc += w[((static_cast<std::size_t>(co) * cin + ci) * k + i) * k + j] * sample_bilinear(x, ci, py, px);
            }
        out.at(co, y, xx) = acc;
      }
  return out;
}

inline Tensor naive_window_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, int win) {
  const int c = q.dim(0), h = q.dim(1), w = q.dim(2), d = c / heads;
  Tensor out(q.shape());
  for (int wy = 0; wy < h / win; ++wy)
    for (int wx = 0; wx < w / win; ++wx)
      for (int hd = 0; hd < heads; ++hd)
        for (int a = 0; a < win * win; ++a) {
          const int ay = wy * win + a / win, ax = wx * win + a % win;
          std::vector<double> s(win * win);
          double mx = -INFINITY;
          for (int bidx = 0; bidx < win * win; ++bidx) {
            const int by = wy * win + bidx / win, bx = wx * win + bidx % win;
            double dot = 0;
            for (int e = 0; e < d; ++e) dot += q.at(hd * d + e, ay, ax) * k.at(hd * d + e, by, bx);
            s[bidx] = dot / std::sqrt(static_cast<double>(d));
            mx = std::max(mx, s[bidx]);
          }
          double z = 0;
          for (double& t : s) z += (t = std::exp(t - mx));
          for (int e = 0; e < d; ++e) {
            double acc = 0;
            for (int bidx = 0; bidx < win * win; ++bidx) {
              const int by = wy * win + bidx / win, bx = wx * win + bidx % win;
              acc += s[bidx] / z * v.at(hd * d + e, by, bx);
            }
            out.at(hd * d + e, ay, ax) = acc;
          }
        }
  return out;
}

inline Tensor naive_layer_norm(const Tensor& x, const Tensor& g, const Tensor& b, double eps = 1e-5) {
  const int c = x.dim(0);
  Tensor out(x.shape());
  for (int yy = 0; yy < x.dim(1); ++yy)
    for (int xx = 0; xx < x.dim(2); ++xx) {
      double m = 0, v = 0;
      for (int k = 0; k < c; ++k) m += x.at(k, yy, xx) / c;
      for (int k = 0; k < c; ++k) v += (x.at(k, yy, xx) - m) * (x.at(k, yy, xx) - m) / c;
      for (int k = 0; k < c; ++k) out.at(k, yy, xx) = (x.at(k, yy, xx) - m) / std::sqrt(v + eps) * g[k] + b[k];
    }
  return out;
}

/// out(c, y r + i, x r + j) = in(c r^2 + i r + j, y, x)
inline Tensor naive_pixel_shuffle(const Tensor& x, int r) {
  const int c = x.dim(0) / (r * r);
  Tensor out({c, x.dim(1) * r, x.dim(2) * r});
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < x.dim(1); ++y)
      for (int xx = 0; xx < x.dim(2); ++xx)
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < r; ++j) out.at(k, y * r + i, xx * r + j) = x.at(k * r * r + i * r + j, y, xx);
  return out;
}

inline Tensor concat(const std::vector<Tensor>& parts) {
  int c = 0;
  for (const Tensor& p : parts) c += p.dim(0);
  Tensor out({c, parts[0].dim(1), parts[0].dim(2)});
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data(), p.data() + p.numel(), out.data() + off);
    off += p.numel();
  }
  return out;
}

inline Tensor add(Tensor a, const Tensor& b) {
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] += b[i];
  return a;
}

inline Tensor sub(Tensor a, const Tensor& b) {
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] -= b[i];
  return a;
}

inline Tensor mul(Tensor a, const Tensor& b) {
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] *= b[i];
  return a;
}

inline Tensor scaled(Tensor a, double s) {
  for (double& v : a.values()) v *= s;
  return a;
}

// Direct 2D SSIM: full (non-separable) Gaussian window at every valid
// position, written independently of the library.
inline double naive_ssim(const Tensor& a, const Tensor& b, int border) {
  const int k = 11;
  const double sigma = 1.5, L = 255, c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  std::vector<double> w(k * k);
  double wsum = 0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) wsum += w[i * k + j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * sigma * sigma));
  for (double& v : w) v /= wsum;
  const int h = a.dim(1) - 2 * border, wd = a.dim(2) - 2 * border;
  double total = 0;
  int count = 0;
  for (int c = 0; c < a.dim(0); ++c)
    for (int y = 0; y + k <= h; ++y)
      for (int x = 0; x + k <= wd; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) {
            const double pa = a.at(c, border + y + i, border + x + j) * L, pb = b.at(c, border + y + i, border + x + j) * L;
            const double ww = w[i * k + j];
            ma += ww * pa;
            mb += ww * pb;
            saa += ww * pa * pa;
            sbb += ww * pb * pb;
            sab += ww * pa * pb;
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
  return total / count;
}

inline double max_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace testutil

#include "lgtd/layers.hpp"

namespace testutil {

inline const Tensor& param(const lgtd::ParameterSet& p, const std::string& name) { return p.find(name).value(); }

/// conv by parameter prefix ("<prefix>.weight", "<prefix>.bias").
inline Tensor pconv(const lgtd::ParameterSet& p, const std::string& prefix, const Tensor& x) {
  const Tensor& w = param(p, prefix + ".weight");
  return naive_conv(x, w, param(p, prefix + ".bias"), w.dim(2) / 2);
}

/// x + conv2(relu(conv1(x)))
inline Tensor pres(const lgtd::ParameterSet& p, const std::string& prefix, const Tensor& x) {
  return add(x, pconv(p, prefix + ".conv2", naive_relu(pconv(p, prefix + ".conv1", x))));
}

inline std::vector<Var> leaves(const lgtd::ParameterSet& p) {
  std::vector<Var> out;
  for (const auto& [name, v] : p.entries()) out.push_back(v);
  return out;
}

inline void randomize(lgtd::ParameterSet& p, std::uint64_t seed, double stddev = 0.3) {
  lgtd::Rng rng(seed);
  p.randomize(rng, stddev);
}

}  // namespace testutil
