#include "lgtd/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lgtd {

namespace {

void accumulate_into(const NodePtr& n, const Tensor& g) {
  if (n->requires_grad) n->accumulate_grad(g);
}

void require_rank3(const Tensor& t, const char* op) {
  if (t.rank() != 3) throw std::invalid_argument(std::string(op) + ": expected [C, H, W], got " + shape_str(t.shape()));
}

// C(MxN) = A(MxK) * B(KxN) (+ C if accumulate); all row-major, optional transposes.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a, const double* b, double* c,
          bool accumulate) {
  const int lda = trans_a ? m : k;
  const int ldb = trans_b ? k : n;
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0, a,
              lda, b, ldb, accumulate ? 1.0 : 0.0, c, n);
}

// Reusable per-thread im2col buffers. Growing a std::vector zero-fills, so
// reuse avoids a memset per call; every user overwrites the whole range.
double* scratch(int slot, std::size_t n) {
  thread_local std::vector<double> pool[2];
  if (pool[slot].size() < n) pool[slot].resize(n);
  return pool[slot].data();
}

struct ConvGeom {
  int cin, h, w, cout, k, pad, ho, wo;
};

ConvGeom conv_geometry(const Tensor& x, const Tensor& weight, const Tensor& bias, int pad, const char* op) {
  require_rank3(x, op);
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw std::invalid_argument(std::string(op) + ": weight must be [Cout, Cin, K, K], got " + shape_str(weight.shape()));
  }
  ConvGeom g{x.dim(0), x.dim(1), x.dim(2), weight.dim(0), weight.dim(2), pad, 0, 0};
  if (weight.dim(1) != g.cin) {
    throw std::invalid_argument(std::string(op) + ": input has " + std::to_string(g.cin) + " channels, weight expects " +
                                std::to_string(weight.dim(1)));
  }
  if (bias.numel() != static_cast<std::size_t>(g.cout)) {
    throw std::invalid_argument(std::string(op) + ": bias size " + std::to_string(bias.numel()) + " != Cout " +
                                std::to_string(g.cout));
  }
  g.ho = g.h + 2 * pad - g.k + 1;
  g.wo = g.w + 2 * pad - g.k + 1;
  if (g.ho <= 0 || g.wo <= 0) throw std::invalid_argument(std::string(op) + ": kernel larger than padded input");
  return g;
}

void im2col(const ConvGeom& g, const double* x, double* cols) {
  const std::size_t plane = static_cast<std::size_t>(g.ho) * g.wo;
  for (int c = 0; c < g.cin; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        double* row = cols + ((static_cast<std::size_t>(c) * g.k + ki) * g.k + kj) * plane;
        for (int y = 0; y < g.ho; ++y) {
          const int sy = y - g.pad + ki;
          double* dst = row + static_cast<std::size_t>(y) * g.wo;
          if (sy < 0 || sy >= g.h) {
            std::fill(dst, dst + g.wo, 0.0);
            continue;
          }
          const double* src = x + (static_cast<std::size_t>(c) * g.h + sy) * g.w;
          for (int xx = 0; xx < g.wo; ++xx) {
            const int sx = xx - g.pad + kj;
            dst[xx] = (sx >= 0 && sx < g.w) ? src[sx] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const ConvGeom& g, const double* cols, double* x) {
  const std::size_t plane = static_cast<std::size_t>(g.ho) * g.wo;
  for (int c = 0; c < g.cin; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        const double* row = cols + ((static_cast<std::size_t>(c) * g.k + ki) * g.k + kj) * plane;
        for (int y = 0; y < g.ho; ++y) {
          const int sy = y - g.pad + ki;
          if (sy < 0 || sy >= g.h) continue;
          const double* src = row + static_cast<std::size_t>(y) * g.wo;
          double* dst = x + (static_cast<std::size_t>(c) * g.h + sy) * g.w;
          for (int xx = 0; xx < g.wo; ++xx) {
            const int sx = xx - g.pad + kj;
            if (sx >= 0 && sx < g.w) dst[sx] += src[xx];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeom& g) { return g.k == 1 && g.pad == 0; }

// Bilinear read with zeros outside the image.
struct BilinearTap {
  int y0, x0;
  double ly, lx;
};

inline BilinearTap bilinear_tap(double py, double px) {
  const double fy = std::floor(py);
  const double fx = std::floor(px);
  return {static_cast<int>(fy), static_cast<int>(fx), py - fy, px - fx};
}

inline double pixel_or_zero(const double* plane, int h, int w, int y, int x) {
  return (y >= 0 && y < h && x >= 0 && x < w) ? plane[static_cast<std::size_t>(y) * w + x] : 0.0;
}

inline double bilinear_sample(const double* plane, int h, int w, double py, double px) {
  if (py <= -1.0 || py >= h || px <= -1.0 || px >= w) return 0.0;
  const BilinearTap t = bilinear_tap(py, px);
  const double v00 = pixel_or_zero(plane, h, w, t.y0, t.x0);
  const double v01 = pixel_or_zero(plane, h, w, t.y0, t.x0 + 1);
  const double v10 = pixel_or_zero(plane, h, w, t.y0 + 1, t.x0);
  const double v11 = pixel_or_zero(plane, h, w, t.y0 + 1, t.x0 + 1);
  return (1 - t.ly) * ((1 - t.lx) * v00 + t.lx * v01) + t.ly * ((1 - t.lx) * v10 + t.lx * v11);
}

void deform_im2col(const ConvGeom& g, const double* x, const double* off, double* cols) {
  const std::size_t plane = static_cast<std::size_t>(g.h) * g.w;
  const int taps = g.k * g.k;
  for (int c = 0; c < g.cin; ++c) {
    const double* xp = x + c * plane;
    for (int tap = 0; tap < taps; ++tap) {
      const int ki = tap / g.k;
      const int kj = tap % g.k;
      const double* dy = off + (2 * tap) * plane;
      const double* dx = off + (2 * tap + 1) * plane;
      double* row = cols + (static_cast<std::size_t>(c) * taps + tap) * plane;
      for (int y = 0; y < g.h; ++y) {
        for (int xx = 0; xx < g.w; ++xx) {
          const std::size_t p = static_cast<std::size_t>(y) * g.w + xx;
          row[p] = bilinear_sample(xp, g.h, g.w, y - g.pad + ki + dy[p], xx - g.pad + kj + dx[p]);
        }
      }
    }
  }
}

}  // namespace

namespace ops {

Var add(const Var& a, const Var& b) {
  Tensor out = a.value() + b.value();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    accumulate_into(self.inputs[0], self.grad);
    accumulate_into(self.inputs[1], self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  Tensor out = a.value() - b.value();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    accumulate_into(self.inputs[0], self.grad);
    if (self.inputs[1]->requires_grad) self.inputs[1]->accumulate_grad(self.grad * -1.0);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.inputs[0]->value;
    const Tensor& bv = self.inputs[1]->value;
    if (self.inputs[0]->requires_grad) {
      Tensor g(av.shape());
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * bv[i];
      self.inputs[0]->accumulate_grad(g);
    }
    if (self.inputs[1]->requires_grad) {
      Tensor g(bv.shape());
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * av[i];
      self.inputs[1]->accumulate_grad(g);
    }
  });
}

Var scale(const Var& a, double s) {
  return make_result(a.value() * s, {a}, [s](Node& self) { self.inputs[0]->accumulate_grad(self.grad * s); });
}

Var mul_channel(const Var& x, const Var& s) {
  const Tensor& xv = x.value();
  require_rank3(xv, "mul_channel");
  const int c = xv.dim(0);
  const std::size_t plane = static_cast<std::size_t>(xv.dim(1)) * xv.dim(2);
  if (s.value().numel() != static_cast<std::size_t>(c)) {
    throw std::invalid_argument("mul_channel: scale has " + std::to_string(s.value().numel()) + " entries for " +
                                std::to_string(c) + " channels");
  }
  Tensor out(xv.shape());
  for (int ch = 0; ch < c; ++ch) {
    const double f = s.value()[ch];
    for (std::size_t p = 0; p < plane; ++p) out[ch * plane + p] = xv[ch * plane + p] * f;
  }
  return make_result(std::move(out), {x, s}, [c, plane](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    const Tensor& sv = self.inputs[1]->value;
    if (self.inputs[0]->requires_grad) {
      Tensor g(xv.shape());
      for (int ch = 0; ch < c; ++ch) {
        for (std::size_t p = 0; p < plane; ++p) g[ch * plane + p] = self.grad[ch * plane + p] * sv[ch];
      }
      self.inputs[0]->accumulate_grad(g);
    }
    if (self.inputs[1]->requires_grad) {
      Tensor g(sv.shape());
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t p = 0; p < plane; ++p) acc += self.grad[ch * plane + p] * xv[ch * plane + p];
        g[ch] = acc;
      }
      self.inputs[1]->accumulate_grad(g);
    }
  });
}

Var relu(const Var& x) { return leaky_relu(x, 0.0); }

Var leaky_relu(const Var& x, double slope) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double v = x.value()[i];
    out[i] = v > 0 ? v : slope * v;
  }
  return make_result(std::move(out), {x}, [slope](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    Tensor g(xv.shape());
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] = xv[i] > 0 ? self.grad[i] : slope * self.grad[i];
    self.inputs[0]->accumulate_grad(g);
  });
}

Var sigmoid(const Var& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x.value()[i]));
  Tensor saved = out;
  return make_result(std::move(out), {x}, [saved = std::move(saved)](Node& self) {
    Tensor g(saved.shape());
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * saved[i] * (1.0 - saved[i]);
    self.inputs[0]->accumulate_grad(g);
  });
}

Var clamp(const Var& x, double lo, double hi) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(x.value()[i], lo, hi);
  return make_result(std::move(out), {x}, [lo, hi](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    Tensor g(xv.shape());
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] = (xv[i] > lo && xv[i] < hi) ? self.grad[i] : 0.0;
    self.inputs[0]->accumulate_grad(g);
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int pad) {
  const ConvGeom g = conv_geometry(x.value(), weight.value(), bias.value(), pad, "conv2d");
  const int rows = g.cin * g.k * g.k;
  const int cols_n = g.ho * g.wo;
  Tensor out({g.cout, g.ho, g.wo});
  for (int co = 0; co < g.cout; ++co) std::fill_n(out.data() + static_cast<std::size_t>(co) * cols_n, cols_n, bias.value()[co]);
  if (is_pointwise(g)) {
    gemm(false, false, g.cout, cols_n, rows, weight.value().data(), x.value().data(), out.data(), true);
  } else {
    double* cols = scratch(0, static_cast<std::size_t>(rows) * cols_n);
    im2col(g, x.value().data(), cols);
    gemm(false, false, g.cout, cols_n, rows, weight.value().data(), cols, out.data(), true);
  }
  return make_result(std::move(out), {x, weight, bias}, [g, rows, cols_n](Node& self) {
    const NodePtr& xn = self.inputs[0];
    const NodePtr& wn = self.inputs[1];
    const NodePtr& bn = self.inputs[2];
    const double* gout = self.grad.data();
    const double* colp = xn->value.data();
    if (!is_pointwise(g) && wn->requires_grad) {
      double* cols = scratch(0, static_cast<std::size_t>(rows) * cols_n);
      im2col(g, xn->value.data(), cols);
      colp = cols;
    }
    if (wn->requires_grad) {
      gemm(false, true, g.cout, rows, cols_n, gout, colp, wn->grad_buffer().data(), true);
    }
    if (bn->requires_grad) {
      Tensor& bg = bn->grad_buffer();
      for (int co = 0; co < g.cout; ++co) {
        double acc = 0.0;
        for (int p = 0; p < cols_n; ++p) acc += gout[static_cast<std::size_t>(co) * cols_n + p];
        bg[co] += acc;
      }
    }
    if (xn->requires_grad) {
      Tensor& xg = xn->grad_buffer();
      if (is_pointwise(g)) {
        gemm(true, false, rows, cols_n, g.cout, wn->value.data(), gout, xg.data(), true);
      } else {
        double* dcols = scratch(1, static_cast<std::size_t>(rows) * cols_n);
        gemm(true, false, rows, cols_n, g.cout, wn->value.data(), gout, dcols, false);
        col2im(g, dcols, xg.data());
      }
    }
  });
}

Var deform_conv2d(const Var& x, const Var& offsets, const Var& weight, const Var& bias, int pad) {
  const ConvGeom g = conv_geometry(x.value(), weight.value(), bias.value(), pad, "deform_conv2d");
  if (g.ho != g.h || g.wo != g.w) throw std::invalid_argument("deform_conv2d: padding must preserve spatial size");
  const Tensor& off = offsets.value();
  const Shape expected{2 * g.k * g.k, g.h, g.w};
  if (off.shape() != expected) {
    throw std::invalid_argument("deform_conv2d: offsets must be " + shape_str(expected) + ", got " + shape_str(off.shape()));
  }
  for (double v : off.values()) {
    if (!std::isfinite(v)) throw std::invalid_argument("deform_conv2d: non-finite offset");
  }
  const int rows = g.cin * g.k * g.k;
  const int plane = g.h * g.w;
  double* cols = scratch(0, static_cast<std::size_t>(rows) * plane);
  deform_im2col(g, x.value().data(), off.data(), cols);
  Tensor out({g.cout, g.h, g.w});
  for (int co = 0; co < g.cout; ++co) std::fill_n(out.data() + static_cast<std::size_t>(co) * plane, plane, bias.value()[co]);
  gemm(false, false, g.cout, plane, rows, weight.value().data(), cols, out.data(), true);

  return make_result(std::move(out), {x, offsets, weight, bias}, [g, rows, plane](Node& self) {
    const NodePtr& xn = self.inputs[0];
    const NodePtr& on = self.inputs[1];
    const NodePtr& wn = self.inputs[2];
    const NodePtr& bn = self.inputs[3];
    const double* gout = self.grad.data();
    if (wn->requires_grad) {
      double* cols = scratch(0, static_cast<std::size_t>(rows) * plane);
      deform_im2col(g, xn->value.data(), on->value.data(), cols);
      gemm(false, true, g.cout, rows, plane, gout, cols, wn->grad_buffer().data(), true);
    }
    if (bn->requires_grad) {
      Tensor& bg = bn->grad_buffer();
      for (int co = 0; co < g.cout; ++co) {
        double acc = 0.0;
        for (int p = 0; p < plane; ++p) acc += gout[static_cast<std::size_t>(co) * plane + p];
        bg[co] += acc;
      }
    }
    if (!xn->requires_grad && !on->requires_grad) return;
    double* dcols = scratch(1, static_cast<std::size_t>(rows) * plane);
    gemm(true, false, rows, plane, g.cout, wn->value.data(), gout, dcols, false);

    const int taps = g.k * g.k;
    const double* xv = xn->value.data();
    const double* off = on->value.data();
    double* xg = xn->requires_grad ? xn->grad_buffer().data() : nullptr;
    double* og = on->requires_grad ? on->grad_buffer().data() : nullptr;
    for (int c = 0; c < g.cin; ++c) {
      const double* xp = xv + static_cast<std::size_t>(c) * plane;
      double* xgp = xg ? xg + static_cast<std::size_t>(c) * plane : nullptr;
      for (int tap = 0; tap < taps; ++tap) {
        const int ki = tap / g.k;
        const int kj = tap % g.k;
        const double* dy = off + static_cast<std::size_t>(2 * tap) * plane;
        const double* dx = off + static_cast<std::size_t>(2 * tap + 1) * plane;
        const double* drow = dcols + (static_cast<std::size_t>(c) * taps + tap) * plane;
        for (int y = 0; y < g.h; ++y) {
          for (int xx = 0; xx < g.w; ++xx) {
            const int p = y * g.w + xx;
            const double gv = drow[p];
            if (gv == 0.0) continue;
            const double py = y - g.pad + ki + dy[p];
            const double px = xx - g.pad + kj + dx[p];
            if (py <= -1.0 || py >= g.h || px <= -1.0 || px >= g.w) continue;
            const BilinearTap t = bilinear_tap(py, px);
            const double hy = 1 - t.ly, hx = 1 - t.lx;
            if (xgp) {
              const int ys[2] = {t.y0, t.y0 + 1};
              const int xs[2] = {t.x0, t.x0 + 1};
              const double wy[2] = {hy, t.ly};
              const double wx[2] = {hx, t.lx};
              for (int a = 0; a < 2; ++a) {
                if (ys[a] < 0 || ys[a] >= g.h) continue;
                for (int b = 0; b < 2; ++b) {
                  if (xs[b] < 0 || xs[b] >= g.w) continue;
                  xgp[static_cast<std::size_t>(ys[a]) * g.w + xs[b]] += gv * wy[a] * wx[b];
                }
              }
            }
            if (og) {
              const double v00 = pixel_or_zero(xp, g.h, g.w, t.y0, t.x0);
              const double v01 = pixel_or_zero(xp, g.h, g.w, t.y0, t.x0 + 1);
              const double v10 = pixel_or_zero(xp, g.h, g.w, t.y0 + 1, t.x0);
              const double v11 = pixel_or_zero(xp, g.h, g.w, t.y0 + 1, t.x0 + 1);
              og[static_cast<std::size_t>(2 * tap) * plane + p] += gv * (hx * (v10 - v00) + t.lx * (v11 - v01));
              og[static_cast<std::size_t>(2 * tap + 1) * plane + p] += gv * (hy * (v01 - v00) + t.ly * (v11 - v10));
            }
          }
        }
      }
    }
  });
}

Var avg_pool2(const Var& x) {
  const Tensor& xv = x.value();
  require_rank3(xv, "avg_pool2");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (h % 2 || w % 2) {
    throw std::invalid_argument("avg_pool2: spatial size " + std::to_string(h) + "x" + std::to_string(w) + " is not even");
  }
  Tensor out({c, h / 2, w / 2});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h / 2; ++y)
      for (int xx = 0; xx < w / 2; ++xx)
        out.at(ch, y, xx) = 0.25 * (xv.at(ch, 2 * y, 2 * xx) + xv.at(ch, 2 * y, 2 * xx + 1) +
                                    xv.at(ch, 2 * y + 1, 2 * xx) + xv.at(ch, 2 * y + 1, 2 * xx + 1));
  return make_result(std::move(out), {x}, [c, h, w](Node& self) {
    Tensor g({c, h, w});
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) g.at(ch, y, xx) = 0.25 * self.grad.at(ch, y / 2, xx / 2);
    self.inputs[0]->accumulate_grad(g);
  });
}

namespace {

struct Lerp {
  int i0, i1;
  double w1;
};

// Source taps for x2 upsampling with half-pixel centres, edge-clamped.
std::vector<Lerp> upsample_taps(int in) {
  std::vector<Lerp> taps(static_cast<std::size_t>(in) * 2);
  for (int o = 0; o < in * 2; ++o) {
    double s = (o + 0.5) / 2.0 - 0.5;
    if (s < 0) s = 0;
    const int i0 = std::min(static_cast<int>(s), in - 1);
    const int i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, s - i0};
  }
  return taps;
}

}  // namespace

Var upsample_bilinear2(const Var& x) {
  const Tensor& xv = x.value();
  require_rank3(xv, "upsample_bilinear2");
  const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const auto ty = upsample_taps(h);
  const auto tx = upsample_taps(w);
  Tensor out({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < 2 * h; ++y) {
      const Lerp& a = ty[y];
      for (int xx = 0; xx < 2 * w; ++xx) {
        const Lerp& b = tx[xx];
        const double top = (1 - b.w1) * xv.at(ch, a.i0, b.i0) + b.w1 * xv.at(ch, a.i0, b.i1);
        const double bot = (1 - b.w1) * xv.at(ch, a.i1, b.i0) + b.w1 * xv.at(ch, a.i1, b.i1);
        out.at(ch, y, xx) = (1 - a.w1) * top + a.w1 * bot;
      }
    }
  return make_result(std::move(out), {x}, [c, h, w, ty, tx](Node& self) {
    Tensor g({c, h, w});
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < 2 * h; ++y) {
        const Lerp& a = ty[y];
        for (int xx = 0; xx < 2 * w; ++xx) {
          const Lerp& b = tx[xx];
          const double gv = self.grad.at(ch, y, xx);
          g.at(ch, a.i0, b.i0) += gv * (1 - a.w1) * (1 - b.w1);
          g.at(ch, a.i0, b.i1) += gv * (1 - a.w1) * b.w1;
          g.at(ch, a.i1, b.i0) += gv * a.w1 * (1 - b.w1);
          g.at(ch, a.i1, b.i1) += gv * a.w1 * b.w1;
        }
      }
    self.inputs[0]->accumulate_grad(g);
  });
}

Var global_avg_pool(const Var& x) {
  const Tensor& xv = x.value();
  require_rank3(xv, "global_avg_pool");
  const int c = xv.dim(0);
  const std::size_t plane = static_cast<std::size_t>(xv.dim(1)) * xv.dim(2);
  Tensor out({c, 1, 1});
  for (int ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (std::size_t p = 0; p < plane; ++p) acc += xv[ch * plane + p];
    out[ch] = acc / static_cast<double>(plane);
  }
  return make_result(std::move(out), {x}, [c, plane](Node& self) {
    Tensor g(self.inputs[0]->value.shape());
    for (int ch = 0; ch < c; ++ch) {
      const double gv = self.grad[ch] / static_cast<double>(plane);
      std::fill_n(g.data() + ch * plane, plane, gv);
    }
    self.inputs[0]->accumulate_grad(g);
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const int h = parts[0].value().dim(1), w = parts[0].value().dim(2);
  int total = 0;
  for (const Var& p : parts) {
    require_rank3(p.value(), "concat_channels");
    if (p.value().dim(1) != h || p.value().dim(2) != w) {
      throw std::invalid_argument("concat_channels: spatial mismatch " + shape_str(parts[0].shape()) + " vs " +
                                  shape_str(p.shape()));
    }
    total += p.value().dim(0);
  }
  Tensor out({total, h, w});
  std::size_t offset = 0;
  std::vector<std::size_t> sizes;
  for (const Var& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(), out.data() + offset);
    offset += p.value().numel();
    sizes.push_back(p.value().numel());
  }
  return make_result(std::move(out), parts, [sizes](Node& self) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      const NodePtr& in = self.inputs[i];
      if (in->requires_grad) {
        Tensor& g = in->grad_buffer();
        for (std::size_t j = 0; j < sizes[i]; ++j) g[j] += self.grad[offset + j];
      }
      offset += sizes[i];
    }
  });
}

Var slice_channels(const Var& x, int begin, int end) {
  const Tensor& xv = x.value();
  require_rank3(xv, "slice_channels");
  if (begin < 0 || end > xv.dim(0) || begin >= end) {
    throw std::invalid_argument("slice_channels: bad range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                ") for " + std::to_string(xv.dim(0)) + " channels");
  }
  const std::size_t plane = static_cast<std::size_t>(xv.dim(1)) * xv.dim(2);
  Tensor out({end - begin, xv.dim(1), xv.dim(2)});
  std::copy_n(xv.data() + begin * plane, out.numel(), out.data());
  return make_result(std::move(out), {x}, [begin, plane](Node& self) {
    Tensor& g = self.inputs[0]->grad_buffer();
    for (std::size_t j = 0; j < self.grad.numel(); ++j) g[begin * plane + j] += self.grad[j];
  });
}

Var layer_norm_channels(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Tensor& xv = x.value();
  require_rank3(xv, "layer_norm_channels");
  const int c = xv.dim(0);
  const std::size_t plane = static_cast<std::size_t>(xv.dim(1)) * xv.dim(2);
  if (gamma.value().numel() != static_cast<std::size_t>(c) || beta.value().numel() != static_cast<std::size_t>(c)) {
    throw std::invalid_argument("layer_norm_channels: affine parameters must have C entries");
  }
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(plane);
  Tensor out(xv.shape());
  for (std::size_t p = 0; p < plane; ++p) {
    double mean = 0.0;
    for (int ch = 0; ch < c; ++ch) mean += xv[ch * plane + p];
    mean /= c;
    double var = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      const double d = xv[ch * plane + p] - mean;
      var += d * d;
    }
    var /= c;
    inv_std[p] = 1.0 / std::sqrt(var + eps);
    for (int ch = 0; ch < c; ++ch) {
      const double xh = (xv[ch * plane + p] - mean) * inv_std[p];
      xhat[ch * plane + p] = xh;
      out[ch * plane + p] = gamma.value()[ch] * xh + beta.value()[ch];
    }
  }
  return make_result(std::move(out), {x, gamma, beta},
                     [c, plane, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                       const NodePtr& xn = self.inputs[0];
                       const NodePtr& gn = self.inputs[1];
                       const NodePtr& bn = self.inputs[2];
                       const Tensor& gam = gn->value;
                       if (gn->requires_grad || bn->requires_grad) {
                         Tensor dg({c}), db({c});
                         for (int ch = 0; ch < c; ++ch)
                           for (std::size_t p = 0; p < plane; ++p) {
                             dg[ch] += self.grad[ch * plane + p] * xhat[ch * plane + p];
                             db[ch] += self.grad[ch * plane + p];
                           }
                         if (gn->requires_grad) gn->accumulate_grad(dg.reshaped(gn->value.shape()));
                         if (bn->requires_grad) bn->accumulate_grad(db.reshaped(bn->value.shape()));
                       }
                       if (xn->requires_grad) {
                         Tensor& xg = xn->grad_buffer();
                         for (std::size_t p = 0; p < plane; ++p) {
                           double s1 = 0.0, s2 = 0.0;
                           for (int ch = 0; ch < c; ++ch) {
                             const double dxh = self.grad[ch * plane + p] * gam[ch];
                             s1 += dxh;
                             s2 += dxh * xhat[ch * plane + p];
                           }
                           for (int ch = 0; ch < c; ++ch) {
                             const double dxh = self.grad[ch * plane + p] * gam[ch];
                             xg[ch * plane + p] += inv_std[p] / c * (c * dxh - s1 - xhat[ch * plane + p] * s2);
                           }
                         }
                       }
                     });
}

}  // namespace ops

namespace {

struct WindowGeom {
  int c, h, w, heads, d, ws, n;
};

WindowGeom window_geometry(const Tensor& q, int heads, int window) {
  require_rank3(q, "window_attention");
  WindowGeom g{q.dim(0), q.dim(1), q.dim(2), heads, 0, window, window * window};
  if (heads <= 0 || g.c % heads != 0) {
    throw std::invalid_argument("window_attention: " + std::to_string(g.c) + " channels not divisible by " +
                                std::to_string(heads) + " heads");
  }
  if (window <= 0 || g.h % window != 0 || g.w % window != 0) {
    throw std::invalid_argument("window_attention: spatial size " + std::to_string(g.h) + "x" + std::to_string(g.w) +
                                " not divisible by window " + std::to_string(window));
  }
  g.d = g.c / heads;
  return g;
}

// Gathers one head of one window into a token-major [n, d] matrix.
void gather_window(const WindowGeom& g, const Tensor& t, int head, int wy, int wx, std::vector<double>& dst) {
  dst.resize(static_cast<std::size_t>(g.n) * g.d);
  for (int ty = 0; ty < g.ws; ++ty)
    for (int tx = 0; tx < g.ws; ++tx) {
      const int tok = ty * g.ws + tx;
      for (int j = 0; j < g.d; ++j) dst[tok * g.d + j] = t.at(head * g.d + j, wy * g.ws + ty, wx * g.ws + tx);
    }
}

void scatter_window_add(const WindowGeom& g, Tensor& t, int head, int wy, int wx, const std::vector<double>& src) {
  for (int ty = 0; ty < g.ws; ++ty)
    for (int tx = 0; tx < g.ws; ++tx) {
      const int tok = ty * g.ws + tx;
      for (int j = 0; j < g.d; ++j) t.at(head * g.d + j, wy * g.ws + ty, wx * g.ws + tx) += src[tok * g.d + j];
    }
}

// P = softmax(Q K^T / sqrt(d)) row-wise.
void softmax_scores(const WindowGeom& g, const std::vector<double>& qm, const std::vector<double>& km,
                    std::vector<double>& p) {
  const double s = 1.0 / std::sqrt(static_cast<double>(g.d));
  p.resize(static_cast<std::size_t>(g.n) * g.n);
  gemm(false, true, g.n, g.n, g.d, qm.data(), km.data(), p.data(), false);
  for (int i = 0; i < g.n; ++i) {
    double* row = p.data() + static_cast<std::size_t>(i) * g.n;
    double mx = -INFINITY;
    for (int j = 0; j < g.n; ++j) {
      row[j] *= s;
      mx = std::max(mx, row[j]);
    }
    double z = 0.0;
    for (int j = 0; j < g.n; ++j) {
      row[j] = std::exp(row[j] - mx);
      z += row[j];
    }
    for (int j = 0; j < g.n; ++j) row[j] /= z;
  }
}

}  // namespace

Tensor attention_weights(const Tensor& q, const Tensor& k, int heads, int window, int head, int wy, int wx) {
  const WindowGeom g = window_geometry(q, heads, window);
  std::vector<double> qm, km, p;
  gather_window(g, q, head, wy, wx, qm);
  gather_window(g, k, head, wy, wx, km);
  softmax_scores(g, qm, km, p);
  return Tensor({g.n, g.n}, std::move(p));
}

namespace ops {

Var window_attention(const Var& q, const Var& k, const Var& v, int heads, int window) {
  const WindowGeom g = window_geometry(q.value(), heads, window);
  require_same_shape(q.value(), k.value(), "window_attention q/k");
  require_same_shape(q.value(), v.value(), "window_attention q/v");
  Tensor out(q.shape());
  std::vector<double> qm, km, vm, p, om(static_cast<std::size_t>(g.n) * g.d);
  for (int wy = 0; wy < g.h / g.ws; ++wy)
    for (int wx = 0; wx < g.w / g.ws; ++wx)
      for (int hd = 0; hd < g.heads; ++hd) {
        gather_window(g, q.value(), hd, wy, wx, qm);
        gather_window(g, k.value(), hd, wy, wx, km);
        gather_window(g, v.value(), hd, wy, wx, vm);
        softmax_scores(g, qm, km, p);
        gemm(false, false, g.n, g.d, g.n, p.data(), vm.data(), om.data(), false);
        scatter_window_add(g, out, hd, wy, wx, om);
      }
  return make_result(std::move(out), {q, k, v}, [g](Node& self) {
    const NodePtr& qn = self.inputs[0];
    const NodePtr& kn = self.inputs[1];
    const NodePtr& vn = self.inputs[2];
    const double s = 1.0 / std::sqrt(static_cast<double>(g.d));
    std::vector<double> qm, km, vm, gm, p, dp(static_cast<std::size_t>(g.n) * g.n);
    std::vector<double> dq(static_cast<std::size_t>(g.n) * g.d), dk(dq.size()), dv(dq.size());
    for (int wy = 0; wy < g.h / g.ws; ++wy)
      for (int wx = 0; wx < g.w / g.ws; ++wx)
        for (int hd = 0; hd < g.heads; ++hd) {
          gather_window(g, qn->value, hd, wy, wx, qm);
          gather_window(g, kn->value, hd, wy, wx, km);
          gather_window(g, vn->value, hd, wy, wx, vm);
          gather_window(g, self.grad, hd, wy, wx, gm);
          softmax_scores(g, qm, km, p);
          if (vn->requires_grad) {
            gemm(true, false, g.n, g.d, g.n, p.data(), gm.data(), dv.data(), false);
            scatter_window_add(g, vn->grad_buffer(), hd, wy, wx, dv);
          }
          if (!qn->requires_grad && !kn->requires_grad) continue;
          gemm(false, true, g.n, g.n, g.d, gm.data(), vm.data(), dp.data(), false);
          // dS = P * (dP - rowsum(dP * P)), folded with the 1/sqrt(d) scale.
          for (int i = 0; i < g.n; ++i) {
            double* prow = p.data() + static_cast<std::size_t>(i) * g.n;
            double* drow = dp.data() + static_cast<std::size_t>(i) * g.n;
            double dot = 0.0;
            for (int j = 0; j < g.n; ++j) dot += drow[j] * prow[j];
            for (int j = 0; j < g.n; ++j) drow[j] = prow[j] * (drow[j] - dot) * s;
          }
          if (qn->requires_grad) {
            gemm(false, false, g.n, g.d, g.n, dp.data(), km.data(), dq.data(), false);
            scatter_window_add(g, qn->grad_buffer(), hd, wy, wx, dq);
          }
          if (kn->requires_grad) {
            gemm(true, false, g.n, g.d, g.n, dp.data(), qm.data(), dk.data(), false);
            scatter_window_add(g, kn->grad_buffer(), hd, wy, wx, dk);
          }
        }
  });
}

Var pixel_shuffle(const Var& x, int r) {
  Tensor out = pixel_shuffle_tensor(x.value(), r);
  return make_result(std::move(out), {x}, [r](Node& self) { self.inputs[0]->accumulate_grad(pixel_unshuffle(self.grad, r)); });
}

Var l1_loss(const Var& pred, const Var& target) {
  require_same_shape(pred.value(), target.value(), "l1_loss");
  const std::size_t n = pred.value().numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(pred.value()[i] - target.value()[i]);
  Tensor out({1}, acc / static_cast<double>(n));
  return make_result(std::move(out), {pred, target}, [n](Node& self) {
    const Tensor& a = self.inputs[0]->value;
    const Tensor& b = self.inputs[1]->value;
    const double gs = self.grad[0] / static_cast<double>(n);
    Tensor g(a.shape());
    for (std::size_t i = 0; i < n; ++i) {
      const double d = a[i] - b[i];
      g[i] = d > 0 ? gs : (d < 0 ? -gs : 0.0);
    }
    if (self.inputs[1]->requires_grad) self.inputs[1]->accumulate_grad(g * -1.0);
    if (self.inputs[0]->requires_grad) self.inputs[0]->accumulate_grad(g);
  });
}

Var weighted_sum(const Var& x, const Tensor& w) {
  require_same_shape(x.value(), w, "weighted_sum");
  double acc = 0.0;
  for (std::size_t i = 0; i < w.numel(); ++i) acc += x.value()[i] * w[i];
  return make_result(Tensor({1}, acc), {x}, [w](Node& self) { self.inputs[0]->accumulate_grad(w * self.grad[0]); });
}

Var sum_all(const Var& x) { return weighted_sum(x, Tensor(x.shape(), 1.0)); }

}  // namespace ops

Tensor pixel_shuffle_tensor(const Tensor& x, int r) {
  require_rank3(x, "pixel_shuffle");
  if (r < 1 || x.dim(0) % (r * r) != 0) {
    throw std::invalid_argument("pixel_shuffle: " + std::to_string(x.dim(0)) + " channels not divisible by r^2=" +
                                std::to_string(r * r));
  }
  const int c = x.dim(0) / (r * r), h = x.dim(1), w = x.dim(2);
  Tensor out({c, h * r, w * r});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j)
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx) out.at(ch, y * r + i, xx * r + j) = x.at(ch * r * r + i * r + j, y, xx);
  return out;
}

Tensor pixel_unshuffle(const Tensor& x, int r) {
  require_rank3(x, "pixel_unshuffle");
  if (r < 1 || x.dim(1) % r || x.dim(2) % r) {
    throw std::invalid_argument("pixel_unshuffle: spatial size not divisible by " + std::to_string(r));
  }
  const int c = x.dim(0), h = x.dim(1) / r, w = x.dim(2) / r;
  Tensor out({c * r * r, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j)
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx) out.at(ch * r * r + i * r + j, y, xx) = x.at(ch, y * r + i, xx * r + j);
  return out;
}

}  // namespace lgtd
