#include "lgtd/plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>

#include "lgtd/data.hpp"

namespace lgtd {

namespace {

// 3x5 bitmap glyphs, rows top to bottom.
const std::unordered_map<char, const char*>& glyphs() {
  static const std::unordered_map<char, const char*> g = {
      {'0', "111101101101111"}, {'1', "010110010010111"}, {'2', "111001111100111"}, {'3', "111001111001111"},
      {'4', "101101111001001"}, {'5', "111100111001111"}, {'6', "111100111101111"}, {'7', "111001001001001"},
      {'8', "111101111101111"}, {'9', "111101111001111"}, {'.', "000000000000010"}, {'-', "000000111000000"},
      {':', "000010000010000"}, {'/', "001001010100100"}, {'(', "010100100100010"}, {')', "010001001001010"},
      {'+', "000010111010000"}, {'=', "000111000111000"}, {'_', "000000000000111"}, {',', "000000000010100"},
      {'%', "101001010100101"}, {' ', "000000000000000"}, {'A', "010101111101101"}, {'B', "110101110101110"},
      {'C', "011100100100011"}, {'D', "110101101101110"}, {'E', "111100110100111"}, {'F', "111100110100100"},
      {'G', "011100101101011"}, {'H', "101101111101101"}, {'I', "111010010010111"}, {'J', "001001001101010"},
      {'K', "101101110101101"}, {'L', "100100100100111"}, {'M', "101111111101101"}, {'N', "110101101101101"},
      {'O', "010101101101010"}, {'P', "110101110100100"}, {'Q', "010101101110011"}, {'R', "110101110101101"},
      {'S', "011100010001110"}, {'T', "111010010010010"}, {'U', "101101101101111"}, {'V', "101101101101010"},
      {'W', "101101111111101"}, {'X', "101101010101101"}, {'Y', "101101010010010"}, {'Z', "111001010100111"},
  };
  return g;
}

constexpr int kGlyphScale = 2;
constexpr int kGlyphAdvance = 4 * kGlyphScale;

class Canvas {
 public:
  Canvas(int w, int h) : img_({3, h, w}, 1.0), w_(w), h_(h) {}

  void set(int x, int y, const Rgb& c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    for (int k = 0; k < 3; ++k) img_.at(k, y, x) = c[k];
  }

  void rect(int x0, int y0, int x1, int y1, const Rgb& c) {
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) set(x, y, c);
  }

  void line(double xa, double ya, double xb, double yb, const Rgb& c, int thickness) {
    const int steps = static_cast<int>(std::ceil(std::max(std::abs(xb - xa), std::abs(yb - ya)))) + 1;
    const int lo = -(thickness - 1) / 2, hi = thickness / 2;
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      const int x = static_cast<int>(std::lround(xa + t * (xb - xa)));
      const int y = static_cast<int>(std::lround(ya + t * (yb - ya)));
      rect(x + lo, y + lo, x + hi, y + hi, c);
    }
  }

  static int text_width(const std::string& s) { return static_cast<int>(s.size()) * kGlyphAdvance - kGlyphScale; }

  void text(int x, int y, const std::string& s, const Rgb& c) {
    for (char ch : s) {
      auto it = glyphs().find(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
      const char* bits = it == glyphs().end() ? "111101101101111" : it->second;
      for (int r = 0; r < 5; ++r)
        for (int q = 0; q < 3; ++q)
          if (bits[r * 3 + q] == '1')
            rect(x + q * kGlyphScale, y + r * kGlyphScale, x + (q + 1) * kGlyphScale - 1,
                 y + (r + 1) * kGlyphScale - 1, c);
      x += kGlyphAdvance;
    }
  }

  // Text rotated a quarter turn counter-clockwise, reading bottom to top.
  void text_vertical(int x, int y_bottom, const std::string& s, const Rgb& c) {
    int y = y_bottom;
    for (char ch : s) {
      auto it = glyphs().find(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
      const char* bits = it == glyphs().end() ? "111101101101111" : it->second;
      for (int r = 0; r < 5; ++r)
        for (int q = 0; q < 3; ++q)
          if (bits[r * 3 + q] == '1')
            rect(x + r * kGlyphScale, y - (q + 1) * kGlyphScale + 1, x + (r + 1) * kGlyphScale - 1,
                 y - q * kGlyphScale, c);
      y -= kGlyphAdvance;
    }
  }

  Tensor take() { return std::move(img_); }

 private:
  Tensor img_;
  int w_, h_;
};

std::string tick_label(double v, double step) {
  char buf[32];
  if (std::abs(v) < step * 1e-9) v = 0;
  const double mag = std::max(std::abs(v), step);
  if (mag >= 1e5 || mag < 1e-3) {
    std::snprintf(buf, sizeof buf, "%.2g", v);
  } else {
    const int decimals = std::max(0, -static_cast<int>(std::floor(std::log10(step) + 1e-9)));
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  }
  return buf;
}

struct Range {
  double lo = INFINITY, hi = -INFINITY;
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void settle() {
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(lo))) {
      const double pad = std::max(std::abs(lo) * 0.05, 0.5);
      lo -= pad;
      hi += pad;
    }
  }
};

}  // namespace

Rgb palette(std::size_t i) {
  static const Rgb colors[] = {{0.12, 0.35, 0.75}, {0.85, 0.33, 0.10}, {0.18, 0.60, 0.25}, {0.58, 0.25, 0.70},
                               {0.80, 0.15, 0.35}, {0.10, 0.60, 0.65}, {0.55, 0.45, 0.10}, {0.35, 0.35, 0.35}};
  return colors[i % (sizeof colors / sizeof colors[0])];
}

std::vector<double> nice_ticks(double lo, double hi, int target) {
  if (!(hi > lo)) throw std::invalid_argument("nice_ticks: empty range");
  const double raw = (hi - lo) / std::max(1, target);
  const double pow10 = std::pow(10.0, std::floor(std::log10(raw)));
  double step = pow10;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * pow10;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step - 1e-9) * step; t <= hi + step * 1e-9; t += step) ticks.push_back(t);
  return ticks;
}

Tensor render_plot(const PlotSpec& spec) {
  if (spec.width < 200 || spec.height < 150) throw std::invalid_argument("render_plot: canvas too small");
  Canvas cv(spec.width, spec.height);
  const Rgb black{0, 0, 0}, grid{0.88, 0.88, 0.88};
  const int right = spec.width - 20, top = 36, bottom = spec.height - 48;

  Range xr, yr;
  for (const Series& s : spec.series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("render_plot: series '" + s.label + "' x/y length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
        xr.add(s.x[i]);
        yr.add(s.y[i]);
      }
    }
  }
  xr.settle();
  yr.settle();
  const auto xt = nice_ticks(xr.lo, xr.hi), yt = nice_ticks(yr.lo, yr.hi);
  // Axis limits snap outward to the tick grid.
  const double xstep = xt.size() > 1 ? xt[1] - xt[0] : 1, ystep = yt.size() > 1 ? yt[1] - yt[0] : 1;
  const double x0 = std::min(xr.lo, std::floor(xr.lo / xstep) * xstep), x1 = std::max(xr.hi, xt.back());
  const double y0 = std::floor(yr.lo / ystep) * ystep, y1 = std::ceil(yr.hi / ystep) * ystep;
  const auto ylab_ticks = nice_ticks(y0, y1);
  int widest = 0;
  for (double t : ylab_ticks) widest = std::max(widest, Canvas::text_width(tick_label(t, ystep)));
  const int left = 8 + 5 * kGlyphScale + 10 + widest + 8;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (right - left); };
  auto py = [&](double y) { return bottom - (y - y0) / (y1 - y0) * (bottom - top); };

  for (double t : xt) {
    if (t < x0 || t > x1) continue;
    const int x = static_cast<int>(std::lround(px(t)));
    cv.line(x, top, x, bottom, grid, 1);
    cv.line(x, bottom, x, bottom + 4, black, 1);
    const std::string lab = tick_label(t, xstep);
    cv.text(x - Canvas::text_width(lab) / 2, bottom + 8, lab, black);
  }
  for (double t : ylab_ticks) {
    const int y = static_cast<int>(std::lround(py(t)));
    cv.line(left, y, right, y, grid, 1);
    cv.line(left - 4, y, left, y, black, 1);
    const std::string lab = tick_label(t, ystep);
    cv.text(left - 8 - Canvas::text_width(lab), y - 5, lab, black);
  }
  cv.line(left, top, left, bottom, black, 1);
  cv.line(left, bottom, right, bottom, black, 1);

  cv.text((spec.width - Canvas::text_width(spec.title)) / 2, 10, spec.title, black);
  cv.text((left + right - Canvas::text_width(spec.x_label)) / 2, spec.height - 18, spec.x_label, black);
  cv.text_vertical(8, (top + bottom + Canvas::text_width(spec.y_label)) / 2, spec.y_label, black);

  for (const Series& s : spec.series) {
    bool have_prev = false;
    double qx = 0, qy = 0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        have_prev = false;
        continue;
      }
      const double cx = px(s.x[i]), cy = py(s.y[i]);
      if (s.line && have_prev) cv.line(qx, qy, cx, cy, s.color, 2);
      if (s.markers) {
        const int ix = static_cast<int>(std::lround(cx)), iy = static_cast<int>(std::lround(cy));
        cv.rect(ix - 3, iy - 3, ix + 3, iy + 3, s.color);
      }
      qx = cx, qy = cy, have_prev = true;
    }
  }

  // Legend, top right inside the axes.
  int ly = top + 8;
  for (const Series& s : spec.series) {
    if (s.label.empty()) continue;
    const int tw = Canvas::text_width(s.label);
    const int lx = right - 10 - tw - 26;
    cv.rect(lx - 4, ly - 3, right - 6, ly + 12, Rgb{1, 1, 1});
    cv.line(lx, ly + 4, lx + 18, ly + 4, s.color, 3);
    cv.text(lx + 24, ly, s.label, black);
    ly += 18;
  }
  return cv.take();
}

void write_plot(const std::filesystem::path& path, const PlotSpec& spec) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_png(path, render_plot(spec));
}

}  // namespace lgtd
