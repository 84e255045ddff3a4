#include "lgtd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace lgtd {

std::string to_string(Channel c) { return c == Channel::Y ? "Y" : "RGB"; }

Channel parse_channel(const std::string& s) {
  if (s == "Y" || s == "y") return Channel::Y;
  if (s == "RGB" || s == "rgb") return Channel::RGB;
  throw std::invalid_argument("eval.channel must be Y|RGB, got '" + s + "'");
}

void EvalProtocol::validate() const {
  if (border_crop < 0) throw std::invalid_argument("eval.borderCrop must be >= 0");
  if (!(pixel_scale > 0)) throw std::invalid_argument("eval.pixelScale must be > 0");
}

Tensor rgb_to_y(const Frame& frame) {
  if (frame.rank() != 3 || frame.dim(0) != 3) {
    throw std::invalid_argument("rgb_to_y expects [3, H, W], got " + shape_str(frame.shape()));
  }
  const int h = frame.dim(1), w = frame.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor y({1, h, w});
  const double* r = frame.data();
  const double* g = r + plane;
  const double* b = g + plane;
  for (std::size_t i = 0; i < plane; ++i) y[i] = (65.481 * r[i] + 128.553 * g[i] + 24.966 * b[i] + 16.0) / 255.0;
  return y;
}

Tensor metric_channels(const Frame& frame, const EvalProtocol& protocol) {
  return protocol.channel == Channel::Y ? rgb_to_y(frame) : frame;
}

namespace {

struct Cropped {
  int c, h, w;
};

Cropped crop_geometry(const Tensor& gt, const Tensor& sr, int border, const char* op) {
  if (gt.shape() != sr.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(gt.shape()) + " vs " +
                                shape_str(sr.shape()));
  }
  if (gt.rank() != 3) throw std::invalid_argument(std::string(op) + ": expected [C, H, W]");
  const Cropped c{gt.dim(0), gt.dim(1) - 2 * border, gt.dim(2) - 2 * border};
  if (c.h <= 0 || c.w <= 0) {
    throw std::invalid_argument(std::string(op) + ": border crop " + std::to_string(border) + " leaves no pixels of " +
                                shape_str(gt.shape()));
  }
  return c;
}

// Cropped plane `ch` scaled to [0, pixel_scale].
std::vector<double> plane_of(const Tensor& t, int ch, int border, const Cropped& g, double scale) {
  std::vector<double> out(static_cast<std::size_t>(g.h) * g.w);
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) out[static_cast<std::size_t>(y) * g.w + x] = t.at(ch, y + border, x + border) * scale;
  }
  return out;
}

std::vector<double> gaussian_taps() {
  std::vector<double> k(kSsimWindow);
  double total = 0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    k[i] = std::exp(-d * d / (2 * kSsimSigma * kSsimSigma));
    total += k[i];
  }
  for (double& v : k) v /= total;
  return k;
}

// Separable valid-mode Gaussian filter.
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(oh) * w);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = 0; i < n; ++i) acc += k[i] * img[static_cast<std::size_t>(y + i) * w + x];
      rows[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (int j = 0; j < n; ++j) acc += k[j] * rows[static_cast<std::size_t>(y) * w + x + j];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const Tensor& gt, const Tensor& sr, const EvalProtocol& protocol) {
  protocol.validate();
  const int b = protocol.border_crop;
  const Cropped g = crop_geometry(gt, sr, b, "psnr");
  double se = 0;
  for (int c = 0; c < g.c; ++c) {
    for (int y = 0; y < g.h; ++y) {
      for (int x = 0; x < g.w; ++x) {
        const double d = (gt.at(c, y + b, x + b) - sr.at(c, y + b, x + b)) * protocol.pixel_scale;
        se += d * d;
      }
    }
  }
  if (se == 0) return std::numeric_limits<double>::infinity();
  const double mse = se / (static_cast<double>(g.c) * g.h * g.w);
  return 10.0 * std::log10(protocol.pixel_scale * protocol.pixel_scale / mse);
}

double ssim(const Tensor& gt, const Tensor& sr, const EvalProtocol& protocol) {
  protocol.validate();
  const int b = protocol.border_crop;
  const Cropped g = crop_geometry(gt, sr, b, "ssim");
  if (g.h < kSsimWindow || g.w < kSsimWindow) {
    throw std::invalid_argument("ssim: cropped image " + std::to_string(g.h) + "x" + std::to_string(g.w) +
                                " is smaller than the " + std::to_string(kSsimWindow) + "x" +
                                std::to_string(kSsimWindow) + " window");
  }
  const double c1 = std::pow(0.01 * protocol.pixel_scale, 2);
  const double c2 = std::pow(0.03 * protocol.pixel_scale, 2);
  const auto k = gaussian_taps();
  double total = 0;
  std::size_t count = 0;
  for (int c = 0; c < g.c; ++c) {
    const auto x = plane_of(gt, c, b, g, protocol.pixel_scale);
    const auto y = plane_of(sr, c, b, g, protocol.pixel_scale);
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, g.h, g.w, k);
    const auto my = filter_valid(y, g.h, g.w, k);
    const auto sxx = filter_valid(xx, g.h, g.w, k);
    const auto syy = filter_valid(yy, g.h, g.w, k);
    const auto sxy = filter_valid(xy, g.h, g.w, k);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cxy = sxy[i] - mx[i] * my[i];
      const double num = (2 * mx[i] * my[i] + c1) * (2 * cxy + c2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
      total += num / den;
    }
    count += mx.size();
  }
  return total / static_cast<double>(count);
}

Tensor temporal_profile(const std::vector<Frame>& frames, int row) {
  if (frames.empty()) throw std::invalid_argument("temporal_profile: no frames");
  const Shape& s = frames[0].shape();
  if (s.size() != 3) throw std::invalid_argument("temporal_profile: frames must be [C, H, W]");
  if (row < 0 || row >= s[1]) {
    throw std::invalid_argument("temporal_profile: row " + std::to_string(row) + " outside [0, " + std::to_string(s[1]) +
                                ")");
  }
  const int t = static_cast<int>(frames.size());
  Tensor out({s[0], t, s[2]});
  for (int k = 0; k < t; ++k) {
    if (frames[k].shape() != s) throw std::invalid_argument("temporal_profile: frames disagree in shape");
    for (int c = 0; c < s[0]; ++c) {
      for (int x = 0; x < s[2]; ++x) out.at(c, k, x) = frames[k].at(c, row, x);
    }
  }
  return out;
}

std::vector<int> window_indices(int center, int half_frames, int length) {
  std::vector<int> idx;
  for (int k = -half_frames; k <= half_frames; ++k) idx.push_back(std::clamp(center + k, 0, length - 1));
  return idx;
}

SceneResult evaluate_scene(const Predictor& predict, const Clip& hr_scene, int half_frames, int scale,
                           const EvalProtocol& protocol) {
  protocol.validate();
  const int t = 2 * half_frames + 1;
  if (hr_scene.length() < t) {
    throw std::invalid_argument("scene '" + hr_scene.scene_id + "' has " + std::to_string(hr_scene.length()) +
                                " frames, fewer than the window length " + std::to_string(t));
  }
  const Clip lr = degrade(hr_scene, scale);
  SceneResult res;
  res.scene = hr_scene.scene_id;
  for (int i = 0; i < hr_scene.length(); ++i) {
    Clip window;
    window.scene_id = hr_scene.scene_id;
    window.start_index = i - half_frames;
    for (int j : window_indices(i, half_frames, lr.length())) window.frames.push_back(lr.frames[j]);
    const Frame sr = predict(window);
    const Tensor gt_m = metric_channels(hr_scene.frames[i], protocol);
    const Tensor sr_m = metric_channels(sr, protocol);
    res.frames.push_back({i, psnr(gt_m, sr_m, protocol), ssim(gt_m, sr_m, protocol)});
  }
  for (const FrameMetrics& f : res.frames) {
    res.mean_psnr += f.psnr;
    res.mean_ssim += f.ssim;
  }
  res.mean_psnr /= static_cast<double>(res.frames.size());
  res.mean_ssim /= static_cast<double>(res.frames.size());
  return res;
}

Predictor bicubic_predictor(int scale) {
  return [scale](const Clip& window) {
    Tensor up = bicubic_upsample(window.center(), scale);
    for (double& v : up.storage()) v = std::clamp(v, 0.0, 1.0);
    return up;
  };
}

std::string format_metric(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

FrameMetrics overall_mean(const std::vector<SceneResult>& results) {
  FrameMetrics m{-1, 0, 0};
  if (results.empty()) return m;
  for (const SceneResult& r : results) {
    m.psnr += r.mean_psnr;
    m.ssim += r.mean_ssim;
  }
  m.psnr /= static_cast<double>(results.size());
  m.ssim /= static_cast<double>(results.size());
  return m;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_frame_csv(const std::filesystem::path& path, const std::vector<SceneResult>& results, Channel channel) {
  auto out = open_csv(path);
  const std::string ch = to_string(channel);
  out << "scene,frameIdx,psnr" << ch << ",ssim" << ch << "\n";
  for (const SceneResult& r : results) {
    for (const FrameMetrics& f : r.frames) {
      out << r.scene << "," << f.frame << "," << format_metric(f.psnr) << "," << format_metric(f.ssim) << "\n";
    }
  }
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SceneResult>& results, Channel channel) {
  auto out = open_csv(path);
  const std::string ch = to_string(channel);
  out << "scene,frames,psnr" << ch << ",ssim" << ch << "\n";
  std::size_t frames = 0;
  for (const SceneResult& r : results) {
    out << r.scene << "," << r.frames.size() << "," << format_metric(r.mean_psnr) << "," << format_metric(r.mean_ssim)
        << "\n";
    frames += r.frames.size();
  }
  const FrameMetrics m = overall_mean(results);
  out << "overall," << frames << "," << format_metric(m.psnr) << "," << format_metric(m.ssim) << "\n";
}

}  // namespace lgtd
