#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lgtd/data.hpp"

namespace lgtd {

enum class Channel { Y, RGB };

std::string to_string(Channel c);
Channel parse_channel(const std::string& s);

struct EvalProtocol {
  Channel channel = Channel::Y;
  int border_crop = 8;
  double pixel_scale = 255.0;  // inputs are in [0, 1]; metrics run on [0, pixel_scale]

  void validate() const;
};

/// BT.601 limited-range luminance, [3, H, W] -> [1, H, W].
Tensor rgb_to_y(const Frame& frame);

/// Applies the protocol's channel conversion (identity for RGB).
Tensor metric_channels(const Frame& frame, const EvalProtocol& protocol);

/// 10 log10(peak^2 / MSE) over the cropped grids; +inf for identical inputs.
/// Grids are [C, H, W] in [0, 1]; no channel conversion is applied.
double psnr(const Tensor& gt, const Tensor& sr, const EvalProtocol& protocol);

/// Gaussian-window SSIM (11x11, sigma 1.5), averaged over valid window
/// positions and channels, after the border crop.
double ssim(const Tensor& gt, const Tensor& sr, const EvalProtocol& protocol);

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

/// Row `row` of every frame stacked in time order: [C, T, W].
Tensor temporal_profile(const std::vector<Frame>& frames, int row);

/// Maps a 2N+1 LR window to an SR estimate of its centre frame.
using Predictor = std::function<Frame(const Clip& lr_window)>;

/// Indices of the window centred on `center` with ends replicated.
std::vector<int> window_indices(int center, int half_frames, int length);

struct FrameMetrics {
  int frame = 0;
  double psnr = 0;
  double ssim = 0;
};

struct SceneResult {
  std::string scene;
  std::vector<FrameMetrics> frames;
  double mean_psnr = 0;
  double mean_ssim = 0;
};

/// Degrades the HR scene by `scale`, super-resolves every frame through
/// `predict` and scores it against the HR frame.
SceneResult evaluate_scene(const Predictor& predict, const Clip& hr_scene, int half_frames, int scale,
                           const EvalProtocol& protocol);

/// Predictor that ignores the neighbours and bicubically upsamples the centre.
Predictor bicubic_predictor(int scale);

/// "inf" for +infinity, fixed precision otherwise.
std::string format_metric(double v);

/// (scene, frameIdx, psnr<ch>, ssim<ch>)
void write_frame_csv(const std::filesystem::path& path, const std::vector<SceneResult>& results, Channel channel);
/// (scene, frames, psnr<ch>, ssim<ch>) per scene plus an "overall" row.
void write_summary_csv(const std::filesystem::path& path, const std::vector<SceneResult>& results, Channel channel);

/// Mean over scenes of their mean metrics.
FrameMetrics overall_mean(const std::vector<SceneResult>& results);

}  // namespace lgtd
