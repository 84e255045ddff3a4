#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lgtd/layers.hpp"
#include "lgtd/tensor.hpp"

namespace lgtd {

/// RGB frame [3, H, W] with values in [0, 1].
using Frame = Tensor;

struct Clip {
  std::vector<Frame> frames;
  std::string scene_id;
  int start_index = 0;

  int length() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.at(0).height(); }
  int width() const { return frames.at(0).width(); }
  const Frame& center() const { return frames.at(frames.size() / 2); }
};

/// Throws unless the clip is non-empty, odd-length and shape-consistent.
void validate_clip(const Clip& clip);

struct PairedSample {
  Clip lr;
  Frame hr;  // target (centre) frame at r times the LR size
  int scale = 4;
};

// --- bicubic resampling (a = -0.5, MATLAB imresize conventions) ---

/// Keys cubic kernel with a = -0.5.
double cubic_kernel(double x);
/// Antialiased downsampling by an integer factor with symmetric borders.
Tensor bicubic_downsample(const Tensor& image, int factor);
/// Bicubic upsampling by an integer factor with symmetric borders (no clamping).
Tensor bicubic_upsample(const Tensor& image, int factor);
/// Differentiable version (the map is linear; backward applies its transpose).
Var bicubic_upsample(const Var& image, int factor);

/// Downsamples every frame by r and clamps to [0, 1].
Clip degrade(const Clip& hr_clip, int r);
/// LR clip plus the HR centre frame.
PairedSample make_paired_sample(const Clip& hr_clip, int r);

// --- patching and augmentation ---

struct PatchOffset {
  int y = 0;
  int x = 0;
};

PatchOffset draw_patch_offset(int height, int width, int size, Rng& rng);
PairedSample crop_patch(const PairedSample& sample, int size, PatchOffset lr_offset);
PairedSample sample_patch(const PairedSample& sample, int size, std::uint64_t seed);

struct AugmentFlags {
  bool hflip = false;
  bool vflip = false;
  int rot90k = 0;  // clockwise quarter turns, applied after the flips
};

AugmentFlags draw_augment_flags(Rng& rng);
Tensor augment_image(const Tensor& image, const AugmentFlags& flags);
PairedSample augment(const PairedSample& sample, const AugmentFlags& flags);

// --- synthetic satellite-like scenes ---

struct SynthParams {
  int num_objects = 6;
  double max_speed = 1.5;     // pixels per frame
  double texture_scale = 24;  // background lattice spacing in pixels
  int frames = 5;
  int height = 128;
  int width = 128;
};

struct MovingObject {
  double x0 = 0, y0 = 0;  // top-left corner in frame 0
  double vx = 0, vy = 0;  // pixels per frame
  double w = 4, h = 3;
  double color[3] = {1, 1, 1};
};

struct SynthScene {
  Clip clip;
  Frame background;
  std::vector<MovingObject> objects;
};

/// Procedural static background (independent of the object count for a seed).
Frame synth_background(std::uint64_t seed, const SynthParams& params);
/// Renders objects over a background with 4x4 supersampled coverage.
Clip render_scene(const Frame& background, const std::vector<MovingObject>& objects, int frames);
SynthScene synth_scene_full(std::uint64_t seed, const SynthParams& params);
Clip synth_scene(std::uint64_t seed, const SynthParams& params);

// --- on-disk dataset: <root>/<scene>/<zero-padded index>.png ---

Frame read_png(const std::filesystem::path& path);
/// Writes 8-bit RGB (3 channels) or grayscale (1 channel); values clamped to [0, 1].
void write_png(const std::filesystem::path& path, const Tensor& image);

struct SceneEntry {
  std::string name;
  std::vector<std::filesystem::path> frames;
  int height = 0;
  int width = 0;
};

struct RejectedScene {
  std::string name;
  std::string reason;
};

struct WindowRef {
  std::size_t scene = 0;
  int start = 0;
};

class DatasetIndex {
 public:
  DatasetIndex() = default;
  DatasetIndex(std::filesystem::path root, std::vector<SceneEntry> scenes, std::vector<RejectedScene> rejected);

  const std::filesystem::path& root() const { return root_; }
  const std::vector<SceneEntry>& scenes() const { return scenes_; }
  const std::vector<RejectedScene>& rejected() const { return rejected_; }

  /// Every length-T window of every scene, in scene then start order.
  std::vector<WindowRef> windows(int length) const;
  Clip load_clip(const WindowRef& window, int length) const;
  Clip load_scene(std::size_t scene) const;
  /// Subset restricted to the named scenes (order follows `names`).
  DatasetIndex subset(const std::vector<std::string>& names) const;

 private:
  std::filesystem::path root_;
  std::vector<SceneEntry> scenes_;
  std::vector<RejectedScene> rejected_;
};

/// Scans the layout; inconsistent scenes land in rejected() with a reason.
DatasetIndex load_dataset(const std::filesystem::path& root);

struct Manifest {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Reads <root>/manifest.json when present.
std::optional<Manifest> read_manifest(const std::filesystem::path& root);
void write_manifest(const std::filesystem::path& root, const Manifest& manifest);

std::string frame_filename(int index);
void write_clip(const std::filesystem::path& scene_dir, const Clip& clip);

}  // namespace lgtd
