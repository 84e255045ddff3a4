#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "lgtd/data.hpp"

namespace fs = std::filesystem;

namespace lgtd {

Frame read_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw std::runtime_error("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw std::runtime_error("cannot decode PNG " + path.string() + ": " + image.message);
  }
  const int h = static_cast<int>(image.height), w = static_cast<int>(image.width);
  Frame f({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) f.at(c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
  return f;
}

void write_png(const fs::path& path, const Tensor& img) {
  if (img.rank() != 3 || (img.dim(0) != 3 && img.dim(0) != 1)) {
    throw std::invalid_argument("write_png: expected [3, H, W] or [1, H, W], got " + shape_str(img.shape()));
  }
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  std::vector<unsigned char> buf(static_cast<std::size_t>(c) * h * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        const double v = std::clamp(img.at(ch, y, x), 0.0, 1.0);
        buf[(static_cast<std::size_t>(y) * w + x) * c + ch] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
    throw std::runtime_error("cannot write PNG " + path.string() + ": " + image.message);
  }
}

std::string frame_filename(int index) {
  char name[32];
  std::snprintf(name, sizeof(name), "%08d.png", index);
  return name;
}

void write_clip(const fs::path& scene_dir, const Clip& clip) {
  fs::create_directories(scene_dir);
  for (int k = 0; k < clip.length(); ++k) write_png(scene_dir / frame_filename(clip.start_index + k), clip.frames[k]);
}

DatasetIndex::DatasetIndex(fs::path root, std::vector<SceneEntry> scenes, std::vector<RejectedScene> rejected)
    : root_(std::move(root)), scenes_(std::move(scenes)), rejected_(std::move(rejected)) {}

std::vector<WindowRef> DatasetIndex::windows(int length) const {
  std::vector<WindowRef> out;
  for (std::size_t s = 0; s < scenes_.size(); ++s) {
    const int n = static_cast<int>(scenes_[s].frames.size());
    for (int start = 0; start + length <= n; ++start) out.push_back({s, start});
  }
  return out;
}

Clip DatasetIndex::load_clip(const WindowRef& window, int length) const {
  const SceneEntry& scene = scenes_.at(window.scene);
  if (window.start < 0 || window.start + length > static_cast<int>(scene.frames.size())) {
    throw std::out_of_range("window [" + std::to_string(window.start) + ", +" + std::to_string(length) +
                            ") outside scene " + scene.name);
  }
  Clip clip{{}, scene.name, window.start};
  for (int k = 0; k < length; ++k) clip.frames.push_back(read_png(scene.frames[window.start + k]));
  return clip;
}

Clip DatasetIndex::load_scene(std::size_t s) const {
  const SceneEntry& scene = scenes_.at(s);
  Clip clip{{}, scene.name, 0};
  for (const fs::path& p : scene.frames) clip.frames.push_back(read_png(p));
  return clip;
}

DatasetIndex DatasetIndex::subset(const std::vector<std::string>& names) const {
  std::vector<SceneEntry> picked;
  for (const std::string& n : names) {
    auto it = std::find_if(scenes_.begin(), scenes_.end(), [&](const SceneEntry& e) { return e.name == n; });
    if (it == scenes_.end()) throw std::invalid_argument("scene '" + n + "' not present under " + root_.string());
    picked.push_back(*it);
  }
  return DatasetIndex(root_, std::move(picked), {});
}

namespace {

bool parse_frame_index(const fs::path& p, long& index) {
  if (p.extension() != ".png") return false;
  const std::string stem = p.stem().string();
  if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](unsigned char ch) { return std::isdigit(ch); })) return false;
  index = std::stol(stem);
  return true;
}

// Width/height from the IHDR chunk without decoding pixel data.
bool png_dimensions(const fs::path& p, int& w, int& h) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, p.string().c_str())) return false;
  w = static_cast<int>(image.width);
  h = static_cast<int>(image.height);
  png_image_free(&image);
  return true;
}

}  // namespace

DatasetIndex load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw std::invalid_argument("dataset root " + root.string() + " is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());

  std::vector<SceneEntry> scenes;
  std::vector<RejectedScene> rejected;
  for (const fs::path& dir : dirs) {
    std::vector<std::pair<long, fs::path>> frames;
    for (const auto& e : fs::directory_iterator(dir)) {
      long idx = 0;
      if (e.is_regular_file() && parse_frame_index(e.path(), idx)) frames.emplace_back(idx, e.path());
    }
    std::sort(frames.begin(), frames.end());
    const std::string name = dir.filename().string();
    if (frames.empty()) {
      rejected.push_back({name, "no frame files"});
      continue;
    }
    std::string problem;
    for (std::size_t i = 1; i < frames.size() && problem.empty(); ++i) {
      if (frames[i].first != frames[i - 1].first + 1) {
        problem = "missing frame index " + std::to_string(frames[i - 1].first + 1);
      }
    }
    SceneEntry entry{name, {}, 0, 0};
    for (const auto& [idx, path] : frames) {
      if (!problem.empty()) break;
      int w = 0, h = 0;
      if (!png_dimensions(path, w, h)) {
        problem = "unreadable frame " + path.filename().string();
      } else if (entry.frames.empty()) {
        entry.width = w;
        entry.height = h;
      } else if (w != entry.width || h != entry.height) {
        problem = "frame " + path.filename().string() + " is " + std::to_string(w) + "x" + std::to_string(h) +
                  ", expected " + std::to_string(entry.width) + "x" + std::to_string(entry.height);
      }
      entry.frames.push_back(path);
    }
    if (problem.empty()) {
      scenes.push_back(std::move(entry));
    } else {
      rejected.push_back({name, problem});
    }
  }
  return DatasetIndex(root, std::move(scenes), std::move(rejected));
}

std::optional<Manifest> read_manifest(const fs::path& root) {
  const fs::path p = root / "manifest.json";
  if (!fs::exists(p)) return std::nullopt;
  std::ifstream in(p);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed manifest " + p.string() + ": " + e.what());
  }
  Manifest m;
  if (j.contains("train")) m.train = j.at("train").get<std::vector<std::string>>();
  if (j.contains("test")) m.test = j.at("test").get<std::vector<std::string>>();
  return m;
}

void write_manifest(const fs::path& root, const Manifest& m) {
  fs::create_directories(root);
  nlohmann::json j{{"train", m.train}, {"test", m.test}};
  std::ofstream(root / "manifest.json") << j.dump(2) << '\n';
}

}  // namespace lgtd
