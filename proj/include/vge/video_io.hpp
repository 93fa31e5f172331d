#pragma once

// Frames-on-disk video ingestion. A video directory holds manifest.json
// ({fps, width, height, count}) plus contiguous frames 000000.ppm (P6) or
// 000000.png. Pre-extracted frames keep codec stacks out of the build; the
// README documents the one-line extraction recipe.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vge/errors.hpp"
#include "vge/frame.hpp"
#include "vge/image_io.hpp"

namespace vge {

struct Video {
  std::vector<Frame> frames;
  double fps = 0.0;
};

namespace videodetail {

inline std::string frame_stem(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

}  // namespace videodetail

inline Video load_video(const std::string& dir) {
  namespace fs = std::filesystem;
  fs::path root(dir);
  fs::path manifest_path = root / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw MissingManifest("no manifest.json in " + dir);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedJson("manifest.json: " + std::string(e.what()));
  }
  if (!manifest.is_object() || !manifest.contains("fps") || !manifest.contains("width") ||
      !manifest.contains("height") || !manifest.contains("count")) {
    throw MalformedJson("manifest.json must define fps, width, height, count");
  }
  double fps = 0.0;
  int width = 0, height = 0, count = 0;
  std::string format;
  try {
    fps = manifest["fps"].get<double>();
    width = manifest["width"].get<int>();
    height = manifest["height"].get<int>();
    count = manifest["count"].get<int>();
    if (manifest.contains("format")) format = manifest["format"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedJson("manifest.json: " + std::string(e.what()));
  }
  if (fps <= 0.0) throw MalformedJson("manifest fps must be > 0");
  if (width <= 0 || height <= 0) throw MalformedJson("manifest frame size must be positive");

  std::string ext;
  if (manifest.contains("format")) {
    if (format == "ppm") {
      ext = ".ppm";
    } else if (format == "png") {
      ext = ".png";
    } else {
      throw UnsupportedFormat("manifest frame format '" + format + "'");
    }
  } else {
    if (fs::exists(root / (videodetail::frame_stem(0) + ".ppm"))) {
      ext = ".ppm";
    } else if (fs::exists(root / (videodetail::frame_stem(0) + ".png"))) {
      ext = ".png";
    } else {
      throw MissingFrame("frame 0 not found in " + dir);
    }
  }

  Video video;
  video.fps = fps;
  if (count <= 0) throw MissingFrame("frame 0 not found in " + dir + " (count is 0)");
  video.frames.reserve(count);
  for (int i = 0; i < count; ++i) {
    fs::path frame_path = root / (videodetail::frame_stem(i) + ext);
    if (!fs::exists(frame_path)) {
      throw MissingFrame("frame " + std::to_string(i) + " not found: " + frame_path.string());
    }
    Frame frame = read_image(frame_path.string());
    if (frame.width != width || frame.height != height) {
      throw DimensionMismatch("frame " + std::to_string(i) + " is " +
                              std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                              ", manifest says " + std::to_string(width) + "x" +
                              std::to_string(height));
    }
    frame.index = i;
    frame.timestamp = static_cast<double>(i) / fps;
    video.frames.push_back(std::move(frame));
  }
  return video;
}

inline void save_video(const Video& video, const std::string& dir,
                       const std::string& format = "ppm") {
  namespace fs = std::filesystem;
  if (format != "ppm" && format != "png") throw UnsupportedFormat("save format " + format);
  fs::create_directories(dir);
  fs::path root(dir);
  if (video.frames.empty()) throw EmptyVideo("save_video: no frames");
  nlohmann::json manifest{{"fps", video.fps},
                          {"width", video.frames[0].width},
                          {"height", video.frames[0].height},
                          {"count", static_cast<int>(video.frames.size())},
                          {"format", format}};
  std::ofstream out(root / "manifest.json");
  out << manifest.dump(2) << "\n";
  for (size_t i = 0; i < video.frames.size(); ++i) {
    fs::path frame_path =
        root / (videodetail::frame_stem(static_cast<int>(i)) + "." + format);
    if (format == "ppm") {
      write_ppm(frame_path.string(), video.frames[i]);
    } else {
      write_png(frame_path.string(), video.frames[i]);
    }
  }
}

}  // namespace vge
