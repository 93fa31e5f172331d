#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "vge/errors.hpp"

namespace vge {

// One decoded video frame, 8-bit RGB, row-major.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // width * height * 3
  int index = 0;
  double timestamp = 0.0;  // seconds, index / fps

  Frame() = default;
  Frame(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, fill) {}

  size_t pixel_count() const { return static_cast<size_t>(width) * height; }

  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + (static_cast<size_t>(y) * width + x) * 3;
  }
  std::uint8_t* pixel(int x, int y) {
    return rgb.data() + (static_cast<size_t>(y) * width + x) * 3;
  }

  void validate() const {
    if (rgb.size() != pixel_count() * 3) {
      throw DimensionMismatch("frame buffer length does not match width*height*3");
    }
  }

  bool operator==(const Frame&) const = default;
};

// 2x2 box downsample (odd trailing row/column folds into the last cell).
inline Frame half_resolution(const Frame& frame) {
  Frame out;
  out.width = std::max(1, frame.width / 2);
  out.height = std::max(1, frame.height / 2);
  out.index = frame.index;
  out.timestamp = frame.timestamp;
  out.rgb.resize(static_cast<size_t>(out.width) * out.height * 3);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      int x1 = std::min(2 * x + 1, frame.width - 1);
      int y1 = std::min(2 * y + 1, frame.height - 1);
      for (int c = 0; c < 3; ++c) {
        int sum = frame.pixel(2 * x, 2 * y)[c] + frame.pixel(x1, 2 * y)[c] +
                  frame.pixel(2 * x, y1)[c] + frame.pixel(x1, y1)[c];
        out.rgb[(static_cast<size_t>(y) * out.width + x) * 3 + c] =
            static_cast<std::uint8_t>((sum + 2) / 4);
      }
    }
  }
  return out;
}

// Luma plane as floats in [0, 255], used by the flow estimator.
inline std::vector<float> to_gray(const Frame& f) {
  std::vector<float> gray(f.pixel_count());
  const std::uint8_t* p = f.rgb.data();
  for (size_t i = 0; i < gray.size(); ++i, p += 3) {
    gray[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
  }
  return gray;
}

// RGB -> HSV with every channel scaled to [0, 1]. H is the hue angle divided
// by 360 degrees; S and V follow the usual hexcone model. Black maps to
// (0, 0, 0) and greys to hue 0.
inline void rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8,
                       float* h, float* s, float* v) {
  float r = r8 / 255.0f, g = g8 / 255.0f, b = b8 / 255.0f;
  float mx = std::max({r, g, b});
  float mn = std::min({r, g, b});
  float delta = mx - mn;
  *v = mx;
  *s = mx > 0.0f ? delta / mx : 0.0f;
  if (delta <= 0.0f) {
    *h = 0.0f;
    return;
  }
  float hue;
  if (mx == r) {
    hue = (g - b) / delta;
    if (hue < 0.0f) hue += 6.0f;
  } else if (mx == g) {
    hue = (b - r) / delta + 2.0f;
  } else {
    hue = (r - g) / delta + 4.0f;
  }
  *h = hue / 6.0f;
}

// Circular hue distance rescaled so diametrically opposed hues are 1.
inline float hue_distance(float h0, float h1) {
  float d = std::fabs(h0 - h1);
  if (d > 0.5f) d = 1.0f - d;
  return 2.0f * d;
}

}  // namespace vge
