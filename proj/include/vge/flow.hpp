#pragma once

// Dense optical flow via coarse-to-fine pyramidal Lucas-Kanade. This is the
// built-in classical estimator; any external estimator can be substituted
// through the precomputed-flow file format at the bottom of this header.
//
// The estimator is deliberately plain: grayscale pyramid, per-pixel window
// matching with iterative refinement, structure tensors from summed-area
// tables. Same inputs always produce bit-identical outputs.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "vge/errors.hpp"
#include "vge/frame.hpp"

namespace vge {

inline constexpr int kMinFlowFrameSize = 16;

struct FlowParams {
  int levels = 3;         // pyramid levels, >= 1
  int window_radius = 5;  // LK window radius in pixels, >= 2
  int iterations = 4;     // refinement iterations per level, >= 1

  void validate() const {
    if (levels < 1 || window_radius < 2 || iterations < 1) {
      throw Error("invalid FlowParams: levels >= 1, radius >= 2, iterations >= 1");
    }
  }
};

// Per-pixel motion in pixels/frame, (dx, dy) interleaved, row-major.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // 2 * width * height

  FlowField() = default;
  FlowField(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 2, 0.0f) {}

  size_t pixel_count() const { return static_cast<size_t>(width) * height; }

  float dx(int x, int y) const { return data[(static_cast<size_t>(y) * width + x) * 2]; }
  float dy(int x, int y) const { return data[(static_cast<size_t>(y) * width + x) * 2 + 1]; }
  float& dx(int x, int y) { return data[(static_cast<size_t>(y) * width + x) * 2]; }
  float& dy(int x, int y) { return data[(static_cast<size_t>(y) * width + x) * 2 + 1]; }

  float magnitude(int x, int y) const {
    float a = dx(x, y), b = dy(x, y);
    return std::sqrt(a * a + b * b);
  }

  void validate() const {
    if (data.size() != pixel_count() * 2) {
      throw DimensionMismatch("flow buffer length does not match dimensions");
    }
    for (float v : data) {
      if (!std::isfinite(v)) throw NonFiniteInput("flow field contains non-finite values");
    }
  }

  bool operator==(const FlowField&) const = default;
};

namespace flowdetail {

inline float bilinear(const std::vector<float>& img, int w, int h, float fx, float fy) {
  if (fx < 0.0f) fx = 0.0f;
  if (fy < 0.0f) fy = 0.0f;
  if (fx > static_cast<float>(w - 1)) fx = static_cast<float>(w - 1);
  if (fy > static_cast<float>(h - 1)) fy = static_cast<float>(h - 1);
  int x0 = static_cast<int>(fx);
  int y0 = static_cast<int>(fy);
  int x1 = x0 + 1 < w ? x0 + 1 : x0;
  int y1 = y0 + 1 < h ? y0 + 1 : y0;
  float ax = fx - static_cast<float>(x0);
  float ay = fy - static_cast<float>(y0);
  float top = img[static_cast<size_t>(y0) * w + x0] * (1.0f - ax) +
              img[static_cast<size_t>(y0) * w + x1] * ax;
  float bot = img[static_cast<size_t>(y1) * w + x0] * (1.0f - ax) +
              img[static_cast<size_t>(y1) * w + x1] * ax;
  return top * (1.0f - ay) + bot * ay;
}

// One pyramid level: luma, central-difference gradients, and double-precision
// summed-area tables of the gradient products for O(1) window tensors.
struct PyramidLevel {
  int width = 0;
  int height = 0;
  std::vector<float> gray;
  std::vector<float> ix;
  std::vector<float> iy;
  std::vector<double> sat_xx;  // (width + 1) * (height + 1)
  std::vector<double> sat_xy;
  std::vector<double> sat_yy;

  void build_derived() {
    size_t n = static_cast<size_t>(width) * height;
    ix.assign(n, 0.0f);
    iy.assign(n, 0.0f);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        int xm = x > 0 ? x - 1 : 0, xp = x + 1 < width ? x + 1 : width - 1;
        int ym = y > 0 ? y - 1 : 0, yp = y + 1 < height ? y + 1 : height - 1;
        ix[static_cast<size_t>(y) * width + x] =
            0.5f * (gray[static_cast<size_t>(y) * width + xp] -
                    gray[static_cast<size_t>(y) * width + xm]);
        iy[static_cast<size_t>(y) * width + x] =
            0.5f * (gray[static_cast<size_t>(yp) * width + x] -
                    gray[static_cast<size_t>(ym) * width + x]);
      }
    }
    size_t sw = static_cast<size_t>(width) + 1;
    sat_xx.assign(sw * (height + 1), 0.0);
    sat_xy.assign(sw * (height + 1), 0.0);
    sat_yy.assign(sw * (height + 1), 0.0);
    for (int y = 0; y < height; ++y) {
      double row_xx = 0.0, row_xy = 0.0, row_yy = 0.0;
      for (int x = 0; x < width; ++x) {
        size_t i = static_cast<size_t>(y) * width + x;
        row_xx += static_cast<double>(ix[i]) * ix[i];
        row_xy += static_cast<double>(ix[i]) * iy[i];
        row_yy += static_cast<double>(iy[i]) * iy[i];
        size_t s = (static_cast<size_t>(y) + 1) * sw + x + 1;
        sat_xx[s] = sat_xx[s - sw] + row_xx;
        sat_xy[s] = sat_xy[s - sw] + row_xy;
        sat_yy[s] = sat_yy[s - sw] + row_yy;
      }
    }
  }

  // Inclusive box sums over [x0, x1] x [y0, y1].
  void tensor(int x0, int y0, int x1, int y1, double* gxx, double* gxy, double* gyy) const {
    size_t sw = static_cast<size_t>(width) + 1;
    size_t a = static_cast<size_t>(y0) * sw + x0;
    size_t b = static_cast<size_t>(y0) * sw + x1 + 1;
    size_t c = static_cast<size_t>(y1 + 1) * sw + x0;
    size_t d = static_cast<size_t>(y1 + 1) * sw + x1 + 1;
    *gxx = sat_xx[d] - sat_xx[b] - sat_xx[c] + sat_xx[a];
    *gxy = sat_xy[d] - sat_xy[b] - sat_xy[c] + sat_xy[a];
    *gyy = sat_yy[d] - sat_yy[b] - sat_yy[c] + sat_yy[a];
  }
};

struct Pyramid {
  std::vector<PyramidLevel> levels;  // [0] = full resolution
};

inline std::vector<float> downsample2(const std::vector<float>& src, int w, int h,
                                      int* ow, int* oh) {
  *ow = w / 2;
  *oh = h / 2;
  std::vector<float> dst(static_cast<size_t>(*ow) * *oh);
  for (int y = 0; y < *oh; ++y) {
    for (int x = 0; x < *ow; ++x) {
      size_t i = static_cast<size_t>(2 * y) * w + 2 * x;
      dst[static_cast<size_t>(y) * *ow + x] =
          0.25f * (src[i] + src[i + 1] + src[i + w] + src[i + w + 1]);
    }
  }
  return dst;
}

inline Pyramid build_pyramid(const Frame& frame, int levels) {
  Pyramid pyr;
  PyramidLevel base;
  base.width = frame.width;
  base.height = frame.height;
  base.gray = to_gray(frame);
  base.build_derived();
  pyr.levels.push_back(std::move(base));
  for (int l = 1; l < levels; ++l) {
    const PyramidLevel& prev = pyr.levels.back();
    if (prev.width / 2 < 12 || prev.height / 2 < 12) break;  // keep coarsest usable
    PyramidLevel next;
    next.gray = downsample2(prev.gray, prev.width, prev.height, &next.width, &next.height);
    next.build_derived();
    pyr.levels.push_back(std::move(next));
  }
  return pyr;
}

// Iterative LK update for the window centred on integer pixel (cx, cy) of
// level `a`, matching into level `b`. (u, v) holds the initial guess and is
// refined in place. Returns false when the local tensor is too weak to solve.
inline bool refine_at(const PyramidLevel& a, const PyramidLevel& b, int cx, int cy, int radius,
                      int iterations, float* u, float* v) {
  int x0 = cx - radius < 0 ? 0 : cx - radius;
  int y0 = cy - radius < 0 ? 0 : cy - radius;
  int x1 = cx + radius >= a.width ? a.width - 1 : cx + radius;
  int y1 = cy + radius >= a.height ? a.height - 1 : cy + radius;

  double gxx, gxy, gyy;
  a.tensor(x0, y0, x1, y1, &gxx, &gxy, &gyy);
  double trace = gxx + gyy;
  double det = gxx * gyy - gxy * gxy;
  double min_eig = 0.5 * (trace - std::sqrt(trace * trace - 4.0 * det + 1e-30));
  double area = static_cast<double>(x1 - x0 + 1) * (y1 - y0 + 1);
  if (!(min_eig > 1e-4 * area)) return false;

  double inv_det = 1.0 / det;
  float max_step = static_cast<float>(radius);
  for (int it = 0; it < iterations; ++it) {
    double bx = 0.0, by = 0.0;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        size_t i = static_cast<size_t>(y) * a.width + x;
        float residual = a.gray[i] - bilinear(b.gray, b.width, b.height,
                                              static_cast<float>(x) + *u,
                                              static_cast<float>(y) + *v);
        bx += static_cast<double>(residual) * a.ix[i];
        by += static_cast<double>(residual) * a.iy[i];
      }
    }
    float du = static_cast<float>((gyy * bx - gxy * by) * inv_det);
    float dv = static_cast<float>((gxx * by - gxy * bx) * inv_det);
    if (du > max_step) du = max_step;
    if (du < -max_step) du = -max_step;
    if (dv > max_step) dv = max_step;
    if (dv < -max_step) dv = -max_step;
    *u += du;
    *v += dv;
    if (du * du + dv * dv < 1e-4f) break;
  }
  return true;
}

}  // namespace flowdetail

// Dense coarse-to-fine flow from frame a to frame b. Deterministic; flow
// vectors are clamped so every target position stays inside the frame.
inline FlowField estimate_flow(const Frame& a, const Frame& b, const FlowParams& params = {}) {
  params.validate();
  a.validate();
  b.validate();
  if (a.width != b.width || a.height != b.height) {
    throw DimensionMismatch("estimate_flow: frame dimensions differ");
  }
  if (a.width < kMinFlowFrameSize || a.height < kMinFlowFrameSize) {
    throw FrameTooSmall("estimate_flow: frames must be at least 16x16");
  }

  flowdetail::Pyramid pa = flowdetail::build_pyramid(a, params.levels);
  flowdetail::Pyramid pb = flowdetail::build_pyramid(b, params.levels);
  int top = static_cast<int>(pa.levels.size()) - 1;

  std::vector<float> ucur, vcur, uprev, vprev;
  for (int l = top; l >= 0; --l) {
    const flowdetail::PyramidLevel& la = pa.levels[l];
    const flowdetail::PyramidLevel& lb = pb.levels[l];
    size_t n = static_cast<size_t>(la.width) * la.height;
    ucur.assign(n, 0.0f);
    vcur.assign(n, 0.0f);
    if (l != top) {
      const flowdetail::PyramidLevel& coarse = pa.levels[l + 1];
      for (int y = 0; y < la.height; ++y) {
        for (int x = 0; x < la.width; ++x) {
          float sx = (static_cast<float>(x) + 0.5f) * 0.5f - 0.5f;
          float sy = (static_cast<float>(y) + 0.5f) * 0.5f - 0.5f;
          ucur[static_cast<size_t>(y) * la.width + x] =
              2.0f * flowdetail::bilinear(uprev, coarse.width, coarse.height, sx, sy);
          vcur[static_cast<size_t>(y) * la.width + x] =
              2.0f * flowdetail::bilinear(vprev, coarse.width, coarse.height, sx, sy);
        }
      }
    }
    for (int y = 0; y < la.height; ++y) {
      for (int x = 0; x < la.width; ++x) {
        size_t i = static_cast<size_t>(y) * la.width + x;
        float u = ucur[i], v = vcur[i];
        if (flowdetail::refine_at(la, lb, x, y, params.window_radius, params.iterations, &u,
                                  &v)) {
          ucur[i] = u;
          vcur[i] = v;
        }
      }
    }
    uprev.swap(ucur);
    vprev.swap(vcur);
  }

  FlowField flow(a.width, a.height);
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      size_t i = static_cast<size_t>(y) * a.width + x;
      float u = uprev[i], v = vprev[i];
      // Clamp so x + u stays inside the frame.
      float lo_u = -static_cast<float>(x), hi_u = static_cast<float>(a.width - 1 - x);
      float lo_v = -static_cast<float>(y), hi_v = static_cast<float>(a.height - 1 - y);
      flow.dx(x, y) = u < lo_u ? lo_u : (u > hi_u ? hi_u : u);
      flow.dy(x, y) = v < lo_v ? lo_v : (v > hi_v ? hi_v : v);
    }
  }
  return flow;
}

struct TrackedPoint {
  float x = 0.0f;
  float y = 0.0f;
  bool ok = false;
};

// Sparse pyramidal LK at the given integer source points; used for corner
// correspondences when fitting a homography without a dense field.
inline std::vector<TrackedPoint> track_points(const Frame& a, const Frame& b,
                                              const std::vector<std::pair<int, int>>& points,
                                              const FlowParams& params = {}) {
  params.validate();
  if (a.width != b.width || a.height != b.height) {
    throw DimensionMismatch("track_points: frame dimensions differ");
  }
  flowdetail::Pyramid pa = flowdetail::build_pyramid(a, params.levels);
  flowdetail::Pyramid pb = flowdetail::build_pyramid(b, params.levels);
  int top = static_cast<int>(pa.levels.size()) - 1;

  std::vector<TrackedPoint> out(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    float u = 0.0f, v = 0.0f;
    bool ok = false;
    for (int l = top; l >= 0; --l) {
      u *= (l == top) ? 1.0f : 2.0f;
      v *= (l == top) ? 1.0f : 2.0f;
      const auto& la = pa.levels[l];
      int cx = points[i].first >> l;
      int cy = points[i].second >> l;
      if (cx >= la.width) cx = la.width - 1;
      if (cy >= la.height) cy = la.height - 1;
      bool solved = flowdetail::refine_at(la, pb.levels[l], cx, cy, params.window_radius,
                                          params.iterations, &u, &v);
      if (l == 0) ok = solved;  // coarse-level failures only cost the prior
    }
    float tx = static_cast<float>(points[i].first) + u;
    float ty = static_cast<float>(points[i].second) + v;
    ok = ok && tx >= 0.0f && ty >= 0.0f && tx <= static_cast<float>(a.width - 1) &&
         ty <= static_cast<float>(a.height - 1);
    out[i] = {tx, ty, ok};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Precomputed-flow file format: magic "FLO1", u32 width, u32 height, then
// height*width little-endian float32 (dx, dy) pairs.
// ---------------------------------------------------------------------------

inline void write_flo(const std::string& path, const FlowField& flow) {
  static_assert(sizeof(float) == 4);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write("FLO1", 4);
  std::uint32_t w = static_cast<std::uint32_t>(flow.width);
  std::uint32_t h = static_cast<std::uint32_t>(flow.height);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  out.write(reinterpret_cast<const char*>(flow.data.data()),
            static_cast<std::streamsize>(flow.data.size() * sizeof(float)));
}

inline FlowField read_flo(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "FLO1", 4) != 0) {
    throw UnsupportedFormat("'" + path + "' is not a FLO1 file");
  }
  std::uint32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16) {
    throw UnsupportedFormat("bad FLO1 header in '" + path + "'");
  }
  FlowField flow(static_cast<int>(w), static_cast<int>(h));
  in.read(reinterpret_cast<char*>(flow.data.data()),
          static_cast<std::streamsize>(flow.data.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(flow.data.size() * sizeof(float))) {
    throw IoError("truncated FLO1 file '" + path + "'");
  }
  flow.validate();
  return flow;
}

}  // namespace vge
