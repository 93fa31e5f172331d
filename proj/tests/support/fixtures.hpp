#pragma once

// Synthetic fixtures shared by the unit tests and the acceptance gate:
// analytic textures (defined on all of R^2, so warped videos obey their
// homography exactly, with no border clamping), flicker/cut/pan videos, and
// a naive re-implementation of the patch scoring pipeline used as an oracle.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "vge/flow.hpp"
#include "vge/frame.hpp"
#include "vge/homography.hpp"
#include "vge/temporal.hpp"

namespace fixtures {

// Smooth quasi-random texture: sums of incommensurate sinusoids. Seed picks
// the phase set. Range roughly [40, 215].
struct Texture {
  double p1, p2, p3, p4;

  explicit Texture(unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 6.28318530717958647692);
    p1 = phase(rng);
    p2 = phase(rng);
    p3 = phase(rng);
    p4 = phase(rng);
  }

  double operator()(double x, double y) const {
    return 127.5 + 35.0 * std::sin(x * 0.37 + p1) * std::cos(y * 0.23 + p2) +
           25.0 * std::sin((x + y) * 0.17 + p3) + 22.0 * std::cos((x - 2.0 * y) * 0.11 + p4);
  }
};

inline std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0) + 0.5);
}

// Gray frame sampling tex at map(x, y) for every pixel.
template <typename MapFn>
vge::Frame render_frame(int width, int height, const Texture& tex, MapFn map) {
  vge::Frame frame(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      auto [sx, sy] = map(static_cast<double>(x), static_cast<double>(y));
      std::uint8_t v = quantize(tex(sx, sy));
      std::uint8_t* p = frame.pixel(x, y);
      p[0] = p[1] = p[2] = v;
    }
  }
  return frame;
}

inline vge::Frame static_frame(int width, int height, const Texture& tex) {
  return render_frame(width, height, tex,
                      [](double x, double y) { return std::make_pair(x, y); });
}

inline std::vector<vge::Frame> static_video(int width, int height, int count, unsigned seed) {
  Texture tex(seed);
  std::vector<vge::Frame> frames(count, static_frame(width, height, tex));
  for (int i = 0; i < count; ++i) frames[i].index = i;
  return frames;
}

// --- homographies ------------------------------------------------------------

inline Eigen::Matrix3d to_eigen(const vge::Homography& h) {
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = h.h[r][c];
  }
  return m;
}

inline vge::Homography from_eigen(const Eigen::Matrix3d& m) {
  vge::Homography h;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) h.h[r][c] = m(r, c) / m(2, 2);
  }
  return h;
}

// Camera pan: rotation about the vertical axis behind a pinhole centered on
// the frame, K R_y(theta) K^-1. Small theta shifts content by ~focal*theta
// pixels with mild projective variation.
inline Eigen::Matrix3d pan_homography(double theta, int width, int height) {
  double f = width;  // focal length in pixels
  Eigen::Matrix3d k;
  k << f, 0, width / 2.0, 0, f, height / 2.0, 0, 0, 1;
  Eigen::Matrix3d r;
  double c = std::cos(theta), s = std::sin(theta);
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return k * r * k.inverse();
}

// Frames t rendered as tex(H_t^-1 x): the motion between consecutive frames
// is exactly the homography H_{t+1} H_t^-1.
inline std::vector<vge::Frame> warped_video(int width, int height, unsigned seed,
                                            const std::vector<Eigen::Matrix3d>& hs) {
  Texture tex(seed);
  std::vector<vge::Frame> frames;
  for (size_t t = 0; t < hs.size(); ++t) {
    Eigen::Matrix3d inv = hs[t].inverse();
    frames.push_back(render_frame(width, height, tex, [&inv](double x, double y) {
      Eigen::Vector3d p = inv * Eigen::Vector3d(x, y, 1.0);
      return std::make_pair(p.x() / p.z(), p.y() / p.z());
    }));
    frames.back().index = static_cast<int>(t);
  }
  return frames;
}

// Pure pan with ramped speed: per-pair pixel shift grows from base_speed by
// accel each pair, so magnitude differences never cancel.
inline std::vector<vge::Frame> pan_video(int width, int height, int count, unsigned seed,
                                         double base_speed = 0.8, double accel = 0.08) {
  std::vector<Eigen::Matrix3d> hs;
  double theta = 0.0;
  double f = width;
  for (int t = 0; t < count; ++t) {
    hs.push_back(pan_homography(theta, width, height));
    theta += (base_speed + accel * t) / f;
  }
  return warped_video(width, height, seed, hs);
}

// Static textured video with one cell's content shifted by `shift` pixels
// for exactly one frame, then restored: a localized temporal flicker.
inline std::vector<vge::Frame> flicker_video(int width, int height, int count, unsigned seed,
                                             int cell_x0, int cell_y0, int cell_x1,
                                             int cell_y1, int flicker_frame,
                                             double shift = 3.0) {
  Texture tex(seed);
  std::vector<vge::Frame> frames;
  vge::Frame base = static_frame(width, height, tex);
  for (int t = 0; t < count; ++t) {
    vge::Frame frame = base;
    frame.index = t;
    if (t == flicker_frame) {
      for (int y = cell_y0; y < cell_y1; ++y) {
        for (int x = cell_x0; x < cell_x1; ++x) {
          std::uint8_t v = quantize(tex(x - shift, y));
          std::uint8_t* p = frame.pixel(x, y);
          p[0] = p[1] = p[2] = v;
        }
      }
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

// Hard cut: reddish texture then bluish texture, static within segments.
inline std::vector<vge::Frame> cut_video(int width, int height, int count, int cut_index,
                                         unsigned seed) {
  Texture tex_a(seed), tex_b(seed + 1);
  std::vector<vge::Frame> frames;
  for (int t = 0; t < count; ++t) {
    vge::Frame frame(width, height);
    frame.index = t;
    const Texture& tex = t < cut_index ? tex_a : tex_b;
    bool red = t < cut_index;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        std::uint8_t v = quantize(tex(x, y));
        std::uint8_t lo = static_cast<std::uint8_t>(30 + v / 8);
        std::uint8_t* p = frame.pixel(x, y);
        p[0] = red ? v : lo;
        p[1] = lo;
        p[2] = red ? lo : v;
      }
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

// Flat gray video whose brightness ramps linearly: no shot boundary, only a
// smooth V-channel drift.
inline std::vector<vge::Frame> brightness_ramp_video(int width, int height, int count,
                                                     int step = 2) {
  std::vector<vge::Frame> frames;
  for (int t = 0; t < count; ++t) {
    frames.emplace_back(width, height, static_cast<std::uint8_t>(40 + step * t));
    frames.back().index = t;
  }
  return frames;
}

// --- synthetic flow fields ----------------------------------------------------

inline vge::FlowField random_flow(int width, int height, std::mt19937& rng,
                                  double amplitude = 3.0) {
  std::uniform_real_distribution<float> dist(static_cast<float>(-amplitude),
                                             static_cast<float>(amplitude));
  vge::FlowField field;
  field.width = width;
  field.height = height;
  field.data.resize(static_cast<size_t>(width) * height * 2);
  for (float& v : field.data) v = dist(rng);
  return field;
}

inline std::vector<vge::FlowField> random_flow_sequence(int width, int height, int count,
                                                        unsigned seed,
                                                        double amplitude = 3.0) {
  std::mt19937 rng(seed);
  std::vector<vge::FlowField> flows;
  for (int t = 0; t < count; ++t) flows.push_back(random_flow(width, height, rng, amplitude));
  return flows;
}

// --- naive Eq. 1-5 oracle -----------------------------------------------------
//
// Direct implementation of the patch scoring pipeline: no per-pair field
// reuse, every (window, patch) recomputed from the raw flow values. Pixel
// arithmetic uses the same float formulas as production; aggregation is
// double. Must match patch_window_scores / aggregate_patch_scores to 1e-9.

struct NaiveResult {
  int windows = 0;
  int patches = 0;
  std::vector<double> f;
  std::vector<double> s;
  double gamma = 0.0;
  int m_count = 0;
  double o = 0.0;
};

inline float naive_mag_diff(const vge::FlowField& f_t, const vge::FlowField& f_t1, size_t p) {
  float ax = f_t.data[2 * p], ay = f_t.data[2 * p + 1];
  float bx = f_t1.data[2 * p], by = f_t1.data[2 * p + 1];
  return std::fabs(std::sqrt(bx * bx + by * by) - std::sqrt(ax * ax + ay * ay));
}

inline float naive_w(const vge::FlowField& f_t, const vge::FlowField& f_t1, size_t p,
                     double eps) {
  float ax = f_t.data[2 * p], ay = f_t.data[2 * p + 1];
  float bx = f_t1.data[2 * p], by = f_t1.data[2 * p + 1];
  double na = std::sqrt(static_cast<double>(ax) * ax + static_cast<double>(ay) * ay);
  double nb = std::sqrt(static_cast<double>(bx) * bx + static_cast<double>(by) * by);
  if (na < eps || nb < eps) return 1.0f;
  double cosv = (static_cast<double>(ax) * bx + static_cast<double>(ay) * by) / (na * nb);
  return static_cast<float>(std::clamp(cosv, -1.0, 1.0));
}

inline NaiveResult naive_pipeline(const std::vector<vge::FlowField>& flows,
                                  const vge::PatchGridConfig& cfg) {
  const int width = flows[0].width, height = flows[0].height;
  vge::PatchGrid grid = vge::PatchGrid::build(width, height, cfg.patch_size);
  const int patches = grid.count();
  const int windows = (static_cast<int>(flows.size()) - cfg.window_len) / cfg.window_stride + 1;
  const int pairs = cfg.window_len - 1;

  int mx = std::min(cfg.border_margin, std::max(0, (width - 2) / 2));
  int my = std::min(cfg.border_margin, std::max(0, (height - 2) / 2));
  int vx0 = mx, vy0 = my, vx1 = width - mx, vy1 = height - my;

  std::vector<double> u(static_cast<size_t>(windows) * patches, 0.0);
  std::vector<double> v(static_cast<size_t>(windows) * patches, 0.0);
  for (int j = 0; j < windows; ++j) {
    int first = j * cfg.window_stride;
    for (int i = 0; i < patches; ++i) {
      int x0, y0, x1, y1;
      grid.cell_rect(i, &x0, &y0, &x1, &y1);
      int cx0 = std::max(x0, vx0), cx1 = std::min(x1, vx1);
      int cy0 = std::max(y0, vy0), cy1 = std::min(y1, vy1);
      if (cx0 >= cx1 || cy0 >= cy1) continue;
      double npix = static_cast<double>(cx1 - cx0) * (cy1 - cy0);

      double u_acc = 0.0;
      for (int t = first; t < first + pairs; ++t) {
        double patch_sum = 0.0;
        for (int y = cy0; y < cy1; ++y) {
          for (int x = cx0; x < cx1; ++x) {
            patch_sum += naive_mag_diff(flows[t], flows[t + 1],
                                        static_cast<size_t>(y) * width + x);
          }
        }
        u_acc += patch_sum / npix;
      }
      u[static_cast<size_t>(j) * patches + i] = u_acc / pairs;

      double v_sum = 0.0;
      for (int y = cy0; y < cy1; ++y) {
        for (int x = cx0; x < cx1; ++x) {
          size_t p = static_cast<size_t>(y) * width + x;
          double mean = 0.0;
          for (int t = first; t < first + pairs; ++t) {
            mean += naive_w(flows[t], flows[t + 1], p, cfg.flow_epsilon);
          }
          mean /= pairs;
          double var = 0.0;
          for (int t = first; t < first + pairs; ++t) {
            double d = naive_w(flows[t], flows[t + 1], p, cfg.flow_epsilon) - mean;
            var += d * d;
          }
          v_sum += static_cast<double>(static_cast<float>(var / pairs));
        }
      }
      v[static_cast<size_t>(j) * patches + i] = v_sum / npix;
    }
  }

  auto normalize = [](const std::vector<double>& vals) {
    double lo = vals[0], hi = vals[0];
    for (double x : vals) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    std::vector<double> out(vals.size(), 0.0);
    if (hi > lo) {
      for (size_t k = 0; k < vals.size(); ++k) out[k] = (vals[k] - lo) / (hi - lo);
    }
    return out;
  };
  std::vector<double> un = normalize(u), vn = normalize(v);

  NaiveResult result;
  result.windows = windows;
  result.patches = patches;
  result.f.resize(un.size());
  for (size_t k = 0; k < un.size(); ++k) result.f[k] = cfg.alpha * un[k] + cfg.beta * vn[k];

  result.s.assign(patches, 0.0);
  for (int i = 0; i < patches; ++i) {
    double best = result.f[i];
    for (int j = 1; j < windows; ++j) {
      best = std::max(best, result.f[static_cast<size_t>(j) * patches + i]);
    }
    result.s[i] = best;
  }
  std::vector<double> sorted = result.s;
  std::sort(sorted.begin(), sorted.end());
  result.gamma = sorted[(patches - 1) / 2];
  double gamma_eff = std::max(result.gamma, 1e-6);
  double acc = 0.0;
  for (double si : result.s) {
    if (si > result.gamma) {
      ++result.m_count;
      acc += (si - gamma_eff) / gamma_eff;
    }
  }
  result.o = result.m_count == 0 ? 0.0 : std::min(acc / result.m_count, 10.0);
  return result;
}

}  // namespace fixtures
