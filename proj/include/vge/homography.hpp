#pragma once

// Global camera-motion estimation: corner detection, RANSAC homography
// fitting over tracked corners, and the induced per-pixel flow used to
// remove camera motion from a dense field.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vge/errors.hpp"
#include "vge/flow.hpp"
#include "vge/frame.hpp"

namespace vge {

struct HomographyParams {
  int min_corners = 50;
  int max_corners = 400;
  int nms_radius = 8;
  double corner_quality = 0.01;     // keep responses above quality * max response
  int ransac_iterations = 1000;
  double inlier_threshold = 2.0;    // px forward reprojection
  double min_inlier_ratio = 0.4;
  std::uint64_t seed = 0;
  FlowParams flow;
};

// 3x3 projective transform normalized to h[2][2] = 1.
struct Homography {
  std::array<std::array<double, 3>, 3> h = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  double inlier_ratio = 1.0;

  // Maps (x, y); throws when the point lands on the plane at infinity.
  std::pair<double, double> apply(double x, double y) const {
    double w = h[2][0] * x + h[2][1] * y + h[2][2];
    if (std::fabs(w) < 1e-9) throw PointAtInfinity("homography maps point to infinity");
    return {(h[0][0] * x + h[0][1] * y + h[0][2]) / w,
            (h[1][0] * x + h[1][1] * y + h[1][2]) / w};
  }

  double determinant() const {
    return h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) -
           h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0]) +
           h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
  }

  void validate() const {
    if (std::fabs(determinant()) <= 1e-9) {
      throw DegenerateConfiguration("homography is not invertible");
    }
    if (inlier_ratio < 0.0 || inlier_ratio > 1.0) {
      throw Error("inlier_ratio out of [0,1]");
    }
  }
};

namespace homodetail {

struct Correspondence {
  double x0, y0, x1, y1;
};

// Top-K maxima of the windowed gradient-tensor minimum eigenvalue, with
// non-max suppression. Deterministic: ties broken by scanline order.
inline std::vector<std::pair<int, int>> detect_corners(const Frame& frame,
                                                       const HomographyParams& params) {
  flowdetail::PyramidLevel level;
  level.width = frame.width;
  level.height = frame.height;
  level.gray = to_gray(frame);
  level.build_derived();

  const int r = 3;                              // corner window radius
  const int margin = params.flow.window_radius + 1;
  std::vector<std::pair<double, std::pair<int, int>>> candidates;
  double max_response = 0.0;
  std::vector<double> response(static_cast<size_t>(frame.width) * frame.height, 0.0);
  for (int y = margin; y < frame.height - margin; ++y) {
    for (int x = margin; x < frame.width - margin; ++x) {
      double gxx, gxy, gyy;
      level.tensor(x - r, y - r, x + r, y + r, &gxx, &gxy, &gyy);
      double trace = gxx + gyy;
      double det = gxx * gyy - gxy * gxy;
      double min_eig = 0.5 * (trace - std::sqrt(std::max(trace * trace - 4.0 * det, 0.0)));
      response[static_cast<size_t>(y) * frame.width + x] = min_eig;
      if (min_eig > max_response) max_response = min_eig;
    }
  }
  if (max_response <= 1e-9) return {};

  double floor_response = params.corner_quality * max_response;
  for (int y = margin; y < frame.height - margin; ++y) {
    for (int x = margin; x < frame.width - margin; ++x) {
      double resp = response[static_cast<size_t>(y) * frame.width + x];
      if (resp < floor_response) continue;
      // local 3x3 maximum to thin the candidate set before NMS
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          if (response[static_cast<size_t>(y + dy) * frame.width + (x + dx)] > resp) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) candidates.push_back({resp, {x, y}});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    if (a.second.second != b.second.second) return a.second.second < b.second.second;
    return a.second.first < b.second.first;
  });

  std::vector<std::pair<int, int>> corners;
  const int nms = params.nms_radius;
  for (const auto& [resp, pt] : candidates) {
    (void)resp;
    bool suppressed = false;
    for (const auto& kept : corners) {
      int dx = kept.first - pt.first, dy = kept.second - pt.second;
      if (dx * dx + dy * dy < nms * nms) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      corners.push_back(pt);
      if (static_cast<int>(corners.size()) >= params.max_corners) break;
    }
  }
  return corners;
}

inline Eigen::Matrix3d dlt(const std::vector<Correspondence>& pts) {
  // Hartley normalization on both point sets.
  double cx0 = 0, cy0 = 0, cx1 = 0, cy1 = 0;
  for (const auto& p : pts) {
    cx0 += p.x0;
    cy0 += p.y0;
    cx1 += p.x1;
    cy1 += p.y1;
  }
  double n = static_cast<double>(pts.size());
  cx0 /= n;
  cy0 /= n;
  cx1 /= n;
  cy1 /= n;
  double d0 = 0, d1 = 0;
  for (const auto& p : pts) {
    d0 += std::hypot(p.x0 - cx0, p.y0 - cy0);
    d1 += std::hypot(p.x1 - cx1, p.y1 - cy1);
  }
  d0 /= n;
  d1 /= n;
  double s0 = d0 > 1e-12 ? std::sqrt(2.0) / d0 : 1.0;
  double s1 = d1 > 1e-12 ? std::sqrt(2.0) / d1 : 1.0;

  Eigen::MatrixXd a(2 * pts.size(), 9);
  for (size_t i = 0; i < pts.size(); ++i) {
    double x = (pts[i].x0 - cx0) * s0, y = (pts[i].y0 - cy0) * s0;
    double xp = (pts[i].x1 - cx1) * s1, yp = (pts[i].y1 - cy1) * s1;
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, x * xp, y * xp, xp;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, x * yp, y * yp, yp;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  Eigen::VectorXd hvec = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << hvec(0), hvec(1), hvec(2), hvec(3), hvec(4), hvec(5), hvec(6), hvec(7), hvec(8);

  Eigen::Matrix3d t0, t1;
  t0 << s0, 0, -s0 * cx0, 0, s0, -s0 * cy0, 0, 0, 1;
  t1 << s1, 0, -s1 * cx1, 0, s1, -s1 * cy1, 0, 0, 1;
  return t1.inverse() * hn * t0;
}

inline double reprojection_error(const Eigen::Matrix3d& h, const Correspondence& p) {
  double w = h(2, 0) * p.x0 + h(2, 1) * p.y0 + h(2, 2);
  if (std::fabs(w) < 1e-12) return 1e30;
  double x = (h(0, 0) * p.x0 + h(0, 1) * p.y0 + h(0, 2)) / w;
  double y = (h(1, 0) * p.x0 + h(1, 1) * p.y0 + h(1, 2)) / w;
  return std::hypot(x - p.x1, y - p.y1);
}

inline bool sample_degenerate(const std::vector<Correspondence>& pts,
                              const std::array<int, 4>& idx) {
  // Reject samples with any three (near-)collinear source points.
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      for (int c = b + 1; c < 4; ++c) {
        double area = (pts[idx[b]].x0 - pts[idx[a]].x0) * (pts[idx[c]].y0 - pts[idx[a]].y0) -
                      (pts[idx[c]].x0 - pts[idx[a]].x0) * (pts[idx[b]].y0 - pts[idx[a]].y0);
        if (std::fabs(area) < 1.0) return true;
      }
    }
  }
  return false;
}

inline Homography fit_ransac(const std::vector<Correspondence>& corr,
                             const HomographyParams& params) {
  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<size_t> pick(0, corr.size() - 1);

  int best_inliers = -1;
  Eigen::Matrix3d best_h = Eigen::Matrix3d::Identity();
  int iterations = params.ransac_iterations;
  for (int it = 0; it < iterations; ++it) {
    std::array<int, 4> idx{};
    for (int k = 0; k < 4; ++k) {
      bool fresh;
      do {
        idx[k] = static_cast<int>(pick(rng));
        fresh = true;
        for (int j = 0; j < k; ++j) fresh = fresh && idx[j] != idx[k];
      } while (!fresh);
    }
    if (sample_degenerate(corr, idx)) continue;
    std::vector<Correspondence> sample = {corr[idx[0]], corr[idx[1]], corr[idx[2]],
                                          corr[idx[3]]};
    Eigen::Matrix3d h = dlt(sample);
    if (std::fabs(h(2, 2)) < 1e-12) continue;
    int inliers = 0;
    for (const auto& p : corr) {
      if (reprojection_error(h, p) < params.inlier_threshold) ++inliers;
    }
    if (inliers > best_inliers) {
      best_inliers = inliers;
      best_h = h;
      // Standard adaptive stopping rule at 99% confidence.
      double w = static_cast<double>(inliers) / static_cast<double>(corr.size());
      double p_all = w * w * w * w;
      if (p_all >= 1.0) {
        iterations = it + 1;
      } else if (p_all > 1e-9) {
        int needed = static_cast<int>(std::ceil(std::log(0.01) / std::log(1.0 - p_all)));
        iterations = std::min(iterations, std::max(needed, it + 1));
      }
    }
  }
  if (best_inliers < 4) {
    throw DegenerateConfiguration("ransac found no valid homography sample");
  }

  // Least-squares refinement on the consensus set.
  std::vector<Correspondence> inlier_set;
  for (const auto& p : corr) {
    if (reprojection_error(best_h, p) < params.inlier_threshold) inlier_set.push_back(p);
  }
  Eigen::Matrix3d refined = inlier_set.size() >= 4 ? dlt(inlier_set) : best_h;
  if (std::fabs(refined(2, 2)) < 1e-12) refined = best_h;

  int final_inliers = 0;
  for (const auto& p : corr) {
    if (reprojection_error(refined, p) < params.inlier_threshold) ++final_inliers;
  }
  if (final_inliers * 2 < best_inliers) {  // refinement went sideways; keep consensus fit
    refined = best_h;
    final_inliers = best_inliers;
  }

  double ratio = static_cast<double>(final_inliers) / static_cast<double>(corr.size());
  if (ratio < params.min_inlier_ratio) {
    throw DegenerateConfiguration("inlier ratio below minimum");
  }

  Homography out;
  double scale = refined(2, 2);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.h[r][c] = refined(r, c) / scale;
  }
  out.inlier_ratio = ratio;
  out.validate();
  return out;
}

}  // namespace homodetail

// Estimates the global camera motion between two frames: corners from the
// gradient tensor, correspondences from local pyramidal LK at those corners,
// RANSAC with least-squares refinement on the inliers.
inline Homography estimate_homography(const Frame& a, const Frame& b,
                                      const HomographyParams& params = {}) {
  if (a.width != b.width || a.height != b.height) {
    throw DimensionMismatch("estimate_homography: frame dimensions differ");
  }
  std::vector<std::pair<int, int>> corners = homodetail::detect_corners(a, params);
  if (static_cast<int>(corners.size()) < params.min_corners) {
    throw InsufficientCorners("found " + std::to_string(corners.size()) + " corners, need " +
                              std::to_string(params.min_corners));
  }
  std::vector<TrackedPoint> tracked = track_points(a, b, corners, params.flow);
  std::vector<homodetail::Correspondence> corr;
  corr.reserve(corners.size());
  for (size_t i = 0; i < corners.size(); ++i) {
    if (!tracked[i].ok) continue;
    corr.push_back({static_cast<double>(corners[i].first),
                    static_cast<double>(corners[i].second), tracked[i].x, tracked[i].y});
  }
  if (static_cast<int>(corr.size()) < params.min_corners) {
    throw InsufficientCorners("only " + std::to_string(corr.size()) +
                              " corners tracked, need " + std::to_string(params.min_corners));
  }
  return homodetail::fit_ransac(corr, params);
}

// Per-pixel H(x) - x; the flow a camera motion H would induce on its own.
inline FlowField homography_induced_flow(const Homography& h, int width, int height) {
  h.validate();
  FlowField flow(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      auto [tx, ty] = h.apply(static_cast<double>(x), static_cast<double>(y));
      flow.dx(x, y) = static_cast<float>(tx - x);
      flow.dy(x, y) = static_cast<float>(ty - y);
    }
  }
  return flow;
}

// Residual motion once the camera's share is removed.
inline FlowField subtract_global_motion(const FlowField& flow, const FlowField& induced) {
  if (flow.width != induced.width || flow.height != induced.height) {
    throw DimensionMismatch("subtract_global_motion: field dimensions differ");
  }
  FlowField out(flow.width, flow.height);
  for (size_t i = 0; i < flow.data.size(); ++i) out.data[i] = flow.data[i] - induced.data[i];
  return out;
}

}  // namespace vge
