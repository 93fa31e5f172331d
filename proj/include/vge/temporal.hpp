#pragma once

// Temporal patch tools. A video is split into shot segments, per-segment
// dense flow is (optionally) camera-compensated, and spatio-temporal patch
// statistics are folded into a single anomaly score: each patch's worst
// windowed variation is compared against the median patch, so localized
// flicker stands out while globally uniform motion cancels.
//
// Also here: dynamic degree (mean flow magnitude) and subject consistency
// (embedding similarity), each emitting a banded ToolReport.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "vge/errors.hpp"
#include "vge/flow.hpp"
#include "vge/frame.hpp"
#include "vge/homography.hpp"
#include "vge/schema.hpp"

namespace vge {

// Relative excess over the median saturates here when the median is ~zero.
inline constexpr double kAnomalyCap = 10.0;
inline constexpr double kGammaFloor = 1e-6;

struct PatchGridConfig {
  int patch_size = 32;       // px, square
  int window_len = 8;        // flow fields per sliding window
  int window_stride = 4;     // frames between window starts
  double alpha = 0.5;        // weight of the magnitude-difference term
  double beta = 0.5;         // weight of the direction-variance term
  double flow_epsilon = 0.05;  // px; below this a vector counts as static
  int border_margin = 8;     // px excluded from patch statistics (flow is
                             // unreliable where content enters/leaves)
  // Noise gate applied before scoring: vectors shorter than this are zeroed.
  // Set to the estimator's noise floor (residuals after camera compensation
  // stay under ~0.15 px on textured content), so pure measurement noise can
  // never be stretched into an anomaly by the min-max normalization.
  double static_clamp = 0.2;

  void validate() const {
    if (patch_size < 8) throw Error("patch_size must be >= 8");
    if (window_len < 2) throw Error("window_len must be >= 2");
    if (window_stride < 1 || window_stride > window_len) {
      throw Error("window_stride must be in [1, window_len]");
    }
    if (alpha < 0.0 || beta < 0.0 || alpha + beta <= 0.0) {
      throw Error("alpha, beta must be >= 0 with alpha + beta > 0");
    }
    if (flow_epsilon < 0.0) throw Error("flow_epsilon must be >= 0");
    if (border_margin < 0) throw Error("border_margin must be >= 0");
    if (static_clamp < 0.0) throw Error("static_clamp must be >= 0");
  }
};

// Spatial patch layout. Trailing partial patches keep their own cell when at
// least half a patch remains, otherwise they fold into the neighbor.
struct PatchGrid {
  std::vector<int> x_bounds;  // cols + 1 entries
  std::vector<int> y_bounds;  // rows + 1 entries

  int cols() const { return static_cast<int>(x_bounds.size()) - 1; }
  int rows() const { return static_cast<int>(y_bounds.size()) - 1; }
  int count() const { return cols() * rows(); }

  // Cell i covers [x0, x1) x [y0, y1), row-major.
  void cell_rect(int i, int* x0, int* y0, int* x1, int* y1) const {
    int c = i % cols(), r = i / cols();
    *x0 = x_bounds[c];
    *x1 = x_bounds[c + 1];
    *y0 = y_bounds[r];
    *y1 = y_bounds[r + 1];
  }

  int cell_at(int x, int y) const {
    int c = cols() - 1, r = rows() - 1;
    for (int k = 0; k < cols(); ++k) {
      if (x < x_bounds[k + 1]) {
        c = k;
        break;
      }
    }
    for (int k = 0; k < rows(); ++k) {
      if (y < y_bounds[k + 1]) {
        r = k;
        break;
      }
    }
    return r * cols() + c;
  }

  static std::vector<int> axis_bounds(int extent, int patch) {
    int full = extent / patch;
    if (full == 0) throw EmptyGrid("frame extent smaller than one patch");
    std::vector<int> bounds;
    for (int k = 0; k <= full; ++k) bounds.push_back(k * patch);
    int rem = extent - full * patch;
    if (rem * 2 >= patch) {
      bounds.push_back(extent);  // own partial patch
    } else {
      bounds.back() = extent;  // merge remainder into the last patch
    }
    return bounds;
  }

  static PatchGrid build(int width, int height, int patch_size) {
    PatchGrid grid;
    grid.x_bounds = axis_bounds(width, patch_size);
    grid.y_bounds = axis_bounds(height, patch_size);
    return grid;
  }
};

// Half-open [start, end) frame range of one shot segment.
struct EventSegment {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  bool operator==(const EventSegment&) const = default;
};

// ---------------------------------------------------------------------------
// Elementwise fields
// ---------------------------------------------------------------------------

inline std::vector<double> min_max_normalize(const std::vector<double>& values) {
  if (values.empty()) throw EmptyInput("min_max_normalize: empty input");
  double lo = values[0], hi = values[0];
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteInput("min_max_normalize: non-finite input");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<double> out(values.size(), 0.0);
  if (hi > lo) {
    double inv = 1.0 / (hi - lo);
    for (size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) * inv;
  }
  return out;
}

// Per-pixel |  ||F_{t+1}|| - ||F_t||  |. The absolute value makes slowdowns
// count as much as speedups.
inline std::vector<float> magnitude_diff_field(const FlowField& f_t, const FlowField& f_t1) {
  if (f_t.width != f_t1.width || f_t.height != f_t1.height) {
    throw DimensionMismatch("magnitude_diff_field: field dimensions differ");
  }
  std::vector<float> out(f_t.pixel_count());
  for (size_t i = 0; i < out.size(); ++i) {
    float ax = f_t.data[2 * i], ay = f_t.data[2 * i + 1];
    float bx = f_t1.data[2 * i], by = f_t1.data[2 * i + 1];
    out[i] = std::fabs(std::sqrt(bx * bx + by * by) - std::sqrt(ax * ax + ay * ay));
  }
  return out;
}

// Per-pixel cosine similarity of adjacent flow vectors in [-1, 1]. Motion
// below eps is treated as static and scores 1 (static is consistent).
inline std::vector<float> direction_consistency_field(const FlowField& f_t,
                                                      const FlowField& f_t1,
                                                      double eps = 0.05) {
  if (f_t.width != f_t1.width || f_t.height != f_t1.height) {
    throw DimensionMismatch("direction_consistency_field: field dimensions differ");
  }
  std::vector<float> out(f_t.pixel_count());
  for (size_t i = 0; i < out.size(); ++i) {
    float ax = f_t.data[2 * i], ay = f_t.data[2 * i + 1];
    float bx = f_t1.data[2 * i], by = f_t1.data[2 * i + 1];
    double na = std::sqrt(static_cast<double>(ax) * ax + static_cast<double>(ay) * ay);
    double nb = std::sqrt(static_cast<double>(bx) * bx + static_cast<double>(by) * by);
    if (na < eps || nb < eps) {
      out[i] = 1.0f;
      continue;
    }
    double cosv = (static_cast<double>(ax) * bx + static_cast<double>(ay) * by) / (na * nb);
    out[i] = static_cast<float>(std::clamp(cosv, -1.0, 1.0));
  }
  return out;
}

// Per-pixel population variance of the direction-consistency series across
// the given flow fields (consecutive pairs).
inline std::vector<float> direction_variance_field(const std::vector<FlowField>& flows,
                                                   double eps = 0.05) {
  if (flows.size() < 3) {
    throw TooFewFrames("direction_variance_field needs at least 3 flow fields");
  }
  size_t n = flows[0].pixel_count();
  size_t samples = flows.size() - 1;
  std::vector<std::vector<float>> w(samples);
  for (size_t t = 0; t + 1 < flows.size(); ++t) {
    w[t] = direction_consistency_field(flows[t], flows[t + 1], eps);
  }
  std::vector<float> out(n);
  for (size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (size_t t = 0; t < samples; ++t) mean += w[t][i];
    mean /= static_cast<double>(samples);
    double var = 0.0;
    for (size_t t = 0; t < samples; ++t) {
      double d = w[t][i] - mean;
      var += d * d;
    }
    out[i] = static_cast<float>(var / static_cast<double>(samples));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Patch window scoring (the f-table) and aggregation
// ---------------------------------------------------------------------------

struct PatchWindowScores {
  int windows = 0;
  PatchGrid grid;
  std::vector<double> f;  // windows x grid.count(), window-major
};

struct PatchScoreTable {
  int windows = 0;
  int patches = 0;
  PatchGrid grid;
  std::vector<double> f_table;  // windows x patches
  std::vector<double> s;        // per-patch max over windows
  double gamma = 0.0;           // lower median of s
  int m_count = 0;              // patches strictly above gamma
  double o = 0.0;               // final anomaly score
};

namespace temporaldetail {

struct ValidRect {
  int x0, y0, x1, y1;  // half-open
};

inline ValidRect valid_region(int width, int height, int margin) {
  // Keep at least a 2px-wide interior even on tiny frames.
  int mx = std::min(margin, std::max(0, (width - 2) / 2));
  int my = std::min(margin, std::max(0, (height - 2) / 2));
  return {mx, my, width - mx, height - my};
}

// Mean of `field` over the patch rect clipped to the valid region; 0 when
// nothing of the patch survives clipping.
inline double patch_mean(const std::vector<float>& field, int width, const ValidRect& valid,
                         int x0, int y0, int x1, int y1) {
  int cx0 = std::max(x0, valid.x0), cx1 = std::min(x1, valid.x1);
  int cy0 = std::max(y0, valid.y0), cy1 = std::min(y1, valid.y1);
  if (cx0 >= cx1 || cy0 >= cy1) return 0.0;
  double sum = 0.0;
  for (int y = cy0; y < cy1; ++y) {
    for (int x = cx0; x < cx1; ++x) sum += field[static_cast<size_t>(y) * width + x];
  }
  return sum / (static_cast<double>(cx1 - cx0) * (cy1 - cy0));
}

}  // namespace temporaldetail

// Builds the W x N table of f = alpha * eta(u) + beta * eta(v): u is the
// windowed mean magnitude difference per patch, v the windowed direction
// variance per patch, and eta the min-max normalization taken separately
// over all W x N u-values and v-values of this segment.
inline PatchWindowScores patch_window_scores(const std::vector<FlowField>& flows,
                                             const PatchGridConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(flows.size()) < cfg.window_len) {
    throw TooFewFrames("patch_window_scores: need at least window_len flow fields");
  }
  for (size_t t = 1; t < flows.size(); ++t) {
    if (flows[t].width != flows[0].width || flows[t].height != flows[0].height) {
      throw DimensionMismatch("patch_window_scores: inconsistent flow dimensions");
    }
  }
  const int width = flows[0].width, height = flows[0].height;
  PatchGrid grid = PatchGrid::build(width, height, cfg.patch_size);
  const int patches = grid.count();
  const int pair_count = static_cast<int>(flows.size()) - 1;
  const int window_count =
      (static_cast<int>(flows.size()) - cfg.window_len) / cfg.window_stride + 1;
  const int pairs_per_window = cfg.window_len - 1;
  temporaldetail::ValidRect valid =
      temporaldetail::valid_region(width, height, cfg.border_margin);

  // Per-pair fields are shared by overlapping windows.
  std::vector<std::vector<float>> mag_diff(pair_count);
  std::vector<std::vector<float>> w_field(pair_count);
  for (int t = 0; t < pair_count; ++t) {
    mag_diff[t] = magnitude_diff_field(flows[t], flows[t + 1]);
    w_field[t] = direction_consistency_field(flows[t], flows[t + 1], cfg.flow_epsilon);
  }

  std::vector<double> u_vals(static_cast<size_t>(window_count) * patches, 0.0);
  std::vector<double> v_vals(static_cast<size_t>(window_count) * patches, 0.0);
  std::vector<float> var_field(static_cast<size_t>(width) * height);
  for (int j = 0; j < window_count; ++j) {
    const int first_pair = j * cfg.window_stride;
    // u: mean magnitude difference across the window's pairs.
    for (int i = 0; i < patches; ++i) {
      int x0, y0, x1, y1;
      grid.cell_rect(i, &x0, &y0, &x1, &y1);
      double acc = 0.0;
      for (int t = first_pair; t < first_pair + pairs_per_window; ++t) {
        acc += temporaldetail::patch_mean(mag_diff[t], width, valid, x0, y0, x1, y1);
      }
      u_vals[static_cast<size_t>(j) * patches + i] = acc / pairs_per_window;
    }
    // v: per-pixel variance of the w series inside the window, patch-meaned.
    for (size_t p = 0; p < var_field.size(); ++p) {
      double mean = 0.0;
      for (int t = first_pair; t < first_pair + pairs_per_window; ++t) mean += w_field[t][p];
      mean /= pairs_per_window;
      double var = 0.0;
      for (int t = first_pair; t < first_pair + pairs_per_window; ++t) {
        double d = w_field[t][p] - mean;
        var += d * d;
      }
      var_field[p] = static_cast<float>(var / pairs_per_window);
    }
    for (int i = 0; i < patches; ++i) {
      int x0, y0, x1, y1;
      grid.cell_rect(i, &x0, &y0, &x1, &y1);
      v_vals[static_cast<size_t>(j) * patches + i] =
          temporaldetail::patch_mean(var_field, width, valid, x0, y0, x1, y1);
    }
  }

  std::vector<double> u_norm = min_max_normalize(u_vals);
  std::vector<double> v_norm = min_max_normalize(v_vals);
  PatchWindowScores out;
  out.windows = window_count;
  out.grid = grid;
  out.f.resize(u_norm.size());
  for (size_t k = 0; k < out.f.size(); ++k) {
    out.f[k] = cfg.alpha * u_norm[k] + cfg.beta * v_norm[k];
  }
  return out;
}

// Per-patch maxima, lower median, and the mean relative excess above the
// median. gamma is floored and the score capped so a near-zero median cannot
// blow the ratio up.
inline PatchScoreTable aggregate_patch_scores(const std::vector<double>& f_table, int windows,
                                              int patches) {
  if (f_table.empty() || windows <= 0 || patches <= 0 ||
      f_table.size() != static_cast<size_t>(windows) * patches) {
    throw EmptyTable("aggregate_patch_scores: empty or inconsistent f table");
  }
  PatchScoreTable out;
  out.windows = windows;
  out.patches = patches;
  out.f_table = f_table;
  out.s.resize(patches);
  for (int i = 0; i < patches; ++i) {
    double best = f_table[i];
    for (int j = 1; j < windows; ++j) {
      best = std::max(best, f_table[static_cast<size_t>(j) * patches + i]);
    }
    out.s[i] = best;
  }
  std::vector<double> sorted = out.s;
  std::sort(sorted.begin(), sorted.end());
  out.gamma = sorted[(patches - 1) / 2];  // lower median for even counts

  double gamma_eff = std::max(out.gamma, kGammaFloor);
  double acc = 0.0;
  for (double si : out.s) {
    if (si > out.gamma) {
      ++out.m_count;
      acc += (si - gamma_eff) / gamma_eff;
    }
  }
  out.o = out.m_count == 0 ? 0.0 : std::min(acc / out.m_count, kAnomalyCap);
  return out;
}

inline PatchScoreTable aggregate_patch_scores(const PatchWindowScores& scores) {
  PatchScoreTable table =
      aggregate_patch_scores(scores.f, scores.windows, scores.grid.count());
  table.grid = scores.grid;
  return table;
}

// ---------------------------------------------------------------------------
// Shot splitting
// ---------------------------------------------------------------------------

// HSV L1 frame distance: per-pixel hue distance (circular, scaled to [0,1])
// plus saturation and value differences, averaged over pixels.
inline double hsv_frame_difference(const Frame& a, const Frame& b) {
  if (a.width != b.width || a.height != b.height) {
    throw DimensionMismatch("hsv_frame_difference: frame dimensions differ");
  }
  double sum = 0.0;
  const std::uint8_t* pa = a.rgb.data();
  const std::uint8_t* pb = b.rgb.data();
  size_t n = a.pixel_count();
  for (size_t i = 0; i < n; ++i, pa += 3, pb += 3) {
    float ha, sa, va, hb, sb, vb;
    rgb_to_hsv(pa[0], pa[1], pa[2], &ha, &sa, &va);
    rgb_to_hsv(pb[0], pb[1], pb[2], &hb, &sb, &vb);
    sum += hue_distance(ha, hb) + std::fabs(sa - sb) + std::fabs(va - vb);
  }
  return sum / static_cast<double>(n);
}

// Splits [0, frames) at every consecutive pair whose HSV difference exceeds
// theta. Segments shorter than 2 frames are merged into their predecessor
// (the first into its successor), so every returned segment spans >= 2
// frames whenever the video does.
inline std::vector<EventSegment> detect_shot_boundaries(const std::vector<Frame>& frames,
                                                        double theta = 0.30) {
  if (frames.size() < 2) throw TooFewFrames("detect_shot_boundaries needs >= 2 frames");
  if (theta <= 0.0) throw Error("shot threshold must be > 0");
  std::vector<int> cuts;  // cut before frame index
  for (size_t t = 0; t + 1 < frames.size(); ++t) {
    if (hsv_frame_difference(frames[t], frames[t + 1]) > theta) {
      cuts.push_back(static_cast<int>(t) + 1);
    }
  }
  std::vector<EventSegment> segs;
  int start = 0;
  for (int cut : cuts) {
    segs.push_back({start, cut});
    start = cut;
  }
  segs.push_back({start, static_cast<int>(frames.size())});

  std::vector<EventSegment> merged;
  for (const EventSegment& seg : segs) {
    if (seg.length() < 2 && !merged.empty()) {
      merged.back().end = seg.end;
    } else {
      merged.push_back(seg);
    }
  }
  if (merged.size() > 1 && merged.front().length() < 2) {
    merged[1].start = merged.front().start;
    merged.erase(merged.begin());
  }
  return merged;
}

// ---------------------------------------------------------------------------
// Camera compensation
// ---------------------------------------------------------------------------

struct CompensatedFlows {
  std::vector<FlowField> flows;
  std::vector<int> failed_pairs;  // indices whose homography could not be fit
};

// Removes the homography-induced global motion from each pair's flow. Pairs
// whose homography cannot be estimated pass through unchanged and are
// reported, never dropped.
inline CompensatedFlows compensate_camera(const std::vector<FlowField>& flows,
                                          const std::vector<Frame>& frames,
                                          const HomographyParams& params = {}) {
  if (flows.size() + 1 != frames.size()) {
    throw LengthMismatch("compensate_camera: need one flow per consecutive frame pair");
  }
  CompensatedFlows out;
  out.flows.reserve(flows.size());
  for (size_t t = 0; t < flows.size(); ++t) {
    try {
      Homography h = estimate_homography(frames[t], frames[t + 1], params);
      FlowField induced = homography_induced_flow(h, flows[t].width, flows[t].height);
      out.flows.push_back(subtract_global_motion(flows[t], induced));
    } catch (const InsufficientCorners&) {
      out.flows.push_back(flows[t]);
      out.failed_pairs.push_back(static_cast<int>(t));
    } catch (const DegenerateConfiguration&) {
      out.flows.push_back(flows[t]);
      out.failed_pairs.push_back(static_cast<int>(t));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tool reports
// ---------------------------------------------------------------------------

inline std::string band_label(double raw, const BandTable& table) {
  table.validate();
  return table.band_for(raw).label;
}

inline BandTable default_temporal_band_table() {
  return BandTable{{
      {0.05, "excellent temporal stability",
       "no measurable local flicker; patch variations stay at the median level"},
      {0.3, "minor local flicker",
       "a few patches vary slightly more than the typical patch"},
      {1.0, "noticeable flicker or local collapse",
       "some patches vary several times more than the typical patch"},
      {std::numeric_limits<double>::infinity(), "severe temporal artifacts",
       "isolated patches dominate the temporal variation; strong flicker or collapse"},
  }};
}

inline BandTable default_dynamic_band_table() {
  return BandTable{{
      {0.2, "near static", "almost no pixel motion across the video"},
      {1.5, "moderate motion", "gentle object or camera movement"},
      {6.0, "strong motion", "large displacements between consecutive frames"},
      {std::numeric_limits<double>::infinity(), "extreme motion",
       "very large displacements; may exceed the estimator's range"},
  }};
}

inline BandTable default_subject_band_table() {
  return BandTable{{
      {0.5, "unstable subject identity", "the subject appearance changes drastically"},
      {0.8, "moderate subject drift", "the subject drifts noticeably across frames"},
      {0.95 - 1e-9, "mostly consistent subject", "small appearance changes only"},
      {std::numeric_limits<double>::infinity(), "highly consistent subject",
       "the subject keeps a stable appearance throughout"},
  }};
}

inline ToolReport make_tool_report(const std::string& name, double raw,
                                   const BandTable& table,
                                   std::vector<std::string> flags = {}) {
  table.validate();
  ToolReport report;
  report.tool_name = name;
  report.raw_score = raw;
  report.band = table.band_for(raw).label;
  report.flags = std::move(flags);
  report.band_table = table;
  return report;
}

// ---------------------------------------------------------------------------
// Full temporal-anomaly pipeline
// ---------------------------------------------------------------------------

enum class SegmentAggregation { kMean, kMax };  // duration-weighted mean is the default

struct TemporalToolOptions {
  bool compensate_camera = true;
  SegmentAggregation segment_agg = SegmentAggregation::kMean;
  FlowParams flow;
  HomographyParams homography;
  BandTable band_table = default_temporal_band_table();
  // Estimated flow per consecutive frame pair (size frames-1) when the caller
  // already has it, e.g. from the precomputed-flow ingest path.
  const std::vector<FlowField>* precomputed_flows = nullptr;
};

struct SegmentScore {
  EventSegment segment;
  bool scored = false;
  PatchScoreTable table;          // valid when scored
  std::vector<int> failed_pairs;  // segment-relative pair indices left uncompensated
};

struct TemporalAnomalyResult {
  ToolReport report;
  std::vector<SegmentScore> segments;
};

namespace temporaldetail {

// Vectors below eps are zeroed so estimator noise on (compensated) static
// content cannot be stretched into anomalies by the min-max normalization.
inline FlowField clamp_static(const FlowField& flow, double eps) {
  FlowField out = flow;
  float e2 = static_cast<float>(eps * eps);
  for (size_t i = 0; i < out.pixel_count(); ++i) {
    float x = out.data[2 * i], y = out.data[2 * i + 1];
    if (x * x + y * y < e2) {
      out.data[2 * i] = 0.0f;
      out.data[2 * i + 1] = 0.0f;
    }
  }
  return out;
}

}  // namespace temporaldetail

// Shot-splits the video, scores each segment with camera-compensated patch
// statistics, and aggregates per-segment scores (duration-weighted mean by
// default). Boundary frame pairs are never scored. Segments too short to
// carry a window are scored with a shrunken window; segments under 4 frames
// are skipped and flagged.
inline TemporalAnomalyResult temporal_anomaly_score(const std::vector<Frame>& frames,
                                                    double fps, const PatchGridConfig& cfg,
                                                    double theta = 0.30,
                                                    const TemporalToolOptions& options = {}) {
  cfg.validate();
  if (static_cast<int>(frames.size()) < cfg.window_len + 1) {
    throw TooFewFrames("temporal_anomaly_score: need at least window_len + 1 frames");
  }
  if (options.precomputed_flows &&
      options.precomputed_flows->size() + 1 != frames.size()) {
    throw LengthMismatch("precomputed flows must cover every consecutive frame pair");
  }

  TemporalAnomalyResult result;
  std::vector<std::string> flags;
  std::vector<EventSegment> segments = detect_shot_boundaries(frames, theta);
  if (segments.size() > 1) {
    flags.push_back("shot_boundaries:" + std::to_string(segments.size() - 1));
  }

  double weighted = 0.0, weight_total = 0.0, max_seg = 0.0;
  bool any_scored = false;
  for (const EventSegment& seg : segments) {
    SegmentScore score;
    score.segment = seg;
    int pair_count = seg.length() - 1;
    if (pair_count < 3) {  // direction variance needs >= 2 samples
      flags.push_back("segment_too_short:" + std::to_string(seg.start) + "-" +
                      std::to_string(seg.end));
      result.segments.push_back(std::move(score));
      continue;
    }

    std::vector<FlowField> seg_flows;
    seg_flows.reserve(pair_count);
    std::vector<Frame> seg_frames(frames.begin() + seg.start, frames.begin() + seg.end);
    for (int t = seg.start; t < seg.end - 1; ++t) {
      if (options.precomputed_flows) {
        seg_flows.push_back((*options.precomputed_flows)[t]);
      } else {
        seg_flows.push_back(estimate_flow(frames[t], frames[t + 1], options.flow));
      }
    }
    if (options.compensate_camera) {
      CompensatedFlows comp = compensate_camera(seg_flows, seg_frames, options.homography);
      seg_flows = std::move(comp.flows);
      score.failed_pairs = std::move(comp.failed_pairs);
      if (!score.failed_pairs.empty()) {
        flags.push_back("uncompensated_pairs:" + std::to_string(score.failed_pairs.size()));
      }
    }
    for (FlowField& f : seg_flows) {
      f = temporaldetail::clamp_static(f, cfg.static_clamp);
    }

    PatchGridConfig seg_cfg = cfg;
    seg_cfg.window_len = std::min(cfg.window_len, pair_count);
    seg_cfg.window_stride = std::min(cfg.window_stride, seg_cfg.window_len);
    PatchWindowScores scores = patch_window_scores(seg_flows, seg_cfg);
    score.table = aggregate_patch_scores(scores);
    score.scored = true;
    any_scored = true;

    double seg_weight = static_cast<double>(seg.length()) / (fps > 0.0 ? fps : 1.0);
    weighted += score.table.o * seg_weight;
    weight_total += seg_weight;
    max_seg = std::max(max_seg, score.table.o);
    result.segments.push_back(std::move(score));
  }

  double raw = 0.0;
  if (any_scored) {
    raw = options.segment_agg == SegmentAggregation::kMax ? max_seg : weighted / weight_total;
  } else {
    flags.push_back("no_scorable_segments");
  }
  result.report = make_tool_report("temporal_anomaly", raw, options.band_table, flags);
  return result;
}

// Mean flow magnitude over all pixels and fields, on uncompensated flow:
// camera motion is real dynamics.
inline ToolReport dynamic_degree(const std::vector<FlowField>& flows,
                                 const BandTable& table = default_dynamic_band_table()) {
  if (flows.empty()) throw EmptyInput("dynamic_degree: no flow fields");
  double sum = 0.0;
  size_t count = 0;
  for (const FlowField& f : flows) {
    for (size_t i = 0; i < f.pixel_count(); ++i) {
      double x = f.data[2 * i], y = f.data[2 * i + 1];
      sum += std::sqrt(x * x + y * y);
    }
    count += f.pixel_count();
  }
  return make_tool_report("dynamic_degree", sum / static_cast<double>(count), table);
}

using EmbeddingBackend = std::function<std::vector<double>(const Frame&)>;

// Offline fallback embedding: 48-bin per-channel color histogram, L2-normed.
inline std::vector<double> color_histogram_embedding(const Frame& frame) {
  std::vector<double> hist(144, 0.0);
  const std::uint8_t* p = frame.rgb.data();
  for (size_t i = 0; i < frame.pixel_count(); ++i, p += 3) {
    for (int c = 0; c < 3; ++c) {
      hist[static_cast<size_t>(c) * 48 + std::min(47, p[c] * 48 / 256)] += 1.0;
    }
  }
  double norm = std::sqrt(std::inner_product(hist.begin(), hist.end(), hist.begin(), 0.0));
  if (norm > 0.0) {
    for (double& h : hist) h /= norm;
  }
  return hist;
}

// Mean of 0.5*cos(e_1, e_t) + 0.5*cos(e_{t-1}, e_t) over t: anchored to the
// first frame so slow drift is penalized, and to the previous frame so
// abrupt identity switches are too.
inline ToolReport subject_consistency(const std::vector<Frame>& frames,
                                      const EmbeddingBackend& embed,
                                      const BandTable& table = default_subject_band_table()) {
  if (frames.size() < 2) throw TooFewFrames("subject_consistency needs >= 2 frames");
  if (!embed) throw BackendFailure("subject_consistency: no embedding backend");
  std::vector<std::vector<double>> e(frames.size());
  for (size_t t = 0; t < frames.size(); ++t) {
    e[t] = embed(frames[t]);
    if (e[t].empty()) throw BackendFailure("embedding backend returned an empty vector");
    if (t > 0 && e[t].size() != e[0].size()) {
      throw BackendFailure("embedding backend returned inconsistent dimensions");
    }
  }
  auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) throw BackendFailure("embedding has zero norm");
    return dot / std::sqrt(na * nb);
  };
  double acc = 0.0;
  for (size_t t = 1; t < frames.size(); ++t) {
    acc += 0.5 * cosine(e[0], e[t]) + 0.5 * cosine(e[t - 1], e[t]);
  }
  double raw = acc / static_cast<double>(frames.size() - 1);
  return make_tool_report("subject_consistency", raw, table);
}

}  // namespace vge
