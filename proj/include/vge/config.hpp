#pragma once

// Run configuration: JSON file -> validated RunConfig. Every numeric field
// is checked against the ranges its owning module declares, and paths are
// resolved before any backend is contacted.

#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "vge/alignment.hpp"
#include "vge/chat.hpp"
#include "vge/errors.hpp"
#include "vge/flow.hpp"
#include "vge/homography.hpp"
#include "vge/schema.hpp"
#include "vge/temporal.hpp"

namespace vge {

struct PathsConfig {
  std::string prompts;       // batch manifest (JSON list)
  std::string videos_root;   // parent of per-video frame directories
  std::string annotations;   // human annotation file (for `align`)
  std::string output_dir = "out";
};

struct RunConfig {
  HttpBackendConfig structurer;
  HttpBackendConfig judger;
  std::string backend_kind = "real";  // "real" | "mock"
  std::string mock_script;            // script file used when backend_kind == "mock"
  int workers = 1;
  std::uint64_t seed = 0;
  TaskMode task_mode = TaskMode::kT2V;
  int frame_sample_count = 8;   // k
  double shot_threshold = 0.30;  // theta
  SegmentAggregation segment_agg = SegmentAggregation::kMean;
  bool compensate_camera = true;
  bool downsample_frames = false;
  bool run_tools = true;
  bool force = false;
  PatchGridConfig patch_grid;
  FlowParams flow;
  HomographyParams homography;
  BandTable temporal_bands = default_temporal_band_table();
  BandTable dynamic_bands = default_dynamic_band_table();
  BandTable subject_bands = default_subject_band_table();
  PathsConfig paths;

  void validate() const {
    if (backend_kind != "real" && backend_kind != "mock") {
      throw ConfigError("backend must be 'real' or 'mock'");
    }
    if (backend_kind == "mock" && mock_script.empty()) {
      throw ConfigError("mock backend requires a mock_script path");
    }
    if (workers < 1 || workers > 256) throw ConfigError("workers must be in [1, 256]");
    if (frame_sample_count < 1) throw ConfigError("frame_sample_count must be >= 1");
    if (shot_threshold <= 0.0) throw ConfigError("shot_threshold must be > 0");
    try {
      patch_grid.validate();
      flow.validate();
      temporal_bands.validate();
      dynamic_bands.validate();
      subject_bands.validate();
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace configdetail {

using nlohmann::json;

inline double bound_from_json(const json& value) {
  if (value.is_string()) {
    std::string text = value.get<std::string>();
    if (text == "inf" || text == "+inf" || text == "Infinity") {
      return std::numeric_limits<double>::infinity();
    }
    throw ConfigError("band upper_bound string must be 'inf'");
  }
  if (!value.is_number()) throw ConfigError("band upper_bound must be a number or 'inf'");
  return value.get<double>();
}

inline BandTable band_table_from_json(const json& doc) {
  if (!doc.is_array()) throw ConfigError("band table must be a JSON array");
  BandTable table;
  for (const json& item : doc) {
    Band band;
    band.upper_bound = bound_from_json(item.at("upper_bound"));
    band.label = item.at("label").get<std::string>();
    band.description = item.value("description", std::string());
    table.bands.push_back(std::move(band));
  }
  return table;
}

inline void backend_from_json(const json& doc, HttpBackendConfig* backend) {
  backend->endpoint = doc.value("endpoint", backend->endpoint);
  backend->path = doc.value("path", backend->path);
  backend->model = doc.value("model", backend->model);
  backend->api_key_env = doc.value("api_key_env", backend->api_key_env);
  backend->requests_per_minute = doc.value("requests_per_minute", backend->requests_per_minute);
  backend->max_retries = doc.value("max_retries", backend->max_retries);
  backend->timeout_seconds = doc.value("timeout_seconds", backend->timeout_seconds);
}

}  // namespace configdetail

inline RunConfig run_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  try {
    if (doc.contains("backends")) {
      const nlohmann::json& backends = doc.at("backends");
      if (backends.contains("structurer")) {
        configdetail::backend_from_json(backends.at("structurer"), &cfg.structurer);
      }
      if (backends.contains("judger")) {
        configdetail::backend_from_json(backends.at("judger"), &cfg.judger);
      }
    }
    cfg.backend_kind = doc.value("backend", cfg.backend_kind);
    cfg.mock_script = doc.value("mock_script", cfg.mock_script);
    cfg.workers = doc.value("workers", cfg.workers);
    cfg.seed = doc.value("seed", cfg.seed);
    if (doc.contains("task_mode")) {
      cfg.task_mode = parse_task_mode(doc.at("task_mode").get<std::string>());
    }
    cfg.frame_sample_count = doc.value("frame_sample_count", cfg.frame_sample_count);
    cfg.shot_threshold = doc.value("shot_threshold", cfg.shot_threshold);
    if (doc.contains("segment_aggregation")) {
      std::string agg = doc.at("segment_aggregation").get<std::string>();
      if (agg == "mean") {
        cfg.segment_agg = SegmentAggregation::kMean;
      } else if (agg == "max") {
        cfg.segment_agg = SegmentAggregation::kMax;
      } else {
        throw ConfigError("segment_aggregation must be 'mean' or 'max'");
      }
    }
    cfg.compensate_camera = doc.value("compensate_camera", cfg.compensate_camera);
    cfg.downsample_frames = doc.value("downsample_frames", cfg.downsample_frames);
    cfg.run_tools = doc.value("run_tools", cfg.run_tools);

    if (doc.contains("patch_grid")) {
      const nlohmann::json& grid = doc.at("patch_grid");
      cfg.patch_grid.patch_size = grid.value("patch_size", cfg.patch_grid.patch_size);
      cfg.patch_grid.window_len = grid.value("window_len", cfg.patch_grid.window_len);
      cfg.patch_grid.window_stride = grid.value("window_stride", cfg.patch_grid.window_stride);
      cfg.patch_grid.alpha = grid.value("alpha", cfg.patch_grid.alpha);
      cfg.patch_grid.beta = grid.value("beta", cfg.patch_grid.beta);
      cfg.patch_grid.flow_epsilon = grid.value("flow_epsilon", cfg.patch_grid.flow_epsilon);
      cfg.patch_grid.border_margin = grid.value("border_margin", cfg.patch_grid.border_margin);
      cfg.patch_grid.static_clamp = grid.value("static_clamp", cfg.patch_grid.static_clamp);
    }
    if (doc.contains("flow")) {
      const nlohmann::json& flow = doc.at("flow");
      cfg.flow.levels = flow.value("levels", cfg.flow.levels);
      cfg.flow.window_radius = flow.value("window_radius", cfg.flow.window_radius);
      cfg.flow.iterations = flow.value("iterations", cfg.flow.iterations);
    }
    if (doc.contains("homography")) {
      const nlohmann::json& h = doc.at("homography");
      cfg.homography.min_corners = h.value("min_corners", cfg.homography.min_corners);
      cfg.homography.max_corners = h.value("max_corners", cfg.homography.max_corners);
      cfg.homography.ransac_iterations =
          h.value("ransac_iterations", cfg.homography.ransac_iterations);
      cfg.homography.inlier_threshold =
          h.value("inlier_threshold", cfg.homography.inlier_threshold);
      cfg.homography.min_inlier_ratio =
          h.value("min_inlier_ratio", cfg.homography.min_inlier_ratio);
      cfg.homography.seed = h.value("seed", cfg.homography.seed);
    }
    if (doc.contains("band_tables")) {
      const nlohmann::json& tables = doc.at("band_tables");
      if (tables.contains("temporal_anomaly")) {
        cfg.temporal_bands = configdetail::band_table_from_json(tables.at("temporal_anomaly"));
      }
      if (tables.contains("dynamic_degree")) {
        cfg.dynamic_bands = configdetail::band_table_from_json(tables.at("dynamic_degree"));
      }
      if (tables.contains("subject_consistency")) {
        cfg.subject_bands = configdetail::band_table_from_json(tables.at("subject_consistency"));
      }
    }
    if (doc.contains("paths")) {
      const nlohmann::json& paths = doc.at("paths");
      cfg.paths.prompts = paths.value("prompts", cfg.paths.prompts);
      cfg.paths.videos_root = paths.value("videos_root", cfg.paths.videos_root);
      cfg.paths.annotations = paths.value("annotations", cfg.paths.annotations);
      cfg.paths.output_dir = paths.value("output_dir", cfg.paths.output_dir);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return run_config_from_json(doc);
}

}  // namespace vge
