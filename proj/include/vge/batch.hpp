#pragma once

// Batch evaluation: one EvaluationRecord per (prompt, video) pair, written
// incrementally as records/<video_id>.json plus an append-only JSONL index
// for crash safety. Completed videos are skipped on rerun unless forced.
// Per-video work is independent and runs on a small worker pool; the index
// is written through one serialized writer.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vge/agent.hpp"
#include "vge/chat.hpp"
#include "vge/config.hpp"
#include "vge/errors.hpp"
#include "vge/temporal.hpp"
#include "vge/video_io.hpp"

namespace vge {

// Exit codes shared by run_batch and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPartialFailure = 2;
inline constexpr int kExitConfigError = 3;
inline constexpr int kExitNoInputs = 4;

struct BatchTask {
  std::string video_id;
  std::string model_id = "unknown";
  std::string raw_prompt;
  std::string video_dir;  // relative to videos_root; defaults to video_id
  TaskMode task_mode = TaskMode::kT2V;
  std::optional<std::string> reference_image;
  std::optional<nlohmann::json> dimensions;  // pre-structured content, skips the structurer
};

inline std::vector<BatchTask> batch_tasks_from_json(const nlohmann::json& doc,
                                                    TaskMode default_mode) {
  if (!doc.is_array()) throw MalformedJson("batch manifest must be a JSON array");
  std::vector<BatchTask> tasks;
  std::set<std::string> seen;
  for (const nlohmann::json& item : doc) {
    if (!item.is_object()) throw MalformedJson("batch manifest entries must be objects");
    BatchTask task;
    task.task_mode = default_mode;
    if (!item.contains("video_id") || !item["video_id"].is_string()) {
      throw MalformedJson("batch manifest entry lacks video_id");
    }
    task.video_id = item["video_id"].get<std::string>();
    if (task.video_id.empty() || task.video_id.find('/') != std::string::npos) {
      throw MalformedJson("video_id must be a non-empty path-free name");
    }
    if (!seen.insert(task.video_id).second) {
      throw MalformedJson("duplicate video_id '" + task.video_id + "' in manifest");
    }
    try {
      task.model_id = item.value("model_id", task.model_id);
      task.raw_prompt = item.value("raw_prompt", std::string());
      task.video_dir = item.value("video_dir", task.video_id);
      if (item.contains("task_mode")) {
        task.task_mode = parse_task_mode(item["task_mode"].get<std::string>());
      }
      if (item.contains("reference_image") && !item["reference_image"].is_null()) {
        task.reference_image = item["reference_image"].get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw MalformedJson("batch manifest entry '" + task.video_id + "': " + e.what());
    }
    if (item.contains("dimensions")) task.dimensions = item["dimensions"];
    if (task.raw_prompt.empty() && !task.dimensions) {
      throw MalformedJson("entry '" + task.video_id +
                          "' needs raw_prompt or pre-structured dimensions");
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

inline std::vector<BatchTask> load_batch_manifest(const std::string& path,
                                                  TaskMode default_mode) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open prompts manifest: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedJson("prompts manifest: " + std::string(e.what()));
  }
  return batch_tasks_from_json(doc, default_mode);
}

// Temporal anomaly, dynamic degree, and subject consistency for one video.
// Flow is estimated once per consecutive pair and shared between tools;
// dynamic degree reads the uncompensated fields.
inline std::vector<ToolReport> compute_tool_reports(const Video& video,
                                                    const RunConfig& cfg) {
  if (static_cast<int>(video.frames.size()) < cfg.patch_grid.window_len + 1) {
    throw TooFewFrames("video too short for tool scoring");
  }
  std::vector<FlowField> flows;
  flows.reserve(video.frames.size() - 1);
  for (size_t t = 0; t + 1 < video.frames.size(); ++t) {
    flows.push_back(estimate_flow(video.frames[t], video.frames[t + 1], cfg.flow));
  }
  TemporalToolOptions options;
  options.compensate_camera = cfg.compensate_camera;
  options.segment_agg = cfg.segment_agg;
  options.flow = cfg.flow;
  options.homography = cfg.homography;
  options.band_table = cfg.temporal_bands;
  options.precomputed_flows = &flows;
  TemporalAnomalyResult temporal =
      temporal_anomaly_score(video.frames, video.fps, cfg.patch_grid, cfg.shot_threshold,
                             options);
  std::vector<ToolReport> reports;
  reports.push_back(temporal.report);
  reports.push_back(dynamic_degree(flows, cfg.dynamic_bands));
  reports.push_back(
      subject_consistency(video.frames, color_histogram_embedding, cfg.subject_bands));
  return reports;
}

struct BatchOutcome {
  int exit_code = kExitOk;
  int completed = 0;  // records written without error annotation
  int failed = 0;     // records written with error annotation
  int skipped = 0;    // resumed from a previous run
};

namespace batchdetail {

inline StructuredPrompt prompt_from_task(const BatchTask& task, ChatBackend* structurer,
                                         EvaluationRecord* record) {
  if (task.dimensions) {
    StructuredPrompt prompt = validate_structured_prompt(task.dimensions->dump());
    prompt.raw_prompt = task.raw_prompt;
    prompt.task_mode = task.task_mode;
    if (task.reference_image) prompt.reference_image = task.reference_image;
    check_prompt_invariants(prompt);
    return prompt;
  }
  if (!structurer) throw StructuringFailed("no structurer backend configured");
  StructureResult result =
      structure_prompt(task.raw_prompt, task.task_mode,
                       task.reference_image.value_or(std::string()), *structurer);
  record->structurer_backend = structurer->name();
  record->structure_retries = result.retries;
  return result.prompt;
}

}  // namespace batchdetail

// Evaluates one task end to end. Returns a record unconditionally: any
// pipeline failure (missing frames, structuring, judging) is captured as an
// error annotation rather than thrown, so a batch always yields one record
// per attempted video.
inline EvaluationRecord evaluate_task(const BatchTask& task, const RunConfig& cfg,
                                      ChatBackend* structurer, ChatBackend& judger,
                                      const JudgeOptions& options) {
  EvaluationRecord record;
  record.video_id = task.video_id;
  record.model_id = task.model_id;
  record.created_at = options.timestamp ? options.timestamp() : current_utc_timestamp();
  record.judger_backend = judger.name();
  try {
    namespace fs = std::filesystem;
    const std::string& dir = task.video_dir.empty() ? task.video_id : task.video_dir;
    Video video = load_video((fs::path(cfg.paths.videos_root) / dir).string());
    std::vector<ToolReport> tools;
    if (cfg.run_tools) tools = compute_tool_reports(video, cfg);
    StructuredPrompt prompt = batchdetail::prompt_from_task(task, structurer, &record);
    EvaluationRecord judged = judge_video(task.video_id, task.model_id, video.frames, prompt,
                                          tools, judger, options);
    judged.structurer_backend = record.structurer_backend;
    judged.structure_retries = record.structure_retries;
    judged.created_at = record.created_at;
    return judged;
  } catch (const Error& e) {
    record.error = e.what();
    record.flags.push_back("pipeline_failed");
    return record;
  }
}

// Runs every task not yet completed (status "ok" in the index). Exit code:
// 0 all records clean, 2 any record carries an error, 3 unusable output
// directory, 4 nothing to evaluate.
inline BatchOutcome run_batch(const std::vector<BatchTask>& tasks, const RunConfig& cfg,
                              ChatBackend* structurer, ChatBackend& judger,
                              const JudgeOptions& base_options = {}) {
  namespace fs = std::filesystem;
  BatchOutcome outcome;
  if (tasks.empty()) {
    outcome.exit_code = kExitNoInputs;
    return outcome;
  }

  fs::path out_dir(cfg.paths.output_dir);
  fs::path records_dir = out_dir / "records";
  fs::path index_path = out_dir / "index.jsonl";
  std::error_code ec;
  fs::create_directories(records_dir, ec);
  if (ec) {
    outcome.exit_code = kExitConfigError;
    return outcome;
  }

  // Resume: completed ids come from the index; errored ones are retried.
  std::set<std::string> done;
  if (!cfg.force && fs::exists(index_path)) {
    std::ifstream in(index_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json entry = nlohmann::json::parse(line, nullptr, false);
      if (entry.is_discarded() || !entry.is_object()) continue;
      if (entry.value("status", "") == "ok") done.insert(entry.value("video_id", ""));
    }
  }

  std::vector<const BatchTask*> pending;
  for (const BatchTask& task : tasks) {
    if (done.count(task.video_id)) {
      ++outcome.skipped;
    } else {
      pending.push_back(&task);
    }
  }

  std::mutex index_mu;
  std::ofstream index(index_path, std::ios::app);
  std::atomic<size_t> cursor{0};
  std::atomic<int> completed{0}, failed{0};

  auto worker = [&] {
    for (;;) {
      size_t i = cursor.fetch_add(1);
      if (i >= pending.size()) return;
      const BatchTask& task = *pending[i];
      EvaluationRecord record = evaluate_task(task, cfg, structurer, judger, base_options);
      std::string rel = "records/" + task.video_id + ".json";
      {
        std::ofstream record_out(out_dir / rel);
        record_out << record_to_json(record).dump(2) << "\n";
      }
      nlohmann::json entry{{"video_id", task.video_id},
                           {"model_id", task.model_id},
                           {"status", record.error ? "error" : "ok"},
                           {"file", rel}};
      {
        std::lock_guard<std::mutex> lock(index_mu);
        index << entry.dump() << "\n";
        index.flush();
      }
      record.error ? ++failed : ++completed;
    }
  };

  int thread_count = std::max(1, std::min<int>(cfg.workers, static_cast<int>(pending.size())));
  if (thread_count <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < thread_count; ++t) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }

  outcome.completed = completed.load();
  outcome.failed = failed.load();
  if (outcome.failed > 0) outcome.exit_code = kExitPartialFailure;
  return outcome;
}

// Loads the records referenced by an index.jsonl (or every *.json in a
// directory) for align/rank/report.
inline std::vector<EvaluationRecord> load_records(const std::string& path) {
  namespace fs = std::filesystem;
  std::vector<EvaluationRecord> records;
  fs::path p(path);
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(p)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& file : files) {
      std::ifstream in(file);
      std::string text((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
      records.push_back(parse_record(text));
    }
    return records;
  }
  std::ifstream in(p);
  if (!in) throw IoError("cannot open records path: " + path);
  if (p.extension() == ".jsonl") {
    // The index is append-only: a resumed run re-lists a video it retried.
    // Keep one file per video, later entries superseding earlier attempts,
    // in first-seen order.
    std::string line;
    fs::path base = p.parent_path();
    std::vector<std::string> order;
    std::map<std::string, std::string> latest;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        nlohmann::json entry = nlohmann::json::parse(line);
        std::string id = entry.at("video_id").get<std::string>();
        if (!latest.count(id)) order.push_back(id);
        latest[id] = entry.at("file").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw MalformedJson("records index: " + std::string(e.what()));
      }
    }
    for (const std::string& id : order) {
      std::ifstream record_in(base / latest.at(id));
      if (!record_in) throw IoError("missing record file listed in index");
      std::string text((std::istreambuf_iterator<char>(record_in)),
                       std::istreambuf_iterator<char>());
      records.push_back(parse_record(text));
    }
    return records;
  }
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  records.push_back(parse_record(text));
  return records;
}

inline std::vector<AnnotationRecord> load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotations file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_annotations(text);
}

}  // namespace vge
