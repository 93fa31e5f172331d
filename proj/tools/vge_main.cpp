// vge: agent-based evaluation of generated videos.
//
// Subcommands: structure, expand, tools, judge, align, rank, report.
// Exit codes: 0 success, 1 runtime failure, 2 partial batch failure,
// 3 configuration error, 4 no inputs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vge/agent.hpp"
#include "vge/alignment.hpp"
#include "vge/batch.hpp"
#include "vge/chat.hpp"
#include "vge/config.hpp"
#include "vge/http_transport.hpp"
#include "vge/schema.hpp"
#include "vge/temporal.hpp"
#include "vge/video_io.hpp"

namespace {

namespace fs = std::filesystem;

struct GlobalArgs {
  std::string config_path;
  std::string backend;      // "real" | "mock"; overrides config
  std::string mock_script;  // overrides config
  std::string segment_agg;  // "mean" | "max"
  int workers = 0;          // 0 = keep config value
  long long seed = -1;      // -1 = keep config value
  bool force = false;
};

vge::RunConfig make_config(const GlobalArgs& args) {
  vge::RunConfig cfg =
      args.config_path.empty() ? vge::RunConfig{} : vge::load_run_config(args.config_path);
  if (!args.backend.empty()) cfg.backend_kind = args.backend;
  if (!args.mock_script.empty()) cfg.mock_script = args.mock_script;
  if (args.workers > 0) cfg.workers = args.workers;
  if (args.seed >= 0) {
    cfg.seed = static_cast<std::uint64_t>(args.seed);
    cfg.homography.seed = static_cast<std::uint64_t>(args.seed);
  }
  if (args.force) cfg.force = true;
  if (!args.segment_agg.empty()) {
    if (args.segment_agg == "mean") {
      cfg.segment_agg = vge::SegmentAggregation::kMean;
    } else if (args.segment_agg == "max") {
      cfg.segment_agg = vge::SegmentAggregation::kMax;
    } else {
      throw vge::ConfigError("--segment-agg must be 'mean' or 'max'");
    }
  }
  cfg.validate();
  return cfg;
}

std::unique_ptr<vge::ChatBackend> make_backend(const vge::RunConfig& cfg,
                                               const vge::HttpBackendConfig& http) {
  if (cfg.backend_kind == "mock") {
    std::ifstream in(cfg.mock_script);
    if (!in) throw vge::ConfigError("cannot open mock script: " + cfg.mock_script);
    nlohmann::json script;
    try {
      in >> script;
    } catch (const nlohmann::json::exception& e) {
      throw vge::ConfigError("mock script is not valid JSON: " + std::string(e.what()));
    }
    return std::make_unique<vge::MockBackend>(script);
  }
  return std::make_unique<vge::HttpBackend>(http, vge::make_httplib_transport(http));
}

void write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw vge::IoError("cannot write " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw vge::IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

vge::JudgeOptions judge_options(const vge::RunConfig& cfg) {
  vge::JudgeOptions options;
  options.frame_count = cfg.frame_sample_count;
  options.downsample = cfg.downsample_frames;
  return options;
}

// --- subcommand bodies ------------------------------------------------------

int cmd_structure(const vge::RunConfig& cfg) {
  if (cfg.paths.prompts.empty()) throw vge::ConfigError("structure: paths.prompts not set");
  std::vector<vge::BatchTask> tasks =
      vge::load_batch_manifest(cfg.paths.prompts, cfg.task_mode);
  if (tasks.empty()) return vge::kExitNoInputs;
  std::unique_ptr<vge::ChatBackend> backend = make_backend(cfg, cfg.structurer);
  fs::path out_dir = fs::path(cfg.paths.output_dir) / "prompts";
  fs::create_directories(out_dir);
  int failures = 0;
  for (const vge::BatchTask& task : tasks) {
    try {
      vge::StructureResult result = vge::structure_prompt(
          task.raw_prompt, task.task_mode, task.reference_image.value_or(std::string()),
          *backend);
      nlohmann::json doc = vge::prompt_to_json(result.prompt);
      doc["video_id"] = task.video_id;
      doc["model_id"] = task.model_id;
      std::ofstream out(out_dir / (task.video_id + ".json"));
      out << doc.dump(2) << "\n";
      std::cerr << "structured " << task.video_id << " (" << result.retries << " retries)\n";
    } catch (const vge::Error& e) {
      std::cerr << "error: " << task.video_id << ": " << e.what() << "\n";
      ++failures;
    }
  }
  return failures == 0 ? vge::kExitOk : vge::kExitPartialFailure;
}

int cmd_expand(const vge::RunConfig& cfg, const std::string& raw, const std::string& file,
               const std::string& output) {
  std::string prompt = raw;
  if (prompt.empty() && !file.empty()) prompt = read_text(file);
  while (!prompt.empty() && (prompt.back() == '\n' || prompt.back() == '\r')) prompt.pop_back();
  if (prompt.empty()) return vge::kExitNoInputs;
  std::unique_ptr<vge::ChatBackend> backend = make_backend(cfg, cfg.structurer);
  std::string expanded = vge::expand_prompt(prompt, *backend);
  write_output(expanded + "\n", output);
  return vge::kExitOk;
}

int cmd_tools(const vge::RunConfig& cfg, const std::string& video_dir,
              const std::string& output) {
  vge::Video video = vge::load_video(video_dir);
  std::vector<vge::ToolReport> reports = vge::compute_tool_reports(video, cfg);
  nlohmann::json doc = nlohmann::json::array();
  for (const vge::ToolReport& report : reports) doc.push_back(vge::tool_report_to_json(report));
  write_output(doc.dump(2) + "\n", output);
  return vge::kExitOk;
}

int cmd_judge(const vge::RunConfig& cfg) {
  if (cfg.paths.prompts.empty()) throw vge::ConfigError("judge: paths.prompts not set");
  if (cfg.paths.videos_root.empty()) throw vge::ConfigError("judge: paths.videos_root not set");
  std::vector<vge::BatchTask> tasks =
      vge::load_batch_manifest(cfg.paths.prompts, cfg.task_mode);
  std::unique_ptr<vge::ChatBackend> judger = make_backend(cfg, cfg.judger);
  std::unique_ptr<vge::ChatBackend> structurer;
  vge::ChatBackend* structurer_ptr = nullptr;
  bool needs_structurer = false;
  for (const vge::BatchTask& task : tasks) {
    if (!task.dimensions) needs_structurer = true;
  }
  if (needs_structurer) {
    // The mock backend serves both roles from one script.
    if (cfg.backend_kind == "mock") {
      structurer_ptr = judger.get();
    } else {
      structurer = make_backend(cfg, cfg.structurer);
      structurer_ptr = structurer.get();
    }
  }
  vge::BatchOutcome outcome =
      vge::run_batch(tasks, cfg, structurer_ptr, *judger, judge_options(cfg));
  std::cerr << "judge: " << outcome.completed << " completed, " << outcome.failed
            << " failed, " << outcome.skipped << " skipped\n";
  return outcome.exit_code;
}

int cmd_align(const std::string& records_path, const std::string& annotations_path,
              const std::string& output) {
  std::vector<vge::EvaluationRecord> records = vge::load_records(records_path);
  std::vector<vge::AnnotationRecord> annotations = vge::load_annotations(annotations_path);
  vge::AlignmentReport report = vge::compute_alignment(records, annotations);
  write_output(vge::alignment_to_json(report).dump(2) + "\n", output);
  return vge::kExitOk;
}

int cmd_rank(const std::string& records_path, const std::string& output) {
  std::vector<vge::EvaluationRecord> records = vge::load_records(records_path);
  vge::ScoreBoard board = vge::compute_scoreboard(records);
  write_output(vge::scoreboard_to_json(board).dump(2) + "\n", output);
  return vge::kExitOk;
}

int cmd_report(const std::string& alignment_path, const std::string& scoreboard_path,
               const std::string& format, const std::string& output) {
  vge::AlignmentReport report =
      vge::alignment_from_json(nlohmann::json::parse(read_text(alignment_path)));
  vge::ScoreBoard board =
      vge::scoreboard_from_json(nlohmann::json::parse(read_text(scoreboard_path)));
  write_output(vge::render_report(report, board, format), output);
  return vge::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vge: agent-based evaluation of generated videos"};
  app.require_subcommand(1);
  GlobalArgs globals;
  app.add_option("--config", globals.config_path, "run configuration JSON file");
  app.add_option("--backend", globals.backend, "chat backend kind")
      ->check(CLI::IsMember({"real", "mock"}));
  app.add_option("--mock-script", globals.mock_script, "mock backend script file");
  app.add_option("--workers", globals.workers, "worker thread count");
  app.add_option("--seed", globals.seed, "RNG seed (homography RANSAC)");
  app.add_flag("--force", globals.force, "re-evaluate videos that already have records");
  app.add_option("--segment-agg", globals.segment_agg, "segment aggregation")
      ->check(CLI::IsMember({"mean", "max"}));
  app.fallthrough();

  CLI::App* structure = app.add_subcommand("structure", "decompose raw prompts into dimensions");

  CLI::App* expand = app.add_subcommand("expand", "expand a terse prompt");
  std::string expand_raw, expand_file, expand_out;
  expand->add_option("prompt", expand_raw, "raw prompt text");
  expand->add_option("--prompt-file", expand_file, "read the raw prompt from a file");
  expand->add_option("-o,--output", expand_out, "output file (default stdout)");

  CLI::App* tools = app.add_subcommand("tools", "run patch tools on one video");
  std::string tools_dir, tools_out;
  tools->add_option("video_dir", tools_dir, "video frame directory")->required();
  tools->add_option("-o,--output", tools_out, "output file (default stdout)");

  CLI::App* judge = app.add_subcommand("judge", "batch-evaluate every manifest video");

  CLI::App* align = app.add_subcommand("align", "compare records against human annotations");
  std::string align_records, align_annotations, align_out;
  align->add_option("--records", align_records, "records dir, index.jsonl, or record file");
  align->add_option("--annotations", align_annotations, "annotation JSON file");
  align->add_option("-o,--output", align_out, "output file (default stdout)");

  CLI::App* rank = app.add_subcommand("rank", "compute the model scoreboard");
  std::string rank_records, rank_out;
  rank->add_option("--records", rank_records, "records dir, index.jsonl, or record file");
  rank->add_option("-o,--output", rank_out, "output file (default stdout)");

  CLI::App* report = app.add_subcommand("report", "render alignment + scoreboard");
  std::string report_alignment, report_scoreboard, report_out;
  std::string report_format = "markdown";
  report->add_option("--alignment", report_alignment, "alignment_report.json")->required();
  report->add_option("--scoreboard", report_scoreboard, "scoreboard.json")->required();
  report->add_option("--format", report_format, "json|csv|markdown")
      ->check(CLI::IsMember({"json", "csv", "markdown", "md"}));
  report->add_option("-o,--output", report_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return vge::kExitConfigError;
  }

  try {
    if (structure->parsed()) return cmd_structure(make_config(globals));
    if (expand->parsed()) {
      return cmd_expand(make_config(globals), expand_raw, expand_file, expand_out);
    }
    if (tools->parsed()) return cmd_tools(make_config(globals), tools_dir, tools_out);
    if (judge->parsed()) return cmd_judge(make_config(globals));
    if (align->parsed()) {
      vge::RunConfig cfg = make_config(globals);
      if (align_records.empty()) align_records = cfg.paths.output_dir + "/index.jsonl";
      if (align_annotations.empty()) align_annotations = cfg.paths.annotations;
      if (align_annotations.empty()) throw vge::ConfigError("align: no annotations given");
      return cmd_align(align_records, align_annotations, align_out);
    }
    if (rank->parsed()) {
      vge::RunConfig cfg = make_config(globals);
      if (rank_records.empty()) rank_records = cfg.paths.output_dir + "/index.jsonl";
      return cmd_rank(rank_records, rank_out);
    }
    if (report->parsed()) {
      return cmd_report(report_alignment, report_scoreboard, report_format, report_out);
    }
  } catch (const vge::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return vge::kExitConfigError;
  } catch (const vge::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return vge::kExitConfigError;
}
