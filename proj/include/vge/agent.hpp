#pragma once

// The evaluation agent: structures raw prompts into dimensions via a chat
// backend, builds multimodal judge requests (sampled frames + tool
// measurements), parses verdicts, and assembles EvaluationRecords. Parse
// failures are retried with an explanatory suffix; requests keep a stable
// fingerprint across retries so scripted backends can serve staged replies.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vge/chat.hpp"
#include "vge/errors.hpp"
#include "vge/frame.hpp"
#include "vge/image_io.hpp"
#include "vge/prompts.hpp"
#include "vge/schema.hpp"

namespace vge {

// Uniformly spread k indices over [0, n): round(i * (n-1) / (k-1)). Fewer
// frames than k means every frame is used.
inline std::vector<int> sample_frames(int frame_count, int k = 8) {
  if (frame_count <= 0) throw EmptyVideo("sample_frames: no frames");
  if (k <= 0) throw Error("sample_frames: k must be positive");
  std::vector<int> indices;
  if (frame_count <= k) {
    for (int i = 0; i < frame_count; ++i) indices.push_back(i);
    return indices;
  }
  if (k == 1) return {0};
  for (int i = 0; i < k; ++i) {
    indices.push_back(static_cast<int>(
        std::llround(static_cast<double>(i) * (frame_count - 1) / (k - 1))));
  }
  return indices;
}

inline std::string format_utc_timestamp(std::time_t t) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

inline std::string current_utc_timestamp() {
  return format_utc_timestamp(
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now()));
}

namespace agentdetail {

// Accepts either bare JSON or the first ```-fenced block of the reply.
inline std::string extract_json_payload(const std::string& text) {
  auto trim = [](std::string s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    size_t e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  std::string trimmed = trim(text);
  size_t fence = trimmed.find("```");
  if (fence == std::string::npos) return trimmed;
  size_t body = trimmed.find('\n', fence);
  if (body == std::string::npos) throw MalformedOutput("unterminated code fence");
  size_t close = trimmed.find("```", body);
  if (close == std::string::npos) throw MalformedOutput("unterminated code fence");
  return trim(trimmed.substr(body + 1, close - body - 1));
}

inline nlohmann::json parse_json_payload(const std::string& text) {
  try {
    return nlohmann::json::parse(extract_json_payload(text));
  } catch (const nlohmann::json::exception& e) {
    throw MalformedOutput(std::string("reply is not valid JSON: ") + e.what());
  }
}

}  // namespace agentdetail

// ---------------------------------------------------------------------------
// Structuring and expansion
// ---------------------------------------------------------------------------

struct StructureResult {
  StructuredPrompt prompt;
  int retries = 0;
};

// Asks the backend to decompose the raw prompt, validates the reply against
// the closed dimension set, and retries with an error suffix on malformed
// output. Throws StructuringFailed after max_attempts.
inline StructureResult structure_prompt(const std::string& raw_prompt, TaskMode task_mode,
                                        const std::string& reference_image,
                                        ChatBackend& backend, int max_attempts = 3) {
  if (raw_prompt.empty()) throw EmptyPrompt("structure_prompt: empty raw prompt");
  if (task_mode == TaskMode::kI2V && reference_image.empty()) {
    throw MissingReferenceImage("structure_prompt: i2v requires a reference image");
  }
  if (max_attempts < 1) throw Error("structure_prompt: max_attempts must be >= 1");

  ChatRequest request;
  request.fingerprint = "structure:" + raw_prompt;
  request.messages.push_back({"system", structurer_system_prompt(), {}});
  request.messages.push_back({"user", structurer_user_prompt(raw_prompt), {}});

  std::string last_error;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    if (attempt > 0) request.messages.back().text += retry_suffix(last_error);
    std::string reply;
    try {
      reply = backend.complete(request).text;
    } catch (const BackendFailure& e) {
      throw StructuringFailed(std::string("backend failed: ") + e.what());
    }
    try {
      nlohmann::json doc = agentdetail::parse_json_payload(reply);
      StructureResult result;
      result.prompt = validate_structured_prompt(doc.dump());
      result.prompt.raw_prompt = raw_prompt;
      result.prompt.task_mode = task_mode;
      if (!reference_image.empty()) result.prompt.reference_image = reference_image;
      check_prompt_invariants(result.prompt);
      result.retries = attempt;
      return result;
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  throw StructuringFailed("no parsable structuring after " + std::to_string(max_attempts) +
                          " attempts: " + last_error);
}

// Expands a terse prompt into the five labeled sections. The reply must
// contain each label at the start of a line.
inline std::string expand_prompt(const std::string& raw_prompt, ChatBackend& backend,
                                 int max_attempts = 3) {
  if (raw_prompt.empty()) throw EmptyPrompt("expand_prompt: empty raw prompt");
  static const char* kLabels[] = {"camera:", "background:", "subject:", "style:", "lighting:"};

  ChatRequest request;
  request.fingerprint = "expand:" + raw_prompt;
  request.messages.push_back({"system", expansion_system_prompt(), {}});
  request.messages.push_back({"user", expansion_user_prompt(raw_prompt), {}});

  std::string last_error;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    if (attempt > 0) request.messages.back().text += retry_suffix(last_error);
    std::string reply;
    try {
      reply = backend.complete(request).text;
    } catch (const BackendFailure& e) {
      throw ExpansionFailed(std::string("backend failed: ") + e.what());
    }
    std::string missing;
    for (const char* label : kLabels) {
      bool found = reply.rfind(label, 0) == 0 ||
                   reply.find(std::string("\n") + label) != std::string::npos;
      if (!found) {
        missing = label;
        break;
      }
    }
    if (missing.empty()) return reply;
    last_error = "missing section '" + missing + "'";
  }
  throw ExpansionFailed("no well-formed expansion after " + std::to_string(max_attempts) +
                        " attempts: " + last_error);
}

// ---------------------------------------------------------------------------
// Judge request construction
// ---------------------------------------------------------------------------

struct JudgeOptions {
  int frame_count = 8;          // frames sampled per video
  bool downsample = false;      // halve frames until the long side fits
  int max_image_side = 512;
  int max_attempts = 3;
  std::function<std::string()> timestamp = current_utc_timestamp;
};

inline std::string dimension_list_string(const std::vector<DimensionId>& dims) {
  std::string out;
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i > 0) out += ", ";
    out += to_string(dims[i]);
  }
  return out;
}

// Assembles the multimodal judge request: captioned sampled frames in
// temporal order (for i2v the reference image comes first), the per-dimension
// requirements, and the tool measurement block. Deterministic for fixed
// inputs; the fingerprint is "judge:<video_id>:<dim,...>".
inline ChatRequest build_judge_request(const std::string& video_id,
                                       const std::vector<Frame>& frames,
                                       const StructuredPrompt& prompt,
                                       const std::vector<DimensionId>& dims,
                                       const std::vector<ToolReport>& tool_reports,
                                       const JudgeOptions& options = {}) {
  if (frames.empty()) throw EmptyVideo("build_judge_request: no frames");
  if (dims.empty()) throw NoActiveDimensions("build_judge_request: no dimensions to judge");
  for (DimensionId dim : dims) {
    if (!prompt.content(dim)) {
      std::string msg = "build_judge_request: prompt has no content for ";
      msg += to_string(dim);
      throw MissingDimension(msg);
    }
  }

  ChatRequest request;
  request.fingerprint = "judge:" + video_id + ":" + [&] {
    std::string joined;
    for (size_t i = 0; i < dims.size(); ++i) {
      if (i > 0) joined += ",";
      joined += to_string(dims[i]);
    }
    return joined;
  }();
  request.messages.push_back({"system", judge_system_prompt(), {}});

  ChatMessage user;
  user.role = "user";
  user.text = "Video: " + video_id + "\n";
  user.text += prompt.task_mode == TaskMode::kI2V
                   ? "Task: image-to-video (the first image is the reference)\n"
                   : "Task: text-to-video\n";
  user.text += "\nOriginal prompt:\n" + prompt.raw_prompt + "\n\nRequirements to judge:\n";
  for (DimensionId dim : dims) {
    user.text += "- ";
    user.text += to_string(dim);
    user.text += ": \"" + *prompt.content(dim) + "\" — " + dimension_criteria(dim) + "\n";
  }
  std::string tools = render_tool_block(tool_reports);
  if (!tools.empty()) user.text += "\n" + tools;
  user.text += "\nAnswer for exactly these dimensions: " + dimension_list_string(dims) + ".";

  auto shrink = [&](Frame f) {
    if (options.downsample) {
      while (std::max(f.width, f.height) > options.max_image_side &&
             std::min(f.width, f.height) >= 2) {
        f = half_resolution(f);
      }
    }
    return f;
  };
  if (prompt.task_mode == TaskMode::kI2V) {
    Frame ref = read_image(prompt.reference_image.value());
    user.images.push_back({"image/png", encode_png(shrink(ref)), "Reference image"});
  }
  std::vector<int> picks = sample_frames(static_cast<int>(frames.size()), options.frame_count);
  for (size_t i = 0; i < picks.size(); ++i) {
    char caption[96];
    std::snprintf(caption, sizeof(caption), "Frame %zu/%zu (video index %d)", i + 1,
                  picks.size(), picks[i]);
    user.images.push_back({"image/png", encode_png(shrink(frames[picks[i]])), caption});
  }
  request.messages.push_back(std::move(user));
  return request;
}

// ---------------------------------------------------------------------------
// Judgment parsing
// ---------------------------------------------------------------------------

// Parses the judge reply: a JSON array (optionally inside one fenced block)
// covering exactly the expected dimensions. Output follows canonical
// dimension order regardless of reply order.
inline std::vector<Judgment> parse_judgments(const std::string& text,
                                             const std::vector<DimensionId>& expected) {
  if (expected.empty()) throw NoActiveDimensions("parse_judgments: no expected dimensions");
  nlohmann::json doc = agentdetail::parse_json_payload(text);
  if (!doc.is_array()) throw MalformedOutput("judge reply must be a JSON array");

  std::vector<std::pair<DimensionId, Judgment>> found;
  for (const nlohmann::json& item : doc) {
    if (!item.is_object()) throw MalformedOutput("judge reply entries must be objects");
    if (!item.contains("dimension") || !item["dimension"].is_string()) {
      throw MalformedOutput("judge reply entry lacks a dimension");
    }
    if (!item.contains("answer") || !item["answer"].is_string()) {
      throw MalformedOutput("judge reply entry lacks an answer");
    }
    Judgment judgment;
    judgment.dimension = parse_dimension(item["dimension"].get<std::string>());
    judgment.verdict = parse_verdict_word(item["answer"].get<std::string>());
    if (item.contains("reason")) {
      if (!item["reason"].is_string()) throw MalformedOutput("judge reason must be a string");
      judgment.reason = item["reason"].get<std::string>();
    }
    check_judgment_invariants(judgment);
    for (const auto& [dim, _] : found) {
      if (dim == judgment.dimension) {
        std::string msg = "judge answered twice for ";
        msg += to_string(judgment.dimension);
        throw DuplicateDimension(msg);
      }
    }
    bool wanted = std::find(expected.begin(), expected.end(), judgment.dimension) !=
                  expected.end();
    if (!wanted) {
      std::string msg = "judge answered unrequested dimension ";
      msg += to_string(judgment.dimension);
      throw MalformedOutput(msg);
    }
    found.emplace_back(judgment.dimension, std::move(judgment));
  }
  std::vector<Judgment> ordered;
  for (DimensionId dim : kAllDimensions) {
    bool expected_here = std::find(expected.begin(), expected.end(), dim) != expected.end();
    if (!expected_here) continue;
    auto it = std::find_if(found.begin(), found.end(),
                           [dim](const auto& p) { return p.first == dim; });
    if (it == found.end()) {
      std::string msg = "judge did not answer for ";
      msg += to_string(dim);
      throw MissingDimension(msg);
    }
    ordered.push_back(std::move(it->second));
  }
  return ordered;
}

// ---------------------------------------------------------------------------
// Full judge pipeline
// ---------------------------------------------------------------------------

// Judges one video. Never throws for backend or parse trouble: the returned
// record then carries empty judgments, an error string, and a
// "judging_failed" flag, so batch runs keep an auditable row per video.
inline EvaluationRecord judge_video(const std::string& video_id, const std::string& model_id,
                                    const std::vector<Frame>& frames,
                                    const StructuredPrompt& prompt,
                                    const std::vector<ToolReport>& tool_reports,
                                    ChatBackend& backend, const JudgeOptions& options = {}) {
  EvaluationRecord record;
  record.video_id = video_id;
  record.model_id = model_id;
  record.structured_prompt = prompt;
  record.tool_reports = tool_reports;
  record.created_at = options.timestamp ? options.timestamp() : current_utc_timestamp();
  record.judger_backend = backend.name();

  std::vector<DimensionId> dims;
  try {
    dims = select_dimensions(prompt);
    ChatRequest request =
        build_judge_request(video_id, frames, prompt, dims, tool_reports, options);
    std::string last_error;
    for (int attempt = 0; attempt < std::max(1, options.max_attempts); ++attempt) {
      if (attempt > 0) request.messages.back().text += retry_suffix(last_error);
      std::string reply = backend.complete(request).text;
      try {
        record.judgments = parse_judgments(reply, dims);
        record.judge_retries = attempt;
        check_record_invariants(record);
        return record;
      } catch (const Error& e) {
        last_error = e.what();
      }
    }
    throw JudgingFailed("no parsable judgment after " +
                        std::to_string(std::max(1, options.max_attempts)) +
                        " attempts: " + last_error);
  } catch (const Error& e) {
    record.judgments.clear();
    record.error = e.what();
    record.flags.push_back("judging_failed");
    return record;
  }
}

}  // namespace vge
