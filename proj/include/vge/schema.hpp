#pragma once

// Persisted data shapes shared by the whole pipeline: structured prompts,
// verdicts, tool reports, annotations and evaluation records, with their
// JSON representations. Everything here is immutable after construction and
// safe to share across worker threads.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vge/errors.hpp"

namespace vge {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Dimensions
// ---------------------------------------------------------------------------

enum class DimensionId : int {
  kCameraMotion = 0,
  kBackground,
  kCategoryQuantity,
  kAppearance,
  kExpression,
  kSpatialRelation,
  kInteraction,
  kMotionDetail,
  kStyle,
  kLighting,
};

inline constexpr int kDimensionCount = 10;

inline constexpr std::array<DimensionId, kDimensionCount> kAllDimensions = {
    DimensionId::kCameraMotion,    DimensionId::kBackground,
    DimensionId::kCategoryQuantity, DimensionId::kAppearance,
    DimensionId::kExpression,      DimensionId::kSpatialRelation,
    DimensionId::kInteraction,     DimensionId::kMotionDetail,
    DimensionId::kStyle,           DimensionId::kLighting,
};

// Dimensions evaluated for image-to-video inputs; everything else is already
// pinned down by the conditioning image.
inline constexpr std::array<DimensionId, 3> kMotionDimensions = {
    DimensionId::kCameraMotion,
    DimensionId::kInteraction,
    DimensionId::kMotionDetail,
};

inline std::string_view to_string(DimensionId id) {
  switch (id) {
    case DimensionId::kCameraMotion: return "camera_motion";
    case DimensionId::kBackground: return "background";
    case DimensionId::kCategoryQuantity: return "category_quantity";
    case DimensionId::kAppearance: return "appearance";
    case DimensionId::kExpression: return "expression";
    case DimensionId::kSpatialRelation: return "spatial_relation";
    case DimensionId::kInteraction: return "interaction";
    case DimensionId::kMotionDetail: return "motion_detail";
    case DimensionId::kStyle: return "style";
    case DimensionId::kLighting: return "lighting";
  }
  throw Error("invalid DimensionId");
}

// Closed set: any string other than the ten snake_case names is an error.
inline DimensionId parse_dimension(std::string_view name) {
  for (DimensionId id : kAllDimensions) {
    if (to_string(id) == name) return id;
  }
  throw UnknownDimension("unknown dimension: '" + std::string(name) + "'");
}

inline bool is_dimension_name(std::string_view name) {
  for (DimensionId id : kAllDimensions) {
    if (to_string(id) == name) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

enum class Verdict : int { kYes, kHalf, kNo };

inline double numeric(Verdict v) {
  switch (v) {
    case Verdict::kYes: return 1.0;
    case Verdict::kHalf: return 0.5;
    case Verdict::kNo: return 0.0;
  }
  throw Error("invalid Verdict");
}

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kYes: return "yes";
    case Verdict::kHalf: return "half";
    case Verdict::kNo: return "no";
  }
  throw Error("invalid Verdict");
}

// Accepts the closed yes/half/no vocabulary, case-insensitively.
inline Verdict parse_verdict_word(std::string_view word) {
  std::string lower(word);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "yes") return Verdict::kYes;
  if (lower == "half") return Verdict::kHalf;
  if (lower == "no") return Verdict::kNo;
  throw UnknownAnswer("unknown answer: '" + std::string(word) + "'");
}

inline Verdict verdict_from_numeric(double score) {
  if (score == 1.0) return Verdict::kYes;
  if (score == 0.5) return Verdict::kHalf;
  if (score == 0.0) return Verdict::kNo;
  throw MalformedJson("verdict score must be 0, 0.5 or 1");
}

// Serialized as a JSON numeric: integral 0/1 for no/yes, 0.5 for half.
inline json verdict_to_json(Verdict v) {
  switch (v) {
    case Verdict::kYes: return json(1);
    case Verdict::kHalf: return json(0.5);
    case Verdict::kNo: return json(0);
  }
  throw Error("invalid Verdict");
}

// ---------------------------------------------------------------------------
// Structured prompts
// ---------------------------------------------------------------------------

enum class TaskMode { kT2V, kI2V };

inline std::string_view to_string(TaskMode m) {
  return m == TaskMode::kT2V ? "t2v" : "i2v";
}

inline TaskMode parse_task_mode(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "t2v") return TaskMode::kT2V;
  if (lower == "i2v") return TaskMode::kI2V;
  throw MalformedJson("task_mode must be 't2v' or 'i2v', got '" + std::string(text) + "'");
}

namespace detail {

inline std::string trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto begin = s.find_first_not_of(ws);
  if (begin == std::string_view::npos) return "";
  auto end = s.find_last_not_of(ws);
  return std::string(s.substr(begin, end - begin + 1));
}

}  // namespace detail

// The ten-dimension decomposition of one raw generation prompt. A null entry
// means the prompt gave no instruction for that dimension, which is distinct
// from an (invalid) empty instruction.
struct StructuredPrompt {
  std::string raw_prompt;
  TaskMode task_mode = TaskMode::kT2V;
  std::optional<std::string> reference_image;
  std::array<std::optional<std::string>, kDimensionCount> dimensions;

  const std::optional<std::string>& content(DimensionId id) const {
    return dimensions[static_cast<int>(id)];
  }
  void set_content(DimensionId id, std::optional<std::string> text) {
    dimensions[static_cast<int>(id)] = std::move(text);
  }
  int active_count() const {
    int n = 0;
    for (const auto& d : dimensions) n += d.has_value();
    return n;
  }

  bool operator==(const StructuredPrompt&) const = default;
};

inline void check_prompt_invariants(const StructuredPrompt& prompt) {
  if (prompt.active_count() == 0) {
    throw EmptyPrompt("structured prompt has no dimension content");
  }
  for (DimensionId id : kAllDimensions) {
    const auto& c = prompt.content(id);
    if (c && detail::trim(*c).empty()) {
      throw MalformedJson("dimension '" + std::string(to_string(id)) +
                          "' must be non-empty text or null");
    }
  }
  if (prompt.task_mode == TaskMode::kI2V &&
      (!prompt.reference_image || prompt.reference_image->empty())) {
    throw MissingReferenceImage("i2v prompt requires reference_image");
  }
}

inline json prompt_to_json(const StructuredPrompt& prompt) {
  json dims = json::object();
  for (DimensionId id : kAllDimensions) {
    const auto& c = prompt.content(id);
    dims[std::string(to_string(id))] = c ? json(*c) : json(nullptr);
  }
  json out = {
      {"raw_prompt", prompt.raw_prompt},
      {"task_mode", std::string(to_string(prompt.task_mode))},
      {"dimensions", dims},
  };
  if (prompt.reference_image) out["reference_image"] = *prompt.reference_image;
  return out;
}

namespace detail {

inline json parse_json_text(const std::string& text) {
  json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw MalformedJson("input is not valid JSON");
  return doc;
}

// Reads one {dimension_id: text|null, ...} object into the prompt. Unknown
// keys are a hard error; absent keys stay null.
inline void read_dimension_map(const json& dims, StructuredPrompt* prompt) {
  if (!dims.is_object()) throw MalformedJson("'dimensions' must be an object");
  for (const auto& [key, value] : dims.items()) {
    DimensionId id = parse_dimension(key);
    if (value.is_null()) {
      prompt->set_content(id, std::nullopt);
    } else if (value.is_string()) {
      std::string text = trim(value.get<std::string>());
      if (text.empty()) {
        throw MalformedJson("dimension '" + key + "' must be non-empty text or null");
      }
      prompt->set_content(id, std::move(text));
    } else {
      throw MalformedJson("dimension '" + key + "' must be text or null");
    }
  }
}

}  // namespace detail

// Validates a structured-prompt document. Two layouts are accepted:
//  - the per-video file layout with a "dimensions" object plus prompt
//    metadata (raw_prompt, task_mode, reference_image, video_id, model_id);
//  - the bare layout produced by the content structurer, whose top-level
//    keys are exactly dimension ids.
// Unknown keys are rejected in both layouts.
inline StructuredPrompt validate_structured_prompt(const std::string& document) {
  json doc = detail::parse_json_text(document);
  if (!doc.is_object()) throw MalformedJson("prompt document must be a JSON object");

  StructuredPrompt prompt;
  if (doc.contains("dimensions")) {
    static const std::array<std::string_view, 6> kKnown = {
        "video_id", "model_id", "task_mode", "raw_prompt", "reference_image", "dimensions"};
    for (const auto& [key, value] : doc.items()) {
      (void)value;
      if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end()) {
        throw MalformedJson("unknown top-level key '" + key + "'");
      }
    }
    if (doc.contains("raw_prompt")) {
      if (!doc["raw_prompt"].is_string()) throw MalformedJson("raw_prompt must be text");
      prompt.raw_prompt = doc["raw_prompt"].get<std::string>();
    }
    if (doc.contains("task_mode")) {
      if (!doc["task_mode"].is_string()) throw MalformedJson("task_mode must be text");
      prompt.task_mode = parse_task_mode(doc["task_mode"].get<std::string>());
    }
    if (doc.contains("reference_image") && !doc["reference_image"].is_null()) {
      if (!doc["reference_image"].is_string()) {
        throw MalformedJson("reference_image must be text");
      }
      prompt.reference_image = doc["reference_image"].get<std::string>();
    }
    detail::read_dimension_map(doc["dimensions"], &prompt);
  } else {
    // Bare structurer output: every key must itself be a dimension id.
    detail::read_dimension_map(doc, &prompt);
  }

  check_prompt_invariants(prompt);
  return prompt;
}

// Ordered list of dimensions the judger should evaluate for this prompt.
// T2V judges every instructed dimension; I2V restricts to the motion set.
inline std::vector<DimensionId> select_dimensions(const StructuredPrompt& prompt) {
  std::vector<DimensionId> out;
  if (prompt.task_mode == TaskMode::kT2V) {
    for (DimensionId id : kAllDimensions) {
      if (prompt.content(id)) out.push_back(id);
    }
  } else {
    for (DimensionId id : kMotionDimensions) {
      if (prompt.content(id)) out.push_back(id);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Judgments and tool reports
// ---------------------------------------------------------------------------

struct Judgment {
  DimensionId dimension = DimensionId::kCameraMotion;
  Verdict verdict = Verdict::kYes;
  std::string reason;

  bool operator==(const Judgment&) const = default;
};

inline void check_judgment_invariants(const Judgment& j) {
  if (j.verdict != Verdict::kYes && detail::trim(j.reason).empty()) {
    throw MalformedOutput("verdict '" + std::string(to_string(j.verdict)) +
                          "' for dimension '" + std::string(to_string(j.dimension)) +
                          "' requires a reason");
  }
}

struct Band {
  double upper_bound = 0.0;  // inclusive; +inf sentinel on the last band
  std::string label;
  std::string description;

  bool operator==(const Band&) const = default;
};

// Ordered score ranges with quality labels; the last band's bound is +inf so
// every raw score maps to exactly one label.
struct BandTable {
  std::vector<Band> bands;

  void validate() const {
    if (bands.empty()) throw EmptyTable("band table has no bands");
    for (size_t i = 1; i < bands.size(); ++i) {
      if (!(bands[i].upper_bound > bands[i - 1].upper_bound)) {
        throw MalformedJson("band bounds must be strictly increasing");
      }
    }
    if (bands.back().upper_bound != std::numeric_limits<double>::infinity()) {
      throw MalformedJson("last band bound must be +inf");
    }
  }

  const Band& band_for(double raw) const {
    for (const Band& b : bands) {
      if (raw <= b.upper_bound) return b;
    }
    return bands.back();  // unreachable once validated
  }

  bool operator==(const BandTable&) const = default;
};

struct ToolReport {
  std::string tool_name;
  double raw_score = 0.0;
  std::string band;
  std::vector<std::string> flags;
  // Attached so the judger prompt can describe the score scale; not part of
  // the serialized report (the table is configuration).
  BandTable band_table;

  bool operator==(const ToolReport& other) const {
    return tool_name == other.tool_name && raw_score == other.raw_score &&
           band == other.band && flags == other.flags;
  }
};

inline json tool_report_to_json(const ToolReport& r) {
  return json{{"tool_name", r.tool_name},
              {"raw_score", r.raw_score},
              {"band", r.band},
              {"flags", r.flags}};
}

inline ToolReport tool_report_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("tool_name") || !doc.contains("raw_score") ||
      !doc.contains("band")) {
    throw MalformedJson("tool report requires tool_name, raw_score and band");
  }
  ToolReport r;
  r.tool_name = doc.at("tool_name").get<std::string>();
  r.raw_score = doc.at("raw_score").get<double>();
  r.band = doc.at("band").get<std::string>();
  if (doc.contains("flags")) r.flags = doc.at("flags").get<std::vector<std::string>>();
  return r;
}

// ---------------------------------------------------------------------------
// Evaluation records
// ---------------------------------------------------------------------------

struct EvaluationRecord {
  std::string video_id;
  std::string model_id;
  StructuredPrompt structured_prompt;
  std::vector<Judgment> judgments;
  std::vector<ToolReport> tool_reports;
  std::string created_at;          // ISO-8601 UTC
  std::string structurer_backend;  // "<backend>:<model>"; empty if pre-structured
  std::string judger_backend;
  int structure_retries = 0;
  int judge_retries = 0;
  std::vector<std::string> flags;
  std::optional<std::string> error;  // set when judging failed; judgments empty

  bool operator==(const EvaluationRecord&) const = default;
};

inline void check_record_invariants(const EvaluationRecord& rec) {
  std::array<bool, kDimensionCount> seen{};
  for (const Judgment& j : rec.judgments) {
    int idx = static_cast<int>(j.dimension);
    if (seen[idx]) {
      throw DuplicateDimension("duplicate judgment for dimension '" +
                               std::string(to_string(j.dimension)) + "'");
    }
    seen[idx] = true;
    if (!rec.structured_prompt.content(j.dimension)) {
      throw MalformedJson("judged dimension '" + std::string(to_string(j.dimension)) +
                          "' has no prompt content");
    }
    check_judgment_invariants(j);
  }
}

inline json record_to_json(const EvaluationRecord& rec) {
  check_record_invariants(rec);
  json judgments = json::array();
  for (const Judgment& j : rec.judgments) {
    judgments.push_back({{"dimension", std::string(to_string(j.dimension))},
                         {"score", verdict_to_json(j.verdict)},
                         {"reason", j.reason}});
  }
  json reports = json::array();
  for (const ToolReport& r : rec.tool_reports) reports.push_back(tool_report_to_json(r));
  // A pipeline that failed before structuring leaves no prompt; null keeps
  // the record loadable without weakening validation of real prompts.
  json prompt = rec.structured_prompt.active_count() > 0
                    ? prompt_to_json(rec.structured_prompt)
                    : json(nullptr);
  json out = {
      {"format_version", 1},
      {"video_id", rec.video_id},
      {"model_id", rec.model_id},
      {"structured_prompt", std::move(prompt)},
      {"judgments", judgments},
      {"tool_reports", reports},
      {"created_at", rec.created_at},
      {"structurer_backend", rec.structurer_backend},
      {"judger_backend", rec.judger_backend},
      {"structure_retries", rec.structure_retries},
      {"judge_retries", rec.judge_retries},
      {"flags", rec.flags},
  };
  if (rec.error) out["error"] = *rec.error;
  return out;
}

inline EvaluationRecord record_from_json(const json& doc) {
  if (!doc.is_object()) throw MalformedJson("record must be a JSON object");
  EvaluationRecord rec;
  try {
    rec.video_id = doc.at("video_id").get<std::string>();
    rec.model_id = doc.at("model_id").get<std::string>();
    if (!doc.at("structured_prompt").is_null()) {
      rec.structured_prompt = validate_structured_prompt(doc.at("structured_prompt").dump());
    }
    for (const json& j : doc.at("judgments")) {
      Judgment judgment;
      judgment.dimension = parse_dimension(j.at("dimension").get<std::string>());
      judgment.verdict = verdict_from_numeric(j.at("score").get<double>());
      judgment.reason = j.value("reason", std::string());
      rec.judgments.push_back(std::move(judgment));
    }
    for (const json& r : doc.at("tool_reports")) {
      rec.tool_reports.push_back(tool_report_from_json(r));
    }
    rec.created_at = doc.value("created_at", std::string());
    rec.structurer_backend = doc.value("structurer_backend", std::string());
    rec.judger_backend = doc.value("judger_backend", std::string());
    rec.structure_retries = doc.value("structure_retries", 0);
    rec.judge_retries = doc.value("judge_retries", 0);
    if (doc.contains("flags")) rec.flags = doc.at("flags").get<std::vector<std::string>>();
    if (doc.contains("error")) rec.error = doc.at("error").get<std::string>();
  } catch (const json::exception& e) {
    throw MalformedJson(std::string("malformed evaluation record: ") + e.what());
  }
  check_record_invariants(rec);
  return rec;
}

inline EvaluationRecord parse_record(const std::string& text) {
  return record_from_json(detail::parse_json_text(text));
}

// ---------------------------------------------------------------------------
// Human annotations
// ---------------------------------------------------------------------------

struct AnnotationEntry {
  Verdict verdict = Verdict::kYes;
  std::optional<std::string> explanation;

  bool operator==(const AnnotationEntry&) const = default;
};

struct AnnotationRecord {
  std::string video_id;
  std::string model_id;
  std::map<DimensionId, AnnotationEntry> dimensions;

  bool operator==(const AnnotationRecord&) const = default;
};

inline void check_annotation_invariants(const AnnotationRecord& rec) {
  for (const auto& [dim, entry] : rec.dimensions) {
    if (entry.verdict != Verdict::kYes &&
        (!entry.explanation || detail::trim(*entry.explanation).empty())) {
      throw MalformedJson("annotation for '" + rec.video_id + "' dimension '" +
                          std::string(to_string(dim)) +
                          "' scored below 1 requires an explanation");
    }
  }
}

inline json annotation_to_json(const AnnotationRecord& rec) {
  json dims = json::object();
  for (const auto& [dim, entry] : rec.dimensions) {
    json cell = {{"score", verdict_to_json(entry.verdict)}};
    if (entry.explanation) cell["explanation"] = *entry.explanation;
    dims[std::string(to_string(dim))] = cell;
  }
  return json{{"video_id", rec.video_id}, {"model_id", rec.model_id}, {"dimensions", dims}};
}

inline AnnotationRecord annotation_from_json(const json& doc) {
  AnnotationRecord rec;
  try {
    rec.video_id = doc.at("video_id").get<std::string>();
    rec.model_id = doc.at("model_id").get<std::string>();
    for (const auto& [key, cell] : doc.at("dimensions").items()) {
      DimensionId dim = parse_dimension(key);
      AnnotationEntry entry;
      entry.verdict = verdict_from_numeric(cell.at("score").get<double>());
      if (cell.contains("explanation")) {
        entry.explanation = cell.at("explanation").get<std::string>();
      }
      rec.dimensions[dim] = std::move(entry);
    }
  } catch (const json::exception& e) {
    throw MalformedJson(std::string("malformed annotation record: ") + e.what());
  }
  check_annotation_invariants(rec);
  return rec;
}

// Annotation files hold a JSON array of per-video records.
inline std::vector<AnnotationRecord> parse_annotations(const std::string& text) {
  json doc = detail::parse_json_text(text);
  if (!doc.is_array()) throw MalformedJson("annotation file must be a JSON array");
  std::vector<AnnotationRecord> out;
  out.reserve(doc.size());
  for (const json& item : doc) out.push_back(annotation_from_json(item));
  return out;
}

}  // namespace vge
