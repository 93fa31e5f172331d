#pragma once

// Prompt templates for the structurer, the expander, and the judge. The
// texts are versioned as a unit: records carry kPromptVersion so runs made
// with different wording are never silently compared.

#include <cstdio>
#include <string>
#include <vector>

#include "vge/schema.hpp"

namespace vge {

inline constexpr const char* kPromptVersion = "prompts-v1";

inline std::string structurer_system_prompt() {
  return
      "You decompose text-to-video prompts into evaluation dimensions.\n"
      "The dimensions are: camera_motion, background, category_quantity, appearance, "
      "expression, spatial_relation, interaction, motion_detail, style, lighting.\n"
      "Reply with a single JSON object. Use only dimension names as keys. For every "
      "dimension the prompt explicitly constrains, copy the relevant requirement as a "
      "short self-contained phrase. Omit dimensions the prompt says nothing about. "
      "Do not invent requirements. No prose outside the JSON object.";
}

inline std::string structurer_user_prompt(const std::string& raw_prompt) {
  return "Prompt:\n" + raw_prompt;
}

inline std::string expansion_system_prompt() {
  return
      "You expand terse text-to-video prompts into detailed generation prompts.\n"
      "Reply with exactly five lines, each starting with one of these labels:\n"
      "camera: <camera framing and movement>\n"
      "background: <setting and environment>\n"
      "subject: <main subject, appearance, and action>\n"
      "style: <visual style and mood>\n"
      "lighting: <light sources and quality>\n"
      "Stay faithful to the original prompt; elaborate, never contradict.";
}

inline std::string expansion_user_prompt(const std::string& raw_prompt) {
  return "Prompt:\n" + raw_prompt;
}

inline std::string dimension_criteria(DimensionId dim) {
  switch (dim) {
    case DimensionId::kCameraMotion:
      return "Does the camera move as required (pan, zoom, orbit, static, ...)?";
    case DimensionId::kBackground:
      return "Does the setting match the required environment?";
    case DimensionId::kCategoryQuantity:
      return "Are the required object categories present in the required counts?";
    case DimensionId::kAppearance:
      return "Do subjects look as described (color, shape, clothing, ...)?";
    case DimensionId::kExpression:
      return "Do faces show the required expression or emotion?";
    case DimensionId::kSpatialRelation:
      return "Are objects positioned relative to each other as required?";
    case DimensionId::kInteraction:
      return "Do subjects interact with each other or objects as required?";
    case DimensionId::kMotionDetail:
      return "Is the required motion present, smooth, and physically plausible?";
    case DimensionId::kStyle:
      return "Does the visual style match (photorealistic, anime, watercolor, ...)?";
    case DimensionId::kLighting:
      return "Does the lighting match (time of day, light source, mood)?";
  }
  return "";
}

inline std::string judge_system_prompt() {
  return
      "You judge whether a generated video satisfies specific requirements of its "
      "prompt. You are shown uniformly sampled frames in temporal order plus automated "
      "measurement reports.\n"
      "For each requested dimension answer with one of: yes (fully satisfied), half "
      "(partially satisfied), no (not satisfied).\n"
      "Reply with a single JSON array. Each element is an object with keys "
      "\"dimension\", \"answer\", and \"reason\". Answer every requested dimension "
      "exactly once, and give a short reason whenever the answer is not yes. "
      "No prose outside the JSON array.";
}

// Stable rendering of tool measurements for the judge context. Fixed float
// formatting keeps request fingerprints byte-stable across runs.
inline std::string render_tool_block(const std::vector<ToolReport>& reports) {
  if (reports.empty()) return "";
  std::string block = "Automated measurements:\n";
  for (const ToolReport& report : reports) {
    char raw[64];
    std::snprintf(raw, sizeof(raw), "%.6f", report.raw_score);
    block += "- " + report.tool_name + ": " + raw + " (" + report.band + ")";
    for (const std::string& flag : report.flags) block += " [" + flag + "]";
    block += "\n";
  }
  return block;
}

inline std::string retry_suffix(const std::string& parse_error) {
  return "\n\nYour previous reply could not be parsed (" + parse_error +
         "). Reply again with only the requested JSON and nothing else.";
}

}  // namespace vge
