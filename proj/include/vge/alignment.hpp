#pragma once

// Agent-vs-human alignment, model scoreboards, and report rendering.
// Alignment joins evaluation records with human annotations on
// (video_id, dimension) and averages per-cell weights; the scoreboard
// averages numeric verdicts per model and dimension and ranks models.
// All aggregates are permutation-invariant: weights and verdicts are
// multiples of 0.5, so the sums are exact in binary.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vge/errors.hpp"
#include "vge/schema.hpp"

namespace vge {

// 1 on exact agreement; 0.5 when one side says half and the other yes;
// everything else (including the equally-distant {no, half}) is misaligned.
inline double alignment_weight(Verdict agent, Verdict human) {
  if (agent == human) return 1.0;
  if ((agent == Verdict::kHalf && human == Verdict::kYes) ||
      (agent == Verdict::kYes && human == Verdict::kHalf)) {
    return 0.5;
  }
  return 0.0;
}

struct MeanStat {
  double sum = 0.0;
  int count = 0;

  double mean() const { return count > 0 ? sum / count : 0.0; }
  void add(double v) {
    sum += v;
    ++count;
  }
  bool operator==(const MeanStat&) const = default;
};

struct AlignmentCell {
  std::string video_id;
  std::string model_id;
  DimensionId dimension = DimensionId::kCameraMotion;
  Verdict agent = Verdict::kYes;
  Verdict human = Verdict::kYes;
  double weight = 0.0;

  bool operator==(const AlignmentCell&) const = default;
};

struct AlignmentReport {
  std::map<std::string, std::map<DimensionId, MeanStat>> model_dimension;
  std::map<std::string, MeanStat> model_overall;
  std::map<DimensionId, MeanStat> dimension_overall;
  MeanStat overall;
  std::vector<AlignmentCell> cells;  // sorted by (model, video, dimension)
  // Coverage appendix, entries formatted "<video_id>/<dimension>".
  std::vector<std::string> unmatched_records;
  std::vector<std::string> unmatched_annotations;

  bool operator==(const AlignmentReport&) const = default;
};

inline std::string coverage_key(const std::string& video_id, DimensionId dim) {
  std::string key = video_id + "/";
  key += to_string(dim);
  return key;
}

// Joins judged cells with annotated cells. Unmatched cells on either side
// land in the coverage appendix rather than being silently dropped.
inline AlignmentReport compute_alignment(const std::vector<EvaluationRecord>& records,
                                         const std::vector<AnnotationRecord>& annotations) {
  std::map<std::pair<std::string, DimensionId>, Verdict> human;
  for (const AnnotationRecord& rec : annotations) {
    for (const auto& [dim, entry] : rec.dimensions) {
      auto key = std::make_pair(rec.video_id, dim);
      if (human.count(key)) {
        throw DuplicateDimension("duplicate annotation for " +
                                 coverage_key(rec.video_id, dim));
      }
      human.emplace(key, entry.verdict);
    }
  }

  AlignmentReport report;
  std::set<std::pair<std::string, DimensionId>> judged;
  for (const EvaluationRecord& rec : records) {
    for (const Judgment& judgment : rec.judgments) {
      auto key = std::make_pair(rec.video_id, judgment.dimension);
      if (!judged.insert(key).second) {
        throw DuplicateDimension("duplicate judged cell for " +
                                 coverage_key(rec.video_id, judgment.dimension));
      }
      auto it = human.find(key);
      if (it == human.end()) {
        report.unmatched_records.push_back(coverage_key(rec.video_id, judgment.dimension));
        continue;
      }
      AlignmentCell cell;
      cell.video_id = rec.video_id;
      cell.model_id = rec.model_id;
      cell.dimension = judgment.dimension;
      cell.agent = judgment.verdict;
      cell.human = it->second;
      cell.weight = alignment_weight(cell.agent, cell.human);
      report.cells.push_back(std::move(cell));
    }
  }
  for (const auto& [key, verdict] : human) {
    (void)verdict;
    if (!judged.count(key)) {
      report.unmatched_annotations.push_back(coverage_key(key.first, key.second));
    }
  }
  if (report.cells.empty()) throw EmptyJoin("no overlapping (video, dimension) cells");

  std::sort(report.cells.begin(), report.cells.end(), [](const auto& a, const auto& b) {
    return std::tie(a.model_id, a.video_id, a.dimension) <
           std::tie(b.model_id, b.video_id, b.dimension);
  });
  std::sort(report.unmatched_records.begin(), report.unmatched_records.end());
  std::sort(report.unmatched_annotations.begin(), report.unmatched_annotations.end());

  for (const AlignmentCell& cell : report.cells) {
    report.model_dimension[cell.model_id][cell.dimension].add(cell.weight);
    report.model_overall[cell.model_id].add(cell.weight);
    report.dimension_overall[cell.dimension].add(cell.weight);
    report.overall.add(cell.weight);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Scoreboard
// ---------------------------------------------------------------------------

struct RankEntry {
  std::string model_id;
  double score = 0.0;
  int rank = 0;  // competition ranking: ties share a rank, the next skips
  bool tied = false;

  bool operator==(const RankEntry&) const = default;
};

struct ScoreBoard {
  std::map<std::string, std::map<DimensionId, MeanStat>> model_dimension;
  std::map<std::string, double> model_overall;  // unweighted mean of dimension means
  std::vector<RankEntry> overall_ranking;
  std::map<DimensionId, std::vector<RankEntry>> dimension_rankings;
  std::vector<std::string> skipped_models;  // models with no judged cells

  bool operator==(const ScoreBoard&) const = default;
};

// Descending scores, ties broken lexicographically and marked as tied.
inline std::vector<RankEntry> rank_models(std::vector<std::pair<std::string, double>> scores) {
  std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<RankEntry> ranking;
  for (size_t i = 0; i < scores.size(); ++i) {
    RankEntry entry;
    entry.model_id = scores[i].first;
    entry.score = scores[i].second;
    entry.rank = static_cast<int>(i) + 1;
    if (i > 0 && scores[i].second == scores[i - 1].second) {
      entry.rank = ranking.back().rank;
      entry.tied = true;
      ranking.back().tied = true;
    }
    ranking.push_back(std::move(entry));
  }
  return ranking;
}

inline ScoreBoard compute_scoreboard(const std::vector<EvaluationRecord>& records) {
  if (records.empty()) throw EmptyInput("compute_scoreboard: no records");
  ScoreBoard board;
  std::set<std::string> all_models;
  for (const EvaluationRecord& rec : records) {
    all_models.insert(rec.model_id);
    for (const Judgment& judgment : rec.judgments) {
      board.model_dimension[rec.model_id][judgment.dimension].add(numeric(judgment.verdict));
    }
  }
  for (const std::string& model : all_models) {
    if (!board.model_dimension.count(model)) board.skipped_models.push_back(model);
  }
  if (board.model_dimension.empty()) {
    throw EmptyInput("compute_scoreboard: no records carry judgments");
  }

  std::vector<std::pair<std::string, double>> overall_scores;
  for (const auto& [model, dims] : board.model_dimension) {
    double sum = 0.0;
    for (const auto& [dim, stat] : dims) {
      (void)dim;
      sum += stat.mean();
    }
    double overall = sum / static_cast<double>(dims.size());
    board.model_overall[model] = overall;
    overall_scores.emplace_back(model, overall);
  }
  board.overall_ranking = rank_models(std::move(overall_scores));

  std::map<DimensionId, std::vector<std::pair<std::string, double>>> per_dim;
  for (const auto& [model, dims] : board.model_dimension) {
    for (const auto& [dim, stat] : dims) per_dim[dim].emplace_back(model, stat.mean());
  }
  for (auto& [dim, scores] : per_dim) {
    board.dimension_rankings[dim] = rank_models(std::move(scores));
  }
  return board;
}

// ---------------------------------------------------------------------------
// Rank correlation (Kendall tau-b)
// ---------------------------------------------------------------------------

inline double rank_correlation(const std::vector<RankEntry>& a,
                               const std::vector<RankEntry>& b) {
  if (a.empty() || a.size() != b.size()) {
    throw MismatchedSets("rank_correlation: rankings differ in size");
  }
  std::map<std::string, int> rank_b;
  for (const RankEntry& entry : b) {
    if (!rank_b.emplace(entry.model_id, entry.rank).second) {
      throw MismatchedSets("rank_correlation: duplicate model in ranking");
    }
  }
  std::vector<std::pair<int, int>> pairs;
  std::set<std::string> seen;
  for (const RankEntry& entry : a) {
    if (!seen.insert(entry.model_id).second) {
      throw MismatchedSets("rank_correlation: duplicate model in ranking");
    }
    auto it = rank_b.find(entry.model_id);
    if (it == rank_b.end()) {
      throw MismatchedSets("rank_correlation: model sets differ (" + entry.model_id + ")");
    }
    pairs.emplace_back(entry.rank, it->second);
  }

  long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    for (size_t j = i + 1; j < pairs.size(); ++j) {
      int da = pairs[i].first - pairs[j].first;
      int db = pairs[i].second - pairs[j].second;
      if (da == 0 && db == 0) continue;  // tied in both: excluded from all terms
      if (da == 0) {
        ++ties_a;
      } else if (db == 0) {
        ++ties_b;
      } else if ((da > 0) == (db > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  double denom = std::sqrt(static_cast<double>(concordant + discordant + ties_a) *
                           static_cast<double>(concordant + discordant + ties_b));
  if (denom == 0.0) return 1.0;  // all pairs tied on both sides: identical rankings
  return static_cast<double>(concordant - discordant) / denom;
}

// Convenience overload for tie-free orderings (first = best).
inline double rank_correlation(const std::vector<std::string>& a,
                               const std::vector<std::string>& b) {
  auto to_entries = [](const std::vector<std::string>& order) {
    std::vector<RankEntry> entries;
    for (size_t i = 0; i < order.size(); ++i) {
      entries.push_back({order[i], 0.0, static_cast<int>(i) + 1, false});
    }
    return entries;
  };
  return rank_correlation(to_entries(a), to_entries(b));
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace aligndetail {

using nlohmann::json;

inline json stat_to_json(const MeanStat& stat) {
  return json{{"sum", stat.sum}, {"count", stat.count}, {"mean", stat.mean()}};
}

inline MeanStat stat_from_json(const json& doc) {
  MeanStat stat;
  stat.sum = doc.at("sum").get<double>();
  stat.count = doc.at("count").get<int>();
  return stat;
}

inline json rank_to_json(const std::vector<RankEntry>& ranking) {
  json out = json::array();
  for (const RankEntry& entry : ranking) {
    out.push_back({{"model_id", entry.model_id},
                   {"score", entry.score},
                   {"rank", entry.rank},
                   {"tied", entry.tied}});
  }
  return out;
}

inline std::vector<RankEntry> rank_from_json(const json& doc) {
  std::vector<RankEntry> ranking;
  for (const json& item : doc) {
    RankEntry entry;
    entry.model_id = item.at("model_id").get<std::string>();
    entry.score = item.at("score").get<double>();
    entry.rank = item.at("rank").get<int>();
    entry.tied = item.at("tied").get<bool>();
    ranking.push_back(std::move(entry));
  }
  return ranking;
}

}  // namespace aligndetail

inline nlohmann::json alignment_to_json(const AlignmentReport& report) {
  using nlohmann::json;
  json models = json::object();
  for (const auto& [model, dims] : report.model_dimension) {
    json dim_obj = json::object();
    for (const auto& [dim, stat] : dims) {
      dim_obj[std::string(to_string(dim))] = aligndetail::stat_to_json(stat);
    }
    models[model] = {{"overall", aligndetail::stat_to_json(report.model_overall.at(model))},
                     {"dimensions", std::move(dim_obj)}};
  }
  json dims = json::object();
  for (const auto& [dim, stat] : report.dimension_overall) {
    dims[std::string(to_string(dim))] = aligndetail::stat_to_json(stat);
  }
  json cells = json::array();
  for (const AlignmentCell& cell : report.cells) {
    cells.push_back({{"video_id", cell.video_id},
                     {"model_id", cell.model_id},
                     {"dimension", std::string(to_string(cell.dimension))},
                     {"agent", verdict_to_json(cell.agent)},
                     {"human", verdict_to_json(cell.human)},
                     {"weight", cell.weight}});
  }
  return json{{"format_version", 1},
              {"overall", aligndetail::stat_to_json(report.overall)},
              {"models", std::move(models)},
              {"dimensions", std::move(dims)},
              {"cells", std::move(cells)},
              {"coverage",
               {{"unmatched_records", report.unmatched_records},
                {"unmatched_annotations", report.unmatched_annotations}}}};
}

inline AlignmentReport alignment_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format_version", 0) != 1) {
    throw MalformedJson("alignment report: missing or unsupported format_version");
  }
  AlignmentReport report;
  try {
    report.overall = aligndetail::stat_from_json(doc.at("overall"));
    for (const auto& [model, body] : doc.at("models").items()) {
      report.model_overall[model] = aligndetail::stat_from_json(body.at("overall"));
      for (const auto& [dim, stat] : body.at("dimensions").items()) {
        report.model_dimension[model][parse_dimension(dim)] =
            aligndetail::stat_from_json(stat);
      }
    }
    for (const auto& [dim, stat] : doc.at("dimensions").items()) {
      report.dimension_overall[parse_dimension(dim)] = aligndetail::stat_from_json(stat);
    }
    for (const nlohmann::json& item : doc.at("cells")) {
      AlignmentCell cell;
      cell.video_id = item.at("video_id").get<std::string>();
      cell.model_id = item.at("model_id").get<std::string>();
      cell.dimension = parse_dimension(item.at("dimension").get<std::string>());
      cell.agent = verdict_from_numeric(item.at("agent").get<double>());
      cell.human = verdict_from_numeric(item.at("human").get<double>());
      cell.weight = item.at("weight").get<double>();
      report.cells.push_back(std::move(cell));
    }
    const nlohmann::json& coverage = doc.at("coverage");
    report.unmatched_records =
        coverage.at("unmatched_records").get<std::vector<std::string>>();
    report.unmatched_annotations =
        coverage.at("unmatched_annotations").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedJson(std::string("alignment report: ") + e.what());
  }
  return report;
}

inline nlohmann::json scoreboard_to_json(const ScoreBoard& board) {
  using nlohmann::json;
  json models = json::object();
  for (const auto& [model, dims] : board.model_dimension) {
    json dim_obj = json::object();
    for (const auto& [dim, stat] : dims) {
      dim_obj[std::string(to_string(dim))] = aligndetail::stat_to_json(stat);
    }
    models[model] = {{"overall", board.model_overall.at(model)},
                     {"dimensions", std::move(dim_obj)}};
  }
  json dim_ranks = json::object();
  for (const auto& [dim, ranking] : board.dimension_rankings) {
    dim_ranks[std::string(to_string(dim))] = aligndetail::rank_to_json(ranking);
  }
  return json{{"format_version", 1},
              {"models", std::move(models)},
              {"rankings",
               {{"overall", aligndetail::rank_to_json(board.overall_ranking)},
                {"dimensions", std::move(dim_ranks)}}},
              {"skipped_models", board.skipped_models}};
}

inline ScoreBoard scoreboard_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format_version", 0) != 1) {
    throw MalformedJson("scoreboard: missing or unsupported format_version");
  }
  ScoreBoard board;
  try {
    for (const auto& [model, body] : doc.at("models").items()) {
      board.model_overall[model] = body.at("overall").get<double>();
      for (const auto& [dim, stat] : body.at("dimensions").items()) {
        board.model_dimension[model][parse_dimension(dim)] =
            aligndetail::stat_from_json(stat);
      }
    }
    board.overall_ranking = aligndetail::rank_from_json(doc.at("rankings").at("overall"));
    for (const auto& [dim, ranking] : doc.at("rankings").at("dimensions").items()) {
      board.dimension_rankings[parse_dimension(dim)] = aligndetail::rank_from_json(ranking);
    }
    board.skipped_models = doc.at("skipped_models").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedJson(std::string("scoreboard: ") + e.what());
  }
  return board;
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

enum class ReportFormat { kJson, kCsv, kMarkdown };

inline ReportFormat parse_report_format(const std::string& name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  throw UnknownFormat("unknown report format '" + name + "'");
}

namespace aligndetail {

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// Dimensions that appear anywhere in the report or board, in enum order.
inline std::vector<DimensionId> used_dimensions(const AlignmentReport& report,
                                                const ScoreBoard& board) {
  std::set<DimensionId> used;
  for (const auto& [dim, stat] : report.dimension_overall) {
    (void)stat;
    used.insert(dim);
  }
  for (const auto& [model, dims] : board.model_dimension) {
    (void)model;
    for (const auto& [dim, stat] : dims) {
      (void)stat;
      used.insert(dim);
    }
  }
  std::vector<DimensionId> out;
  for (DimensionId dim : kAllDimensions) {
    if (used.count(dim)) out.push_back(dim);
  }
  return out;
}

inline std::string render_csv(const AlignmentReport& report, const ScoreBoard& board) {
  std::set<std::pair<std::string, DimensionId>> keys;
  for (const auto& [model, dims] : report.model_dimension) {
    for (const auto& [dim, stat] : dims) {
      (void)stat;
      keys.insert({model, dim});
    }
  }
  for (const auto& [model, dims] : board.model_dimension) {
    for (const auto& [dim, stat] : dims) {
      (void)stat;
      keys.insert({model, dim});
    }
  }
  std::string out = "model,dimension,mean_score,score_samples,alignment_ratio,aligned_samples\n";
  for (const auto& [model, dim] : keys) {
    out += model + ",";
    out += to_string(dim);
    auto mit = board.model_dimension.find(model);
    const MeanStat* score =
        mit != board.model_dimension.end() && mit->second.count(dim) ? &mit->second.at(dim)
                                                                     : nullptr;
    auto ait = report.model_dimension.find(model);
    const MeanStat* ratio =
        ait != report.model_dimension.end() && ait->second.count(dim) ? &ait->second.at(dim)
                                                                      : nullptr;
    out += score ? "," + fixed4(score->mean()) + "," + std::to_string(score->count) : ",,";
    out += ratio ? "," + fixed4(ratio->mean()) + "," + std::to_string(ratio->count) : ",,";
    out += "\n";
  }
  return out;
}

inline std::string render_markdown(const AlignmentReport& report, const ScoreBoard& board) {
  std::vector<DimensionId> dims = used_dimensions(report, board);
  std::string out = "# Evaluation report\n\n## Agent-human alignment\n\n";
  out += "Overall alignment ratio: " + fixed4(report.overall.mean()) + " over " +
         std::to_string(report.overall.count) + " cells.\n\n";
  out += "| model | overall |";
  for (DimensionId dim : dims) {
    out += " ";
    out += to_string(dim);
    out += " |";
  }
  out += "\n|---|---|";
  for (size_t i = 0; i < dims.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& [model, dim_stats] : report.model_dimension) {
    out += "| " + model + " | " + fixed4(report.model_overall.at(model).mean()) + " |";
    for (DimensionId dim : dims) {
      auto it = dim_stats.find(dim);
      out += it != dim_stats.end() ? " " + fixed4(it->second.mean()) + " |" : " - |";
    }
    out += "\n";
  }
  out += "| (all models) | " + fixed4(report.overall.mean()) + " |";
  for (DimensionId dim : dims) {
    auto it = report.dimension_overall.find(dim);
    out += it != report.dimension_overall.end() ? " " + fixed4(it->second.mean()) + " |"
                                                : " - |";
  }
  out += "\n";

  if (!report.unmatched_records.empty() || !report.unmatched_annotations.empty()) {
    out += "\n### Coverage\n\n";
    if (!report.unmatched_records.empty()) {
      out += "Judged but not annotated:";
      for (const std::string& key : report.unmatched_records) out += " `" + key + "`";
      out += "\n";
    }
    if (!report.unmatched_annotations.empty()) {
      out += "Annotated but not judged:";
      for (const std::string& key : report.unmatched_annotations) out += " `" + key + "`";
      out += "\n";
    }
  }

  out += "\n## Scoreboard\n\n| rank | model | overall |";
  for (DimensionId dim : dims) {
    out += " ";
    out += to_string(dim);
    out += " |";
  }
  out += "\n|---|---|---|";
  for (size_t i = 0; i < dims.size(); ++i) out += "---|";
  out += "\n";
  for (const RankEntry& entry : board.overall_ranking) {
    out += "| " + std::to_string(entry.rank) + (entry.tied ? "=" : "") + " | " +
           entry.model_id + " | " + fixed4(entry.score) + " |";
    const auto& dim_stats = board.model_dimension.at(entry.model_id);
    for (DimensionId dim : dims) {
      auto it = dim_stats.find(dim);
      out += it != dim_stats.end() ? " " + fixed4(it->second.mean()) + " |" : " - |";
    }
    out += "\n";
  }
  if (!board.skipped_models.empty()) {
    out += "\nModels without judgments:";
    for (const std::string& model : board.skipped_models) out += " `" + model + "`";
    out += "\n";
  }
  return out;
}

}  // namespace aligndetail

// Deterministic bytes for fixed inputs in every format. The JSON form embeds
// the same documents written by `align` and `rank` and round-trips through
// alignment_from_json / scoreboard_from_json.
inline std::string render_report(const AlignmentReport& report, const ScoreBoard& board,
                                 ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson: {
      nlohmann::json doc{{"format_version", 1},
                         {"alignment", alignment_to_json(report)},
                         {"scoreboard", scoreboard_to_json(board)}};
      return doc.dump(2) + "\n";
    }
    case ReportFormat::kCsv:
      return aligndetail::render_csv(report, board);
    case ReportFormat::kMarkdown:
      return aligndetail::render_markdown(report, board);
  }
  throw UnknownFormat("unhandled report format");
}

inline std::string render_report(const AlignmentReport& report, const ScoreBoard& board,
                                 const std::string& format) {
  return render_report(report, board, parse_report_format(format));
}

}  // namespace vge
