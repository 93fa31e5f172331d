#include "vge/alignment.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace {

using vge::AlignmentReport;
using vge::AnnotationEntry;
using vge::AnnotationRecord;
using vge::DimensionId;
using vge::EvaluationRecord;
using vge::Judgment;
using vge::RankEntry;
using vge::ReportFormat;
using vge::ScoreBoard;
using vge::Verdict;

Judgment judgment(DimensionId dim, Verdict verdict) {
  Judgment j;
  j.dimension = dim;
  j.verdict = verdict;
  if (verdict != Verdict::kYes) j.reason = "observed mismatch";
  return j;
}

EvaluationRecord record(const std::string& video, const std::string& model,
                        std::vector<Judgment> judgments) {
  EvaluationRecord rec;
  rec.video_id = video;
  rec.model_id = model;
  rec.judgments = std::move(judgments);
  return rec;
}

AnnotationRecord annotation(const std::string& video,
                            std::vector<std::pair<DimensionId, Verdict>> verdicts) {
  AnnotationRecord rec;
  rec.video_id = video;
  for (const auto& [dim, verdict] : verdicts) {
    AnnotationEntry entry;
    entry.verdict = verdict;
    if (verdict != Verdict::kYes) entry.explanation = "human disagreed";
    rec.dimensions[dim] = entry;
  }
  return rec;
}

// Five overlapping cells with weights {1, 1, 1, 0.5, 0} (mean 0.7), one
// judged-only cell and one annotated-only cell for the coverage appendix.
std::vector<EvaluationRecord> worked_records() {
  return {
      record("v1", "alpha",
             {judgment(DimensionId::kCameraMotion, Verdict::kYes),
              judgment(DimensionId::kBackground, Verdict::kNo)}),
      record("v2", "alpha",
             {judgment(DimensionId::kCameraMotion, Verdict::kHalf),
              judgment(DimensionId::kBackground, Verdict::kHalf)}),
      record("v3", "beta",
             {judgment(DimensionId::kCameraMotion, Verdict::kYes),
              judgment(DimensionId::kStyle, Verdict::kYes)}),
  };
}

std::vector<AnnotationRecord> worked_annotations() {
  return {
      annotation("v1", {{DimensionId::kCameraMotion, Verdict::kYes},
                        {DimensionId::kBackground, Verdict::kNo}}),
      annotation("v2", {{DimensionId::kCameraMotion, Verdict::kHalf},
                        {DimensionId::kBackground, Verdict::kYes}}),
      annotation("v3", {{DimensionId::kCameraMotion, Verdict::kNo}}),
      annotation("v4", {{DimensionId::kLighting, Verdict::kYes}}),
  };
}

TEST(AlignmentWeight, FullTable) {
  const Verdict verdicts[] = {Verdict::kYes, Verdict::kHalf, Verdict::kNo};
  for (Verdict v : verdicts) EXPECT_EQ(vge::alignment_weight(v, v), 1.0);

  EXPECT_EQ(vge::alignment_weight(Verdict::kHalf, Verdict::kYes), 0.5);
  EXPECT_EQ(vge::alignment_weight(Verdict::kYes, Verdict::kHalf), 0.5);

  EXPECT_EQ(vge::alignment_weight(Verdict::kYes, Verdict::kNo), 0.0);
  EXPECT_EQ(vge::alignment_weight(Verdict::kNo, Verdict::kYes), 0.0);
  EXPECT_EQ(vge::alignment_weight(Verdict::kHalf, Verdict::kNo), 0.0);
  EXPECT_EQ(vge::alignment_weight(Verdict::kNo, Verdict::kHalf), 0.0);
}

TEST(ComputeAlignment, WorkedExampleAveragesToPointSeven) {
  AlignmentReport report = vge::compute_alignment(worked_records(), worked_annotations());

  EXPECT_EQ(report.overall.count, 5);
  EXPECT_DOUBLE_EQ(report.overall.sum, 3.5);
  EXPECT_DOUBLE_EQ(report.overall.mean(), 0.7);

  ASSERT_EQ(report.cells.size(), 5u);
  // Sorted by (model, video, dimension); camera_motion precedes background.
  EXPECT_EQ(report.cells[0].video_id, "v1");
  EXPECT_EQ(report.cells[0].dimension, DimensionId::kCameraMotion);
  EXPECT_EQ(report.cells[0].weight, 1.0);
  EXPECT_EQ(report.cells[1].video_id, "v1");
  EXPECT_EQ(report.cells[1].dimension, DimensionId::kBackground);
  EXPECT_EQ(report.cells[1].weight, 1.0);
  EXPECT_EQ(report.cells[3].video_id, "v2");
  EXPECT_EQ(report.cells[3].dimension, DimensionId::kBackground);
  EXPECT_EQ(report.cells[3].weight, 0.5);
  EXPECT_EQ(report.cells[4].model_id, "beta");
  EXPECT_EQ(report.cells[4].agent, Verdict::kYes);
  EXPECT_EQ(report.cells[4].human, Verdict::kNo);
  EXPECT_EQ(report.cells[4].weight, 0.0);

  EXPECT_DOUBLE_EQ(report.model_overall.at("alpha").mean(), 0.875);
  EXPECT_DOUBLE_EQ(report.model_overall.at("beta").mean(), 0.0);
  EXPECT_DOUBLE_EQ(report.dimension_overall.at(DimensionId::kCameraMotion).mean(), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(report.dimension_overall.at(DimensionId::kBackground).mean(), 0.75);
  EXPECT_DOUBLE_EQ(
      report.model_dimension.at("alpha").at(DimensionId::kCameraMotion).mean(), 1.0);
  EXPECT_DOUBLE_EQ(
      report.model_dimension.at("alpha").at(DimensionId::kBackground).mean(), 0.75);

  EXPECT_EQ(report.unmatched_records, std::vector<std::string>{"v3/style"});
  EXPECT_EQ(report.unmatched_annotations, std::vector<std::string>{"v4/lighting"});
}

TEST(ComputeAlignment, PermutationInvariant) {
  const AlignmentReport base = vge::compute_alignment(worked_records(), worked_annotations());
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<EvaluationRecord> records = worked_records();
    std::vector<AnnotationRecord> annotations = worked_annotations();
    std::shuffle(records.begin(), records.end(), rng);
    std::shuffle(annotations.begin(), annotations.end(), rng);
    EXPECT_EQ(vge::compute_alignment(records, annotations), base);
  }
}

TEST(ComputeAlignment, EmptyJoinThrows) {
  std::vector<EvaluationRecord> records = {
      record("v1", "alpha", {judgment(DimensionId::kStyle, Verdict::kYes)})};
  std::vector<AnnotationRecord> annotations = {
      annotation("v2", {{DimensionId::kStyle, Verdict::kYes}})};
  EXPECT_THROW(vge::compute_alignment(records, annotations), vge::EmptyJoin);
  EXPECT_THROW(vge::compute_alignment({}, {}), vge::EmptyJoin);
}

TEST(ComputeAlignment, RejectsDuplicateCells) {
  // The same (video, dimension) judged twice, even across models.
  std::vector<EvaluationRecord> twice = {
      record("v1", "alpha", {judgment(DimensionId::kStyle, Verdict::kYes)}),
      record("v1", "beta", {judgment(DimensionId::kStyle, Verdict::kNo)})};
  std::vector<AnnotationRecord> annotations = {
      annotation("v1", {{DimensionId::kStyle, Verdict::kYes}})};
  EXPECT_THROW(vge::compute_alignment(twice, annotations), vge::DuplicateDimension);

  std::vector<EvaluationRecord> records = {
      record("v1", "alpha", {judgment(DimensionId::kStyle, Verdict::kYes)})};
  std::vector<AnnotationRecord> dup_annotations = {
      annotation("v1", {{DimensionId::kStyle, Verdict::kYes}}),
      annotation("v1", {{DimensionId::kStyle, Verdict::kNo}})};
  EXPECT_THROW(vge::compute_alignment(records, dup_annotations), vge::DuplicateDimension);
}

TEST(RankModels, CompetitionRankingSharesAndSkips) {
  std::vector<RankEntry> ranking = vge::rank_models(
      {{"a", 0.5}, {"b", 0.9}, {"c", 0.5}, {"d", 0.1}});
  ASSERT_EQ(ranking.size(), 4u);
  EXPECT_EQ(ranking[0], (RankEntry{"b", 0.9, 1, false}));
  EXPECT_EQ(ranking[1], (RankEntry{"a", 0.5, 2, true}));
  EXPECT_EQ(ranking[2], (RankEntry{"c", 0.5, 2, true}));
  EXPECT_EQ(ranking[3], (RankEntry{"d", 0.1, 4, false}));
}

ScoreBoard tie_board() {
  // alpha: camera mean 1.0, background 0.5 -> overall 0.75
  // beta:  camera mean 0.5, background 1.0 -> overall 0.75 (tie)
  // gamma: camera mean 0.0                 -> overall 0.0
  // delta: no judgments                    -> skipped
  std::vector<EvaluationRecord> records = {
      record("v1", "alpha",
             {judgment(DimensionId::kCameraMotion, Verdict::kYes),
              judgment(DimensionId::kBackground, Verdict::kHalf)}),
      record("v2", "alpha", {judgment(DimensionId::kCameraMotion, Verdict::kYes)}),
      record("v3", "beta",
             {judgment(DimensionId::kCameraMotion, Verdict::kHalf),
              judgment(DimensionId::kBackground, Verdict::kYes)}),
      record("v4", "gamma", {judgment(DimensionId::kCameraMotion, Verdict::kNo)}),
      record("v5", "delta", {}),
  };
  return vge::compute_scoreboard(records);
}

TEST(ComputeScoreboard, MeansRankingsAndTies) {
  ScoreBoard board = tie_board();

  EXPECT_DOUBLE_EQ(
      board.model_dimension.at("alpha").at(DimensionId::kCameraMotion).mean(), 1.0);
  EXPECT_EQ(board.model_dimension.at("alpha").at(DimensionId::kCameraMotion).count, 2);
  EXPECT_DOUBLE_EQ(
      board.model_dimension.at("alpha").at(DimensionId::kBackground).mean(), 0.5);
  EXPECT_DOUBLE_EQ(board.model_overall.at("alpha"), 0.75);
  EXPECT_DOUBLE_EQ(board.model_overall.at("beta"), 0.75);
  EXPECT_DOUBLE_EQ(board.model_overall.at("gamma"), 0.0);

  ASSERT_EQ(board.overall_ranking.size(), 3u);
  EXPECT_EQ(board.overall_ranking[0], (RankEntry{"alpha", 0.75, 1, true}));
  EXPECT_EQ(board.overall_ranking[1], (RankEntry{"beta", 0.75, 1, true}));
  EXPECT_EQ(board.overall_ranking[2], (RankEntry{"gamma", 0.0, 3, false}));

  const auto& camera = board.dimension_rankings.at(DimensionId::kCameraMotion);
  ASSERT_EQ(camera.size(), 3u);
  EXPECT_EQ(camera[0], (RankEntry{"alpha", 1.0, 1, false}));
  EXPECT_EQ(camera[1], (RankEntry{"beta", 0.5, 2, false}));
  EXPECT_EQ(camera[2], (RankEntry{"gamma", 0.0, 3, false}));
  const auto& background = board.dimension_rankings.at(DimensionId::kBackground);
  ASSERT_EQ(background.size(), 2u);
  EXPECT_EQ(background[0].model_id, "beta");

  EXPECT_EQ(board.skipped_models, std::vector<std::string>{"delta"});
}

TEST(ComputeScoreboard, RejectsEmptyInput) {
  EXPECT_THROW(vge::compute_scoreboard({}), vge::EmptyInput);
  EXPECT_THROW(vge::compute_scoreboard({record("v1", "alpha", {})}), vge::EmptyInput);
}

std::vector<RankEntry> as_ranking(const std::vector<std::pair<std::string, int>>& ranks) {
  std::vector<RankEntry> out;
  for (const auto& [model, rank] : ranks) out.push_back({model, 0.0, rank, false});
  return out;
}

TEST(RankCorrelation, HandExamples) {
  std::vector<std::string> order = {"a", "b", "c", "d"};
  EXPECT_DOUBLE_EQ(vge::rank_correlation(order, order), 1.0);

  std::vector<std::string> reversed = {"d", "c", "b", "a"};
  EXPECT_DOUBLE_EQ(vge::rank_correlation(order, reversed), -1.0);

  // Swapping one adjacent pair flips 1 of 6 pairs: tau = (5 - 1) / 6.
  std::vector<std::string> swapped = {"a", "c", "b", "d"};
  EXPECT_DOUBLE_EQ(vge::rank_correlation(order, swapped), 2.0 / 3.0);
}

TEST(RankCorrelation, TiesUseTauB) {
  // a: b and c tied at rank 2; b: strict order. Of the 6 pairs one is tied
  // in a only, the other 5 are concordant: tau-b = 5 / sqrt(6 * 5).
  std::vector<RankEntry> with_tie = as_ranking({{"a", 1}, {"b", 2}, {"c", 2}, {"d", 4}});
  std::vector<RankEntry> strict = as_ranking({{"a", 1}, {"b", 2}, {"c", 3}, {"d", 4}});
  EXPECT_DOUBLE_EQ(vge::rank_correlation(with_tie, strict), 5.0 / std::sqrt(30.0));
  EXPECT_DOUBLE_EQ(vge::rank_correlation(strict, with_tie), 5.0 / std::sqrt(30.0));

  // Fully tied on both sides counts as identical rankings.
  std::vector<RankEntry> flat = as_ranking({{"a", 1}, {"b", 1}, {"c", 1}});
  EXPECT_DOUBLE_EQ(vge::rank_correlation(flat, flat), 1.0);
}

TEST(RankCorrelation, RejectsMismatchedSets) {
  std::vector<std::string> order = {"a", "b", "c"};
  EXPECT_THROW(vge::rank_correlation(order, {"a", "b"}), vge::MismatchedSets);
  EXPECT_THROW(vge::rank_correlation(order, {"a", "b", "x"}), vge::MismatchedSets);
  EXPECT_THROW(vge::rank_correlation(std::vector<std::string>{}, {}), vge::MismatchedSets);

  std::vector<RankEntry> dup_a = as_ranking({{"a", 1}, {"a", 2}, {"b", 3}});
  std::vector<RankEntry> ok = as_ranking({{"a", 1}, {"b", 2}, {"c", 3}});
  EXPECT_THROW(vge::rank_correlation(dup_a, ok), vge::MismatchedSets);
  EXPECT_THROW(vge::rank_correlation(ok, dup_a), vge::MismatchedSets);
}

TEST(AlignmentSerialization, RoundTripsExactly) {
  AlignmentReport report = vge::compute_alignment(worked_records(), worked_annotations());
  nlohmann::json doc = vge::alignment_to_json(report);
  EXPECT_EQ(doc.at("format_version"), 1);
  EXPECT_EQ(vge::alignment_from_json(doc), report);

  // Serialized means are recomputed, never trusted, on the way back in.
  EXPECT_DOUBLE_EQ(doc.at("overall").at("mean").get<double>(), 0.7);
}

TEST(AlignmentSerialization, RejectsBadDocuments) {
  EXPECT_THROW(vge::alignment_from_json(nlohmann::json::array()), vge::MalformedJson);
  EXPECT_THROW(vge::alignment_from_json({{"format_version", 2}}), vge::MalformedJson);

  AlignmentReport report = vge::compute_alignment(worked_records(), worked_annotations());
  nlohmann::json doc = vge::alignment_to_json(report);
  doc.erase("cells");
  EXPECT_THROW(vge::alignment_from_json(doc), vge::MalformedJson);
}

TEST(ScoreboardSerialization, RoundTripsExactly) {
  ScoreBoard board = tie_board();
  nlohmann::json doc = vge::scoreboard_to_json(board);
  EXPECT_EQ(doc.at("format_version"), 1);
  EXPECT_EQ(vge::scoreboard_from_json(doc), board);
}

TEST(ScoreboardSerialization, RejectsBadDocuments) {
  EXPECT_THROW(vge::scoreboard_from_json(nlohmann::json{{"format_version", 0}}),
               vge::MalformedJson);
  ScoreBoard board = tie_board();
  nlohmann::json doc = vge::scoreboard_to_json(board);
  doc.at("rankings").erase("overall");
  EXPECT_THROW(vge::scoreboard_from_json(doc), vge::MalformedJson);
}

TEST(RenderReport, JsonEmbedsBothDocuments) {
  AlignmentReport report = vge::compute_alignment(worked_records(), worked_annotations());
  ScoreBoard board = vge::compute_scoreboard(worked_records());
  std::string rendered = vge::render_report(report, board, ReportFormat::kJson);
  ASSERT_FALSE(rendered.empty());
  EXPECT_EQ(rendered.back(), '\n');

  nlohmann::json doc = nlohmann::json::parse(rendered);
  EXPECT_EQ(doc.at("format_version"), 1);
  EXPECT_EQ(vge::alignment_from_json(doc.at("alignment")), report);
  EXPECT_EQ(vge::scoreboard_from_json(doc.at("scoreboard")), board);
}

TEST(RenderReport, CsvExactBytes) {
  AlignmentReport report = vge::compute_alignment(worked_records(), worked_annotations());
  ScoreBoard board = vge::compute_scoreboard(worked_records());
  std::string expected =
      "model,dimension,mean_score,score_samples,alignment_ratio,aligned_samples\n"
      "alpha,camera_motion,0.7500,2,1.0000,2\n"
      "alpha,background,0.2500,2,0.7500,2\n"
      "beta,camera_motion,1.0000,1,0.0000,1\n"
      "beta,style,1.0000,1,,\n";
  EXPECT_EQ(vge::render_report(report, board, "csv"), expected);
}

TEST(RenderReport, MarkdownTablesAndCoverage) {
  AlignmentReport report = vge::compute_alignment(worked_records(), worked_annotations());
  ScoreBoard board = vge::compute_scoreboard(worked_records());
  std::string rendered = vge::render_report(report, board, ReportFormat::kMarkdown);

  EXPECT_NE(rendered.find("# Evaluation report"), std::string::npos);
  EXPECT_NE(rendered.find("Overall alignment ratio: 0.7000 over 5 cells."),
            std::string::npos);
  EXPECT_NE(rendered.find("| alpha | 0.8750 | 1.0000 | 0.7500 | - |"), std::string::npos);
  EXPECT_NE(rendered.find("| (all models) | 0.7000 | 0.6667 | 0.7500 | - |"),
            std::string::npos);
  EXPECT_NE(rendered.find("Judged but not annotated: `v3/style`"), std::string::npos);
  EXPECT_NE(rendered.find("Annotated but not judged: `v4/lighting`"), std::string::npos);
  EXPECT_NE(rendered.find("| 1 | beta | 1.0000 | 1.0000 | - | 1.0000 |"),
            std::string::npos);
  EXPECT_NE(rendered.find("| 2 | alpha | 0.5000 | 0.7500 | 0.2500 | - |"),
            std::string::npos);
}

TEST(RenderReport, MarkdownMarksTiesAndSkippedModels) {
  AlignmentReport report = vge::compute_alignment(worked_records(), worked_annotations());
  ScoreBoard board = tie_board();
  std::string rendered = vge::render_report(report, board, "markdown");
  EXPECT_NE(rendered.find("| 1= | alpha | 0.7500 |"), std::string::npos);
  EXPECT_NE(rendered.find("| 1= | beta | 0.7500 |"), std::string::npos);
  EXPECT_NE(rendered.find("| 3 | gamma | 0.0000 |"), std::string::npos);
  EXPECT_NE(rendered.find("Models without judgments: `delta`"), std::string::npos);
}

TEST(RenderReport, DeterministicUnderInputShuffles) {
  AlignmentReport base_report =
      vge::compute_alignment(worked_records(), worked_annotations());
  ScoreBoard base_board = vge::compute_scoreboard(worked_records());
  const std::string json = vge::render_report(base_report, base_board, "json");
  const std::string csv = vge::render_report(base_report, base_board, "csv");
  const std::string md = vge::render_report(base_report, base_board, "markdown");

  std::mt19937 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<EvaluationRecord> records = worked_records();
    std::vector<AnnotationRecord> annotations = worked_annotations();
    std::shuffle(records.begin(), records.end(), rng);
    std::shuffle(annotations.begin(), annotations.end(), rng);
    AlignmentReport report = vge::compute_alignment(records, annotations);
    ScoreBoard board = vge::compute_scoreboard(records);
    EXPECT_EQ(vge::render_report(report, board, "json"), json);
    EXPECT_EQ(vge::render_report(report, board, "csv"), csv);
    EXPECT_EQ(vge::render_report(report, board, "markdown"), md);
  }
}

TEST(RenderReport, ParsesFormatNames) {
  EXPECT_EQ(vge::parse_report_format("json"), ReportFormat::kJson);
  EXPECT_EQ(vge::parse_report_format("csv"), ReportFormat::kCsv);
  EXPECT_EQ(vge::parse_report_format("markdown"), ReportFormat::kMarkdown);
  EXPECT_EQ(vge::parse_report_format("md"), ReportFormat::kMarkdown);
  EXPECT_THROW(vge::parse_report_format("xml"), vge::UnknownFormat);
}

}  // namespace
