#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shortlens/absa.hpp"
#include "shortlens/aspect_linking.hpp"
#include "shortlens/corpus_store.hpp"
#include "shortlens/date.hpp"
#include "shortlens/scenes.hpp"
#include "shortlens/util.hpp"

namespace shortlens {

/// Stable identity of an aspect row, used to join rows with predictions.
std::string row_key(const AspectRow& row);

/// An aspect row and its predicted label; `label` is empty when the row
/// never reached the classifier.
struct LabeledRow {
  AspectRow row;
  std::optional<SentimentLabel> label;
};

/// video_id -> record, rejecting duplicates.
std::map<std::string, const VideoRecord*> index_records(std::span<const VideoRecord> records);

// ---------------------------------------------------------------------------

struct AspectSentimentTable {
  // outlet code -> group -> counts. Every group is present for every outlet.
  std::map<std::string, std::map<AspectGroup, LabelCounts>> cells;

  LabelCounts overall(std::string_view outlet) const;
  const LabelCounts& at(std::string_view outlet, AspectGroup group) const;

  /// outlet,group,negative,neutral,positive,total with an Overall row per outlet.
  std::string to_csv() const;
};

/// Every outlet in `records` gets a (possibly all-zero) block. Throws
/// IncompleteInputError for unlabeled rows and IntegrityError for rows
/// whose video is not in the manifest.
AspectSentimentTable aspect_sentiment_table(std::span<const LabeledRow> rows, std::span<const VideoRecord> records);

// ---------------------------------------------------------------------------

/// Plurality label; any tie for the top count resolves to neutral.
/// Throws PreconditionError on an empty list.
SentimentLabel video_polarity(std::span<const SentimentLabel> labels);

/// video_id -> polarity for every video with at least one labeled row.
std::map<std::string, SentimentLabel> video_polarities(std::span<const LabeledRow> rows);

struct PolaritySummary {
  LabelCounts counts;
  double non_neutral_pct = 0.0;  // 1-decimal
};

PolaritySummary polarity_summary(std::span<const SentimentLabel> video_labels);

/// Per outlet, plus an "Overall" entry.
std::map<std::string, PolaritySummary> polarity_by_outlet(const std::map<std::string, SentimentLabel>& polarities,
                                                          std::span<const VideoRecord> records);

std::string polarity_csv(const std::map<std::string, PolaritySummary>& by_outlet);

// ---------------------------------------------------------------------------

struct MonthlyTrend {
  // Sparse: only (month, group) pairs with at least one row.
  std::map<std::pair<YearMonth, AspectGroup>, LabelCounts> buckets;
  std::vector<std::string> excluded_videos;

  /// Share of `label` in the bucket; 0 for an absent bucket.
  double share(YearMonth month, AspectGroup group, SentimentLabel label) const;

  /// Long format: month,key,value with key "<group>:<label>" and share values.
  std::string to_long_csv() const;
};

/// Buckets by the upload month of each row's video. Rows whose video has
/// no manifest entry are excluded and listed.
MonthlyTrend monthly_trend(std::span<const LabeledRow> rows, std::span<const VideoRecord> records);

// ---------------------------------------------------------------------------

struct SceneDistribution {
  std::map<std::string, std::map<SceneType, std::int64_t>> cells;  // every type present per outlet
  std::map<SceneType, std::int64_t> totals;
  std::int64_t label_total = 0;
  // Denominator of the global shares: the sampled-frame total when frame
  // counts were supplied, else label_total.
  std::int64_t denominator = 0;
  std::map<std::string, std::int64_t> frame_totals;
  // Outlets whose label count differs from their sampled-frame count.
  std::vector<std::string> discrepancies;

  double share_pct(SceneType t) const;   // unrounded
  double share_pct1(SceneType t) const;  // 1-decimal

  /// scene_type, one column per outlet, total, share_pct.
  std::string to_csv() const;
};

/// Counts labels by effective type per outlet. `frame_totals` (outlet ->
/// sampled frames) sets the share denominator and enables the per-outlet
/// reconciliation check. Throws IntegrityError for unknown video ids.
SceneDistribution scene_distribution(std::span<const SceneLabel> labels, std::span<const VideoRecord> records,
                                     const std::map<std::string, std::int64_t>& frame_totals = {});

struct ShareMismatch {
  SceneType type;
  double reported = 0.0;
  double computed = 0.0;
};

/// Compares computed 1-decimal shares with externally reported ones.
std::vector<ShareMismatch> share_mismatches(const SceneDistribution& dist,
                                            const std::map<SceneType, double>& reported, double tolerance = 0.1);

struct SceneTimeline {
  std::map<YearMonth, std::map<SceneType, std::int64_t>> months;  // only non-empty months
  std::vector<std::string> excluded_videos;

  double pct(YearMonth month, SceneType t) const;  // 1-decimal

  /// Long format: month,key,value with percentages.
  std::string to_long_csv() const;
};

SceneTimeline scene_share_over_time(std::span<const SceneLabel> labels, std::span<const VideoRecord> records);

// ---------------------------------------------------------------------------

struct EngagementGroup {
  std::int64_t n = 0;
  double median_log_views = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct EngagementStats {
  std::map<std::pair<std::string, SentimentLabel>, EngagementGroup> groups;

  std::string to_csv() const;
};

double log_views(std::int64_t views);

/// Linear-interpolation quantile (R type 7) of an unsorted sample.
double quantile(std::vector<double> values, double p);

/// ln(1 + views) summaries per (outlet, polarity) for videos that have a polarity.
EngagementStats engagement_stats(std::span<const VideoRecord> records,
                                 const std::map<std::string, SentimentLabel>& polarities);

std::string corpus_stats_csv(const CorpusStats& stats);

}  // namespace shortlens
