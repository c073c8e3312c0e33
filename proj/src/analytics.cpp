#include "shortlens/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "shortlens/errors.hpp"

namespace shortlens {

namespace {

std::string line(std::initializer_list<std::string> fields) {
  std::vector<std::string> v(fields);
  return csv_row(v) + "\n";
}

std::string share_str(double v) { return fmt::format("{:.4f}", v); }

void require_labels(std::span<const LabeledRow> rows) {
  std::vector<std::string> missing;
  for (const auto& r : rows)
    if (!r.label) missing.push_back(row_key(r.row));
  if (!missing.empty()) throw IncompleteInputError("aspect rows without a sentiment prediction", std::move(missing));
}

}  // namespace

std::string row_key(const AspectRow& row) {
  return fmt::format("{}#{}#{}#{}", row.video_id, row.seg_group_id, row.sent_ix, row.token_index);
}

std::map<std::string, const VideoRecord*> index_records(std::span<const VideoRecord> records) {
  std::map<std::string, const VideoRecord*> out;
  for (const auto& r : records)
    if (!out.emplace(r.video_id, &r).second) throw ConflictError("duplicate video_id " + r.video_id + " in manifest");
  return out;
}

// ---------------------------------------------------------------------------

LabelCounts AspectSentimentTable::overall(std::string_view outlet) const {
  LabelCounts sum;
  auto it = cells.find(std::string(outlet));
  if (it == cells.end()) return sum;
  for (const auto& [g, c] : it->second) sum += c;
  return sum;
}

const LabelCounts& AspectSentimentTable::at(std::string_view outlet, AspectGroup group) const {
  static const LabelCounts kZero;
  auto it = cells.find(std::string(outlet));
  if (it == cells.end()) return kZero;
  auto g = it->second.find(group);
  return g == it->second.end() ? kZero : g->second;
}

std::string AspectSentimentTable::to_csv() const {
  std::string out = line({"outlet", "group", "negative", "neutral", "positive", "total"});
  auto row = [&](const std::string& outlet, std::string_view name, const LabelCounts& c) {
    out += line({outlet, std::string(name), std::to_string(c.neg), std::to_string(c.neut), std::to_string(c.pos),
                 std::to_string(c.total())});
  };
  for (const auto& [outlet, groups] : cells) {
    for (AspectGroup g : kAllAspectGroups) row(outlet, to_string(g), at(outlet, g));
    row(outlet, "Overall", overall(outlet));
  }
  return out;
}

AspectSentimentTable aspect_sentiment_table(std::span<const LabeledRow> rows, std::span<const VideoRecord> records) {
  require_labels(rows);
  auto index = index_records(records);
  AspectSentimentTable table;
  for (const auto& r : records)
    for (AspectGroup g : kAllAspectGroups) table.cells[r.outlet.code][g];
  for (const auto& r : rows) {
    auto it = index.find(r.row.video_id);
    if (it == index.end()) throw IntegrityError("aspect row for unknown video " + r.row.video_id);
    table.cells[it->second->outlet.code][r.row.group].add(*r.label);
  }
  return table;
}

// ---------------------------------------------------------------------------

SentimentLabel video_polarity(std::span<const SentimentLabel> labels) {
  if (labels.empty()) throw PreconditionError("video polarity needs at least one prediction");
  LabelCounts c;
  for (auto l : labels) c.add(l);
  std::int64_t top = std::max({c.neg, c.neut, c.pos});
  int at_top = (c.neg == top) + (c.neut == top) + (c.pos == top);
  if (at_top > 1) return SentimentLabel::kNeutral;
  if (c.neg == top) return SentimentLabel::kNegative;
  if (c.pos == top) return SentimentLabel::kPositive;
  return SentimentLabel::kNeutral;
}

std::map<std::string, SentimentLabel> video_polarities(std::span<const LabeledRow> rows) {
  require_labels(rows);
  std::map<std::string, std::vector<SentimentLabel>> by_video;
  for (const auto& r : rows) by_video[r.row.video_id].push_back(*r.label);
  std::map<std::string, SentimentLabel> out;
  for (const auto& [id, labels] : by_video) out[id] = video_polarity(labels);
  return out;
}

PolaritySummary polarity_summary(std::span<const SentimentLabel> video_labels) {
  PolaritySummary s;
  for (auto l : video_labels) s.counts.add(l);
  s.non_neutral_pct = percent1(s.counts.neg + s.counts.pos, s.counts.total());
  return s;
}

std::map<std::string, PolaritySummary> polarity_by_outlet(const std::map<std::string, SentimentLabel>& polarities,
                                                          std::span<const VideoRecord> records) {
  auto index = index_records(records);
  std::map<std::string, std::vector<SentimentLabel>> groups;
  std::vector<SentimentLabel> all;
  for (const auto& [id, label] : polarities) {
    auto it = index.find(id);
    if (it == index.end()) throw IntegrityError("polarity for unknown video " + id);
    groups[it->second->outlet.code].push_back(label);
    all.push_back(label);
  }
  std::map<std::string, PolaritySummary> out;
  for (const auto& [outlet, labels] : groups) out[outlet] = polarity_summary(labels);
  out["Overall"] = polarity_summary(all);
  return out;
}

std::string polarity_csv(const std::map<std::string, PolaritySummary>& by_outlet) {
  std::string out = line({"outlet", "negative", "neutral", "positive", "videos", "non_neutral_pct"});
  auto emit = [&](const std::string& name, const PolaritySummary& s) {
    out += line({name, std::to_string(s.counts.neg), std::to_string(s.counts.neut), std::to_string(s.counts.pos),
                 std::to_string(s.counts.total()), format1(s.non_neutral_pct)});
  };
  for (const auto& [name, s] : by_outlet)
    if (name != "Overall") emit(name, s);
  if (auto it = by_outlet.find("Overall"); it != by_outlet.end()) emit(it->first, it->second);
  return out;
}

// ---------------------------------------------------------------------------

double MonthlyTrend::share(YearMonth month, AspectGroup group, SentimentLabel label) const {
  auto it = buckets.find({month, group});
  if (it == buckets.end() || it->second.total() == 0) return 0.0;
  return static_cast<double>(it->second.get(label)) / static_cast<double>(it->second.total());
}

std::string MonthlyTrend::to_long_csv() const {
  std::string out = line({"month", "key", "value"});
  for (const auto& [key, counts] : buckets) {
    for (SentimentLabel l : kAllLabels)
      out += line({key.first.to_string(), fmt::format("{}:{}", to_string(key.second), to_string(l)),
                   share_str(share(key.first, key.second, l))});
  }
  return out;
}

MonthlyTrend monthly_trend(std::span<const LabeledRow> rows, std::span<const VideoRecord> records) {
  require_labels(rows);
  auto index = index_records(records);
  MonthlyTrend trend;
  std::set<std::string> excluded;
  for (const auto& r : rows) {
    auto it = index.find(r.row.video_id);
    if (it == index.end()) {
      excluded.insert(r.row.video_id);
      continue;
    }
    trend.buckets[{YearMonth::of(it->second->upload_date), r.row.group}].add(*r.label);
  }
  trend.excluded_videos.assign(excluded.begin(), excluded.end());
  if (!excluded.empty())
    spdlog::warn("monthly trend: {} video(s) without an upload date excluded", trend.excluded_videos.size());
  return trend;
}

// ---------------------------------------------------------------------------

double SceneDistribution::share_pct(SceneType t) const {
  if (denominator == 0) return 0.0;
  auto it = totals.find(t);
  std::int64_t n = it == totals.end() ? 0 : it->second;
  return 100.0 * static_cast<double>(n) / static_cast<double>(denominator);
}

double SceneDistribution::share_pct1(SceneType t) const {
  auto it = totals.find(t);
  return percent1(it == totals.end() ? 0 : it->second, denominator);
}

std::string SceneDistribution::to_csv() const {
  std::vector<std::string> header = {"scene_type"};
  for (const auto& [outlet, _] : cells) header.push_back(outlet);
  header.insert(header.end(), {"total", "share_pct"});
  std::string out = csv_row(header) + "\n";
  for (SceneType t : kAllSceneTypes) {
    std::vector<std::string> row = {std::string(to_string(t))};
    for (const auto& [outlet, counts] : cells) row.push_back(std::to_string(counts.at(t)));
    row.push_back(std::to_string(totals.at(t)));
    row.push_back(format1(share_pct1(t)));
    out += csv_row(row) + "\n";
  }
  return out;
}

SceneDistribution scene_distribution(std::span<const SceneLabel> labels, std::span<const VideoRecord> records,
                                     const std::map<std::string, std::int64_t>& frame_totals) {
  auto index = index_records(records);
  SceneDistribution d;
  for (SceneType t : kAllSceneTypes) d.totals[t] = 0;
  for (const auto& r : records)
    for (SceneType t : kAllSceneTypes) d.cells[r.outlet.code][t];
  for (const auto& l : labels) {
    auto it = index.find(l.video_id);
    if (it == index.end()) throw IntegrityError("scene label for unknown video " + l.video_id);
    SceneType t = l.effective_type();
    ++d.cells[it->second->outlet.code][t];
    ++d.totals[t];
    ++d.label_total;
  }
  d.frame_totals = frame_totals;
  if (frame_totals.empty()) {
    d.denominator = d.label_total;
  } else {
    d.denominator = 0;
    for (const auto& [outlet, n] : frame_totals) d.denominator += n;
    std::set<std::string> outlets;
    for (const auto& [o, _] : d.cells) outlets.insert(o);
    for (const auto& [o, _] : frame_totals) outlets.insert(o);
    for (const auto& o : outlets) {
      std::int64_t labelled = 0;
      if (auto c = d.cells.find(o); c != d.cells.end())
        for (const auto& [t, n] : c->second) labelled += n;
      auto f = frame_totals.find(o);
      std::int64_t frames = f == frame_totals.end() ? 0 : f->second;
      if (labelled != frames) {
        d.discrepancies.push_back(o);
        spdlog::warn("scene distribution: outlet {} has {} labels for {} sampled frames", o, labelled, frames);
      }
    }
  }
  return d;
}

std::vector<ShareMismatch> share_mismatches(const SceneDistribution& dist,
                                            const std::map<SceneType, double>& reported, double tolerance) {
  std::vector<ShareMismatch> out;
  for (const auto& [t, value] : reported) {
    double computed = dist.share_pct1(t);
    if (std::fabs(computed - value) > tolerance + 1e-9) out.push_back({t, value, computed});
  }
  return out;
}

double SceneTimeline::pct(YearMonth month, SceneType t) const {
  auto it = months.find(month);
  if (it == months.end()) return 0.0;
  std::int64_t total = 0;
  for (const auto& [_, n] : it->second) total += n;
  auto c = it->second.find(t);
  return percent1(c == it->second.end() ? 0 : c->second, total);
}

std::string SceneTimeline::to_long_csv() const {
  std::string out = line({"month", "key", "value"});
  for (const auto& [month, _] : months)
    for (SceneType t : kAllSceneTypes)
      out += line({month.to_string(), std::string(to_string(t)), format1(pct(month, t))});
  return out;
}

SceneTimeline scene_share_over_time(std::span<const SceneLabel> labels, std::span<const VideoRecord> records) {
  auto index = index_records(records);
  SceneTimeline tl;
  std::set<std::string> excluded;
  for (const auto& l : labels) {
    auto it = index.find(l.video_id);
    if (it == index.end()) {
      excluded.insert(l.video_id);
      continue;
    }
    ++tl.months[YearMonth::of(it->second->upload_date)][l.effective_type()];
  }
  tl.excluded_videos.assign(excluded.begin(), excluded.end());
  if (!excluded.empty())
    spdlog::warn("scene timeline: {} video(s) without an upload date excluded", tl.excluded_videos.size());
  return tl;
}

// ---------------------------------------------------------------------------

double log_views(std::int64_t views) {
  if (views < 0) throw ValidationError("negative view count");
  return std::log1p(static_cast<double>(views));
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw PreconditionError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  double h = (static_cast<double>(values.size()) - 1.0) * p;
  auto lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::string EngagementStats::to_csv() const {
  std::string out = line({"outlet", "polarity", "videos", "median_log_views", "q1_log_views", "q3_log_views"});
  for (const auto& [key, g] : groups)
    out += line({key.first, std::string(to_string(key.second)), std::to_string(g.n),
                 fmt::format("{:.4f}", g.median_log_views), fmt::format("{:.4f}", g.q1),
                 fmt::format("{:.4f}", g.q3)});
  return out;
}

EngagementStats engagement_stats(std::span<const VideoRecord> records,
                                 const std::map<std::string, SentimentLabel>& polarities) {
  std::map<std::pair<std::string, SentimentLabel>, std::vector<double>> samples;
  std::size_t missing = 0;
  for (const auto& r : records) {
    auto it = polarities.find(r.video_id);
    if (it == polarities.end()) {
      ++missing;
      continue;
    }
    samples[{r.outlet.code, it->second}].push_back(log_views(r.view_count));
  }
  if (missing > 0) spdlog::debug("engagement: {} video(s) without a polarity skipped", missing);
  EngagementStats stats;
  for (auto& [key, values] : samples) {
    EngagementGroup g;
    g.n = static_cast<std::int64_t>(values.size());
    g.median_log_views = quantile(values, 0.5);
    g.q1 = quantile(values, 0.25);
    g.q3 = quantile(values, 0.75);
    stats.groups[key] = g;
  }
  return stats;
}

std::string corpus_stats_csv(const CorpusStats& stats) {
  std::string out = line({"outlet", "videos", "spoken", "spoken_pct", "no_speech"});
  for (const auto& r : stats.rows)
    out += line({r.outlet, std::to_string(r.video_count), std::to_string(r.spoken_count), format1(r.spoken_pct),
                 std::to_string(r.no_speech_count)});
  return out;
}

}  // namespace shortlens
