#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shortlens/analytics.hpp"
#include "shortlens/scenes.hpp"
#include "shortlens/util.hpp"

namespace shortlens {

struct LabeledFrame {
  std::string video_id;
  int frame_id = 0;
  SceneType predicted = SceneType::kOther;
  std::string image_path;
};

struct EvalItem {
  std::string video_id;
  int frame_id = 0;
  SceneType predicted = SceneType::kOther;
  std::string image_path;
  std::optional<bool> verdict;  // y = true, n = false, blank = unannotated
};

struct EvalSample {
  std::uint64_t seed = 0;
  std::size_t population_size = 0;
  std::string population_hash;
  std::vector<EvalItem> items;
};

/// Hash of the canonical (sorted) population listing.
std::string population_hash(std::span<const LabeledFrame> population);

/// Uniform sample without replacement, reproducible from (population, n,
/// seed) regardless of input order. Items are returned in canonical order.
/// Throws PreconditionError when n exceeds the population.
EvalSample sample_heldout(std::span<const LabeledFrame> population, std::size_t n, std::uint64_t seed);

inline constexpr std::string_view kSheetHeader = "video_id\tframe_id\tpredicted_type\timage_path\tverdict";

/// Tab-separated annotation sheet with an empty verdict column, plus
/// <sheet>.meta.json recording seed, population hash and a hash of the
/// locked columns.
void write_sheet(const fs::path& path, const EvalSample& sample);

/// Reads an annotated sheet. Verdicts are "y" or "n" (case-insensitive) or
/// blank. Throws ParseError for malformed lines and IntegrityError when the
/// locked columns no longer match the sidecar.
EvalSample read_sheet(const fs::path& path);

struct EvalRow {
  std::int64_t correct = 0;
  std::int64_t wrong = 0;
  std::int64_t total() const { return correct + wrong; }
  double false_pct() const { return percent1(wrong, total()); }
};

struct EvalResult {
  std::map<SceneType, EvalRow> rows;  // all seven types
  EvalRow overall;
  double accuracy_pct() const { return percent1(overall.correct, overall.total()); }

  /// scene_type,true,false,total,false_pct plus an Overall row.
  std::string to_csv() const;
  json to_json() const;
};

/// Throws IncompleteInputError listing unannotated items.
EvalResult score_eval(std::span<const EvalItem> items);

// ---------------------------------------------------------------------------
// ABSA spot checks

struct SpotCheckItem {
  std::string row_key;
  std::string aspect;
  SentimentLabel predicted = SentimentLabel::kNeutral;
  std::string sentence;
  std::optional<bool> verdict;
};

inline constexpr std::string_view kSpotCheckHeader = "row_key\taspect\tpredicted_label\tsentence\tverdict";

std::vector<SpotCheckItem> sample_spot_check(std::span<const LabeledRow> rows, std::size_t n, std::uint64_t seed);
void write_spot_check(const fs::path& path, std::span<const SpotCheckItem> items);
std::vector<SpotCheckItem> read_spot_check(const fs::path& path);

/// Percentage of items judged correct; throws IncompleteInputError for blanks.
double spot_check_accuracy(std::span<const SpotCheckItem> items);

}  // namespace shortlens
