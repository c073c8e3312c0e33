#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shortlens/aspect_linking.hpp"
#include "shortlens/backend.hpp"
#include "shortlens/util.hpp"

namespace shortlens {

enum class SentimentLabel { kNegative, kNeutral, kPositive };

/// Display order: Neg, Neut, Pos.
inline constexpr std::array<SentimentLabel, 3> kAllLabels = {SentimentLabel::kNegative, SentimentLabel::kNeutral,
                                                             SentimentLabel::kPositive};

std::string_view to_string(SentimentLabel l);
std::optional<SentimentLabel> parse_sentiment_label(std::string_view s);

struct SentimentPrediction {
  SentimentLabel label = SentimentLabel::kNeutral;
  double confidence = 0.0;
  std::string model_version;

  json to_json() const;
  static SentimentPrediction from_json(const json& j);
  bool operator==(const SentimentPrediction&) const = default;
};

enum class Provenance { kBaseGold, kSilverValidated };
std::string_view to_string(Provenance p);

struct GoldExample {
  std::string text;
  std::string aspect;
  AspectGroup group = AspectGroup::kIsrael;
  SentimentLabel label = SentimentLabel::kNeutral;
  Provenance provenance = Provenance::kBaseGold;

  json to_json() const;
  /// Validates the record, including that the aspect occurs in the text.
  static GoldExample from_json(const json& j);
  bool operator==(const GoldExample&) const = default;
};

/// Whether `aspect` occurs in `text` after normalization, either as a
/// whole token or as a case-folded substring (multi-word aspects).
bool aspect_in_text(std::string_view text, std::string_view aspect);

// ---------------------------------------------------------------------------
// Classification

struct AbsaRequest {
  std::string text;
  std::string aspect;
};

/// Client for the /absa route. Results are cached per (text, aspect) for
/// the model version that produced them; `audit` receives every
/// request/response pair that reached the backend.
class AbsaClient {
 public:
  using AuditSink = std::function<void(const json& record)>;

  explicit AbsaClient(Transport& transport, AuditSink audit = {}) : transport_(transport), audit_(std::move(audit)) {}

  /// Throws PreconditionError (before any network call) if the aspect is not in the text.
  SentimentPrediction classify(std::string_view text, std::string_view aspect) const;

  /// Input-ordered results; up to `workers` requests in flight.
  std::vector<SentimentPrediction> classify_batch(std::span<const AbsaRequest> requests, std::size_t workers = 8) const;

  std::size_t backend_calls() const;

 private:
  Transport& transport_;
  AuditSink audit_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<std::string, std::string>, SentimentPrediction> cache_;
  mutable std::string cache_version_;
  mutable std::size_t calls_ = 0;
};

/// Pure transform of an /absa reply body.
SentimentPrediction parse_absa_response(std::string_view body);

// ---------------------------------------------------------------------------
// Silver bootstrapping

struct AbsaExample {
  std::string text;
  std::string aspect;
  AspectGroup group = AspectGroup::kIsrael;
};

struct ScoredExample {
  AbsaExample example;
  SentimentPrediction prediction;
};

enum class CandidateStatus { kPending, kAccepted, kRejected };
std::string_view to_string(CandidateStatus s);

struct SilverCandidate {
  AbsaExample example;
  SentimentLabel label = SentimentLabel::kNeutral;  // proposed; a reviewer may correct it
  double confidence = 0.0;
  CandidateStatus status = CandidateStatus::kPending;

  json to_json() const;
  static SilverCandidate from_json(const json& j);
};

inline constexpr double kDefaultSilverThreshold = 0.75;

/// Keeps predictions with confidence >= threshold as pending candidates.
/// threshold must be in (0, 1].
std::vector<SilverCandidate> bootstrap_silver(std::span<const ScoredExample> predictions,
                                              double threshold = kDefaultSilverThreshold);

/// Accepted candidates become gold; pending and rejected ones never do.
std::vector<GoldExample> promote_validated(std::span<const SilverCandidate> candidates);

/// Appends `additions` to `gold`, skipping (text, aspect) pairs already present.
std::vector<GoldExample> merge_gold(std::span<const GoldExample> gold, std::span<const GoldExample> additions);

std::vector<GoldExample> read_gold(const fs::path& path);
void write_gold(const fs::path& path, std::span<const GoldExample> gold);
std::vector<SilverCandidate> read_pending(const fs::path& path);
void write_pending(const fs::path& path, std::span<const SilverCandidate> candidates);

// ---------------------------------------------------------------------------
// Distributions and metrics

struct LabelCounts {
  std::int64_t neg = 0;
  std::int64_t neut = 0;
  std::int64_t pos = 0;

  std::int64_t total() const { return neg + neut + pos; }
  void add(SentimentLabel l, std::int64_t n = 1);
  std::int64_t get(SentimentLabel l) const;
  LabelCounts& operator+=(const LabelCounts& o);
  bool operator==(const LabelCounts&) const = default;
};

struct LabelDistribution {
  std::map<AspectGroup, LabelCounts> rows;  // every group, zero rows included
  LabelCounts grand_total() const;
};

LabelDistribution label_distribution(std::span<const GoldExample> gold);

struct ClassScores {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MacroF1Report {
  std::array<ClassScores, 3> per_class;
  double macro_f1 = 0.0;
  std::vector<SentimentLabel> absent_classes;  // in neither gold nor predictions
};

/// Unweighted mean of per-class F1 over the fixed three-class set, with
/// zero-division → 0. Absent classes score 0 and are logged.
MacroF1Report macro_f1_report(std::span<const SentimentLabel> predictions, std::span<const SentimentLabel> gold);
double macro_f1(std::span<const SentimentLabel> predictions, std::span<const SentimentLabel> gold);

struct SplitFractions {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct GoldSplit {
  std::uint64_t seed = 0;
  std::vector<GoldExample> train;
  std::vector<GoldExample> dev;
  std::vector<GoldExample> test;
};

/// Stratified by (group, label). Deterministic for a given seed and input
/// set, independent of input order.
GoldSplit stratified_split(std::span<const GoldExample> gold, std::uint64_t seed, SplitFractions fractions = {});

}  // namespace shortlens
