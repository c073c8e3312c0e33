#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shortlens/backend.hpp"
#include "shortlens/corpus_store.hpp"
#include "shortlens/util.hpp"

namespace shortlens {

struct TranscriptSegment {
  int seg_id = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string text;

  bool operator==(const TranscriptSegment&) const = default;
};

/// Invariant: has_speech == !segments.empty(); segments time-ordered and
/// non-overlapping with seg_ids 0..n-1.
struct Transcript {
  std::string video_id;
  std::string language;
  std::vector<TranscriptSegment> segments;
  bool has_speech = false;

  json to_json() const;
  static Transcript from_json(const json& j);
  bool operator==(const Transcript&) const = default;
};

struct LanguageProbe {
  std::string video_id;
  double probe_window_s = 30.0;
  std::string detected_language;
  double confidence = 0.0;

  LanguageStatus status() const;
  json to_json() const;
  static LanguageProbe from_json(const json& j);
};

inline constexpr double kDefaultProbeWindowS = 30.0;
inline constexpr double kSegmentEndSlackS = 1.0;

/// "en" and any "en-*" tag are English; "und" or empty is undetermined.
LanguageStatus language_status_for(std::string_view code);

/// Wire form of an audio locator: http(s) URLs pass through, local files
/// (plain paths or file:// URLs) are sent base64-encoded.
std::string encode_audio_ref(std::string_view locator);

/// Pure transform from a /probe reply body.
LanguageProbe parse_probe_response(std::string_view video_id, double window_s, std::string_view body);

/// Pure transform from a /transcribe reply body. When duration_s is known,
/// segment ends beyond duration_s + 1 s are contract violations.
Transcript parse_transcribe_response(std::string_view video_id, std::string_view language, std::string_view body,
                                     std::optional<double> duration_s = std::nullopt);

struct TranscribeResult {
  Transcript transcript;
  std::string raw_response;
};

/// Stateless client for the ASR routes.
class AsrClient {
 public:
  explicit AsrClient(Transport& transport) : transport_(transport) {}

  LanguageProbe probe_language(std::string_view video_id, std::string_view audio_ref,
                               double window_s = kDefaultProbeWindowS) const;

  TranscribeResult transcribe(std::string_view video_id, std::string_view audio_ref, std::string_view language,
                              std::optional<double> duration_s = std::nullopt) const;

 private:
  Transport& transport_;
};

}  // namespace shortlens
