#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shortlens/backend.hpp"
#include "shortlens/util.hpp"

namespace shortlens {

enum class SceneType {
  kCombat,
  kDestruction,
  kPolitical,
  kNewsMedia,
  kProtest,
  kSymbolic,
  kOther,
};

inline constexpr std::array<SceneType, 7> kAllSceneTypes = {
    SceneType::kCombat,  SceneType::kDestruction, SceneType::kPolitical, SceneType::kNewsMedia,
    SceneType::kProtest, SceneType::kSymbolic,    SceneType::kOther};

/// Wire names, e.g. "combat_or_military_action".
std::string_view to_string(SceneType t);
std::optional<SceneType> parse_scene_type(std::string_view s);

enum class ParseStatus { kOk, kRepaired, kFailed };
std::string_view to_string(ParseStatus s);
std::optional<ParseStatus> parse_parse_status(std::string_view s);

inline constexpr std::size_t kMaxEvidenceWords = 12;

struct SceneLabel {
  std::string video_id;
  int frame_id = 0;
  SceneType scene_type = SceneType::kOther;  // already resolved: abstain => kOther
  bool abstain = false;
  bool text_overlay = false;
  std::vector<std::string> evidence;
  std::string raw_response;  // not part of the export; stored separately
  ParseStatus parse_status = ParseStatus::kOk;
  std::string prompt_hash;
  std::string model_version;

  SceneType effective_type() const { return abstain ? SceneType::kOther : scene_type; }

  /// Export form: every field except raw_response.
  json to_json() const;
  static SceneLabel from_json(const json& j);
  bool operator==(const SceneLabel&) const = default;
};

struct ScenePrompt {
  std::string template_version;
  std::string rendered_text;

  std::string hash() const { return sha256_hex(rendered_text); }
};

inline constexpr std::string_view kDefaultPromptVersion = "scene-v1";

std::vector<std::string> prompt_versions();

/// Throws UsageError for an unknown version.
ScenePrompt build_prompt(std::string_view template_version = kDefaultPromptVersion);

/// Fields recovered from one model reply.
struct ValidatedResponse {
  SceneType scene_type = SceneType::kOther;
  bool abstain = false;
  bool text_overlay = false;
  std::vector<std::string> evidence;
  ParseStatus status = ParseStatus::kOk;
};

/// Accepts exactly one JSON object. A bare object is kOk; one object inside
/// a code fence or surrounding prose is kRepaired. Throws ValidationError
/// otherwise (unknown scene_type, missing key, wrong types, zero or several
/// objects). scene_type may be omitted only when abstain is true.
ValidatedResponse validate_response(std::string_view raw);

/// Keeps the first kMaxEvidenceWords whitespace-separated words.
std::string truncate_words(std::string_view s, std::size_t max_words);

struct SceneFrame {
  std::string video_id;
  int frame_id = 0;
  fs::path image_path;
};

struct SceneOutcome {
  SceneLabel label;
  std::vector<std::string> raw_attempts;
};

inline constexpr int kMaxImageSide = 1280;

/// Client for the /scene route.
class SceneClassifier {
 public:
  SceneClassifier(Transport& transport, ScenePrompt prompt, std::optional<std::string> model_version = std::nullopt)
      : transport_(transport), prompt_(std::move(prompt)), model_version_(std::move(model_version)) {}

  /// Images are downscaled when the long side exceeds kMaxImageSide; a 413
  /// reply triggers one further halving. A malformed reply is retried once
  /// with the JSON reminder appended; a second failure yields a failed label.
  SceneOutcome classify_frame(std::string_view video_id, int frame_id, std::span<const std::uint8_t> image) const;
  SceneOutcome classify_frame(const SceneFrame& frame) const;

  /// One outcome per input, in input order.
  std::vector<SceneOutcome> classify_batch(std::span<const SceneFrame> frames, std::size_t workers = 4) const;

  const ScenePrompt& prompt() const { return prompt_; }

 private:
  HttpReply send(const std::string& image_b64, const std::string& prompt_text) const;

  Transport& transport_;
  ScenePrompt prompt_;
  std::optional<std::string> model_version_;
};

/// Reply header carrying the backend's model version for /scene.
inline constexpr std::string_view kModelVersionHeader = "X-Model-Version";

/// Prepares image bytes for the wire: downscales so the long side is at most
/// max_side, re-encoding as JPEG only when resizing was needed.
std::vector<std::uint8_t> fit_image(std::span<const std::uint8_t> image, int max_side);

/// Keys (video_id/frame_id) whose label differs between two runs that share
/// prompt hash and model version.
std::vector<std::string> nondeterministic_frames(std::span<const SceneLabel> previous,
                                                 std::span<const SceneLabel> current);

}  // namespace shortlens
