#include "shortlens/scenes.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <spdlog/spdlog.h>

#include "shortlens/errors.hpp"
#include "shortlens/parallel.hpp"

namespace shortlens {

namespace {

constexpr std::string_view kSceneV1 = R"PROMPT(You are a careful visual annotator. Look only at the image.

Decide what kind of scene is shown using the categories below. Be conservative:
if unclear, set "abstain": true or use "scene_type": "other_or_unknown". 
Output JSON ONLY.

Scene type options (decide based on visible cues):

- "combat_or_military_action": Weapons, explosions, airstrikes, armed soldiers 
in action or at checkpoints.

- "destruction_or_humanitarian_crisis": Rubble, collapsed buildings, smoke, 
  damaged streets, tents or shelters, refugees, queues for aid, doctors or
  rescuers helping civilians.

- "political_or_diplomatic_events": Politicians or officials at podiums 
  or in formal meetings, parliaments, press rooms, negotiation tables, 
  government ceremonies.

- "news_media_or_interview_settings": TV anchors in a studio, reporters 
  speaking to camera, people being interviewed  with a microphone, 
  talk show or split screen news formats.

- "public_protest_or_demonstration": Crowds holding signs or banners, 
  marches, rallies, vigils in streets or squares, police lines facing 
  demonstrators (including protests outside the conflict region).

- "symbolic_or_religious_ritual": Religious buildings or interiors,
  prayer, clergy, funerals, coffins, memorials, monuments, candlelight
  vigils, large flags used ceremonially or symbolically.

- "other_or_unknown": Any scene that does not clearly 
  match the above categories or is too ambiguous.
)PROMPT";

constexpr std::string_view kSchemaHint =
    "\nRespond with a single JSON object with the keys \"scene_type\" (one of the options above), "
    "\"abstain\" (true or false), \"text_overlay\" (true or false) and \"evidence\" (a list of short phrases).\n";

constexpr std::string_view kJsonReminder = "\nOutput JSON ONLY.\n";

struct Span {
  std::size_t begin;
  std::size_t end;
};

// Balanced top-level {...} spans; quotes are only tracked inside objects so
// apostrophes in surrounding prose do not matter.
std::vector<Span> top_level_objects(std::string_view s) {
  std::vector<Span> out;
  int depth = 0;
  bool in_str = false, esc = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (in_str) {
      if (esc)
        esc = false;
      else if (c == '\\')
        esc = true;
      else if (c == '"')
        in_str = false;
      continue;
    }
    if (c == '"' && depth > 0) {
      in_str = true;
    } else if (c == '{') {
      if (depth == 0) start = i;
      ++depth;
    } else if (c == '}' && depth > 0) {
      if (--depth == 0) out.push_back({start, i + 1});
    }
  }
  return out;
}

cv::Mat decode(std::span<const std::uint8_t> image) {
  cv::Mat buf(1, static_cast<int>(image.size()), CV_8UC1, const_cast<std::uint8_t*>(image.data()));
  cv::Mat mat = image.empty() ? cv::Mat() : cv::imdecode(buf, cv::IMREAD_COLOR);
  if (mat.empty()) throw DataError("image is not decodable");
  return mat;
}

}  // namespace

std::string_view to_string(SceneType t) {
  switch (t) {
    case SceneType::kCombat: return "combat_or_military_action";
    case SceneType::kDestruction: return "destruction_or_humanitarian_crisis";
    case SceneType::kPolitical: return "political_or_diplomatic_events";
    case SceneType::kNewsMedia: return "news_media_or_interview_settings";
    case SceneType::kProtest: return "public_protest_or_demonstration";
    case SceneType::kSymbolic: return "symbolic_or_religious_ritual";
    case SceneType::kOther: return "other_or_unknown";
  }
  return "other_or_unknown";
}

std::optional<SceneType> parse_scene_type(std::string_view s) {
  for (SceneType t : kAllSceneTypes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

std::string_view to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::kOk: return "ok";
    case ParseStatus::kRepaired: return "repaired";
    case ParseStatus::kFailed: return "failed";
  }
  return "failed";
}

std::optional<ParseStatus> parse_parse_status(std::string_view s) {
  for (ParseStatus p : {ParseStatus::kOk, ParseStatus::kRepaired, ParseStatus::kFailed})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

json SceneLabel::to_json() const {
  return {{"video_id", video_id},
          {"frame_id", frame_id},
          {"scene_type", to_string(scene_type)},
          {"abstain", abstain},
          {"text_overlay", text_overlay},
          {"evidence", evidence},
          {"parse_status", to_string(parse_status)},
          {"prompt_hash", prompt_hash},
          {"model_version", model_version}};
}

SceneLabel SceneLabel::from_json(const json& j) {
  SceneLabel l;
  try {
    l.video_id = j.at("video_id").get<std::string>();
    l.frame_id = j.at("frame_id").get<int>();
    auto type = parse_scene_type(j.at("scene_type").get<std::string>());
    if (!type) throw ValidationError("unknown scene_type " + j.at("scene_type").dump());
    l.scene_type = *type;
    l.abstain = j.at("abstain").get<bool>();
    l.text_overlay = j.value("text_overlay", false);
    l.evidence = j.value("evidence", std::vector<std::string>{});
    auto status = parse_parse_status(j.at("parse_status").get<std::string>());
    if (!status) throw ValidationError("unknown parse_status " + j.at("parse_status").dump());
    l.parse_status = *status;
    l.prompt_hash = j.value("prompt_hash", "");
    l.model_version = j.value("model_version", "");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed scene label: ") + e.what());
  }
  if (l.abstain && l.scene_type != SceneType::kOther)
    throw ValidationError("scene label " + l.video_id + "/" + std::to_string(l.frame_id) +
                          " abstains but carries scene_type " + std::string(to_string(l.scene_type)));
  return l;
}

std::vector<std::string> prompt_versions() { return {"scene-v1", "scene-v1-schema"}; }

ScenePrompt build_prompt(std::string_view template_version) {
  if (template_version == "scene-v1") return {std::string(template_version), std::string(kSceneV1)};
  if (template_version == "scene-v1-schema")
    return {std::string(template_version), std::string(kSceneV1) + std::string(kSchemaHint)};
  throw UsageError("unknown prompt template version '" + std::string(template_version) + "'");
}

std::string truncate_words(std::string_view s, std::size_t max_words) {
  std::istringstream in{std::string(s)};
  std::string word, out;
  for (std::size_t n = 0; n < max_words && in >> word; ++n) {
    if (!out.empty()) out += ' ';
    out += word;
  }
  return out;
}

ValidatedResponse validate_response(std::string_view raw) {
  std::string text = trim(raw);
  if (text.empty()) throw ValidationError("empty response");

  ValidatedResponse v;
  json obj = json::parse(text, nullptr, false);
  if (!obj.is_discarded()) {
    if (!obj.is_object()) throw ValidationError("response is not a JSON object");
  } else {
    auto spans = top_level_objects(text);
    if (spans.empty()) throw ValidationError("no JSON object in response");
    if (spans.size() > 1) throw ValidationError("response contains " + std::to_string(spans.size()) + " objects");
    obj = json::parse(std::string_view(text).substr(spans[0].begin, spans[0].end - spans[0].begin), nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) throw ValidationError("wrapped object is not valid JSON");
    v.status = ParseStatus::kRepaired;
  }

  auto abstain = obj.find("abstain");
  if (abstain == obj.end()) throw ValidationError("missing key abstain");
  if (!abstain->is_boolean()) throw ValidationError("abstain is not a boolean");
  v.abstain = abstain->get<bool>();

  auto type = obj.find("scene_type");
  if (type == obj.end() || type->is_null()) {
    if (!v.abstain) throw ValidationError("missing key scene_type");
    v.scene_type = SceneType::kOther;
  } else {
    if (!type->is_string()) throw ValidationError("scene_type is not a string");
    auto parsed = parse_scene_type(type->get<std::string>());
    if (!parsed) throw ValidationError("unknown scene_type " + type->dump());
    v.scene_type = v.abstain ? SceneType::kOther : *parsed;
  }

  if (auto overlay = obj.find("text_overlay"); overlay != obj.end() && !overlay->is_null()) {
    if (!overlay->is_boolean()) throw ValidationError("text_overlay is not a boolean");
    v.text_overlay = overlay->get<bool>();
  }
  if (auto ev = obj.find("evidence"); ev != obj.end() && !ev->is_null()) {
    if (!ev->is_array()) throw ValidationError("evidence is not a list");
    for (const auto& e : *ev) {
      if (!e.is_string()) throw ValidationError("evidence entry is not a string");
      std::string phrase = truncate_words(e.get<std::string>(), kMaxEvidenceWords);
      if (!phrase.empty()) v.evidence.push_back(std::move(phrase));
    }
  }
  return v;
}

std::vector<std::uint8_t> fit_image(std::span<const std::uint8_t> image, int max_side) {
  cv::Mat mat = decode(image);
  int long_side = std::max(mat.cols, mat.rows);
  if (long_side <= max_side) return {image.begin(), image.end()};
  double scale = static_cast<double>(max_side) / long_side;
  cv::Size size(std::max(1, static_cast<int>(std::lround(mat.cols * scale))),
                std::max(1, static_cast<int>(std::lround(mat.rows * scale))));
  cv::Mat small;
  cv::resize(mat, small, size, 0, 0, cv::INTER_AREA);
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".jpg", small, out, {cv::IMWRITE_JPEG_QUALITY, 95}))
    throw DataError("image encoding failed");
  return out;
}

HttpReply SceneClassifier::send(const std::string& image_b64, const std::string& prompt_text) const {
  json body = {{"image_b64", image_b64}, {"prompt", prompt_text}};
  if (model_version_) body["model_version"] = *model_version_;
  return transport_.post(routes::kScene, body.dump());
}

SceneOutcome SceneClassifier::classify_frame(std::string_view video_id, int frame_id,
                                             std::span<const std::uint8_t> image) const {
  std::vector<std::uint8_t> bytes = fit_image(image, kMaxImageSide);
  std::string b64 = base64_encode(bytes);
  bool shrunk = false;
  std::string version;

  auto call = [&](const std::string& prompt_text) {
    HttpReply reply = send(b64, prompt_text);
    if (reply.status == 413 && !shrunk) {
      cv::Mat mat = decode(bytes);
      int half = std::max(1, std::max(mat.cols, mat.rows) / 2);
      bytes = fit_image(bytes, half);
      b64 = base64_encode(bytes);
      shrunk = true;
      spdlog::info("{}/{}: backend rejected image size, retrying at {} px", video_id, frame_id, half);
      reply = send(b64, prompt_text);
    }
    if (reply.status == 413)
      throw PreconditionError("image for " + std::string(video_id) + "/" + std::to_string(frame_id) +
                              " is too large for the backend even after resizing");
    if (!reply.ok()) throw ContractViolation("/scene returned HTTP " + std::to_string(reply.status), reply.body);
    version = reply.header(std::string(kModelVersionHeader));
    return reply.body;
  };

  SceneOutcome out;
  SceneLabel& label = out.label;
  label.video_id = std::string(video_id);
  label.frame_id = frame_id;
  label.prompt_hash = prompt_.hash();

  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string prompt_text = prompt_.rendered_text;
    if (attempt > 0) prompt_text += kJsonReminder;
    std::string raw = call(prompt_text);
    out.raw_attempts.push_back(raw);
    label.raw_response = raw;
    label.model_version = !version.empty() ? version : model_version_.value_or("unknown");
    try {
      ValidatedResponse v = validate_response(raw);
      label.scene_type = v.scene_type;
      label.abstain = v.abstain;
      label.text_overlay = v.text_overlay;
      label.evidence = std::move(v.evidence);
      label.parse_status = v.status;
      return out;
    } catch (const ValidationError& e) {
      spdlog::debug("{}/{} attempt {}: {}", video_id, frame_id, attempt + 1, e.what());
    }
  }
  label.scene_type = SceneType::kOther;
  label.abstain = true;
  label.text_overlay = false;
  label.evidence.clear();
  label.parse_status = ParseStatus::kFailed;
  spdlog::warn("{}/{}: no valid scene label after retry", video_id, frame_id);
  return out;
}

SceneOutcome SceneClassifier::classify_frame(const SceneFrame& frame) const {
  auto bytes = read_file_bytes(frame.image_path);
  return classify_frame(frame.video_id, frame.frame_id, bytes);
}

std::vector<SceneOutcome> SceneClassifier::classify_batch(std::span<const SceneFrame> frames,
                                                          std::size_t workers) const {
  std::vector<SceneOutcome> out(frames.size());
  parallel_for(frames.size(), workers, [&](std::size_t i) { out[i] = classify_frame(frames[i]); });
  return out;
}

std::vector<std::string> nondeterministic_frames(std::span<const SceneLabel> previous,
                                                 std::span<const SceneLabel> current) {
  auto key = [](const SceneLabel& l) { return l.video_id + "/" + std::to_string(l.frame_id); };
  std::map<std::string, const SceneLabel*> before;
  for (const auto& l : previous) before[key(l)] = &l;
  std::vector<std::string> out;
  for (const auto& l : current) {
    auto it = before.find(key(l));
    if (it == before.end()) continue;
    const SceneLabel& p = *it->second;
    if (p.prompt_hash != l.prompt_hash || p.model_version != l.model_version) continue;
    if (p.scene_type != l.scene_type || p.abstain != l.abstain || p.text_overlay != l.text_overlay ||
        p.evidence != l.evidence || p.parse_status != l.parse_status)
      out.push_back(key(l));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace shortlens
