#include "shortlens/transcripts.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "shortlens/errors.hpp"

namespace shortlens {

json Transcript::to_json() const {
  json segs = json::array();
  for (const auto& s : segments)
    segs.push_back({{"seg_id", s.seg_id}, {"start", s.start_s}, {"end", s.end_s}, {"text", s.text}});
  return {{"video_id", video_id}, {"language", language}, {"has_speech", has_speech}, {"segments", segs}};
}

Transcript Transcript::from_json(const json& j) {
  Transcript t;
  t.video_id = j.at("video_id").get<std::string>();
  t.language = j.at("language").get<std::string>();
  t.has_speech = j.at("has_speech").get<bool>();
  for (const auto& s : j.at("segments"))
    t.segments.push_back({s.at("seg_id").get<int>(), s.at("start").get<double>(), s.at("end").get<double>(),
                          s.at("text").get<std::string>()});
  return t;
}

LanguageStatus LanguageProbe::status() const { return language_status_for(detected_language); }

json LanguageProbe::to_json() const {
  return {{"video_id", video_id},
          {"probe_window_s", probe_window_s},
          {"detected_language", detected_language},
          {"confidence", confidence},
          {"language_status", to_string(status())}};
}

LanguageProbe LanguageProbe::from_json(const json& j) {
  LanguageProbe p;
  p.video_id = j.at("video_id").get<std::string>();
  p.probe_window_s = j.at("probe_window_s").get<double>();
  p.detected_language = j.at("detected_language").get<std::string>();
  p.confidence = j.at("confidence").get<double>();
  return p;
}

LanguageStatus language_status_for(std::string_view code) {
  std::string c = to_lower_ascii(trim(code));
  if (c.empty() || c == "und") return LanguageStatus::kUndetermined;
  auto primary = c.substr(0, c.find_first_of("-_"));
  return primary == "en" ? LanguageStatus::kEnglish : LanguageStatus::kNonEnglish;
}

std::string encode_audio_ref(std::string_view locator) {
  if (locator.starts_with("http://") || locator.starts_with("https://")) return std::string(locator);
  std::string_view path = locator;
  if (path.starts_with("file://")) path.remove_prefix(7);
  fs::path p{std::string(path)};
  if (!fs::is_regular_file(p)) throw DataError("audio source " + p.string() + " not found");
  return base64_encode(read_file(p));
}

namespace {

json parse_reply_json(std::string_view route, std::string_view body) {
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw ContractViolation(std::string(route) + ": reply is not a JSON object", std::string(body));
    return j;
  } catch (const json::parse_error&) {
    spdlog::error("{}: malformed reply: {}", route, body);
    throw ContractViolation(std::string(route) + ": reply is not valid JSON", std::string(body));
  }
}

void check_reply(std::string_view route, const HttpReply& reply) {
  if (!reply.ok()) {
    spdlog::error("{}: HTTP {}: {}", route, reply.status, reply.body);
    throw ContractViolation(std::string(route) + ": HTTP " + std::to_string(reply.status), reply.body);
  }
}

}  // namespace

LanguageProbe parse_probe_response(std::string_view video_id, double window_s, std::string_view body) {
  json j = parse_reply_json(routes::kProbe, body);
  auto fail = [&](const std::string& why) {
    spdlog::error("/probe: {}: {}", why, body);
    return ContractViolation("/probe: " + why, std::string(body));
  };
  if (!j.contains("language") || !j["language"].is_string()) throw fail("missing string 'language'");
  if (!j.contains("confidence") || !j["confidence"].is_number()) throw fail("missing numeric 'confidence'");
  LanguageProbe p;
  p.video_id = std::string(video_id);
  p.probe_window_s = window_s;
  p.detected_language = j["language"].get<std::string>();
  p.confidence = j["confidence"].get<double>();
  if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) throw fail("confidence outside [0,1]");
  if (trim(p.detected_language).empty()) p.detected_language = "und";
  // No signal means no decision, whatever the backend's label.
  if (p.detected_language == "und") p.confidence = 0.0;
  return p;
}

Transcript parse_transcribe_response(std::string_view video_id, std::string_view language, std::string_view body,
                                     std::optional<double> duration_s) {
  json j = parse_reply_json(routes::kTranscribe, body);
  auto fail = [&](const std::string& why) {
    spdlog::error("/transcribe {}: {}: {}", video_id, why, body);
    return ContractViolation("/transcribe " + std::string(video_id) + ": " + why, std::string(body));
  };
  if (!j.contains("segments") || !j["segments"].is_array()) throw fail("missing array 'segments'");

  Transcript t;
  t.video_id = std::string(video_id);
  t.language = std::string(language);
  double prev_end = 0.0;
  for (const auto& s : j["segments"]) {
    if (!s.is_object() || !s.contains("start") || !s.contains("end") || !s.contains("text") ||
        !s["start"].is_number() || !s["end"].is_number() || !s["text"].is_string())
      throw fail("segment lacks numeric start/end or string text");
    TranscriptSegment seg;
    seg.seg_id = static_cast<int>(t.segments.size());
    seg.start_s = s["start"].get<double>();
    seg.end_s = s["end"].get<double>();
    seg.text = trim(s["text"].get<std::string>());
    if (!(seg.start_s >= 0.0) || !(seg.start_s < seg.end_s) || !std::isfinite(seg.end_s))
      throw fail("segment " + std::to_string(seg.seg_id) + " has invalid times");
    if (seg.start_s < prev_end) throw fail("segment " + std::to_string(seg.seg_id) + " overlaps its predecessor");
    if (seg.text.empty()) throw fail("segment " + std::to_string(seg.seg_id) + " has empty text");
    if (duration_s && seg.end_s > *duration_s + kSegmentEndSlackS)
      throw fail("segment " + std::to_string(seg.seg_id) + " ends after the video");
    prev_end = seg.end_s;
    t.segments.push_back(std::move(seg));
  }
  t.has_speech = !t.segments.empty();
  if (auto it = j.find("has_speech"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean() || it->get<bool>() != t.has_speech) throw fail("has_speech disagrees with segments");
  }
  return t;
}

LanguageProbe AsrClient::probe_language(std::string_view video_id, std::string_view audio_ref, double window_s) const {
  if (!(window_s > 0.0)) throw PreconditionError("probe window must be positive");
  json req = {{"video_id", video_id}, {"audio_url_or_b64", encode_audio_ref(audio_ref)}, {"window_s", window_s}};
  HttpReply reply = transport_.post(routes::kProbe, req.dump());
  check_reply(routes::kProbe, reply);
  return parse_probe_response(video_id, window_s, reply.body);
}

TranscribeResult AsrClient::transcribe(std::string_view video_id, std::string_view audio_ref,
                                       std::string_view language, std::optional<double> duration_s) const {
  json req = {{"video_id", video_id}, {"audio_url_or_b64", encode_audio_ref(audio_ref)}, {"language", language}};
  HttpReply reply = transport_.post(routes::kTranscribe, req.dump());
  check_reply(routes::kTranscribe, reply);
  return {parse_transcribe_response(video_id, language, reply.body, duration_s), reply.body};
}

}  // namespace shortlens
