#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "shortlens/backend.hpp"
#include "shortlens/util.hpp"

namespace shortlens {

/// Deterministic stand-ins for every model route. Responses come from an
/// optional script (per video, per sentence, per text/aspect pair) and
/// otherwise from content hashes, so identical requests always get
/// identical answers.
///
/// Script keys:
///   probe:      video_id -> {language, confidence}
///   transcribe: video_id -> {segments, has_speech}
///   parse:      sentence -> CoNLL-U block
///   absa:       "text<TAB>aspect" -> {label, confidence}
///   scene:      sha256(image_b64) -> raw reply text
class StubModels {
 public:
  using SceneResponder = std::function<std::optional<std::string>(const json& request, int call_index)>;

  StubModels() = default;
  explicit StubModels(json script) : script_(std::move(script)) {}
  static StubModels from_file(const fs::path& path);

  const json& script() const { return script_; }

  HttpReply handle(std::string_view method, std::string_view route, std::string_view body) const;

  /// The next `count` calls to `route` answer with `status`.
  void inject_failures(std::string_view route, int status, int count);
  /// Overrides /scene replies; returning nullopt falls back to the default.
  void set_scene_responder(SceneResponder fn);
  /// /scene answers 413 when image_b64 is longer than this.
  void set_max_image_b64(std::size_t n);

  std::size_t calls(std::string_view route) const;

  static constexpr std::string_view kAbsaVersion = "stub-absa-1";
  static constexpr std::string_view kSceneVersion = "stub-vlm-1";
  static constexpr std::string_view kParserVersion = "stub-parser-1";
  static constexpr std::string_view kAsrVersion = "stub-asr-1";

 private:
  HttpReply probe(const json& req) const;
  HttpReply transcribe(const json& req) const;
  HttpReply parse(const json& req) const;
  HttpReply absa(const json& req) const;
  HttpReply scene(const json& req) const;
  HttpReply info() const;

  json script_ = json::object();
  mutable std::mutex mu_;
  mutable std::map<std::string, std::size_t> calls_;
  mutable std::map<std::string, std::pair<int, int>> failures_;  // route -> (status, remaining)
  SceneResponder scene_responder_;
  std::optional<std::size_t> max_image_b64_;
};

/// Heuristic dependency parse of one sentence into a well-formed CoNLL-U block.
std::string stub_parse_sentence(std::string_view sentence);

/// Calls StubModels directly, without a socket.
class InProcessTransport : public Transport {
 public:
  explicit InProcessTransport(const StubModels& models) : models_(models) {}
  HttpReply post(std::string_view route, const std::string& body, std::string_view content_type) override;
  HttpReply get(std::string_view route) override;

 private:
  const StubModels& models_;
};

/// Serves StubModels over HTTP on 127.0.0.1.
class StubServer {
 public:
  explicit StubServer(const StubModels& models);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  /// Binds (port 0 = any free port) and starts serving in a background thread.
  int start(int port = 0);
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();
  std::string base_url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace shortlens
