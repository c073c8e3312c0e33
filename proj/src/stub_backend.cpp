#include "shortlens/stub_backend.hpp"

#include <cctype>
#include <set>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "shortlens/errors.hpp"
#include "shortlens/scenes.hpp"

namespace shortlens {

namespace {

HttpReply reply(int status, std::string body, std::string content_type = "application/json") {
  HttpReply r;
  r.status = status;
  r.body = std::move(body);
  r.content_type = std::move(content_type);
  return r;
}

HttpReply bad_request(std::string_view what, std::string_view schema) {
  return reply(400, json{{"error", what}, {"schema", schema}}.dump());
}

// Bytes of sha256(s) as small integers.
std::vector<int> digest(std::string_view s) {
  std::string hex = sha256_hex(s);
  std::vector<int> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) out.push_back(std::stoi(hex.substr(i, 2), nullptr, 16));
  return out;
}

bool is_punct_char(char c) { return std::string_view(".,!?;:\"()[]").find(c) != std::string_view::npos; }

std::vector<std::string> stub_tokens(std::string_view sentence) {
  std::vector<std::string> out;
  for (const auto& w : split(sentence, ' ')) {
    std::string word = trim(w);
    if (word.empty()) continue;
    std::vector<std::string> tail;
    std::size_t b = 0, e = word.size();
    while (b < e && is_punct_char(word[b])) out.push_back(std::string(1, word[b++]));
    while (e > b && is_punct_char(word[e - 1])) tail.insert(tail.begin(), std::string(1, word[--e]));
    if (e > b) out.push_back(word.substr(b, e - b));
    out.insert(out.end(), tail.begin(), tail.end());
  }
  return out;
}

bool is_punct_token(const std::string& t) { return t.size() == 1 && is_punct_char(t[0]); }

bool is_lower_word(const std::string& t) {
  if (t.size() < 3) return false;
  for (unsigned char c : t)
    if (!std::islower(c)) return false;
  return true;
}

const std::set<std::string>& function_words() {
  static const std::set<std::string> kWords = {"the", "and", "but", "for", "with", "from", "into", "onto",
                                               "over", "under", "this", "that", "these", "those", "its", "their",
                                               "his", "her", "our", "your", "after", "before", "about", "than"};
  return kWords;
}

bool is_determiner(const std::string& t) {
  std::string l = to_lower_ascii(t);
  return l == "the" || l == "a" || l == "an" || l == "this" || l == "that";
}

}  // namespace

std::string stub_parse_sentence(std::string_view sentence) {
  auto tokens = stub_tokens(sentence);
  if (tokens.empty()) tokens.push_back(".");
  const int n = static_cast<int>(tokens.size());
  std::vector<int> words;
  for (int i = 0; i < n; ++i)
    if (!is_punct_token(tokens[i])) words.push_back(i);

  int root = words.empty() ? 0 : words.front();
  for (std::size_t w = 1; w < words.size(); ++w) {
    const auto& t = tokens[words[w]];
    if (is_lower_word(t) && !function_words().count(t)) {
      root = words[w];
      break;
    }
  }

  std::vector<int> head(n, root + 1);
  std::vector<std::string> rel(n, "dep");
  head[root] = 0;
  rel[root] = "root";
  bool object_taken = false;
  for (std::size_t w = 0; w < words.size(); ++w) {
    int i = words[w];
    if (i == root) continue;
    int next = w + 1 < words.size() ? words[w + 1] : -1;
    bool adjacent = next == i + 1;
    if (i < root) {
      if (next == root || next < 0) {
        rel[i] = "nsubj";
      } else {
        head[i] = next + 1;
        rel[i] = is_determiner(tokens[i]) ? "det" : "compound";
      }
    } else if (adjacent && is_determiner(tokens[i])) {
      head[i] = next + 1;
      rel[i] = "det";
    } else if (adjacent && std::isupper(static_cast<unsigned char>(tokens[i][0]))) {
      head[i] = next + 1;
      rel[i] = "amod";
    } else if (!object_taken) {
      rel[i] = "obj";
      object_taken = true;
    }
  }
  for (int i = 0; i < n; ++i)
    if (is_punct_token(tokens[i]) && i != root) rel[i] = "punct";

  std::string out = fmt::format("# text = {}\n", trim(sentence));
  for (int i = 0; i < n; ++i) {
    std::string upos = is_punct_token(tokens[i])                            ? "PUNCT"
                       : i == root                                          ? "VERB"
                       : std::isupper(static_cast<unsigned char>(tokens[i][0])) ? "PROPN"
                                                                            : "NOUN";
    out += fmt::format("{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_\n", i + 1, tokens[i], to_lower_ascii(tokens[i]), upos,
                       head[i], rel[i]);
  }
  return out + "\n";
}

StubModels StubModels::from_file(const fs::path& path) {
  try {
    return StubModels(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw ParseError("stub script " + path.string() + ": " + e.what(), 0);
  }
}

void StubModels::inject_failures(std::string_view route, int status, int count) {
  std::lock_guard lock(mu_);
  failures_[std::string(route)] = {status, count};
}

void StubModels::set_scene_responder(SceneResponder fn) {
  std::lock_guard lock(mu_);
  scene_responder_ = std::move(fn);
}

void StubModels::set_max_image_b64(std::size_t n) {
  std::lock_guard lock(mu_);
  max_image_b64_ = n;
}

std::size_t StubModels::calls(std::string_view route) const {
  std::lock_guard lock(mu_);
  auto it = calls_.find(std::string(route));
  return it == calls_.end() ? 0 : it->second;
}

HttpReply StubModels::handle(std::string_view method, std::string_view route, std::string_view body) const {
  {
    std::lock_guard lock(mu_);
    ++calls_[std::string(route)];
    auto it = failures_.find(std::string(route));
    if (it != failures_.end() && it->second.second > 0) {
      --it->second.second;
      return reply(it->second.first, json{{"error", "injected failure"}}.dump());
    }
  }
  if (method == "GET") {
    if (route == routes::kInfo) return info();
    return reply(404, json{{"error", "unknown route"}}.dump());
  }
  json req;
  if (route == routes::kProbe || route == routes::kTranscribe || route == routes::kParse || route == routes::kAbsa ||
      route == routes::kScene) {
    req = json::parse(body, nullptr, false);
    if (req.is_discarded() || !req.is_object()) return bad_request("request body must be a JSON object", route);
  }
  if (route == routes::kProbe) return probe(req);
  if (route == routes::kTranscribe) return transcribe(req);
  if (route == routes::kParse) return parse(req);
  if (route == routes::kAbsa) return absa(req);
  if (route == routes::kScene) return scene(req);
  return reply(404, json{{"error", "unknown route"}}.dump());
}

HttpReply StubModels::probe(const json& req) const {
  if (!req.contains("video_id") || !req["video_id"].is_string() || !req.contains("audio_url_or_b64") ||
      !req["audio_url_or_b64"].is_string())
    return bad_request("expected {video_id, audio_url_or_b64, window_s}", "/probe");
  std::string id = req["video_id"];
  if (script_.contains("probe") && script_["probe"].contains(id)) return reply(200, script_["probe"][id].dump());
  return reply(200, json{{"language", "en"}, {"confidence", 0.99}}.dump());
}

HttpReply StubModels::transcribe(const json& req) const {
  if (!req.contains("video_id") || !req["video_id"].is_string() || !req.contains("audio_url_or_b64"))
    return bad_request("expected {video_id, audio_url_or_b64, language}", "/transcribe");
  std::string id = req["video_id"];
  if (script_.contains("transcribe") && script_["transcribe"].contains(id))
    return reply(200, script_["transcribe"][id].dump());
  return reply(200, json{{"segments", json::array()}, {"has_speech", false}}.dump());
}

HttpReply StubModels::parse(const json& req) const {
  if (!req.contains("sentences") || !req["sentences"].is_array())
    return bad_request("expected {sentences: [string]}", "/parse");
  std::string out;
  int sent_id = 0;
  for (const auto& s : req["sentences"]) {
    if (!s.is_string()) return bad_request("sentences must be strings", "/parse");
    ++sent_id;
    std::string text = s.get<std::string>();
    out += fmt::format("# sent_id = {}\n", sent_id);
    if (script_.contains("parse") && script_["parse"].contains(text)) {
      std::string block = script_["parse"][text].get<std::string>();
      while (!block.empty() && block.back() == '\n') block.pop_back();
      out += block + "\n\n";
    } else {
      out += stub_parse_sentence(text);
    }
  }
  auto r = reply(200, out, "text/plain; charset=utf-8");
  return r;
}

HttpReply StubModels::absa(const json& req) const {
  if (!req.contains("text") || !req["text"].is_string() || !req.contains("aspect") || !req["aspect"].is_string())
    return bad_request("expected {text, aspect}", "/absa");
  std::string key = req["text"].get<std::string>() + "\t" + req["aspect"].get<std::string>();
  if (script_.contains("absa") && script_["absa"].contains(key)) {
    json r = script_["absa"][key];
    if (!r.contains("model_version")) r["model_version"] = kAbsaVersion;
    return reply(200, r.dump());
  }
  auto d = digest(key);
  static constexpr std::array<std::string_view, 3> kLabels = {"negative", "neutral", "positive"};
  double confidence = 0.5 + 0.5 * d[1] / 255.0;
  return reply(200, json{{"label", kLabels[d[0] % 3]},
                         {"confidence", std::round(confidence * 1e4) / 1e4},
                         {"model_version", kAbsaVersion}}
                        .dump());
}

HttpReply StubModels::scene(const json& req) const {
  if (!req.contains("image_b64") || !req["image_b64"].is_string() || !req.contains("prompt") ||
      !req["prompt"].is_string())
    return bad_request("expected {image_b64, prompt, model_version?}", "/scene");
  const std::string& image = req["image_b64"].get_ref<const std::string&>();
  SceneResponder responder;
  int index = 0;
  {
    std::lock_guard lock(mu_);
    if (max_image_b64_ && image.size() > *max_image_b64_) return reply(413, json{{"error", "image too large"}}.dump());
    responder = scene_responder_;
    index = static_cast<int>(calls_[std::string(routes::kScene)]) - 1;
  }
  auto with_version = [](HttpReply r) {
    r.headers[std::string(kModelVersionHeader)] = std::string(kSceneVersion);
    return r;
  };
  if (responder)
    if (auto text = responder(req, index)) return with_version(reply(200, *text, "text/plain; charset=utf-8"));
  std::string key = sha256_hex(image);
  if (script_.contains("scene") && script_["scene"].contains(key))
    return with_version(reply(200, script_["scene"][key].get<std::string>(), "text/plain; charset=utf-8"));

  auto d = digest(image);
  bool abstain = d[2] % 13 == 0;
  json out = {{"scene_type", to_string(kAllSceneTypes[d[0] % kAllSceneTypes.size()])},
              {"abstain", abstain},
              {"text_overlay", d[1] % 2 == 1},
              {"evidence", json::array({fmt::format("stub cue {}", d[3] % 10)})}};
  return with_version(reply(200, out.dump(), "text/plain; charset=utf-8"));
}

HttpReply StubModels::info() const {
  json routes_served = json::array();
  for (auto r : {routes::kProbe, routes::kTranscribe, routes::kParse, routes::kAbsa, routes::kScene})
    routes_served.push_back(r);
  return reply(200, json{{"routes", routes_served},
                         {"absent", json::array()},
                         {"models",
                          {{"asr", kAsrVersion}, {"parser", kParserVersion}, {"absa", kAbsaVersion},
                           {"vlm", kSceneVersion}}},
                         {"device", "cpu (stub)"}}
                        .dump());
}

// ---------------------------------------------------------------------------

HttpReply InProcessTransport::post(std::string_view route, const std::string& body, std::string_view) {
  return models_.handle("POST", route, body);
}

HttpReply InProcessTransport::get(std::string_view route) { return models_.handle("GET", route, ""); }

struct StubServer::Impl {
  explicit Impl(const StubModels& m) : models(m) {}
  const StubModels& models;
  httplib::Server server;
  std::thread thread;
  int port = 0;
};

StubServer::StubServer(const StubModels& models) : impl_(std::make_unique<Impl>(models)) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    HttpReply r = impl_->models.handle(req.method, req.path, req.body);
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, r.content_type.empty() ? "application/json" : r.content_type);
  };
  for (auto route : {routes::kProbe, routes::kTranscribe, routes::kParse, routes::kAbsa, routes::kScene})
    impl_->server.Post(std::string(route), forward);
  impl_->server.Get(std::string(routes::kInfo), forward);
  impl_->server.set_payload_max_length(256u << 20);
}

StubServer::~StubServer() { stop(); }

int StubServer::start(int port) {
  if (port == 0)
    impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  else
    impl_->port = impl_->server.bind_to_port("127.0.0.1", port) ? port : -1;
  if (impl_->port <= 0) throw TransportError("stub server could not bind to port " + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void StubServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void StubServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string StubServer::base_url() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }

}  // namespace shortlens
