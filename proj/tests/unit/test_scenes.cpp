#include <doctest.h>

#include <atomic>
#include <random>
#include <set>

#include <opencv2/imgcodecs.hpp>

#include "shortlens/errors.hpp"
#include "shortlens/frames.hpp"
#include "shortlens/scenes.hpp"
#include "shortlens/stub_backend.hpp"

using namespace shortlens;

namespace {

std::vector<std::uint8_t> jpeg(int w, int h, int seed = 0) {
  RawImage img;
  img.width = w;
  img.height = h;
  img.bgr.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < img.bgr.size(); ++i) img.bgr[i] = static_cast<std::uint8_t>((i * 7 + seed * 31) % 256);
  return encode_image(img, ImageFormat::kJpeg);
}

cv::Size dims(const std::vector<std::uint8_t>& bytes) {
  cv::Mat m = cv::imdecode(bytes, cv::IMREAD_COLOR);
  return m.size();
}

}  // namespace

TEST_CASE("scene type names") {
  CHECK(kAllSceneTypes.size() == 7);
  std::set<std::string> names;
  for (auto t : kAllSceneTypes) {
    CHECK(parse_scene_type(to_string(t)) == t);
    names.insert(std::string(to_string(t)));
  }
  CHECK(names.size() == 7);
  CHECK(to_string(SceneType::kCombat) == "combat_or_military_action");
  CHECK(to_string(SceneType::kOther) == "other_or_unknown");
  CHECK_FALSE(parse_scene_type("Combat"));
}

TEST_CASE("prompt templates") {
  auto p = build_prompt();
  CHECK(p.template_version == "scene-v1");
  CHECK(p.rendered_text == read_file(fs::path(SHORTLENS_DATA_DIR) / "prompts" / "scene-v1.txt"));
  CHECK(p.hash() == sha256_hex(p.rendered_text));
  CHECK(p.hash().size() == 64);
  for (auto t : kAllSceneTypes) CHECK(p.rendered_text.find(to_string(t)) != std::string::npos);
  auto schema = build_prompt("scene-v1-schema");
  CHECK(schema.rendered_text.starts_with(p.rendered_text));
  CHECK(schema.hash() != p.hash());
  CHECK_THROWS_AS(build_prompt("scene-v9"), UsageError);
}

TEST_CASE("response validation") {
  auto ok = validate_response(R"({"scene_type":"public_protest_or_demonstration","abstain":false,"text_overlay":true,"evidence":["crowd with flags"]})");
  CHECK(ok.status == ParseStatus::kOk);
  CHECK(ok.scene_type == SceneType::kProtest);
  CHECK(ok.text_overlay);
  CHECK(ok.evidence == std::vector<std::string>{"crowd with flags"});

  auto fenced = validate_response("```json\n{\"scene_type\":\"news_media_or_interview_settings\",\"abstain\":false}\n```");
  CHECK(fenced.status == ParseStatus::kRepaired);
  CHECK(fenced.scene_type == SceneType::kNewsMedia);

  auto prose = validate_response("Here you go: {\"scene_type\": \"other_or_unknown\", \"abstain\": true, \"evidence\": [\"a {brace} inside\"]} Thanks.");
  CHECK(prose.status == ParseStatus::kRepaired);
  CHECK(prose.abstain);
  CHECK(prose.evidence.at(0) == "a {brace} inside");

  auto abstained = validate_response(R"({"scene_type":"combat_or_military_action","abstain":true})");
  CHECK(abstained.scene_type == SceneType::kOther);
  CHECK(validate_response(R"({"abstain":true})").scene_type == SceneType::kOther);

  auto longev = validate_response(
      R"({"scene_type":"other_or_unknown","abstain":false,"evidence":["one two three four five six seven eight nine ten eleven twelve thirteen fourteen"]})");
  CHECK(longev.evidence.at(0) == "one two three four five six seven eight nine ten eleven twelve");

  const char* bad[] = {
      "",
      "   ",
      "I cannot determine the scene.",
      "[1,2]",
      R"({"scene_type":"riot","abstain":false})",
      R"({"scene_type":"public_protest_or_demonstration"})",
      R"({"scene_type":"public_protest_or_demonstration","abstain":"no"})",
      R"({"abstain":false})",
      R"({"scene_type":3,"abstain":false})",
      R"({"scene_type":"other_or_unknown","abstain":false,"text_overlay":"yes"})",
      R"({"scene_type":"other_or_unknown","abstain":false,"evidence":"crowd"})",
      R"({"scene_type":"other_or_unknown","abstain":false,"evidence":[1]})",
      R"(First {"scene_type":"other_or_unknown","abstain":false} then {"scene_type":"other_or_unknown","abstain":false})",
      R"({"scene_type":"other_or_unknown","abstain":false)",
  };
  for (const char* b : bad) CHECK_THROWS_AS_MESSAGE(validate_response(b), ValidationError, b);
}

TEST_CASE("label json round trip and invariants") {
  SceneLabel l;
  l.video_id = "v";
  l.frame_id = 3;
  l.scene_type = SceneType::kSymbolic;
  l.evidence = {"flag"};
  l.raw_response = "raw";
  l.prompt_hash = "h";
  l.model_version = "m";
  auto j = l.to_json();
  CHECK_FALSE(j.contains("raw_response"));
  auto back = SceneLabel::from_json(j);
  l.raw_response.clear();
  CHECK(back == l);

  j["scene_type"] = "riot";
  CHECK_THROWS_AS(SceneLabel::from_json(j), ValidationError);
  j["scene_type"] = "public_protest_or_demonstration";
  j["abstain"] = true;
  CHECK_THROWS_AS(SceneLabel::from_json(j), ValidationError);
}

TEST_CASE("fit_image downscales only large images") {
  auto small = jpeg(640, 360);
  CHECK(fit_image(small, kMaxImageSide) == small);
  auto big = jpeg(2000, 1000);
  auto fitted = fit_image(big, kMaxImageSide);
  CHECK(dims(fitted) == cv::Size(1280, 640));
  CHECK_THROWS_AS(fit_image(std::vector<std::uint8_t>{1, 2, 3}, 100), DataError);
}

TEST_CASE("classifier against the stub") {
  StubModels models;
  InProcessTransport transport(models);
  SceneClassifier clf(transport, build_prompt());
  auto img = jpeg(64, 48);
  auto a = clf.classify_frame("v", 0, img);
  auto b = clf.classify_frame("v", 0, img);
  CHECK(a.label == b.label);
  CHECK(a.label.model_version == StubModels::kSceneVersion);
  CHECK(a.label.prompt_hash == build_prompt().hash());
  CHECK(a.raw_attempts.size() == 1);
  CHECK(a.label.parse_status == ParseStatus::kOk);
}

TEST_CASE("malformed reply is retried once with a JSON reminder") {
  StubModels models;
  std::atomic<int> reminders{0};
  models.set_scene_responder([&](const json& req, int) -> std::optional<std::string> {
    std::string prompt = req["prompt"];
    if (prompt.ends_with("Output JSON ONLY.\n")) {
      ++reminders;
      return R"({"scene_type":"destruction_or_humanitarian_crisis","abstain":false})";
    }
    return "Sure! The image shows rubble.";
  });
  InProcessTransport transport(models);
  SceneClassifier clf(transport, build_prompt());
  auto out = clf.classify_frame("v", 1, jpeg(32, 32));
  CHECK(out.raw_attempts.size() == 2);
  CHECK(reminders == 1);
  CHECK(out.label.scene_type == SceneType::kDestruction);
  CHECK(out.label.parse_status == ParseStatus::kOk);
}

TEST_CASE("two malformed replies give a failed label") {
  StubModels models;
  models.set_scene_responder([](const json&, int) -> std::optional<std::string> { return "no idea"; });
  InProcessTransport transport(models);
  SceneClassifier clf(transport, build_prompt(), "pinned-vlm");
  auto out = clf.classify_frame("v", 2, jpeg(32, 32));
  CHECK(out.label.parse_status == ParseStatus::kFailed);
  CHECK(out.label.abstain);
  CHECK(out.label.scene_type == SceneType::kOther);
  CHECK(out.raw_attempts.size() == 2);
  CHECK(models.calls(routes::kScene) == 2);
  // header wins over the configured version
  CHECK(out.label.model_version == StubModels::kSceneVersion);
}

TEST_CASE("payload too large halves the image once") {
  StubModels models;
  auto img = jpeg(1280, 720, 3);
  std::size_t limit = base64_encode(img).size() - 1;
  models.set_max_image_b64(limit);
  InProcessTransport transport(models);
  SceneClassifier clf(transport, build_prompt());
  auto out = clf.classify_frame("v", 0, img);
  CHECK(models.calls(routes::kScene) == 2);
  CHECK(out.label.parse_status != ParseStatus::kFailed);

  StubModels tiny;
  tiny.set_max_image_b64(10);
  InProcessTransport t2(tiny);
  SceneClassifier clf2(t2, build_prompt());
  CHECK_THROWS_AS(clf2.classify_frame("v", 0, img), PreconditionError);
}

TEST_CASE("server errors surface as contract violations") {
  StubModels models;
  models.inject_failures(routes::kScene, 422, 1);
  InProcessTransport transport(models);
  SceneClassifier clf(transport, build_prompt());
  CHECK_THROWS_AS(clf.classify_frame("v", 0, jpeg(16, 16)), ContractViolation);
}

TEST_CASE("property: persisted labels are well formed and counts are preserved") {
  const char* replies[] = {
      R"({"scene_type":"combat_or_military_action","abstain":false,"text_overlay":false,"evidence":["tank"]})",
      R"({"scene_type":"political_or_diplomatic_events","abstain":true,"text_overlay":true,"evidence":[]})",
      "```\n{\"scene_type\":\"symbolic_or_religious_ritual\",\"abstain\":false}\n```",
      "The answer: {\"abstain\": true} done",
      "not json at all",
      R"({"scene_type":"unknown_type","abstain":false})",
      R"({"scene_type":"news_media_or_interview_settings"})",
      "{\"a\":1} {\"b\":2}",
      "",
  };
  constexpr int kN = 300;
  std::mt19937 g(17);
  std::uniform_int_distribution<int> pick(0, 8);
  std::vector<std::pair<int, int>> plan(kN);
  for (auto& p : plan) p = {pick(g), pick(g)};

  int failed = 0, labels = 0;
  for (int i = 0; i < kN; ++i) {
    StubModels m;
    auto [first, second] = plan[static_cast<std::size_t>(i)];
    m.set_scene_responder([&, first, second](const json& req, int) -> std::optional<std::string> {
      std::string prompt = req["prompt"];
      return std::string(replies[prompt.ends_with("ONLY.\n") ? second : first]);
    });
    InProcessTransport t(m);
    SceneClassifier clf(t, build_prompt());
    auto out = clf.classify_frame("v", i, jpeg(8, 8, i));
    ++labels;
    const auto& l = out.label;
    auto j = l.to_json();
    REQUIRE(j["scene_type"].is_string());
    CHECK(parse_scene_type(j["scene_type"].get<std::string>()).has_value());
    CHECK_NOTHROW(SceneLabel::from_json(j));
    if (l.abstain) CHECK(l.scene_type == SceneType::kOther);
    bool first_ok = first <= 3, second_ok = second <= 3;
    if (!first_ok && !second_ok) {
      CHECK(l.parse_status == ParseStatus::kFailed);
      ++failed;
    } else {
      CHECK(l.parse_status != ParseStatus::kFailed);
    }
    CHECK(out.raw_attempts.size() == (first_ok ? 1u : 2u));
  }
  CHECK(labels == kN);
  CHECK(failed > 0);
}

TEST_CASE("batch classification keeps order and count") {
  auto dir = fs::temp_directory_path() / "shortlens_scene_batch";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<SceneFrame> frames;
  for (int i = 0; i < 25; ++i) {
    auto p = dir / (std::to_string(i) + ".jpg");
    auto bytes = jpeg(16, 16, i);
    write_file_atomic(p, std::string(bytes.begin(), bytes.end()));
    frames.push_back({"vid", i, p});
  }
  StubModels models;
  models.set_scene_responder([](const json&, int idx) -> std::optional<std::string> {
    if (idx % 5 == 0) return "garbage";
    return std::nullopt;
  });
  InProcessTransport transport(models);
  SceneClassifier clf(transport, build_prompt());
  auto out = clf.classify_batch(frames, 4);
  REQUIRE(out.size() == frames.size());
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].label.frame_id == static_cast<int>(i));
  fs::remove_all(dir);
}

TEST_CASE("nondeterminism detection") {
  SceneLabel a;
  a.video_id = "v";
  a.frame_id = 1;
  a.prompt_hash = "p";
  a.model_version = "m";
  SceneLabel b = a;
  b.scene_type = SceneType::kProtest;
  std::vector<SceneLabel> prev = {a}, cur = {b};
  CHECK(nondeterministic_frames(prev, cur) == std::vector<std::string>{"v/1"});
  cur[0].model_version = "m2";
  CHECK(nondeterministic_frames(prev, cur).empty());
  CHECK(nondeterministic_frames(prev, prev).empty());
}
