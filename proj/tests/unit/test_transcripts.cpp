#include <doctest.h>

#include "shortlens/errors.hpp"
#include "shortlens/stub_backend.hpp"
#include "shortlens/transcripts.hpp"

using namespace shortlens;

TEST_CASE("language codes map to statuses") {
  CHECK(language_status_for("en") == LanguageStatus::kEnglish);
  CHECK(language_status_for("en-GB") == LanguageStatus::kEnglish);
  CHECK(language_status_for("EN_us") == LanguageStatus::kEnglish);
  CHECK(language_status_for("ar") == LanguageStatus::kNonEnglish);
  CHECK(language_status_for("eng") == LanguageStatus::kNonEnglish);
  CHECK(language_status_for("und") == LanguageStatus::kUndetermined);
  CHECK(language_status_for("") == LanguageStatus::kUndetermined);
}

TEST_CASE("probe replies") {
  auto p = parse_probe_response("v1", 30, R"({"language":"ar","confidence":0.93})");
  CHECK(p.status() == LanguageStatus::kNonEnglish);
  CHECK(p.confidence == doctest::Approx(0.93));
  auto u = parse_probe_response("v1", 30, R"({"language":"und","confidence":0.8})");
  CHECK(u.status() == LanguageStatus::kUndetermined);
  CHECK(u.confidence == 0.0);
  CHECK_THROWS_AS(parse_probe_response("v1", 30, R"({"language":"en"})"), ContractViolation);
  CHECK_THROWS_AS(parse_probe_response("v1", 30, R"({"language":"en","confidence":1.5})"), ContractViolation);
  CHECK_THROWS_AS(parse_probe_response("v1", 30, "<html>"), ContractViolation);
  auto back = LanguageProbe::from_json(p.to_json());
  CHECK(back.detected_language == "ar");
  CHECK(back.probe_window_s == 30);
}

TEST_CASE("transcribe replies") {
  auto t = parse_transcribe_response(
      "v1", "en", R"({"segments":[{"start":0,"end":1.5,"text":" Hello there. "},{"start":1.5,"end":3,"text":"Bye"}]})",
      3.0);
  CHECK(t.has_speech);
  REQUIRE(t.segments.size() == 2);
  CHECK(t.segments[0].text == "Hello there.");
  CHECK(t.segments[1].seg_id == 1);
  CHECK(Transcript::from_json(t.to_json()) == t);

  auto empty = parse_transcribe_response("v2", "en", R"({"segments":[],"has_speech":false})");
  CHECK_FALSE(empty.has_speech);
  CHECK(empty.segments.empty());

  const char* bad[] = {
      R"({"segments":[{"start":1,"end":0.5,"text":"x"}]})",
      R"({"segments":[{"start":0,"end":2,"text":"x"},{"start":1,"end":3,"text":"y"}]})",
      R"({"segments":[{"start":0,"end":1,"text":"  "}]})",
      R"({"segments":[{"start":0,"end":1,"text":"x"}],"has_speech":false})",
      R"({"segments":[],"has_speech":true})",
      R"({"text":"x"})",
  };
  for (const char* b : bad) CHECK_THROWS_AS(parse_transcribe_response("v", "en", b), ContractViolation);

  // a segment may end up to one second past the stated duration
  CHECK_NOTHROW(parse_transcribe_response("v", "en", R"({"segments":[{"start":0,"end":10.9,"text":"x"}]})", 10.0));
  CHECK_THROWS_AS(parse_transcribe_response("v", "en", R"({"segments":[{"start":0,"end":11.2,"text":"x"}]})", 10.0),
                  ContractViolation);
}

TEST_CASE("audio refs") {
  CHECK(encode_audio_ref("https://example.org/a.mp4") == "https://example.org/a.mp4");
  auto p = fs::temp_directory_path() / "shortlens_audio_ref.bin";
  write_file_atomic(p, "abc");
  CHECK(encode_audio_ref(p.string()) == "YWJj");
  CHECK(encode_audio_ref("file://" + p.string()) == "YWJj");
  fs::remove(p);
  CHECK_THROWS_AS(encode_audio_ref("/nonexistent/file.mp4"), DataError);
}

TEST_CASE("asr client against the stub") {
  json script;
  script["probe"]["v-ar"] = {{"language", "ar"}, {"confidence", 0.97}};
  script["transcribe"]["v-en"] = {
      {"segments", {{{"start", 0.0}, {"end", 2.0}, {"text", "Israel says talks continue ."}}}}};
  StubModels models(script);
  InProcessTransport transport(models);
  AsrClient asr(transport);

  CHECK(asr.probe_language("v-ar", "https://x/a").status() == LanguageStatus::kNonEnglish);
  CHECK(asr.probe_language("v-en", "https://x/b").status() == LanguageStatus::kEnglish);
  CHECK_THROWS_AS(asr.probe_language("v-en", "https://x/b", 0.0), PreconditionError);

  auto r = asr.transcribe("v-en", "https://x/b", "en", 5.0);
  CHECK(r.transcript.has_speech);
  CHECK(r.transcript.segments.at(0).text == "Israel says talks continue .");
  CHECK_FALSE(r.raw_response.empty());

  auto silent = asr.transcribe("v-silent", "https://x/c", "en");
  CHECK_FALSE(silent.transcript.has_speech);

  models.inject_failures(routes::kTranscribe, 422, 1);
  CHECK_THROWS_AS(asr.transcribe("v-en", "https://x/b", "en"), ContractViolation);
}
