#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "reference_fixtures.hpp"
#include "shortlens/corpus_store.hpp"
#include "shortlens/errors.hpp"

using namespace shortlens;
using namespace shortlens::testing;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("shortlens_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

const char* kLine1 =
    R"({"video_id":"a1","title":"One","upload_date":"2023-10-09","view_count":120,"duration_s":41.5,"source_url":"https://example.org/a1"})";
const char* kLine2 =
    R"({"video_id":"a2","title":"Two","upload_date":"2023-11-01T08:00:00Z","view_count":7,"source_url":"a2.mp4"})";

}  // namespace

TEST_CASE("outlets") {
  CHECK(predefined_outlets().size() == 4);
  CHECK(outlet_from_code("AJ").display_name == "Al Jazeera");
  CHECK(outlet_from_code("XYZ").display_name == "XYZ");
  CHECK(outlet_from_code("XYZ").code == "XYZ");
}

TEST_CASE("manifest parsing validates fields") {
  TempDir t("manifest_parse");
  write(t.path / "ok.jsonl", std::string(kLine1) + "\n\n" + kLine2 + "\n");
  auto recs = parse_manifest(t.path / "ok.jsonl", outlet_from_code("AJ"));
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].video_id == "a1");
  CHECK(recs[0].duration_s == doctest::Approx(41.5));
  CHECK(recs[1].upload_date.to_string() == "2023-11-01");
  CHECK_FALSE(recs[0].language_status);
  CHECK_FALSE(recs[0].has_speech);

  struct Bad {
    const char* line;
    const char* what;
  };
  std::vector<Bad> bad = {
      {R"({"title":"x","upload_date":"2023-10-09","view_count":1})", "video_id"},
      {R"({"video_id":"x","title":"x","upload_date":"09/10/2023","view_count":1})", "upload_date"},
      {R"({"video_id":"x","title":"x","upload_date":"2023-10-09","view_count":-4})", "view_count"},
      {R"({"video_id":"x","title":"x","upload_date":"2023-10-09","view_count":1.5})", "view_count"},
      {R"({"video_id":"x","title":"x","upload_date":"2023-10-09","view_count":1,"outlet":"BBC"})", "outlet"},
      {R"({"video_id":"x","title":"x","upload_date":"2023-10-09","view_count":1,"has_speech":"yes"})", "has_speech"},
      {R"(not json)", "malformed"},
  };
  for (const auto& b : bad) {
    write(t.path / "bad.jsonl", std::string(kLine1) + "\n" + b.line + "\n");
    try {
      parse_manifest(t.path / "bad.jsonl", outlet_from_code("AJ"));
      FAIL("accepted: " << b.line);
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find(b.what) != std::string::npos);
    }
  }
}

TEST_CASE("duplicate ids within a manifest conflict") {
  TempDir t("manifest_dup");
  write(t.path / "dup.jsonl", std::string(kLine1) + "\n" + kLine1 + "\n");
  CHECK_THROWS_AS(parse_manifest(t.path / "dup.jsonl", outlet_from_code("AJ")), ConflictError);
}

TEST_CASE("store import is idempotent and rejects conflicting content") {
  TempDir t("store_import");
  write(t.path / "m.jsonl", std::string(kLine1) + "\n" + kLine2 + "\n");
  {
    auto store = CorpusStore::open_writer(t.path / "store");
    store.import_manifest(t.path / "m.jsonl", outlet_from_code("AJ"));
    auto before = read_file(t.path / "store" / "manifest.AJ.jsonl");
    store.import_manifest(t.path / "m.jsonl", outlet_from_code("AJ"));
    CHECK(read_file(t.path / "store" / "manifest.AJ.jsonl") == before);
    CHECK(store.records().size() == 2);

    std::string changed = kLine1;
    changed.replace(changed.find("\"One\""), 5, "\"Uno\"");
    write(t.path / "m2.jsonl", changed + "\n");
    CHECK_THROWS_AS(store.import_manifest(t.path / "m2.jsonl", outlet_from_code("AJ")), ConflictError);
    CHECK(read_file(t.path / "store" / "manifest.AJ.jsonl") == before);
  }
  auto reader = CorpusStore::open_reader(t.path / "store");
  CHECK_FALSE(reader.writable());
  CHECK_THROWS_AS(reader.import_manifest(t.path / "m.jsonl", outlet_from_code("AJ")), UsageError);
  auto recs = reader.records();
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].outlet.code == "AJ");
}

TEST_CASE("second writer is refused") {
  TempDir t("store_lock");
  auto a = CorpusStore::open_writer(t.path);
  CHECK_THROWS_AS(CorpusStore::open_writer(t.path), ConflictError);
}

TEST_CASE("record json round trip") {
  auto r = make_record("BBC", 3);
  r.language_status = LanguageStatus::kNonEnglish;
  r.has_speech = false;
  auto back = parse_video_record(r.to_json(), r.outlet, 1);
  CHECK(back.to_json() == r.to_json());
}

TEST_CASE("speech coverage per outlet") {
  auto recs = speech_coverage_records();
  auto stats = compute_corpus_stats(recs);
  REQUIRE(stats.rows.size() == 4);
  for (const auto& row : kSpeechCoverage) {
    const auto* s = stats.find(row.outlet);
    REQUIRE(s);
    CHECK(s->video_count == row.videos);
    CHECK(s->spoken_count == row.spoken);
    CHECK(s->no_speech_count == row.no_speech);
    // oracle: nearest tenth of a percent computed in long double
    long double pct = 100.0L * row.spoken / row.videos;
    CHECK(s->spoken_pct == doctest::Approx(std::round(pct * 10) / 10));
  }
  CHECK(stats.find("AJ")->spoken_pct == doctest::Approx(90.7));
  CHECK(stats.find("BBC")->spoken_pct == doctest::Approx(100.0));
  CHECK(stats.find("DW")->spoken_pct == doctest::Approx(97.6));
  // 1249 / 1258 = 99.284...; nearest tenth is 99.3
  CHECK(stats.find("TRT")->spoken_pct == doctest::Approx(99.3));
}

TEST_CASE("corpus stats are order independent") {
  auto recs = speech_coverage_records();
  auto expected = compute_corpus_stats(recs);
  std::mt19937 g(3);
  for (int round = 0; round < 5; ++round) {
    std::shuffle(recs.begin(), recs.end(), g);
    auto got = compute_corpus_stats(recs);
    REQUIRE(got.rows.size() == expected.rows.size());
    for (std::size_t i = 0; i < got.rows.size(); ++i) {
      CHECK(got.rows[i].outlet == expected.rows[i].outlet);
      CHECK(got.rows[i].spoken_count == expected.rows[i].spoken_count);
    }
  }
}

TEST_CASE("unresolved speech is an error") {
  auto recs = speech_coverage_records();
  recs[5].has_speech.reset();
  try {
    compute_corpus_stats(recs);
    FAIL("expected IncompleteInputError");
  } catch (const IncompleteInputError& e) {
    CHECK(e.offenders() == std::vector<std::string>{recs[5].video_id});
  }
}

TEST_CASE("english filter keeps english records only") {
  auto recs = speech_coverage_records();
  for (int i = 0; i < 36; ++i) {
    auto r = make_record("AJ", 5000 + i);
    r.language_status = LanguageStatus::kNonEnglish;
    recs.push_back(r);
  }
  CHECK(recs.size() == 2335 + 36);
  auto kept = filter_text_corpus(recs);
  CHECK(kept.size() == 2335);
  for (const auto& r : kept) CHECK(*r.language_status == LanguageStatus::kEnglish);

  recs[1].language_status = LanguageStatus::kUndetermined;
  recs[2].language_status.reset();
  try {
    filter_text_corpus(recs);
    FAIL("expected IncompleteInputError");
  } catch (const IncompleteInputError& e) {
    CHECK(e.offenders().size() == 2);
  }
}
