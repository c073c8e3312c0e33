#include <doctest.h>

#include <chrono>
#include <cmath>
#include <deque>

#include "shortlens/errors.hpp"
#include "shortlens/frames.hpp"
#include "synthetic_media.hpp"

using namespace shortlens;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("shortlens_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RawImage tagged(std::int64_t index) {
  RawImage img;
  img.width = 2;
  img.height = 1;
  auto v = static_cast<std::uint8_t>(index % 251);
  img.bgr = {v, static_cast<std::uint8_t>(index / 251), 7, v, 0, 9};
  return img;
}

// Scripted decoder: frames at given timestamps, optionally failing after `fail_after` frames.
class FakeSource : public FrameSource {
 public:
  FakeSource(double fps, std::vector<double> pts, std::optional<std::size_t> fail_after)
      : fps_(fps), pts_(std::move(pts)), fail_after_(fail_after) {}
  double native_fps() const override { return fps_; }
  bool constant_frame_rate() const override { return fps_ > 0; }
  std::optional<DecodedFrame> next() override {
    if (fail_after_ && i_ == *fail_after_) throw DecodeError("corrupt packet");
    if (i_ >= pts_.size()) return std::nullopt;
    DecodedFrame f{static_cast<std::int64_t>(i_), pts_[i_], tagged(static_cast<std::int64_t>(i_))};
    ++i_;
    return f;
  }

 private:
  double fps_;
  std::vector<double> pts_;
  std::optional<std::size_t> fail_after_;
  std::size_t i_ = 0;
};

class FakeBackend : public MediaBackend {
 public:
  double fps = 30;
  std::vector<double> pts;
  std::optional<std::size_t> fail_after;
  std::unique_ptr<FrameSource> open(const fs::path&) override {
    return std::make_unique<FakeSource>(fps, pts, fail_after);
  }
  void constant(int n, double rate) {
    fps = rate;
    pts.clear();
    for (int i = 0; i < n; ++i) pts.push_back(i / rate);
  }
};

std::string encoded(std::int64_t index, ImageFormat f) {
  auto b = encode_image(tagged(index), f);
  return {b.begin(), b.end()};
}

}  // namespace

TEST_CASE("sampling config validation") {
  SamplingConfig c;
  CHECK_NOTHROW(c.validate());
  c.fps_out = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.fps_out = 1;
  c.max_frames = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  CHECK(parse_image_format("png") == ImageFormat::kPng);
  CHECK_FALSE(parse_image_format("gif"));
}

TEST_CASE("container support") {
  CHECK(is_supported_container("a.mp4"));
  CHECK(is_supported_container("a.MKV"));
  CHECK(is_supported_container("a.webm"));
  CHECK_FALSE(is_supported_container("a.gif"));
  CHECK_FALSE(is_supported_container("noext"));
  TempDir t("frames_fmt");
  FakeBackend fake;
  FrameSampler sampler(fake, t.path);
  CHECK_THROWS_AS(sampler.sample("clip.flv", "v", "t", {}), UnsupportedFormatError);
}

TEST_CASE("constant-rate sampling picks frame round(k * fps / fps_out)") {
  TempDir t("frames_cfr");
  struct Case {
    int frames;
    double fps;
    double fps_out;
  };
  std::vector<Case> cases = {{300, 30, 1}, {299, 30, 1}, {301, 30, 1}, {250, 25, 1}, {240, 23.976, 1},
                             {600, 29.97, 2}, {15, 30, 1}, {1, 30, 1}, {100, 24, 0.5}, {90, 30, 3}};
  for (const auto& c : cases) {
    FakeBackend fake;
    fake.constant(c.frames, c.fps);
    FrameSampler sampler(fake, t.path);
    SamplingConfig cfg;
    cfg.fps_out = c.fps_out;
    cfg.image_format = ImageFormat::kPng;
    auto r = sampler.sample("v.mp4", "vid", "title", cfg);
    // oracle: one frame per complete interval, at least one
    double duration = c.frames / c.fps;
    auto expected = std::max<long>(1, static_cast<long>(std::floor(duration * c.fps_out + 1e-9)));
    CAPTURE(c.frames);
    CAPTURE(c.fps);
    REQUIRE(static_cast<long>(r.frames.size()) == expected);
    CHECK(r.duration_s == doctest::Approx(duration));
    for (std::size_t k = 0; k < r.frames.size(); ++k) {
      CHECK(r.frames[k].frame_id == static_cast<int>(k));
      CHECK(r.frames[k].image_ref == "vid/" + std::to_string(k) + ".png");
      auto idx = std::llround(k * c.fps / c.fps_out);
      CHECK(read_file(t.path / r.frames[k].image_ref) == encoded(idx, ImageFormat::kPng));
    }
    CHECK(FrameSampler::read_index(t.path, "vid") == r.frames);
  }
}

TEST_CASE("variable-rate sampling uses timestamps") {
  TempDir t("frames_vfr");
  FakeBackend fake;
  fake.fps = 0;
  fake.pts = {0.0, 0.4, 0.95, 1.02, 1.5, 2.2, 2.9, 3.05, 3.6};
  FrameSampler sampler(fake, t.path);
  SamplingConfig cfg;
  cfg.image_format = ImageFormat::kPng;
  auto r = sampler.sample("v.webm", "vid", "t", cfg);
  // duration = 3.6 + 0.55: intervals 0..3 complete
  REQUIRE(r.frames.size() == 4);
  CHECK(read_file(t.path / "vid/0.png") == encoded(0, ImageFormat::kPng));
  CHECK(read_file(t.path / "vid/1.png") == encoded(3, ImageFormat::kPng));
  CHECK(read_file(t.path / "vid/2.png") == encoded(5, ImageFormat::kPng));
  CHECK(read_file(t.path / "vid/3.png") == encoded(7, ImageFormat::kPng));
}

TEST_CASE("max_frames caps output") {
  TempDir t("frames_cap");
  FakeBackend fake;
  fake.constant(300, 30);
  FrameSampler sampler(fake, t.path);
  SamplingConfig cfg;
  cfg.max_frames = 3;
  CHECK(sampler.sample("v.mp4", "vid", "t", cfg).frames.size() == 3);
}

TEST_CASE("decode errors keep earlier frames and report the last good one") {
  TempDir t("frames_err");
  FakeBackend fake;
  fake.constant(300, 30);
  fake.fail_after = 125;
  FrameSampler sampler(fake, t.path);
  auto r = sampler.sample("v.mp4", "vid", "t", {});
  CHECK(r.partial);
  REQUIRE(r.frames.size() == 4);
  CHECK(r.last_good_frame_id == 3);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("last good frame_id 3") != std::string::npos);
  CHECK(FrameSampler::read_index(t.path, "vid").size() == 4);
}

TEST_CASE("resampling replaces earlier output") {
  TempDir t("frames_replace");
  FakeBackend fake;
  fake.constant(300, 30);
  FrameSampler sampler(fake, t.path);
  sampler.sample("v.mp4", "vid", "t", {});
  fake.constant(60, 30);
  auto r = sampler.sample("v.mp4", "vid", "t", {});
  CHECK(r.frames.size() == 2);
  CHECK_FALSE(fs::exists(t.path / "vid" / "5.jpg"));
}

TEST_CASE("real decoding through ffmpeg") {
  TempDir t("frames_real");
  testing::write_test_video(t.path / "ten.avi", 300, 30.0);
  testing::write_test_video(t.path / "half.avi", 15, 30.0);
  OpenCvMediaBackend backend;
  FrameSampler a(backend, t.path / "out_a");
  FrameSampler b(backend, t.path / "out_b");
  auto start = std::chrono::steady_clock::now();
  auto ra = a.sample(t.path / "ten.avi", "ten", "Ten seconds", {});
  auto rb = b.sample(t.path / "ten.avi", "ten", "Ten seconds", {});
  REQUIRE(ra.frames.size() == 10);
  for (int k = 0; k < 10; ++k) CHECK(ra.frames[static_cast<std::size_t>(k)].frame_id == k);
  CHECK(ra.duration_s == doctest::Approx(10.0));
  CHECK(read_file(t.path / "out_a/ten/index.jsonl") == read_file(t.path / "out_b/ten/index.jsonl"));
  for (int k = 0; k < 10; ++k) {
    auto name = std::to_string(k) + ".jpg";
    CHECK(read_file(t.path / "out_a/ten" / name) == read_file(t.path / "out_b/ten" / name));
  }
  auto half = a.sample(t.path / "half.avi", "half", "Half", {});
  CHECK(half.frames.size() == 1);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(10));
  CHECK_THROWS_AS(backend.open(t.path / "missing.avi"), DataError);
}
