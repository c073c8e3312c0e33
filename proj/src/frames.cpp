#include "shortlens/frames.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>
#include <spdlog/spdlog.h>

namespace shortlens {

std::string_view to_string(ImageFormat f) { return f == ImageFormat::kJpeg ? "jpeg" : "png"; }

std::optional<ImageFormat> parse_image_format(std::string_view s) {
  std::string l = to_lower_ascii(s);
  if (l == "jpeg" || l == "jpg") return ImageFormat::kJpeg;
  if (l == "png") return ImageFormat::kPng;
  return std::nullopt;
}

std::string_view file_extension(ImageFormat f) { return f == ImageFormat::kJpeg ? "jpg" : "png"; }

void SamplingConfig::validate() const {
  if (!(fps_out > 0.0) || !std::isfinite(fps_out)) throw UsageError("sampling fps must be positive");
  if (max_frames && *max_frames == 0) throw UsageError("max_frames must be at least 1");
}

json SamplingConfig::to_json() const {
  json j = {{"fps", fps_out}, {"format", to_string(image_format)}};
  j["max_frames"] = max_frames ? json(*max_frames) : json(nullptr);
  return j;
}

json FrameRecord::to_json() const {
  return {{"video_title", video_title}, {"video_id", video_id}, {"frame_id", frame_id}, {"image_ref", image_ref}};
}

FrameRecord FrameRecord::from_json(const json& j) {
  return {j.at("video_title").get<std::string>(), j.at("video_id").get<std::string>(), j.at("frame_id").get<int>(),
          j.at("image_ref").get<std::string>()};
}

const std::vector<std::string>& supported_formats() {
  static const std::vector<std::string> kFormats = {"mp4", "webm", "mkv", "mov", "m4v", "avi"};
  return kFormats;
}

bool is_supported_container(const fs::path& path) {
  std::string ext = to_lower_ascii(path.extension().string());
  if (ext.empty()) return false;
  ext.erase(0, 1);
  const auto& f = supported_formats();
  return std::find(f.begin(), f.end(), ext) != f.end();
}

std::vector<std::uint8_t> encode_image(const RawImage& image, ImageFormat format) {
  if (image.width <= 0 || image.height <= 0 ||
      image.bgr.size() != static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height) * 3)
    throw DataError("raw image buffer does not match its dimensions");
  cv::Mat mat(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.bgr.data()));
  std::vector<std::uint8_t> out;
  std::vector<int> params;
  if (format == ImageFormat::kJpeg)
    params = {cv::IMWRITE_JPEG_QUALITY, 95, cv::IMWRITE_JPEG_OPTIMIZE, 0};
  else
    params = {cv::IMWRITE_PNG_COMPRESSION, 3};
  std::string ext = format == ImageFormat::kJpeg ? ".jpg" : ".png";
  if (!cv::imencode(ext, mat, out, params)) throw DataError("image encoding failed");
  return out;
}

// ---------------------------------------------------------------------------

namespace {

class OpenCvFrameSource : public FrameSource {
 public:
  explicit OpenCvFrameSource(const fs::path& path) : cap_(path.string(), cv::CAP_FFMPEG) {
    if (!cap_.isOpened()) throw DecodeError("cannot open video " + path.string());
    fps_ = cap_.get(cv::CAP_PROP_FPS);
    reported_frames_ = cap_.get(cv::CAP_PROP_FRAME_COUNT);
    if (!std::isfinite(fps_) || fps_ <= 0.0 || fps_ > 1000.0) fps_ = 0.0;
  }

  double native_fps() const override { return fps_; }
  bool constant_frame_rate() const override { return fps_ > 0.0; }

  std::optional<DecodedFrame> next() override {
    cv::Mat mat;
    if (!cap_.read(mat) || mat.empty()) {
      // The container's frame count is an estimate; only a shortfall of
      // more than a second's worth of frames counts as a decode failure.
      double slack = std::max(2.0, fps_);
      if (reported_frames_ > 0 && static_cast<double>(decoded_) + slack < reported_frames_)
        throw DecodeError("decoder stopped at frame " + std::to_string(decoded_) + " of ~" +
                          std::to_string(static_cast<long long>(reported_frames_)));
      return std::nullopt;
    }
    DecodedFrame f;
    f.index = decoded_++;
    f.pts_s = cap_.get(cv::CAP_PROP_POS_MSEC) / 1000.0;
    cv::Mat bgr;
    if (mat.channels() == 3)
      bgr = mat;
    else
      cv::cvtColor(mat, bgr, mat.channels() == 4 ? cv::COLOR_BGRA2BGR : cv::COLOR_GRAY2BGR);
    if (!bgr.isContinuous()) bgr = bgr.clone();
    f.image.width = bgr.cols;
    f.image.height = bgr.rows;
    f.image.bgr.assign(bgr.data, bgr.data + bgr.total() * 3);
    return f;
  }

 private:
  cv::VideoCapture cap_;
  double fps_ = 0.0;
  double reported_frames_ = 0.0;
  std::int64_t decoded_ = 0;
};

}  // namespace

std::unique_ptr<FrameSource> OpenCvMediaBackend::open(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw DataError("video " + path.string() + " not found");
  return std::make_unique<OpenCvFrameSource>(path);
}

// ---------------------------------------------------------------------------

SamplingResult FrameSampler::sample(const fs::path& video_path, std::string_view video_id, std::string_view title,
                                    const SamplingConfig& config) const {
  config.validate();
  if (!is_supported_container(video_path))
    throw UnsupportedFormatError("unsupported container '" + video_path.extension().string() + "' for " +
                                 video_path.string());
  auto source = backend_.open(video_path);
  const bool cfr = source->constant_frame_rate();
  const double fps = source->native_fps();
  constexpr double kEps = 1e-9;

  const fs::path dir = root_ / std::string(video_id);
  fs::remove_all(dir);
  fs::create_directories(dir);

  SamplingResult result;
  struct Candidate {
    int k;
    RawImage image;
  };
  std::vector<Candidate> pending;
  int next_k = 0;
  const std::size_t cap = config.max_frames.value_or(std::numeric_limits<std::size_t>::max());

  auto write = [&](const Candidate& c) {
    std::string name = std::to_string(c.k) + "." + std::string(file_extension(config.image_format));
    auto bytes = encode_image(c.image, config.image_format);
    write_file_atomic(dir / name, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    result.frames.push_back({std::string(title), std::string(video_id), c.k, std::string(video_id) + "/" + name});
    result.last_good_frame_id = c.k;
  };
  // Writes every pending candidate whose interval [k, k+1) / fps_out lies within `covered` seconds.
  auto flush_confirmed = [&](double covered) {
    auto it = pending.begin();
    while (it != pending.end() && static_cast<double>(it->k + 1) / config.fps_out <= covered + kEps) {
      write(*it);
      ++it;
    }
    pending.erase(pending.begin(), it);
  };

  double covered = 0.0;  // seconds of video known to exist
  double last_pts = 0.0, prev_pts = 0.0;
  std::int64_t decoded = 0;
  while (true) {
    if (static_cast<std::size_t>(next_k) >= cap && pending.empty()) break;
    std::optional<DecodedFrame> frame;
    try {
      frame = source->next();
    } catch (const DecodeError& e) {
      result.partial = true;
      std::string last = result.last_good_frame_id ? std::to_string(*result.last_good_frame_id) : "none";
      result.warnings.push_back(std::string(e.what()) + "; last good frame_id " + last);
      spdlog::warn("{}: {}; last good frame_id {}", video_id, e.what(), last);
      break;
    }
    if (!frame) break;
    ++decoded;
    prev_pts = last_pts;
    last_pts = frame->pts_s;
    if (cfr) {
      while (static_cast<std::size_t>(next_k) < cap &&
             std::llround(static_cast<double>(next_k) * fps / config.fps_out) <= frame->index) {
        pending.push_back({next_k++, frame->image});
      }
      covered = static_cast<double>(frame->index + 1) / fps;
    } else {
      while (static_cast<std::size_t>(next_k) < cap &&
             static_cast<double>(next_k) / config.fps_out <= frame->pts_s + kEps) {
        pending.push_back({next_k++, frame->image});
      }
      covered = frame->pts_s;
    }
    flush_confirmed(covered);
  }

  if (cfr) {
    result.duration_s = static_cast<double>(decoded) / fps;
  } else {
    double tail = decoded >= 2 ? last_pts - prev_pts : 0.0;
    result.duration_s = decoded > 0 ? last_pts + std::max(0.0, tail) : 0.0;
  }
  if (result.partial) result.duration_s = std::min(result.duration_s, covered);
  flush_confirmed(result.duration_s);
  // A video shorter than one interval still yields its first frame.
  if (result.frames.empty() && !pending.empty() && pending.front().k == 0) write(pending.front());

  std::vector<json> index;
  for (const auto& f : result.frames) index.push_back(f.to_json());
  write_file_atomic(dir / "index.jsonl", to_jsonl(index));
  return result;
}

std::vector<FrameRecord> FrameSampler::read_index(const fs::path& frames_root, std::string_view video_id) {
  std::vector<FrameRecord> out;
  for (const auto& j : read_jsonl(frames_root / std::string(video_id) / "index.jsonl"))
    out.push_back(FrameRecord::from_json(j));
  return out;
}

}  // namespace shortlens
