#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shortlens/errors.hpp"
#include "shortlens/util.hpp"

namespace shortlens {

enum class ImageFormat { kJpeg, kPng };

std::string_view to_string(ImageFormat f);
std::optional<ImageFormat> parse_image_format(std::string_view s);
std::string_view file_extension(ImageFormat f);

struct SamplingConfig {
  double fps_out = 1.0;
  ImageFormat image_format = ImageFormat::kJpeg;
  std::optional<std::size_t> max_frames;

  void validate() const;
  json to_json() const;
};

struct FrameRecord {
  std::string video_title;
  std::string video_id;
  int frame_id = 0;
  std::string image_ref;  // relative to the frames root

  json to_json() const;
  static FrameRecord from_json(const json& j);
  bool operator==(const FrameRecord&) const = default;
};

/// Packed 8-bit BGR pixels.
struct RawImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bgr;
};

struct DecodedFrame {
  std::int64_t index = 0;
  double pts_s = 0.0;
  RawImage image;
};

class DecodeError : public DataError {
 public:
  using DataError::DataError;
};

class UnsupportedFormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Sequential decoder over one video.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual double native_fps() const = 0;
  /// False for variable-frame-rate streams; selection then uses timestamps.
  virtual bool constant_frame_rate() const = 0;
  /// Next frame in decode order, nullopt at end of stream. Throws DecodeError.
  virtual std::optional<DecodedFrame> next() = 0;
};

class MediaBackend {
 public:
  virtual ~MediaBackend() = default;
  virtual std::unique_ptr<FrameSource> open(const fs::path& path) = 0;
};

/// FFmpeg-backed decoding through OpenCV's VideoCapture.
class OpenCvMediaBackend : public MediaBackend {
 public:
  std::unique_ptr<FrameSource> open(const fs::path& path) override;
};

/// Container extensions accepted by the sampler (lower case, no dot).
const std::vector<std::string>& supported_formats();
bool is_supported_container(const fs::path& path);

struct SamplingResult {
  std::vector<FrameRecord> frames;
  std::vector<std::string> warnings;
  std::optional<int> last_good_frame_id;
  bool partial = false;
  double duration_s = 0.0;
};

/// Encodes BGR pixels with fixed encoder settings (JPEG quality 95).
std::vector<std::uint8_t> encode_image(const RawImage& image, ImageFormat format);

/// Uniform sampling: frame k is the first decoded frame at or after
/// k / fps_out seconds, located by index arithmetic (round(t * native_fps))
/// for constant-rate streams and by timestamps otherwise. A trailing
/// partial interval contributes no frame, except that a video shorter
/// than one interval still yields frame 0.
///
/// Output: <frames_root>/<video_id>/<frame_id>.<ext> and index.jsonl.
class FrameSampler {
 public:
  FrameSampler(MediaBackend& backend, fs::path frames_root) : backend_(backend), root_(std::move(frames_root)) {}

  SamplingResult sample(const fs::path& video_path, std::string_view video_id, std::string_view title,
                        const SamplingConfig& config) const;

  static std::vector<FrameRecord> read_index(const fs::path& frames_root, std::string_view video_id);

 private:
  MediaBackend& backend_;
  fs::path root_;
};

}  // namespace shortlens
