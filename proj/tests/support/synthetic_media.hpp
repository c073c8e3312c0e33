#pragma once

#include <filesystem>
#include <string>

namespace shortlens::testing {

namespace fs = std::filesystem;

/// Writes an MJPG-in-AVI clip of `frame_count` frames. Each frame has a
/// distinct colour pattern derived from `seed` and its index.
void write_test_video(const fs::path& path, int frame_count, double fps, int width = 160, int height = 120,
                      int seed = 0);

/// Three short clips from two outlets, manifests, a stub script with
/// transcripts, and config.json. Returns the config path.
fs::path make_smoke_fixture(const fs::path& dir);

/// The parse of the two-aspect example sentence used by the linking tests.
inline constexpr const char* kExampleSentence = "Netanyahu wants to preserve the Israeli regime .";

}  // namespace shortlens::testing
