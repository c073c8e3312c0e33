#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shortlens/date.hpp"
#include "shortlens/util.hpp"

namespace shortlens {

struct OutletId {
  std::string code;
  std::string display_name;

  bool operator==(const OutletId& o) const { return code == o.code; }
};

/// The four broadcasters of the reference corpus. The set is open: any
/// other non-empty code is accepted and displayed as itself.
const std::vector<OutletId>& predefined_outlets();
OutletId outlet_from_code(std::string_view code);

enum class LanguageStatus { kEnglish, kNonEnglish, kUndetermined };

std::string_view to_string(LanguageStatus s);
std::optional<LanguageStatus> parse_language_status(std::string_view s);

struct VideoRecord {
  std::string video_id;
  OutletId outlet;
  std::string title;
  Date upload_date;
  std::int64_t view_count = 0;
  double duration_s = 0.0;
  std::string source_url;
  // Unset until the language probe ran (or the manifest carried it).
  std::optional<LanguageStatus> language_status;
  // Unset until transcription ran (or the manifest carried it).
  std::optional<bool> has_speech;
  // When view_count was read; view counts are point-in-time snapshots.
  std::optional<std::string> view_snapshot_at;

  json to_json() const;
};

/// Validates one manifest object. Throws ParseError tagged with `line`.
VideoRecord parse_video_record(const json& obj, const OutletId& outlet, std::size_t line);

/// Parses a line-delimited manifest without persisting it. Rejects a
/// repeated video_id with ConflictError.
std::vector<VideoRecord> parse_manifest(const fs::path& path, const OutletId& outlet);

struct CorpusStatsRow {
  std::string outlet;
  std::int64_t video_count = 0;
  std::int64_t spoken_count = 0;
  double spoken_pct = 0.0;
  std::int64_t no_speech_count = 0;
};

struct CorpusStats {
  std::vector<CorpusStatsRow> rows;  // ordered by outlet code

  const CorpusStatsRow* find(std::string_view outlet) const;
};

/// Per-outlet speech coverage. Every record must have has_speech resolved.
CorpusStats compute_corpus_stats(std::span<const VideoRecord> records);

/// Keeps only English records. Any unresolved or undetermined language
/// status is an error rather than a silent drop.
std::vector<VideoRecord> filter_text_corpus(std::span<const VideoRecord> records);

/// Exclusive advisory lock on <root>/store.lock, held for the object's lifetime.
class StoreLock {
 public:
  explicit StoreLock(const fs::path& root);
  ~StoreLock();
  StoreLock(const StoreLock&) = delete;
  StoreLock& operator=(const StoreLock&) = delete;

 private:
  int fd_ = -1;
};

/// Directory-backed manifest store: <root>/manifest.<outlet>.jsonl files,
/// append-only, one writer at a time.
class CorpusStore {
 public:
  static CorpusStore open_writer(const fs::path& root);
  static CorpusStore open_reader(const fs::path& root);

  /// Validates `path` and appends records not already stored. Re-importing
  /// an identical record is a no-op; a stored id with different content is
  /// a conflict. Returns the validated records of the file.
  std::vector<VideoRecord> import_manifest(const fs::path& path, const OutletId& outlet);

  /// All stored records, by outlet code then insertion order.
  std::vector<VideoRecord> records() const;

  const fs::path& root() const { return root_; }
  bool writable() const { return lock_ != nullptr; }

 private:
  CorpusStore(fs::path root, std::unique_ptr<StoreLock> lock) : root_(std::move(root)), lock_(std::move(lock)) {}

  fs::path root_;
  std::unique_ptr<StoreLock> lock_;
};

}  // namespace shortlens
