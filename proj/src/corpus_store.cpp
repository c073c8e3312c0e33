#include "shortlens/corpus_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "shortlens/errors.hpp"

namespace shortlens {

const std::vector<OutletId>& predefined_outlets() {
  static const std::vector<OutletId> kOutlets = {
      {"AJ", "Al Jazeera"},
      {"BBC", "BBC"},
      {"DW", "Deutsche Welle"},
      {"TRT", "TRT World"},
  };
  return kOutlets;
}

OutletId outlet_from_code(std::string_view code) {
  if (code.empty()) throw ValidationError("outlet code must be non-empty");
  for (char c : code) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) throw ValidationError("outlet code '" + std::string(code) + "' may only contain [A-Za-z0-9_-]");
  }
  for (const auto& o : predefined_outlets())
    if (o.code == code) return o;
  return {std::string(code), std::string(code)};
}

std::string_view to_string(LanguageStatus s) {
  switch (s) {
    case LanguageStatus::kEnglish:
      return "english";
    case LanguageStatus::kNonEnglish:
      return "non_english";
    case LanguageStatus::kUndetermined:
      return "undetermined";
  }
  return "undetermined";
}

std::optional<LanguageStatus> parse_language_status(std::string_view s) {
  if (s == "english") return LanguageStatus::kEnglish;
  if (s == "non_english") return LanguageStatus::kNonEnglish;
  if (s == "undetermined") return LanguageStatus::kUndetermined;
  return std::nullopt;
}

json VideoRecord::to_json() const {
  json j = {
      {"video_id", video_id},
      {"outlet", outlet.code},
      {"title", title},
      {"upload_date", upload_date.to_string()},
      {"view_count", view_count},
      {"duration_s", duration_s},
      {"source_url", source_url},
  };
  if (language_status) j["language_status"] = to_string(*language_status);
  if (has_speech) j["has_speech"] = *has_speech;
  if (view_snapshot_at) j["view_snapshot_at"] = *view_snapshot_at;
  return j;
}

VideoRecord parse_video_record(const json& obj, const OutletId& outlet, std::size_t line) {
  if (!obj.is_object()) throw ParseError("expected a JSON object", line);
  auto require_string = [&](const char* key) -> std::string {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(std::string("missing key '") + key + "'", line);
    if (!it->is_string()) throw ParseError(std::string("key '") + key + "' must be a string", line);
    return it->get<std::string>();
  };

  VideoRecord r;
  r.video_id = require_string("video_id");
  if (trim(r.video_id).empty()) throw ParseError("video_id is empty", line);
  r.title = require_string("title");

  std::string date = require_string("upload_date");
  auto d = Date::parse(date);
  if (!d) throw ParseError("upload_date '" + date + "' is not an ISO-8601 UTC date", line);
  r.upload_date = *d;

  auto vc = obj.find("view_count");
  if (vc == obj.end()) throw ParseError("missing key 'view_count'", line);
  if (vc->is_number_integer() || vc->is_number_unsigned()) {
    r.view_count = vc->get<std::int64_t>();
  } else if (vc->is_number_float() && std::floor(vc->get<double>()) == vc->get<double>()) {
    r.view_count = static_cast<std::int64_t>(vc->get<double>());
  } else {
    throw ParseError("view_count must be an integer", line);
  }
  if (r.view_count < 0) throw ParseError("view_count must be non-negative", line);

  if (auto it = obj.find("duration_s"); it != obj.end() && !it->is_null()) {
    if (!it->is_number()) throw ParseError("duration_s must be a number", line);
    r.duration_s = it->get<double>();
    if (!(r.duration_s >= 0.0) || !std::isfinite(r.duration_s))
      throw ParseError("duration_s must be a non-negative finite number", line);
  }
  if (auto it = obj.find("source_url"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError("source_url must be a string", line);
    r.source_url = it->get<std::string>();
  }
  if (auto it = obj.find("outlet"); it != obj.end() && !it->is_null()) {
    if (!it->is_string() || it->get<std::string>() != outlet.code)
      throw ParseError("outlet '" + it->dump() + "' does not match import outlet '" + outlet.code + "'", line);
  }
  r.outlet = outlet;
  if (auto it = obj.find("language_status"); it != obj.end() && !it->is_null()) {
    auto s = it->is_string() ? parse_language_status(it->get<std::string>()) : std::nullopt;
    if (!s) throw ParseError("language_status must be english, non_english or undetermined", line);
    r.language_status = s;
  }
  if (auto it = obj.find("has_speech"); it != obj.end() && !it->is_null()) {
    if (!it->is_boolean()) throw ParseError("has_speech must be a boolean", line);
    r.has_speech = it->get<bool>();
  }
  if (auto it = obj.find("view_snapshot_at"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError("view_snapshot_at must be a string", line);
    r.view_snapshot_at = it->get<std::string>();
  }
  return r;
}

std::vector<VideoRecord> parse_manifest(const fs::path& path, const OutletId& outlet) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::vector<VideoRecord> out;
  std::set<std::string> seen;
  std::string text;
  std::size_t lineno = 0;
  while (std::getline(in, text)) {
    ++lineno;
    if (trim(text).empty()) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    VideoRecord r = parse_video_record(obj, outlet, lineno);
    if (!seen.insert(r.video_id).second)
      throw ConflictError("line " + std::to_string(lineno) + ": duplicate video_id '" + r.video_id + "'");
    out.push_back(std::move(r));
  }
  return out;
}

const CorpusStatsRow* CorpusStats::find(std::string_view outlet) const {
  for (const auto& r : rows)
    if (r.outlet == outlet) return &r;
  return nullptr;
}

CorpusStats compute_corpus_stats(std::span<const VideoRecord> records) {
  std::vector<std::string> unresolved;
  std::map<std::string, CorpusStatsRow> by_outlet;
  for (const auto& r : records) {
    if (!r.has_speech) {
      unresolved.push_back(r.video_id);
      continue;
    }
    auto& row = by_outlet[r.outlet.code];
    row.outlet = r.outlet.code;
    ++row.video_count;
    if (*r.has_speech)
      ++row.spoken_count;
    else
      ++row.no_speech_count;
  }
  if (!unresolved.empty()) {
    std::sort(unresolved.begin(), unresolved.end());
    throw IncompleteInputError("has_speech unresolved for " + std::to_string(unresolved.size()) + " records",
                               std::move(unresolved));
  }
  CorpusStats stats;
  for (auto& [code, row] : by_outlet) {
    row.spoken_pct = percent1(row.spoken_count, row.video_count);
    stats.rows.push_back(row);
  }
  return stats;
}

std::vector<VideoRecord> filter_text_corpus(std::span<const VideoRecord> records) {
  std::vector<std::string> unresolved;
  std::vector<VideoRecord> kept;
  for (const auto& r : records) {
    if (!r.language_status || *r.language_status == LanguageStatus::kUndetermined)
      unresolved.push_back(r.video_id);
    else if (*r.language_status == LanguageStatus::kEnglish)
      kept.push_back(r);
  }
  if (!unresolved.empty()) {
    std::sort(unresolved.begin(), unresolved.end());
    throw IncompleteInputError("language status unresolved for " + std::to_string(unresolved.size()) + " records",
                               std::move(unresolved));
  }
  spdlog::info("text corpus: kept {} of {} records ({} non-English excluded)", kept.size(), records.size(),
               records.size() - kept.size());
  return kept;
}

StoreLock::StoreLock(const fs::path& root) {
  fs::create_directories(root);
  fs::path lock = root / "store.lock";
  fd_ = ::open(lock.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw DataError("cannot open " + lock.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw ConflictError("store " + root.string() + " is locked by another writer");
  }
}

StoreLock::~StoreLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

CorpusStore CorpusStore::open_writer(const fs::path& root) {
  auto lock = std::make_unique<StoreLock>(root);
  return CorpusStore(root, std::move(lock));
}

CorpusStore CorpusStore::open_reader(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("store " + root.string() + " does not exist");
  return CorpusStore(root, nullptr);
}

std::vector<VideoRecord> CorpusStore::import_manifest(const fs::path& path, const OutletId& outlet) {
  if (!lock_) throw UsageError("store opened read-only");
  auto incoming = parse_manifest(path, outlet);

  std::map<std::string, json> stored;
  for (const auto& r : records()) stored.emplace(r.video_id, r.to_json());

  std::vector<json> to_append;
  for (const auto& r : incoming) {
    json j = r.to_json();
    auto it = stored.find(r.video_id);
    if (it == stored.end()) {
      stored.emplace(r.video_id, j);
      to_append.push_back(std::move(j));
    } else if (it->second != j) {
      throw ConflictError("video_id '" + r.video_id + "' already stored with different content");
    }
  }
  if (!to_append.empty()) append_jsonl(root_ / ("manifest." + outlet.code + ".jsonl"), to_append);
  spdlog::info("import {}: {} records, {} new", path.filename().string(), incoming.size(), to_append.size());
  return incoming;
}

std::vector<VideoRecord> CorpusStore::records() const {
  std::vector<fs::path> files;
  if (fs::is_directory(root_)) {
    for (const auto& e : fs::directory_iterator(root_)) {
      auto name = e.path().filename().string();
      if (name.starts_with("manifest.") && name.ends_with(".jsonl")) files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<VideoRecord> out;
  for (const auto& f : files) {
    auto name = f.filename().string();
    auto code = name.substr(9, name.size() - 9 - 6);
    OutletId outlet = outlet_from_code(code);
    std::size_t lineno = 0;
    for (const auto& j : read_jsonl(f)) out.push_back(parse_video_record(j, outlet, ++lineno));
  }
  return out;
}

}  // namespace shortlens
