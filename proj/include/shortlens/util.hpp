#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace shortlens {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Round to one decimal, half away from zero.
double round1(double value);

/// 100 * num / den rounded to one decimal, half away from zero, in exact
/// integer arithmetic. Returns tenths of a percent (e.g. 907 for 90.7%);
/// an empty denominator gives 0.
std::int64_t percent_tenths(std::int64_t num, std::int64_t den);
double percent1(std::int64_t num, std::int64_t den);

/// Fixed "%.1f" rendering used by every report table.
std::string format1(double value);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string to_lower_ascii(std::string_view s);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const fs::path& path);
std::string base64_encode(std::span<const std::uint8_t> data);
std::string base64_encode(std::string_view data);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string read_file(const fs::path& path);
std::vector<std::uint8_t> read_file_bytes(const fs::path& path);

/// Writes via a sibling temp file and rename, so readers never see a partial file.
void write_file_atomic(const fs::path& path, std::string_view content);

/// Reads line-delimited JSON. Blank lines are skipped; a malformed line
/// raises ParseError naming its 1-based line number.
std::vector<json> read_jsonl(const fs::path& path);
std::string to_jsonl(std::span<const json> rows);
void append_jsonl(const fs::path& path, std::span<const json> rows);

/// RFC 4180 field quoting.
std::string csv_field(std::string_view s);
/// Quoted fields joined by commas, without a line terminator.
std::string csv_row(std::span<const std::string> fields);

}  // namespace shortlens
