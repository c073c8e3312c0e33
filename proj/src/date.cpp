#include "shortlens/date.hpp"

#include <cctype>

#include <fmt/format.h>

namespace shortlens {

namespace {

bool read_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

bool valid_time_suffix(std::string_view rest) {
  // "Thh:mm:ss[.fff]Z"
  if (rest.size() < 10 || (rest[0] != 'T' && rest[0] != ' ')) return false;
  int h = 0, m = 0, s = 0;
  if (!read_digits(rest, 1, 2, h) || rest[3] != ':' || !read_digits(rest, 4, 2, m) || rest[6] != ':' ||
      !read_digits(rest, 7, 2, s))
    return false;
  if (h > 23 || m > 59 || s > 60) return false;
  std::size_t i = 9;
  if (i < rest.size() && rest[i] == '.') {
    ++i;
    while (i < rest.size() && std::isdigit(static_cast<unsigned char>(rest[i]))) ++i;
  }
  return i + 1 == rest.size() && (rest[i] == 'Z' || rest[i] == 'z');
}

}  // namespace

bool is_valid_date(int year, int month, int day) {
  if (year < 1 || month < 1 || month > 12 || day < 1) return false;
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int dim = kDays[month - 1];
  bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  if (month == 2 && leap) dim = 29;
  return day <= dim;
}

std::optional<Date> Date::parse(std::string_view text) {
  Date d;
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  if (!read_digits(text, 0, 4, d.year) || !read_digits(text, 5, 2, d.month) || !read_digits(text, 8, 2, d.day))
    return std::nullopt;
  if (!is_valid_date(d.year, d.month, d.day)) return std::nullopt;
  if (text.size() == 10) return d;
  // Timestamps with offsets other than Z would need a day shift; reject them rather than guess.
  if (!valid_time_suffix(text.substr(10))) return std::nullopt;
  return d;
}

std::string Date::to_string() const { return fmt::format("{:04d}-{:02d}-{:02d}", year, month, day); }

std::string YearMonth::to_string() const { return fmt::format("{:04d}-{:02d}", year, month); }

}  // namespace shortlens
