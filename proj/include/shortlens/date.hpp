#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace shortlens {

/// Calendar day in UTC.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;

  /// Accepts "YYYY-MM-DD" or an ISO-8601 UTC timestamp ("YYYY-MM-DDThh:mm:ss[.fff]Z").
  static std::optional<Date> parse(std::string_view text);
  std::string to_string() const;
};

struct YearMonth {
  int year = 1970;
  int month = 1;

  auto operator<=>(const YearMonth&) const = default;

  static YearMonth of(const Date& d) { return {d.year, d.month}; }
  std::string to_string() const;
};

bool is_valid_date(int year, int month, int day);

}  // namespace shortlens
