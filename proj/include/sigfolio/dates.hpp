#pragma once

#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace sigfolio {

/** Calendar date (proleptic Gregorian). */
struct Date {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31

  friend auto operator<=>(const Date&, const Date&) = default;
};

/** Days since 1970-01-01 (Gregorian civil arithmetic). */
inline std::int64_t days_from_civil(const Date& d) {
  int y = d.year;
  const unsigned m = static_cast<unsigned>(d.month);
  const unsigned dy = static_cast<unsigned>(d.day);
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + dy - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline Date civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned dy = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(dy)};
}

/** 0 = Sunday ... 6 = Saturday. */
inline int weekday(const Date& d) {
  const std::int64_t z = days_from_civil(d);
  return static_cast<int>(((z % 7) + 11) % 7);  // day 0 (1970-01-01) was a Thursday
}

inline bool is_weekend(const Date& d) {
  const int w = weekday(d);
  return w == 0 || w == 6;
}

/** Parses strict "YYYY-MM-DD"; empty on malformed or out-of-range input. */
inline std::optional<Date> parse_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (s[i] < '0' || s[i] > '9') return std::nullopt;
  Date d;
  d.year = std::stoi(s.substr(0, 4));
  d.month = std::stoi(s.substr(5, 2));
  d.day = std::stoi(s.substr(8, 2));
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) return std::nullopt;
  if (civil_from_days(days_from_civil(d)) != d) return std::nullopt;  // e.g. Feb 30
  return d;
}

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

/** `count` consecutive weekdays starting at the first weekday >= `start`. */
inline std::vector<Date> trading_calendar(const Date& start, int count) {
  std::vector<Date> out;
  out.reserve(static_cast<std::size_t>(count > 0 ? count : 0));
  std::int64_t z = days_from_civil(start);
  while (is_weekend(civil_from_days(z))) ++z;
  while (static_cast<int>(out.size()) < count) {
    const Date d = civil_from_days(z);
    if (!is_weekend(d)) out.push_back(d);
    ++z;
  }
  return out;
}

/** Strictly increasing across month boundaries; equal within a month. */
inline int month_key(const Date& d) { return d.year * 12 + (d.month - 1); }

/** Strictly increasing across quarter boundaries; equal within a quarter. */
inline int quarter_key(const Date& d) { return d.year * 4 + (d.month - 1) / 3; }

inline std::string quarter_label(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04dQ%d", d.year, (d.month - 1) / 3 + 1);
  return buf;
}

}  // namespace sigfolio
