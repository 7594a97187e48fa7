#pragma once

// UTC civil-time helpers; timestamps are seconds since 1970-01-01T00:00:00.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace msegpd::calendar {

struct CivilDate {
  int year = 1970;
  unsigned month = 1;  // 1..12
  unsigned day = 1;    // 1..31
};

// Days since 1970-01-01 of a proleptic Gregorian date (H. Hinnant's algorithm).
[[nodiscard]] constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) noexcept {
  y -= m <= 2 ? 1 : 0;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

[[nodiscard]] constexpr CivilDate civil_from_days(std::int64_t z) noexcept {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return CivilDate{static_cast<int>(y + (m <= 2 ? 1 : 0)), m, d};
}

[[nodiscard]] constexpr bool is_leap(int y) noexcept { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

[[nodiscard]] constexpr unsigned days_in_month(int y, unsigned m) noexcept {
  constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29u : kDays[m - 1];
}

[[nodiscard]] constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) noexcept {
  return a / b - ((a % b != 0) && ((a < 0) != (b < 0)) ? 1 : 0);
}

[[nodiscard]] constexpr CivilDate date_of(std::int64_t t) noexcept { return civil_from_days(floor_div(t, 86400)); }

[[nodiscard]] constexpr std::int64_t make_time(int y, unsigned mo, unsigned d, unsigned h = 0, unsigned mi = 0,
                                               unsigned s = 0) noexcept {
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

// First instant of the month following the one containing t.
[[nodiscard]] constexpr std::int64_t next_month_start(std::int64_t t) noexcept {
  const CivilDate c = date_of(t);
  return c.month == 12 ? make_time(c.year + 1, 1, 1) : make_time(c.year, c.month + 1, 1);
}

namespace detail {

inline bool parse_uint(std::string_view s, unsigned& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

// Accepts "YYYY-MM-DD", "YYYY-MM-DD[T ]HH:MM[:SS][Z]" and the compact
// "YYYYMMDDHHMM[SS]" form used by Meteo-France 6-minute files.
[[nodiscard]] inline std::optional<std::int64_t> parse_timestamp(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '"' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (s.size() >= 10 && s[4] == '-' && s[7] == '-') {
    if (!detail::parse_int(s.substr(0, 4), y) || !detail::parse_uint(s.substr(5, 2), mo) ||
        !detail::parse_uint(s.substr(8, 2), d)) {
      return std::nullopt;
    }
    if (s.size() > 10) {
      if ((s[10] != 'T' && s[10] != ' ') || s.size() < 16 || s[13] != ':') return std::nullopt;
      if (!detail::parse_uint(s.substr(11, 2), h) || !detail::parse_uint(s.substr(14, 2), mi)) return std::nullopt;
      if (s.size() == 19) {
        if (s[16] != ':' || !detail::parse_uint(s.substr(17, 2), sec)) return std::nullopt;
      } else if (s.size() != 16) {
        return std::nullopt;
      }
    }
  } else if (s.size() == 12 || s.size() == 14) {
    if (!detail::parse_int(s.substr(0, 4), y) || !detail::parse_uint(s.substr(4, 2), mo) ||
        !detail::parse_uint(s.substr(6, 2), d) || !detail::parse_uint(s.substr(8, 2), h) ||
        !detail::parse_uint(s.substr(10, 2), mi)) {
      return std::nullopt;
    }
    if (s.size() == 14 && !detail::parse_uint(s.substr(12, 2), sec)) return std::nullopt;
  } else {
    return std::nullopt;
  }
  if (mo < 1 || mo > 12 || d < 1 || d > days_in_month(y, mo) || h > 23 || mi > 59 || sec > 59) return std::nullopt;
  return make_time(y, mo, d, h, mi, sec);
}

[[nodiscard]] inline std::string format_timestamp(std::int64_t t) {
  const CivilDate c = date_of(t);
  const std::int64_t rem = t - days_from_civil(c.year, c.month, c.day) * 86400;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02u:%02u", c.year, c.month, c.day,
                static_cast<unsigned>(rem / 3600), static_cast<unsigned>((rem / 60) % 60));
  std::string out(buf);
  if (rem % 60 != 0) {
    std::snprintf(buf, sizeof buf, ":%02u", static_cast<unsigned>(rem % 60));
    out += buf;
  }
  return out;
}

}  // namespace msegpd::calendar
