#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

namespace stnet {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

/// Formats as `YYYY-MM-DDTHH:MM`.
inline std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{ts}};
  const sys_days day = floor<days>(tp);
  const year_month_day ymd{day};
  const auto secs = (tp - day).count();
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(secs / 3600), static_cast<long long>((secs / 60) % 60));
  return buf;
}

/// Parses `YYYY-MM-DDTHH:MM` (a space may replace the T; optional `:SS`).
inline std::optional<Timestamp> parse_timestamp(const std::string &text) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  int consumed = 0;
  const int got = std::sscanf(text.c_str(), "%d-%u-%u%c%u:%u%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
  if (got < 6 || (sep != 'T' && sep != ' ')) return std::nullopt;
  std::size_t pos = static_cast<std::size_t>(consumed);
  if (pos < text.size()) {
    int extra = 0;
    if (std::sscanf(text.c_str() + pos, ":%u%n", &s, &extra) != 1) return std::nullopt;
    pos += static_cast<std::size_t>(extra);
    if (pos != text.size()) return std::nullopt;
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  const sys_days day_point{ymd};
  return day_point.time_since_epoch().count() * 86400LL + h * 3600LL + mi * 60LL + s;
}

/// Minutes since midnight, UTC.
inline std::int64_t minute_of_day(Timestamp ts) {
  const std::int64_t m = (ts / 60) % 1440;
  return m < 0 ? m + 1440 : m;
}

/// 0 = Monday ... 6 = Sunday.
inline int weekday_index(Timestamp ts) {
  using namespace std::chrono;
  const sys_days day = floor<days>(sys_seconds{seconds{ts}});
  return static_cast<int>(weekday{day}.iso_encoding()) - 1;
}

}  // namespace stnet
