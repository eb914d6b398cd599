#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "epiq/common/error.hpp"

namespace epiq {

/// Calendar day stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

  static Date from_ymd(int year, unsigned month, unsigned day) {
    const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                          std::chrono::day{day}};
    if (!ymd.ok()) {
      throw DataError("invalid calendar date " + std::to_string(year) + "-" +
                      std::to_string(month) + "-" + std::to_string(day));
    }
    return Date(static_cast<std::int32_t>(std::chrono::sys_days{ymd}.time_since_epoch().count()));
  }

  /// Parses YYYY-MM-DD.
  static Date parse(std::string_view text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    const std::string s(text);
    if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
      throw DataError("malformed date '" + s + "', expected YYYY-MM-DD");
    }
    return from_ymd(y, m, d);
  }

  [[nodiscard]] std::string str() const {
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days_}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
  }

  /// 0 = Monday ... 6 = Sunday.
  [[nodiscard]] int weekday() const {
    const std::chrono::weekday wd{std::chrono::sys_days{std::chrono::days{days_}}};
    return static_cast<int>(wd.iso_encoding()) - 1;
  }

  [[nodiscard]] constexpr std::int32_t days_since_epoch() const { return days_; }

  constexpr Date operator+(int n) const { return Date(days_ + n); }
  constexpr Date operator-(int n) const { return Date(days_ - n); }
  constexpr int operator-(Date other) const { return days_ - other.days_; }
  constexpr Date& operator+=(int n) {
    days_ += n;
    return *this;
  }
  constexpr auto operator<=>(const Date&) const = default;

 private:
  std::int32_t days_ = 0;
};

/// Inclusive date range.
struct DateRange {
  Date first;
  Date last;

  [[nodiscard]] int length() const { return last - first + 1; }
  [[nodiscard]] bool contains(Date d) const { return d >= first && d <= last; }
};

}  // namespace epiq
