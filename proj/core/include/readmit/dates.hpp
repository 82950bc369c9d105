#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace readmit {

// Meteorological seasons: Dec-Feb winter, Mar-May spring, Jun-Aug summer,
// Sep-Nov fall.
enum class Season { winter, spring, summer, fall };

std::string to_string(Season s);
Season season_from_string(std::string_view s);

// Calendar date with day resolution, stored as days since 1970-01-01.
class Date {
 public:
  Date() = default;

  static Date from_ymd(int year, unsigned month, unsigned day);
  static Date from_days(std::int32_t days_since_epoch);
  // Parses strict "YYYY-MM-DD".
  static Date parse(std::string_view iso);

  std::string to_string() const;
  std::int32_t days_since_epoch() const { return days_; }
  Season season() const;
  int year() const;
  unsigned month() const;
  unsigned day() const;

  Date operator+(std::int32_t days) const { return from_days(days_ + days); }
  friend std::int32_t operator-(Date a, Date b) { return a.days_ - b.days_; }
  friend auto operator<=>(Date, Date) = default;

 private:
  std::int32_t days_ = 0;
};

}  // namespace readmit
