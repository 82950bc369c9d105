#include "readmit/dates.hpp"

#include <charconv>
#include <chrono>

#include "readmit/errors.hpp"

namespace readmit {

namespace {

std::chrono::year_month_day to_ymd(std::int32_t days) {
  return std::chrono::year_month_day{
      std::chrono::sys_days{std::chrono::days{days}}};
}

}  // namespace

std::string to_string(Season s) {
  switch (s) {
    case Season::winter: return "winter";
    case Season::spring: return "spring";
    case Season::summer: return "summer";
    case Season::fall: return "fall";
  }
  throw ValidationError("invalid Season value");
}

Season season_from_string(std::string_view s) {
  if (s == "winter") return Season::winter;
  if (s == "spring") return Season::spring;
  if (s == "summer") return Season::summer;
  if (s == "fall") return Season::fall;
  throw ValidationError("unknown season: " + std::string(s));
}

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  std::chrono::year_month_day ymd{std::chrono::year{year},
                                  std::chrono::month{month},
                                  std::chrono::day{day}};
  if (!ymd.ok()) {
    throw ValidationError("invalid calendar date: " + std::to_string(year) +
                          "-" + std::to_string(month) + "-" +
                          std::to_string(day));
  }
  Date d;
  d.days_ = static_cast<std::int32_t>(
      std::chrono::sys_days{ymd}.time_since_epoch().count());
  return d;
}

Date Date::from_days(std::int32_t days_since_epoch) {
  Date d;
  d.days_ = days_since_epoch;
  return d;
}

Date Date::parse(std::string_view iso) {
  auto fail = [&] {
    throw ValidationError("date not in YYYY-MM-DD form: " + std::string(iso));
  };
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') fail();
  int y = 0;
  unsigned m = 0, d = 0;
  auto parse_field = [&](std::string_view text, auto& out) {
    auto [ptr, ec] =
        std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc{} || ptr != text.data() + text.size()) fail();
  };
  parse_field(iso.substr(0, 4), y);
  parse_field(iso.substr(5, 2), m);
  parse_field(iso.substr(8, 2), d);
  return from_ymd(y, m, d);
}

std::string Date::to_string() const {
  auto ymd = to_ymd(days_);
  char buf[11];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()));
  return buf;
}

int Date::year() const { return int(to_ymd(days_).year()); }
unsigned Date::month() const { return unsigned(to_ymd(days_).month()); }
unsigned Date::day() const { return unsigned(to_ymd(days_).day()); }

Season Date::season() const {
  switch (month()) {
    case 12: case 1: case 2: return Season::winter;
    case 3: case 4: case 5: return Season::spring;
    case 6: case 7: case 8: return Season::summer;
    default: return Season::fall;
  }
}

}  // namespace readmit
