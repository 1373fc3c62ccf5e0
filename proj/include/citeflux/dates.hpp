#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace citeflux {

// All durations in this codebase are fractional years, day difference / 365.25.
inline constexpr double kDaysPerYear = 365.25;

struct CivilDate {
  int year = 1970;
  int month = 1;
  int day = 1;

  friend bool operator==(const CivilDate&, const CivilDate&) = default;
};

// Days since 1970-01-01 in the proleptic Gregorian calendar.
std::int64_t days_from_civil(const CivilDate& d) noexcept;

CivilDate civil_from_days(std::int64_t days) noexcept;

// Strict YYYY-MM-DD with calendar validation; nullopt on anything else.
std::optional<CivilDate> parse_iso_date(std::string_view s) noexcept;

std::string format_iso_date(const CivilDate& d);

inline double years_since_epoch(const CivilDate& d) noexcept {
  return static_cast<double>(days_from_civil(d)) / kDaysPerYear;
}

}  // namespace citeflux
