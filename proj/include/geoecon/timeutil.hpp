#pragma once

#include <cstdint>
#include <string>

namespace geoecon {

struct CivilDate {
  int year;
  unsigned month;  // 1..12
  unsigned day;    // 1..31
};

// proleptic Gregorian calendar <-> days since 1970-01-01
int64_t days_from_civil(int y, unsigned m, unsigned d);
CivilDate civil_from_days(int64_t z);

inline int64_t floor_div(int64_t a, int64_t b) {
  return a / b - ((a % b != 0) && ((a % b < 0) != (b < 0)) ? 1 : 0);
}

// accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS", "YYYY-MM-DD HH:MM:SS",
// optional trailing 'Z'; all times are UTC
int64_t parse_iso8601(const std::string& s);
std::string format_iso8601(int64_t unix_seconds);

inline int64_t day_index(int64_t unix_seconds) {
  return floor_div(unix_seconds, 86400);
}

// calendar month 0..11
int month_index(int64_t unix_seconds);

}  // namespace geoecon
