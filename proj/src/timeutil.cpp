#include "geoecon/timeutil.hpp"

#include <cstdio>

#include "geoecon/error.hpp"

namespace geoecon {

int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

CivilDate civil_from_days(int64_t z) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int64_t y = static_cast<int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return CivilDate{static_cast<int>(y + (m <= 2)), m, d};
}

int64_t parse_iso8601(const std::string& s) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  std::string t = s;
  if (!t.empty() && (t.back() == 'Z' || t.back() == 'z')) t.pop_back();
  for (auto& c : t)
    if (c == 'T') c = ' ';
  int n = std::sscanf(t.c_str(), "%d-%u-%u %u:%u:%lf", &y, &mo, &d, &h, &mi,
                      &sec);
  if (n != 3 && n != 5 && n != 6)
    throw ValidationError("bad timestamp '" + s + "'");
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 ||
      sec < 0.0 || sec >= 61.0)
    throw ValidationError("bad timestamp '" + s + "'");
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 +
         static_cast<int64_t>(sec);
}

std::string format_iso8601(int64_t t) {
  const int64_t days = floor_div(t, 86400);
  const auto sod = static_cast<int>(t - days * 86400);
  const CivilDate cd = civil_from_days(days);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", cd.year,
                cd.month, cd.day, sod / 3600, (sod / 60) % 60, sod % 60);
  return buf;
}

int month_index(int64_t unix_seconds) {
  return static_cast<int>(civil_from_days(day_index(unix_seconds)).month) - 1;
}

}  // namespace geoecon
