#include "wattmine/minute.hpp"

#include <cstdio>

#include "wattmine/errors.hpp"

namespace wattmine {

namespace {
constexpr std::int64_t kMinutesPerDay = 24 * 60;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if (a % b != 0 && (a < 0) != (b < 0)) --q;
    return q;
}
}  // namespace

Minute Minute::from_civil(const CivilMinute& c) {
    using namespace std::chrono;
    year_month_day ymd{year{c.year}, month{c.month}, day{c.day}};
    if (!ymd.ok()) {
        throw DataError("invalid calendar date " + std::to_string(c.year) + "-" +
                        std::to_string(c.month) + "-" + std::to_string(c.day));
    }
    if (c.hour > 23 || c.minute > 59) {
        throw DataError("invalid time of day " + std::to_string(c.hour) + ":" +
                        std::to_string(c.minute));
    }
    const sys_days days{ymd};
    return Minute{days.time_since_epoch().count() * kMinutesPerDay + c.hour * 60 + c.minute};
}

CivilMinute Minute::civil() const {
    using namespace std::chrono;
    const std::int64_t day_count = floor_div(count_, kMinutesPerDay);
    const std::int64_t in_day = count_ - day_count * kMinutesPerDay;
    const year_month_day ymd{sys_days{days{day_count}}};
    CivilMinute c;
    c.year = static_cast<int>(ymd.year());
    c.month = static_cast<unsigned>(ymd.month());
    c.day = static_cast<unsigned>(ymd.day());
    c.hour = static_cast<unsigned>(in_day / 60);
    c.minute = static_cast<unsigned>(in_day % 60);
    return c;
}

unsigned Minute::hour_of_day() const {
    return static_cast<unsigned>((count_ - floor_div(count_, kMinutesPerDay) * kMinutesPerDay) / 60);
}

unsigned Minute::minute_of_day() const {
    return static_cast<unsigned>(count_ - floor_div(count_, kMinutesPerDay) * kMinutesPerDay);
}

unsigned Minute::iso_weekday() const {
    using namespace std::chrono;
    const std::int64_t day_count = floor_div(count_, kMinutesPerDay);
    const weekday wd{sys_days{days{day_count}}};
    return wd.iso_encoding();
}

Minute parse_iso_minute(std::string_view text) {
    int year = 0;
    unsigned month = 0, day = 0, hour = 0, minute = 0, second = 0;
    char sep = 0;
    const std::string buf(text);
    const int n = std::sscanf(buf.c_str(), "%d-%u-%u%c%u:%u:%u",
                              &year, &month, &day, &sep, &hour, &minute, &second);
    if (n < 6 || (sep != 'T' && sep != 't' && sep != ' ')) {
        throw FormatError("unparseable timestamp '" + buf + "'");
    }
    if (n == 7 && second != 0) {
        throw FormatError("timestamp '" + buf + "' is not on the minute grid");
    }
    return Minute::from_civil(year, month, day, hour, minute);
}

std::string to_iso_string(Minute m) {
    const CivilMinute c = m.civil();
    char buf[24];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02u:%02u:00Z",
                  c.year, c.month, c.day, c.hour, c.minute);
    return buf;
}

}  // namespace wattmine
