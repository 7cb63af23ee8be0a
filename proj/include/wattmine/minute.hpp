#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace wattmine {

/// Calendar fields of a minute-resolution instant (UTC).
struct CivilMinute {
    int year = 1970;
    unsigned month = 1;   // 1..12
    unsigned day = 1;     // 1..31
    unsigned hour = 0;    // 0..23
    unsigned minute = 0;  // 0..59
};

/// A UTC instant on the one-minute grid the whole pipeline runs on,
/// stored as minutes since the Unix epoch.
class Minute {
public:
    constexpr Minute() = default;
    constexpr explicit Minute(std::int64_t count) : count_(count) {}

    static Minute from_civil(const CivilMinute& c);
    static Minute from_civil(int year, unsigned month, unsigned day,
                             unsigned hour = 0, unsigned minute = 0) {
        return from_civil(CivilMinute{year, month, day, hour, minute});
    }

    constexpr std::int64_t count() const { return count_; }

    CivilMinute civil() const;
    unsigned hour_of_day() const;
    unsigned minute_of_day() const;     // 0..1439
    /// ISO weekday, Monday = 1 .. Sunday = 7.
    unsigned iso_weekday() const;
    bool is_weekend() const { return iso_weekday() >= 6; }

    constexpr Minute operator+(std::int64_t minutes) const { return Minute{count_ + minutes}; }
    constexpr Minute operator-(std::int64_t minutes) const { return Minute{count_ - minutes}; }
    constexpr std::int64_t operator-(Minute other) const { return count_ - other.count_; }
    Minute& operator+=(std::int64_t minutes) { count_ += minutes; return *this; }
    Minute& operator++() { ++count_; return *this; }

    constexpr auto operator<=>(const Minute&) const = default;

private:
    std::int64_t count_ = 0;
};

/// "2007-01-15T08:30", "2007-01-15 08:30:00", optional trailing 'Z'.
/// Seconds, when present, must be zero (the grid is minute-resolution).
Minute parse_iso_minute(std::string_view text);

/// "2007-01-15T08:30:00Z"
std::string to_iso_string(Minute m);

}  // namespace wattmine
