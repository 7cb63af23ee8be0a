#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wattmine/minute.hpp"

namespace wattmine {

enum class SampleQuality { valid, missing };

/// One record of a consumption log. A record with any unparseable field is
/// kept with quality = missing and all numeric fields zeroed.
struct PowerSample {
    Minute timestamp;
    double active_power_kw = 0.0;
    double reactive_power_kw = 0.0;
    double voltage_v = 0.0;
    std::array<double, 3> submeter_wh{0.0, 0.0, 0.0};  // watt-hour over the minute
    SampleQuality quality = SampleQuality::missing;

    bool valid() const { return quality == SampleQuality::valid; }
};

/// Minute-resolution series for one metered line. Timestamps are strictly
/// increasing and consecutive samples are exactly one minute apart; gaps are
/// materialized as missing-quality samples at construction.
struct PowerSeries {
    std::string line_id;
    std::vector<PowerSample> samples;

    bool empty() const { return samples.empty(); }
    Minute start() const { return samples.front().timestamp; }
    Minute end() const { return samples.back().timestamp; }

    /// Minute-average power of this line in watts, or nullopt when missing.
    /// The global line reads active_power_kw; submeter lines convert their
    /// watt-hour-per-minute energy.
    std::optional<double> power_watts(std::size_t index) const;
};

struct ContextSample {
    Minute timestamp;
    double temperature_c = 0.0;
    double humidity_pct = 0.0;
    double luminosity = 0.0;  // 0 (dark) .. 1 (light)
    bool occupied = false;
};

/// Describes a consumption-log layout. The shipped default matches the UCI
/// household file: semicolon-separated, Date;Time leading columns with
/// day-first dates, "?" as the missing marker, and three submeter columns.
struct LogFormat {
    char separator = ';';
    std::string missing_marker = "?";
    bool day_first_dates = true;
    int date_column = 0;
    int time_column = 1;
    int active_power_column = 2;
    int reactive_power_column = 3;
    int voltage_column = 4;
    std::array<int, 3> submeter_columns{6, 7, 8};
    int column_count = 9;
    std::string header =
        "Date;Time;Global_active_power;Global_reactive_power;Voltage;"
        "Global_intensity;Sub_metering_1;Sub_metering_2;Sub_metering_3";
    std::string global_line = "global";
    std::array<std::string, 3> submeter_lines{"sub_metering_1", "sub_metering_2",
                                              "sub_metering_3"};

    static LogFormat uci_household() { return LogFormat{}; }
    static LogFormat load(const std::string& path);
    void save(const std::string& path) const;
};

struct ParseIssue {
    std::uint64_t line_number = 0;  // 1-based, counting the header
    std::string kind;               // "field_count", "ordering", "bad_value", ...
    std::string detail;
};

struct ParseReport {
    std::uint64_t data_lines = 0;       // lines after the header
    std::uint64_t records_parsed = 0;   // rows converted to samples
    std::uint64_t records_skipped = 0;  // rows rejected
    std::uint64_t gap_samples_inserted = 0;
    std::vector<ParseIssue> issues;
    std::vector<std::uint64_t> out_of_order_lines;

    std::string to_text() const;  // line-oriented key=value
};

struct ConsumptionLog {
    std::vector<PowerSeries> lines;  // global first, then submeters
    ParseReport report;

    const PowerSeries& line(const std::string& id) const;
};

/// Parses a consumption log. Throws FormatError when the header does not
/// match the descriptor; per-record problems are collected in the report and
/// parsing continues. Timestamps that regress or repeat are rejected and
/// listed. Interior gaps come back materialized as missing samples.
ConsumptionLog parse_consumption_log(std::istream& in, const LogFormat& format);
ConsumptionLog parse_consumption_log_file(const std::string& path, const LogFormat& format);

/// Serializes the global line (which carries every record field) back to the
/// log format. Missing samples render as missing markers.
std::string serialize_consumption_log(const PowerSeries& global, const LogFormat& format);

/// Context log: "timestamp,temperature,humidity,luminosity,occupancy" with
/// ISO-8601 timestamps and occupancy in {0,1}.
std::vector<ContextSample> parse_context_log(std::istream& in);
std::vector<ContextSample> parse_context_log_file(const std::string& path);
std::string serialize_context_log(const std::vector<ContextSample>& samples);

struct AlignedStreams {
    PowerSeries series;
    std::vector<ContextSample> context;  // one sample per grid minute
};

/// Restricts both inputs to their overlapping minute range, materializes
/// power gaps as missing samples and step-holds context values between
/// observations. Empty inputs yield an empty result; disjoint ranges throw
/// AlignmentError.
AlignedStreams align_and_fill(const PowerSeries& series,
                              const std::vector<ContextSample>& context);

/// Normalized single-line series: "timestamp,active_power_kw,quality" rows.
std::string serialize_line_series(const PowerSeries& series);
PowerSeries parse_line_series(std::istream& in, const std::string& line_id);
PowerSeries parse_line_series_file(const std::string& path, const std::string& line_id);

/// Shortest text form of x that parses back to exactly the same double.
std::string format_double(double x);

}  // namespace wattmine
