#include "wattmine/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "wattmine/errors.hpp"

namespace wattmine {

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t begin = 0;
    while (true) {
        const std::size_t pos = text.find(sep, begin);
        if (pos == std::string_view::npos) {
            out.push_back(text.substr(begin));
            return out;
        }
        out.push_back(text.substr(begin, pos - begin));
        begin = pos + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_double(std::string_view field) {
    field = trim(field);
    if (field.empty()) return std::nullopt;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) return std::nullopt;
    return value;
}

std::optional<Minute> parse_record_timestamp(std::string_view date_field,
                                             std::string_view time_field, bool day_first) {
    unsigned a = 0, b = 0, hour = 0, minute = 0, second = 0;
    int year = 0;
    const std::string date(trim(date_field));
    const std::string time(trim(time_field));
    if (std::sscanf(date.c_str(), "%u/%u/%d", &a, &b, &year) != 3) return std::nullopt;
    if (std::sscanf(time.c_str(), "%u:%u:%u", &hour, &minute, &second) != 3) return std::nullopt;
    if (second != 0) return std::nullopt;
    const unsigned day = day_first ? a : b;
    const unsigned month = day_first ? b : a;
    try {
        return Minute::from_civil(year, month, day, hour, minute);
    } catch (const DataError&) {
        return std::nullopt;
    }
}

bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

}  // namespace

std::string format_double(double x) {
    char buf[40];
    for (int precision : {15, 16, 17}) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, x);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == x) break;
    }
    return buf;
}

std::optional<double> PowerSeries::power_watts(std::size_t index) const {
    const PowerSample& s = samples[index];
    if (!s.valid()) return std::nullopt;
    return s.active_power_kw * 1000.0;
}

const PowerSeries& ConsumptionLog::line(const std::string& id) const {
    for (const PowerSeries& series : lines) {
        if (series.line_id == id) return series;
    }
    throw ConfigError("unknown line '" + id + "'");
}

LogFormat LogFormat::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read format descriptor '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad format descriptor '" + path + "': " + e.what());
    }
    LogFormat f;
    f.separator = j.value("separator", std::string(1, f.separator)).at(0);
    f.missing_marker = j.value("missing_marker", f.missing_marker);
    f.day_first_dates = j.value("day_first_dates", f.day_first_dates);
    f.date_column = j.value("date_column", f.date_column);
    f.time_column = j.value("time_column", f.time_column);
    f.active_power_column = j.value("active_power_column", f.active_power_column);
    f.reactive_power_column = j.value("reactive_power_column", f.reactive_power_column);
    f.voltage_column = j.value("voltage_column", f.voltage_column);
    if (j.contains("submeter_columns")) {
        const auto& cols = j.at("submeter_columns");
        for (std::size_t i = 0; i < f.submeter_columns.size(); ++i) {
            f.submeter_columns[i] = cols.at(i).get<int>();
        }
    }
    f.column_count = j.value("column_count", f.column_count);
    f.header = j.value("header", f.header);
    f.global_line = j.value("global_line", f.global_line);
    if (j.contains("submeter_lines")) {
        const auto& names = j.at("submeter_lines");
        for (std::size_t i = 0; i < f.submeter_lines.size(); ++i) {
            f.submeter_lines[i] = names.at(i).get<std::string>();
        }
    }
    return f;
}

void LogFormat::save(const std::string& path) const {
    nlohmann::json j;
    j["separator"] = std::string(1, separator);
    j["missing_marker"] = missing_marker;
    j["day_first_dates"] = day_first_dates;
    j["date_column"] = date_column;
    j["time_column"] = time_column;
    j["active_power_column"] = active_power_column;
    j["reactive_power_column"] = reactive_power_column;
    j["voltage_column"] = voltage_column;
    j["submeter_columns"] = submeter_columns;
    j["column_count"] = column_count;
    j["header"] = header;
    j["global_line"] = global_line;
    j["submeter_lines"] = submeter_lines;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write format descriptor '" + path + "'");
    out << j.dump(2) << '\n';
}

std::string ParseReport::to_text() const {
    std::ostringstream out;
    out << "data_lines=" << data_lines << '\n';
    out << "records_parsed=" << records_parsed << '\n';
    out << "records_skipped=" << records_skipped << '\n';
    out << "gap_samples_inserted=" << gap_samples_inserted << '\n';
    out << "issue_count=" << issues.size() << '\n';
    out << "out_of_order_lines=";
    for (std::size_t i = 0; i < out_of_order_lines.size(); ++i) {
        if (i > 0) out << ';';
        out << out_of_order_lines[i];
    }
    out << '\n';
    for (const ParseIssue& issue : issues) {
        out << "issue=" << issue.line_number << ':' << issue.kind << ':' << issue.detail << '\n';
    }
    return out.str();
}

ConsumptionLog parse_consumption_log(std::istream& in, const LogFormat& format) {
    ConsumptionLog log;
    log.lines.resize(1 + format.submeter_lines.size());
    log.lines[0].line_id = format.global_line;
    for (std::size_t i = 0; i < format.submeter_lines.size(); ++i) {
        log.lines[1 + i].line_id = format.submeter_lines[i];
    }

    std::string line;
    if (!read_line(in, line)) throw FormatError("empty stream, header expected");
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line != format.header) {
        throw FormatError("header mismatch: expected '" + format.header + "', got '" + line + "'");
    }

    ParseReport& report = log.report;
    std::uint64_t line_number = 1;  // header consumed
    bool have_last = false;
    Minute last_ts;

    const auto push_missing_minute = [&](Minute ts) {
        for (PowerSeries& series : log.lines) {
            PowerSample gap;
            gap.timestamp = ts;
            gap.quality = SampleQuality::missing;
            series.samples.push_back(gap);
        }
    };

    while (read_line(in, line)) {
        ++line_number;
        ++report.data_lines;
        const auto fields = split(line, format.separator);
        if (static_cast<int>(fields.size()) != format.column_count) {
            ++report.records_skipped;
            report.issues.push_back({line_number, "field_count",
                                     "expected " + std::to_string(format.column_count) +
                                         " fields, got " + std::to_string(fields.size())});
            continue;
        }
        const auto ts = parse_record_timestamp(fields[format.date_column],
                                               fields[format.time_column],
                                               format.day_first_dates);
        if (!ts) {
            ++report.records_skipped;
            report.issues.push_back({line_number, "bad_timestamp",
                                     std::string(fields[format.date_column]) + " " +
                                         std::string(fields[format.time_column])});
            continue;
        }
        if (have_last && *ts <= last_ts) {
            ++report.records_skipped;
            report.out_of_order_lines.push_back(line_number);
            report.issues.push_back({line_number, "ordering",
                                     "timestamp " + to_iso_string(*ts) +
                                         " does not advance past " + to_iso_string(last_ts)});
            continue;
        }
        if (have_last) {
            for (Minute gap = last_ts + 1; gap < *ts; ++gap) {
                push_missing_minute(gap);
                ++report.gap_samples_inserted;
            }
        }

        bool all_parseable = true;
        bool bad_value = false;
        const auto numeric = [&](int column) -> double {
            const std::string_view field = trim(fields[column]);
            if (field == format.missing_marker) {
                all_parseable = false;
                return 0.0;
            }
            const auto value = parse_double(field);
            if (!value) {
                all_parseable = false;
                bad_value = true;
                return 0.0;
            }
            return *value;
        };

        PowerSample global;
        global.timestamp = *ts;
        global.active_power_kw = numeric(format.active_power_column);
        global.reactive_power_kw = numeric(format.reactive_power_column);
        global.voltage_v = numeric(format.voltage_column);
        for (std::size_t i = 0; i < format.submeter_columns.size(); ++i) {
            global.submeter_wh[i] = numeric(format.submeter_columns[i]);
        }
        if (all_parseable) {
            global.quality = SampleQuality::valid;
        } else {
            global = PowerSample{};
            global.timestamp = *ts;
            global.quality = SampleQuality::missing;
            if (bad_value) {
                report.issues.push_back({line_number, "bad_value", "unparseable numeric field"});
            }
        }
        log.lines[0].samples.push_back(global);

        for (std::size_t i = 0; i < format.submeter_lines.size(); ++i) {
            PowerSample sub;
            sub.timestamp = *ts;
            sub.quality = global.quality;
            if (global.valid()) {
                // watt-hour per minute -> average kilowatt over the minute
                sub.active_power_kw = global.submeter_wh[i] * 60.0 / 1000.0;
                sub.submeter_wh[i] = global.submeter_wh[i];
            }
            log.lines[1 + i].samples.push_back(sub);
        }

        ++report.records_parsed;
        last_ts = *ts;
        have_last = true;
    }
    return log;
}

ConsumptionLog parse_consumption_log_file(const std::string& path, const LogFormat& format) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read consumption log '" + path + "'");
    return parse_consumption_log(in, format);
}

std::string serialize_consumption_log(const PowerSeries& global, const LogFormat& format) {
    std::ostringstream out;
    out << format.header << '\n';
    std::vector<std::string> fields(static_cast<std::size_t>(format.column_count));
    for (const PowerSample& s : global.samples) {
        const CivilMinute c = s.timestamp.civil();
        char date[16], time[12];
        if (format.day_first_dates) {
            std::snprintf(date, sizeof date, "%u/%u/%04d", c.day, c.month, c.year);
        } else {
            std::snprintf(date, sizeof date, "%u/%u/%04d", c.month, c.day, c.year);
        }
        std::snprintf(time, sizeof time, "%02u:%02u:00", c.hour, c.minute);
        std::fill(fields.begin(), fields.end(), s.valid() ? "0" : format.missing_marker);
        fields[format.date_column] = date;
        fields[format.time_column] = time;
        if (s.valid()) {
            fields[format.active_power_column] = format_double(s.active_power_kw);
            fields[format.reactive_power_column] = format_double(s.reactive_power_kw);
            fields[format.voltage_column] = format_double(s.voltage_v);
            for (std::size_t i = 0; i < format.submeter_columns.size(); ++i) {
                fields[format.submeter_columns[i]] = format_double(s.submeter_wh[i]);
            }
        }
        for (int i = 0; i < format.column_count; ++i) {
            if (i > 0) out << format.separator;
            out << fields[i];
        }
        out << '\n';
    }
    return out.str();
}

std::vector<ContextSample> parse_context_log(std::istream& in) {
    static constexpr std::string_view kHeader =
        "timestamp,temperature,humidity,luminosity,occupancy";
    std::string line;
    if (!read_line(in, line)) throw FormatError("empty context log, header expected");
    if (line != kHeader) {
        throw FormatError("context header mismatch: got '" + line + "'");
    }
    std::vector<ContextSample> out;
    std::uint64_t line_number = 1;
    while (read_line(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 5) {
            throw DataError("context line " + std::to_string(line_number) +
                            ": expected 5 fields, got " + std::to_string(fields.size()));
        }
        ContextSample s;
        s.timestamp = parse_iso_minute(trim(fields[0]));
        const auto temperature = parse_double(fields[1]);
        const auto humidity = parse_double(fields[2]);
        const auto luminosity = parse_double(fields[3]);
        const std::string_view occ = trim(fields[4]);
        if (!temperature || !humidity || !luminosity || (occ != "0" && occ != "1")) {
            throw DataError("context line " + std::to_string(line_number) + ": bad value");
        }
        if (*luminosity < 0.0 || *luminosity > 1.0) {
            throw DataError("context line " + std::to_string(line_number) +
                            ": luminosity outside [0,1]");
        }
        if (*humidity < 0.0 || *humidity > 100.0) {
            throw DataError("context line " + std::to_string(line_number) +
                            ": humidity outside [0,100]");
        }
        s.temperature_c = *temperature;
        s.humidity_pct = *humidity;
        s.luminosity = *luminosity;
        s.occupied = occ == "1";
        out.push_back(s);
    }
    return out;
}

std::vector<ContextSample> parse_context_log_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read context log '" + path + "'");
    return parse_context_log(in);
}

std::string serialize_context_log(const std::vector<ContextSample>& samples) {
    std::ostringstream out;
    out << "timestamp,temperature,humidity,luminosity,occupancy\n";
    for (const ContextSample& s : samples) {
        out << to_iso_string(s.timestamp) << ',' << format_double(s.temperature_c) << ','
            << format_double(s.humidity_pct) << ',' << format_double(s.luminosity) << ','
            << (s.occupied ? '1' : '0') << '\n';
    }
    return out.str();
}

std::string serialize_line_series(const PowerSeries& series) {
    std::ostringstream out;
    out << "timestamp,active_power_kw,quality\n";
    for (const PowerSample& s : series.samples) {
        out << to_iso_string(s.timestamp) << ',';
        if (s.valid()) {
            out << format_double(s.active_power_kw) << ",valid\n";
        } else {
            out << ",missing\n";
        }
    }
    return out.str();
}

PowerSeries parse_line_series(std::istream& in, const std::string& line_id) {
    PowerSeries series;
    series.line_id = line_id;
    std::string line;
    std::size_t line_number = 0;
    while (read_line(in, line)) {
        ++line_number;
        if (line.empty() || line.rfind("timestamp", 0) == 0) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 3) {
            throw DataError("series line " + std::to_string(line_number) + ": expected 3 fields");
        }
        PowerSample s;
        s.timestamp = parse_iso_minute(trim(fields[0]));
        if (trim(fields[2]) == "valid") {
            const auto power = parse_double(fields[1]);
            if (!power) {
                throw DataError("series line " + std::to_string(line_number) + ": bad power");
            }
            s.active_power_kw = *power;
            s.quality = SampleQuality::valid;
        }
        series.samples.push_back(s);
    }
    return series;
}

PowerSeries parse_line_series_file(const std::string& path, const std::string& line_id) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read series '" + path + "'");
    return parse_line_series(in, line_id);
}

AlignedStreams align_and_fill(const PowerSeries& series,
                              const std::vector<ContextSample>& context) {
    AlignedStreams out;
    out.series.line_id = series.line_id;
    if (series.empty() || context.empty()) return out;

    const Minute start = std::max(series.start(), context.front().timestamp);
    const Minute end = std::min(series.end(), context.back().timestamp);
    if (start > end) {
        throw AlignmentError("series [" + to_iso_string(series.start()) + ", " +
                             to_iso_string(series.end()) + "] and context [" +
                             to_iso_string(context.front().timestamp) + ", " +
                             to_iso_string(context.back().timestamp) + "] do not overlap");
    }

    std::size_t series_i = 0;
    std::size_t context_i = 0;
    ContextSample held = context.front();
    for (Minute m = start; m <= end; ++m) {
        while (series_i < series.samples.size() && series.samples[series_i].timestamp < m) {
            ++series_i;
        }
        if (series_i < series.samples.size() && series.samples[series_i].timestamp == m) {
            out.series.samples.push_back(series.samples[series_i]);
        } else {
            PowerSample gap;
            gap.timestamp = m;
            gap.quality = SampleQuality::missing;
            out.series.samples.push_back(gap);
        }
        while (context_i < context.size() && context[context_i].timestamp <= m) {
            held = context[context_i];
            ++context_i;
        }
        ContextSample at = held;
        at.timestamp = m;
        out.context.push_back(at);
    }
    return out;
}

}  // namespace wattmine
