#include "wattmine/micro_moment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "wattmine/errors.hpp"

namespace wattmine {

namespace {

const ContextSample& context_at(const std::vector<ContextSample>& context, Minute m) {
    // Context is aligned to the minute grid, so index arithmetic suffices.
    const std::int64_t offset = m - context.front().timestamp;
    return context[static_cast<std::size_t>(offset)];
}

bool covers(const std::vector<ContextSample>& context, Minute m) {
    return !context.empty() && m >= context.front().timestamp &&
           m <= context.back().timestamp;
}

std::string item(const std::string& key, const std::string& value) {
    return key + ":" + value;
}

}  // namespace

const char* to_string(MomentClass c) {
    switch (c) {
        case MomentClass::switch_on: return "switch_on";
        case MomentClass::switch_off: return "switch_off";
        case MomentClass::excessive_use: return "excessive_use";
        case MomentClass::use_while_absent: return "use_while_absent";
    }
    return "?";
}

LuminosityBucket bucket_luminosity(double value, const BucketingConfig& config) {
    if (std::isnan(value) || value < 0.0 || value > 1.0) {
        throw BucketingError("luminosity " + format_double(value) + " outside [0,1]");
    }
    if (value < config.luminosity_dim) return LuminosityBucket::dark;
    if (value < config.luminosity_bright) return LuminosityBucket::dim;
    return LuminosityBucket::bright;
}

TemperatureBucket bucket_temperature(double value, const BucketingConfig& config) {
    if (std::isnan(value)) throw BucketingError("temperature is not a number");
    if (value < config.temperature_mild) return TemperatureBucket::cold;
    if (value < config.temperature_hot) return TemperatureBucket::mild;
    return TemperatureBucket::hot;
}

ContextSnapshot snapshot_context(const ContextSample& sample, const BucketingConfig& config) {
    ContextSnapshot snap;
    snap.hour = sample.timestamp.hour_of_day();
    snap.day_type = sample.timestamp.is_weekend() ? DayType::weekend : DayType::weekday;
    snap.occupancy = sample.occupied ? Occupancy::present : Occupancy::absent;
    snap.luminosity = bucket_luminosity(sample.luminosity, config);
    snap.temperature = bucket_temperature(sample.temperature_c, config);
    return snap;
}

std::vector<MicroMoment> contextualize(const std::vector<ApplianceEvent>& events,
                                       const std::vector<ContextSample>& context,
                                       const std::vector<UsagePeriod>& periods,
                                       const MomentConfig& config) {
    std::string uncovered;
    for (const ApplianceEvent& e : events) {
        if (!covers(context, e.timestamp)) {
            if (!uncovered.empty()) uncovered += ", ";
            uncovered += e.appliance_id + "@" + to_iso_string(e.timestamp);
        }
    }
    if (!uncovered.empty()) {
        throw CoverageError("events outside context coverage: " + uncovered);
    }

    std::vector<MicroMoment> out;
    for (const ApplianceEvent& e : events) {
        MicroMoment m;
        m.event = e;
        m.raw = context_at(context, e.timestamp);
        m.context = snapshot_context(m.raw, config.buckets);
        m.moment_class =
            e.action == SwitchAction::on ? MomentClass::switch_on : MomentClass::switch_off;
        out.push_back(m);
    }

    for (const UsagePeriod& p : periods) {
        if (p.usage_class == UsageClass::excessive && covers(context, p.end)) {
            MicroMoment m;
            m.event.timestamp = p.end;
            m.event.appliance_id = p.appliance_id;
            m.event.action = SwitchAction::off;
            m.event.confidence = 1.0;
            m.raw = context_at(context, p.end);
            m.context = snapshot_context(m.raw, config.buckets);
            m.moment_class = MomentClass::excessive_use;
            out.push_back(m);
        }

        // One use_while_absent moment per contiguous absence that reaches the
        // grace interval while the device runs.
        int absent_streak = 0;
        for (Minute minute = p.start; minute < p.end; ++minute) {
            if (!covers(context, minute)) continue;
            const ContextSample& sample = context_at(context, minute);
            if (sample.occupied) {
                absent_streak = 0;
                continue;
            }
            ++absent_streak;
            if (absent_streak == config.absence_grace_minutes) {
                MicroMoment m;
                m.event.timestamp = minute;
                m.event.appliance_id = p.appliance_id;
                m.event.action = SwitchAction::on;  // device is running
                m.event.confidence = 1.0;
                m.raw = sample;
                m.context = snapshot_context(m.raw, config.buckets);
                m.moment_class = MomentClass::use_while_absent;
                out.push_back(m);
            }
        }
    }

    std::stable_sort(out.begin(), out.end(), [](const MicroMoment& a, const MicroMoment& b) {
        return a.event.timestamp < b.event.timestamp;
    });
    return out;
}

std::vector<Transaction> build_transactions(const std::vector<MicroMoment>& moments,
                                            const BucketingConfig& config) {
    std::vector<Transaction> out;
    out.reserve(moments.size());
    for (const MicroMoment& m : moments) {
        const ContextSnapshot snap = snapshot_context(m.raw, config);
        Transaction t;
        t.items.push_back(item("device", m.event.appliance_id));
        t.items.push_back(item("action", m.event.action == SwitchAction::on ? "on" : "off"));
        t.items.push_back(item("hour", std::to_string(snap.hour)));
        t.items.push_back(item("day", snap.day_type == DayType::weekday ? "weekday" : "weekend"));
        t.items.push_back(item("occ", snap.occupancy == Occupancy::present ? "present" : "absent"));
        t.items.push_back(item("lum", snap.luminosity == LuminosityBucket::dark   ? "dark"
                                      : snap.luminosity == LuminosityBucket::dim   ? "dim"
                                                                                    : "bright"));
        t.items.push_back(item("temp", snap.temperature == TemperatureBucket::cold  ? "cold"
                                       : snap.temperature == TemperatureBucket::mild ? "mild"
                                                                                      : "hot"));
        std::sort(t.items.begin(), t.items.end());
        out.push_back(std::move(t));
    }
    return out;
}

std::string serialize_transactions(const std::vector<Transaction>& transactions) {
    std::ostringstream out;
    for (const Transaction& t : transactions) {
        for (std::size_t i = 0; i < t.items.size(); ++i) {
            if (i > 0) out << ' ';
            out << t.items[i];
        }
        out << '\n';
    }
    return out.str();
}

std::vector<Transaction> parse_transactions(std::istream& in) {
    std::vector<Transaction> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Transaction t;
        std::istringstream items(line);
        std::string word;
        while (items >> word) t.items.push_back(word);
        std::sort(t.items.begin(), t.items.end());
        t.items.erase(std::unique(t.items.begin(), t.items.end()), t.items.end());
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<Transaction> parse_transactions_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read transactions file '" + path + "'");
    return parse_transactions(in);
}

}  // namespace wattmine
