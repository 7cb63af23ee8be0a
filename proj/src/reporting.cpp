#include "wattmine/reporting.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace wattmine {

namespace {

double watts_at(const PowerSeries& series, std::size_t index) {
    const auto w = series.power_watts(index);
    return w ? *w : 0.0;
}

}  // namespace

ReportTables build_report(const ReportInputs& inputs) {
    ReportTables tables;

    {
        std::ostringstream out;
        out << "hour_start,lights_usage_min,mean_luminosity\n";
        std::size_t i = 0;
        while (i < inputs.lights.samples.size()) {
            const Minute hour_start =
                Minute{inputs.lights.samples[i].timestamp.count() / 60 * 60};
            int usage = 0;
            double luminosity_sum = 0.0;
            int count = 0;
            for (; i < inputs.lights.samples.size() &&
                   inputs.lights.samples[i].timestamp < hour_start + 60;
                 ++i) {
                if (watts_at(inputs.lights, i) > inputs.usage_threshold_watts) ++usage;
                const std::int64_t offset =
                    inputs.lights.samples[i].timestamp -
                    (inputs.context.empty() ? inputs.lights.samples[i].timestamp
                                            : inputs.context.front().timestamp);
                if (offset >= 0 && offset < static_cast<std::int64_t>(inputs.context.size())) {
                    luminosity_sum += inputs.context[static_cast<std::size_t>(offset)].luminosity;
                    ++count;
                }
            }
            out << to_iso_string(hour_start) << ',' << usage << ','
                << format_double(count > 0 ? luminosity_sum / count : 0.0) << '\n';
        }
        tables.hourly_lights_csv = out.str();
    }

    {
        std::ostringstream out;
        out << "day,start,end\n";
        bool open = false;
        Minute slot_start;
        for (std::size_t i = 0; i < inputs.context.size(); ++i) {
            const bool occupied = inputs.context[i].occupied;
            if (occupied && !open) {
                open = true;
                slot_start = inputs.context[i].timestamp;
            } else if (!occupied && open) {
                open = false;
                const std::int64_t day = (slot_start - inputs.start) / 1440;
                out << day << ',' << to_iso_string(slot_start) << ','
                    << to_iso_string(inputs.context[i].timestamp) << '\n';
            }
        }
        if (open) {
            const std::int64_t day = (slot_start - inputs.start) / 1440;
            out << day << ',' << to_iso_string(slot_start) << ','
                << to_iso_string(inputs.context.back().timestamp + 1) << '\n';
        }
        tables.presence_slots_csv = out.str();
    }

    {
        std::ostringstream out;
        out << "timestamp,watts\n";
        for (std::size_t i = 0; i < inputs.monitors.samples.size(); ++i) {
            out << to_iso_string(inputs.monitors.samples[i].timestamp) << ','
                << format_double(watts_at(inputs.monitors, i)) << '\n';
        }
        tables.monitor_watts_csv = out.str();
    }

    if (!inputs.weeks_off.empty() && !inputs.weeks_on.empty()) {
        // Daily usage hours per week group, computed off the raw power trace.
        std::map<std::int64_t, int> day_usage_min;
        for (std::size_t i = 0; i < inputs.lights.samples.size(); ++i) {
            if (watts_at(inputs.lights, i) > inputs.usage_threshold_watts) {
                ++day_usage_min[(inputs.lights.samples[i].timestamp - inputs.start) / 1440];
            }
        }
        const auto group_daily_hours = [&](const std::vector<int>& weeks) {
            std::vector<double> hours;
            for (int week : weeks) {
                for (int d = week * 7; d < (week + 1) * 7; ++d) {
                    const auto it = day_usage_min.find(d);
                    hours.push_back(it == day_usage_min.end() ? 0.0 : it->second / 60.0);
                }
            }
            return hours;
        };
        const std::vector<double> off_hours = group_daily_hours(inputs.weeks_off);
        const std::vector<double> on_hours = group_daily_hours(inputs.weeks_on);
        const RatioResult ratio = compare_means(on_hours, off_hours);  // off relative to on
        const double mean_off = std::accumulate(off_hours.begin(), off_hours.end(), 0.0) /
                                static_cast<double>(off_hours.size());
        const double mean_on = std::accumulate(on_hours.begin(), on_hours.end(), 0.0) /
                               static_cast<double>(on_hours.size());
        std::ostringstream out;
        out << "lights.mean_daily_usage_h.automations_off=" << format_double(mean_off) << '\n';
        out << "lights.mean_daily_usage_h.automations_on=" << format_double(mean_on) << '\n';
        out << "lights.off_over_on_ratio="
            << (ratio.defined ? format_double(ratio.ratio) : "undefined") << '\n';
        out << "lights.increase_pct="
            << (ratio.defined ? format_double(ratio.percent_change) : "undefined") << '\n';
        tables.comparison_text = out.str();
    }

    return tables;
}

}  // namespace wattmine
