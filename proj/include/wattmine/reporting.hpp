#pragma once

#include <string>
#include <vector>

#include "wattmine/ingest.hpp"
#include "wattmine/simulation.hpp"

namespace wattmine {

struct ReportInputs {
    PowerSeries lights;
    PowerSeries monitors;
    std::vector<ContextSample> context;
    std::vector<int> weeks_off;  // no automations
    std::vector<int> weeks_on;
    Minute start;
    double usage_threshold_watts = 5.0;  // above standby counts as usage
};

struct ReportTables {
    std::string hourly_lights_csv;   // hour_start,lights_usage_min,mean_luminosity
    std::string presence_slots_csv;  // day,start,end
    std::string monitor_watts_csv;   // timestamp,watts
    std::string comparison_text;     // off/on week-group ratios
};

/// Plot-ready tables: hourly lights usage with light levels, the occupancy
/// slots, the monitor power curve, and the automations-off versus -on usage
/// comparison when both groups are known.
ReportTables build_report(const ReportInputs& inputs);

}  // namespace wattmine
