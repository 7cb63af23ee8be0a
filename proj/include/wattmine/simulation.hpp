#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wattmine/automation.hpp"
#include "wattmine/bus.hpp"
#include "wattmine/ingest.hpp"
#include "wattmine/minute.hpp"

namespace wattmine {

struct ApplianceSpec {
    std::string appliance_id;
    double nominal_watts = 0.0;
    double standby_watts = 0.0;               // drawn while idle but powered
    std::optional<int> auto_standby_after_min;  // inactivity before standby
    bool initially_on = false;
};

struct AbsenceBlock {
    std::string name;        // "classes", "meeting"
    int start_mean_min = 0;  // minute of day
    int duration_min = 0;
    int jitter_min = 0;      // uniform +- on the start
    std::vector<unsigned> days;  // ISO weekdays, empty = every office day
};

struct OccupantSchedule {
    std::vector<unsigned> office_days{1, 2, 3, 4, 5};  // ISO weekdays
    int arrival_mean_min = 8 * 60 + 30;
    int arrival_jitter_min = 15;
    int departure_mean_min = 17 * 60 + 15;
    int departure_jitter_min = 10;
    std::vector<AbsenceBlock> absences;
    double forget_lights_final = 0.7;      // leave lights on at end of day
    double forget_lights_temporary = 0.7;  // leave lights on for a block
    double relight_bright_probability = 0.5;
    int computer_session_offset_max_min = 10;
    int computer_session_min_min = 36;
    int computer_session_max_min = 44;
    double ac_hot_day_probability = 0.9;
    double forget_ac_final = 0.8;
};

struct DaylightParams {
    int sunrise_min = 7 * 60 + 30;
    int sunset_min = 18 * 60 + 30;
    double peak_luminosity = 0.85;
    double temperature_base_c = 14.0;
    double temperature_amplitude_c = 9.0;
    double temperature_day_jitter_c = 2.0;
    double humidity_base_pct = 60.0;
    double humidity_swing_pct = 15.0;
    double lights_luminosity_bonus = 0.12;  // indoor sensor sees the lamps too
};

struct ScenarioConfig {
    std::string name = "scenario";
    int weeks = 4;
    std::uint64_t seed = 1;
    Minute start = Minute::from_civil(2026, 1, 5);  // a Monday
    OccupantSchedule occupant;
    DaylightParams daylight;
    std::vector<ApplianceSpec> appliances;
    std::vector<AutomationRule> automations;
    /// rule_id -> enabled flag per week; rules absent from the map keep their
    /// own enabled flag for the whole run.
    std::map<std::string, std::vector<bool>> automation_weeks;
    double accept_probability = 0.8;
    int response_latency_min_minutes = 1;
    int response_latency_max_minutes = 5;
    int recommendation_expiry_minutes = 30;
    double manual_light_dim_threshold = 0.5;
    double hot_day_threshold_c = 26.0;
    int building_close_min = 19 * 60;  // facilities staff switch lights/AC off
    bool record_bus_trace = true;

    void validate() const;  // throws ConfigError
    static ScenarioConfig load(const std::string& path);
    void save(const std::string& path) const;
};

/// Shipped scenarios: "alice_4weeks" (weeks 2-3 automated, 1 and 4 not),
/// "all_absent_week" (nobody comes in, monitors sleeping), "closed_loop"
/// (automations on throughout, always-accepted, for habit recovery).
ScenarioConfig builtin_scenario(const std::string& name);
std::vector<std::string> builtin_scenario_names();

/// 0 outside [sunrise, sunset]; a half-sine peaking at the midpoint,
/// scaled to the configured peak.
double daylight_luminosity(int minute_of_day, const DaylightParams& params);

struct Metrics {
    Minute start;
    int days = 0;
    std::vector<std::string> appliance_ids;
    std::vector<std::map<std::string, double>> day_watt_minutes;
    std::vector<std::map<std::string, int>> day_usage_minutes;
    std::vector<int> day_occupancy_minutes;
    std::map<std::string, int> night_usage_minutes;    // 21:00-07:00
    std::map<std::string, int> weekend_usage_minutes;

    int weeks() const { return days / 7; }
    double energy_wh(const std::string& appliance, int day) const;
    double usage_hours(const std::string& appliance, int day) const;
    double week_mean_daily_usage_hours(const std::string& appliance, int week) const;
    double week_energy_wh(const std::string& appliance, int week) const;
    double total_energy_wh(const std::string& appliance) const;
    /// Mean usage over this week's days that saw any occupancy.
    double week_mean_office_day_usage_hours(const std::string& appliance, int week) const;

    std::string to_csv() const;       // one row per appliance-day
    std::string summary_text() const;
};

struct RatioResult {
    bool defined = false;
    double ratio = 0.0;           // mean(b) / mean(a)
    double percent_change = 0.0;  // (ratio - 1) * 100
};

/// Ratio of group means; an all-zero denominator group comes back undefined
/// rather than raising.
RatioResult compare_means(const std::vector<double>& group_a,
                          const std::vector<double>& group_b);

struct GroupComparison {
    std::string appliance;
    double mean_daily_usage_hours_a = 0.0;
    double mean_daily_usage_hours_b = 0.0;
    RatioResult usage;
    double energy_wh_a = 0.0;
    double energy_wh_b = 0.0;
    RatioResult energy;
};

struct ComparisonReport {
    std::vector<GroupComparison> per_appliance;
    std::string to_text() const;
};

ComparisonReport compare(const Metrics& metrics, const std::vector<int>& weeks_a,
                         const std::vector<int>& weeks_b);

struct SimulationResult {
    Metrics metrics;
    PowerSeries global;  // consumption trace in the ingest log shape
    std::vector<ContextSample> context;
    std::map<std::string, std::vector<double>> appliance_watts;  // per minute
    std::vector<Recommendation> recommendations;
    std::vector<AuditEntry> audit;
    std::string bus_trace;
    std::vector<RuleConfigIssue> automation_issues;
    std::string recommendations_csv;
    std::string audit_text;

    std::string consumption_log_text(const LogFormat& format = LogFormat::uci_household()) const;
    std::string context_log_text() const;
};

/// Runs the minute-tick office world: daylight, the occupant's habits
/// (including forgetting to switch things off), appliance integration, bus
/// telemetry and the automation engine. Identical (scenario, seed) produce
/// identical traces.
SimulationResult run_scenario(const ScenarioConfig& config);

}  // namespace wattmine
