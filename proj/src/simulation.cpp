#include "wattmine/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "wattmine/errors.hpp"

namespace wattmine {

namespace {

constexpr int kMinutesPerDay = 1440;
constexpr int kMinutesPerWeek = 7 * kMinutesPerDay;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + stream * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

double normal(std::mt19937_64& rng, double mean, double sigma) {
    const double u1 = std::max(uniform01(rng), 0x1.0p-60);
    const double u2 = uniform01(rng);
    return mean + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Half-sine between sunrise and sunset, 0 elsewhere, peak 1 at the midpoint.
double daylight_shape(int minute_of_day, const DaylightParams& p) {
    if (minute_of_day < p.sunrise_min || minute_of_day > p.sunset_min) return 0.0;
    const double span = static_cast<double>(p.sunset_min - p.sunrise_min);
    return std::sin(M_PI * static_cast<double>(minute_of_day - p.sunrise_min) / span);
}

struct DayPlan {
    bool office_day = false;
    int arrival = 0;
    int departure = 0;
    std::vector<std::pair<int, int>> blocks;  // absences, [start, end)
    int session_start = 0;
    int session_end = 0;
    bool light_on_arrival_coin = false;
    std::vector<bool> relight_coins;       // one per absence block
    std::vector<bool> forget_block_coins;  // one per absence block
    bool forget_final = false;
    bool ac_on_coin = false;
    bool ac_forget = false;
    double temp_jitter_c = 0.0;

    bool present_at(int minute_of_day) const {
        if (!office_day || minute_of_day < arrival || minute_of_day >= departure) return false;
        for (const auto& [start, end] : blocks) {
            if (minute_of_day >= start && minute_of_day < end) return false;
        }
        return true;
    }
};

/// All of a day's randomness is drawn here, in one fixed order, so runs that
/// differ only in automation enablement consume identical streams.
DayPlan make_day_plan(const ScenarioConfig& config, Minute day_start, std::mt19937_64& rng) {
    const OccupantSchedule& occ = config.occupant;
    DayPlan plan;
    plan.temp_jitter_c = (uniform01(rng) * 2.0 - 1.0) * config.daylight.temperature_day_jitter_c;

    const unsigned weekday = day_start.iso_weekday();
    plan.office_day = std::find(occ.office_days.begin(), occ.office_days.end(), weekday) !=
                      occ.office_days.end();
    if (!plan.office_day) return plan;

    const auto clamped_normal = [&](int mean, int jitter) {
        const int value = static_cast<int>(std::lround(normal(rng, mean, jitter)));
        return std::clamp(value, mean - 2 * jitter, mean + 2 * jitter);
    };
    plan.arrival = std::clamp(clamped_normal(occ.arrival_mean_min, occ.arrival_jitter_min), 0,
                              kMinutesPerDay - 2);
    plan.departure = std::clamp(clamped_normal(occ.departure_mean_min, occ.departure_jitter_min),
                                plan.arrival + 60, kMinutesPerDay - 1);

    int previous_end = plan.arrival;
    for (const AbsenceBlock& block : occ.absences) {
        if (!block.days.empty() &&
            std::find(block.days.begin(), block.days.end(), weekday) == block.days.end()) {
            continue;
        }
        const int jitter = block.jitter_min > 0
                               ? uniform_int(rng, -block.jitter_min, block.jitter_min)
                               : 0;
        int start = std::max(block.start_mean_min + jitter, previous_end + 1);
        int end = std::min(start + block.duration_min, plan.departure);
        if (end > start && start < plan.departure) {
            plan.blocks.emplace_back(start, end);
            previous_end = end;
        }
        plan.relight_coins.push_back(uniform01(rng) < occ.relight_bright_probability);
        plan.forget_block_coins.push_back(uniform01(rng) < occ.forget_lights_temporary);
    }

    const int first_segment_end = plan.blocks.empty() ? plan.departure : plan.blocks[0].first;
    const int offset = uniform_int(rng, 0, occ.computer_session_offset_max_min);
    const int length =
        uniform_int(rng, occ.computer_session_min_min, occ.computer_session_max_min);
    plan.session_start = std::min(plan.arrival + offset, first_segment_end - 1);
    plan.session_end = std::min(plan.session_start + length, first_segment_end);

    plan.light_on_arrival_coin = uniform01(rng) < occ.relight_bright_probability;
    plan.forget_final = uniform01(rng) < occ.forget_lights_final;
    plan.ac_on_coin = uniform01(rng) < occ.ac_hot_day_probability;
    plan.ac_forget = uniform01(rng) < occ.forget_ac_final;
    return plan;
}

const ApplianceSpec& find_spec(const ScenarioConfig& config, const std::string& id) {
    for (const ApplianceSpec& spec : config.appliances) {
        if (spec.appliance_id == id) return spec;
    }
    throw ConfigError("scenario '" + config.name + "' lacks appliance '" + id + "'");
}

}  // namespace

double daylight_luminosity(int minute_of_day, const DaylightParams& params) {
    if (params.sunrise_min >= params.sunset_min) {
        throw ConfigError("daylight: sunrise must precede sunset");
    }
    return params.peak_luminosity * daylight_shape(minute_of_day, params);
}

void ScenarioConfig::validate() const {
    if (weeks < 0) throw ConfigError("scenario: weeks must be non-negative");
    if (daylight.sunrise_min >= daylight.sunset_min) {
        throw ConfigError("scenario: sunrise must precede sunset");
    }
    if (accept_probability < 0.0 || accept_probability > 1.0) {
        throw ConfigError("scenario: accept_probability outside [0,1]");
    }
    for (const ApplianceSpec& spec : appliances) {
        if (spec.nominal_watts < 0.0 || spec.standby_watts < 0.0) {
            throw ConfigError("scenario: appliance powers must be non-negative");
        }
        if (spec.standby_watts > spec.nominal_watts) {
            throw ConfigError("scenario: standby above nominal for '" + spec.appliance_id + "'");
        }
    }
    find_spec(*this, "lights");
    find_spec(*this, "monitors");
    find_spec(*this, "ac");
    for (const auto& [rule_id, flags] : automation_weeks) {
        const bool known = std::any_of(automations.begin(), automations.end(),
                                       [&](const AutomationRule& rule) {
                                           return rule.rule_id == rule_id;
                                       });
        if (!known) {
            throw ConfigError("scenario: week plan references unknown automation '" + rule_id +
                              "'");
        }
        if (weeks > 0 && static_cast<int>(flags.size()) != weeks) {
            throw ConfigError("scenario: week plan for '" + rule_id + "' must list " +
                              std::to_string(weeks) + " weeks");
        }
    }
}

SimulationResult run_scenario(const ScenarioConfig& config) {
    config.validate();

    SimulationResult result;
    const int days = config.weeks * 7;
    const std::int64_t total_minutes = static_cast<std::int64_t>(days) * kMinutesPerDay;

    const ApplianceSpec& lights_spec = find_spec(config, "lights");
    const ApplianceSpec& monitors_spec = find_spec(config, "monitors");
    const ApplianceSpec& ac_spec = find_spec(config, "ac");

    Metrics& metrics = result.metrics;
    metrics.start = config.start;
    metrics.days = days;
    metrics.appliance_ids = {"ac", "lights", "monitors"};
    metrics.day_watt_minutes.resize(days);
    metrics.day_usage_minutes.resize(days);
    metrics.day_occupancy_minutes.resize(days, 0);
    for (const std::string& id : metrics.appliance_ids) {
        metrics.night_usage_minutes[id] = 0;
        metrics.weekend_usage_minutes[id] = 0;
        for (int d = 0; d < days; ++d) {
            metrics.day_watt_minutes[d][id] = 0.0;
            metrics.day_usage_minutes[d][id] = 0;
        }
        result.appliance_watts[id] = {};
        result.appliance_watts[id].reserve(static_cast<std::size_t>(total_minutes));
    }
    result.global.line_id = "global";
    result.global.samples.reserve(static_cast<std::size_t>(total_minutes));
    result.context.reserve(static_cast<std::size_t>(total_minutes));

    Bus bus;
    bus.set_trace_enabled(config.record_bus_trace);
    DeviceRegistry registry(bus);
    registry.register_device("lights", "office", DeviceKind::switch_unit);
    registry.register_device("monitors", "office", DeviceKind::power_meter);
    registry.register_device("ac", "office", DeviceKind::switch_unit);
    registry.register_device("motion", "office", DeviceKind::motion_sensor);
    registry.register_device("multi", "office", DeviceKind::multi_sensor);

    UserResponsePolicy policy(config.accept_probability, config.response_latency_min_minutes,
                              config.response_latency_max_minutes, mix_seed(config.seed, 0xA11CE));
    AutomationOptions engine_options;
    engine_options.recommendation_expiry_minutes = config.recommendation_expiry_minutes;
    AutomationEngine engine(bus, registry, policy, engine_options);
    for (const AutomationRule& rule : config.automations) engine.add_rule(rule);
    engine.attach();

    const Minute t0 = config.start;
    bus.set_now(t0);
    engine.set_clock(t0);
    for (const ApplianceSpec& spec : config.appliances) {
        if (spec.initially_on && registry.has(spec.appliance_id)) {
            registry.apply_command(spec.appliance_id, "on", t0, {CauseKind::user_action, ""});
        }
    }
    registry.update_telemetry("motion", "motion", "clear", t0);
    registry.update_telemetry("multi", "occupancy", "absent", t0);

    std::mt19937_64 schedule_rng(mix_seed(config.seed, 0x5CED));
    DayPlan plan;
    bool prev_present = false;
    std::int64_t last_activity = std::numeric_limits<std::int64_t>::min() / 2;

    const auto command = [&](const std::string& device, const std::string& cmd, Minute now) {
        registry.apply_command(device, cmd, now, {CauseKind::user_action, ""});
    };

    Minute now = t0;
    for (std::int64_t mi = 0; mi < total_minutes; ++mi, ++now) {
        const int day = static_cast<int>(mi / kMinutesPerDay);
        const int mod = static_cast<int>(mi % kMinutesPerDay);

        if (mod == 0) {
            plan = make_day_plan(config, now, schedule_rng);
            if (mi % kMinutesPerWeek == 0) {
                const int week = static_cast<int>(mi / kMinutesPerWeek);
                for (const auto& [rule_id, flags] : config.automation_weeks) {
                    engine.set_rule_enabled(rule_id, flags[static_cast<std::size_t>(week)]);
                }
            }
        }

        bus.set_now(now);
        engine.set_clock(now);

        const double natural = daylight_luminosity(mod, config.daylight);
        const double shape = daylight_shape(mod, config.daylight);
        const double temperature = config.daylight.temperature_base_c +
                                   (config.daylight.temperature_amplitude_c + plan.temp_jitter_c) *
                                       shape;
        const double humidity =
            std::clamp(config.daylight.humidity_base_pct -
                           config.daylight.humidity_swing_pct * shape, 0.0, 100.0);

        bool lights_on = registry.device("lights").power_state == PowerState::on;
        const double indoor = std::clamp(
            natural + (lights_on ? config.daylight.lights_luminosity_bonus : 0.0), 0.0, 1.0);
        registry.update_telemetry("multi", "luminosity", format_double(indoor), now);
        registry.update_telemetry("multi", "temperature", format_double(temperature), now);
        registry.update_telemetry("multi", "humidity", format_double(humidity), now);

        const bool present = plan.present_at(mod);
        if (present != prev_present) {
            registry.update_telemetry("motion", "motion", present ? "detected" : "clear", now);
            registry.update_telemetry("multi", "occupancy", present ? "present" : "absent", now);
            if (present) {
                lights_on = registry.device("lights").power_state == PowerState::on;
                if (!lights_on) {
                    const bool entering_at_arrival = mod <= plan.arrival;
                    const bool coin = entering_at_arrival ? plan.light_on_arrival_coin
                                                          : [&] {
                                                                // which block did we return from?
                                                                std::size_t idx = 0;
                                                                for (std::size_t b = 0;
                                                                     b < plan.blocks.size(); ++b) {
                                                                    if (plan.blocks[b].second == mod)
                                                                        idx = b;
                                                                }
                                                                return idx < plan.relight_coins.size()
                                                                           ? plan.relight_coins[idx]
                                                                           : false;
                                                            }();
                    if (indoor < config.manual_light_dim_threshold || coin) {
                        command("lights", "on", now);
                    }
                }
                if (mod <= plan.arrival + 1) {
                    const double day_peak = config.daylight.temperature_base_c +
                                            config.daylight.temperature_amplitude_c +
                                            plan.temp_jitter_c;
                    if (plan.ac_on_coin && day_peak >= config.hot_day_threshold_c &&
                        registry.device("ac").power_state != PowerState::on) {
                        command("ac", "on", now);
                    }
                }
            } else {
                const bool final_departure = mod >= plan.departure;
                if (final_departure) {
                    if (registry.device("lights").power_state == PowerState::on &&
                        !plan.forget_final) {
                        command("lights", "off", now);
                    }
                    if (registry.device("ac").power_state == PowerState::on && !plan.ac_forget) {
                        command("ac", "off", now);
                    }
                } else {
                    std::size_t idx = 0;
                    for (std::size_t b = 0; b < plan.blocks.size(); ++b) {
                        if (plan.blocks[b].first == mod) idx = b;
                    }
                    const bool forgets = idx < plan.forget_block_coins.size()
                                             ? plan.forget_block_coins[idx]
                                             : true;
                    if (registry.device("lights").power_state == PowerState::on && !forgets) {
                        command("lights", "off", now);
                    }
                }
            }
            prev_present = present;
        }

        if (present && mod >= plan.session_start && mod < plan.session_end) {
            if (registry.device("monitors").power_state != PowerState::on) {
                command("monitors", "on", now);
            }
            last_activity = mi;
        }

        if (mod == config.building_close_min) {
            if (registry.device("lights").power_state == PowerState::on) {
                command("lights", "off", now);
            }
            if (registry.device("ac").power_state == PowerState::on) {
                command("ac", "off", now);
            }
        }

        engine.tick(now);

        const double lights_watts =
            registry.device("lights").power_state == PowerState::on ? lights_spec.nominal_watts
                                                                     : 0.0;
        double monitors_watts = 0.0;
        bool monitors_active = false;
        if (registry.device("monitors").power_state == PowerState::on) {
            monitors_active = !monitors_spec.auto_standby_after_min ||
                              mi - last_activity < *monitors_spec.auto_standby_after_min;
            monitors_watts =
                monitors_active ? monitors_spec.nominal_watts : monitors_spec.standby_watts;
        }
        const double ac_watts =
            registry.device("ac").power_state == PowerState::on ? ac_spec.nominal_watts : 0.0;

        auto& day_watts = metrics.day_watt_minutes[day];
        day_watts["lights"] += lights_watts;
        day_watts["monitors"] += monitors_watts;
        day_watts["ac"] += ac_watts;
        auto& day_usage = metrics.day_usage_minutes[day];
        const bool lights_usage = lights_watts > 0.0;
        const bool monitors_usage = monitors_active;
        const bool ac_usage = ac_watts > 0.0;
        day_usage["lights"] += lights_usage ? 1 : 0;
        day_usage["monitors"] += monitors_usage ? 1 : 0;
        day_usage["ac"] += ac_usage ? 1 : 0;
        metrics.day_occupancy_minutes[day] += present ? 1 : 0;
        const bool night = mod >= 21 * 60 || mod < 7 * 60;
        if (night && lights_usage) ++metrics.night_usage_minutes["lights"];
        if (night && monitors_usage) ++metrics.night_usage_minutes["monitors"];
        if (night && ac_usage) ++metrics.night_usage_minutes["ac"];
        if (now.is_weekend()) {
            if (lights_usage) ++metrics.weekend_usage_minutes["lights"];
            if (monitors_usage) ++metrics.weekend_usage_minutes["monitors"];
            if (ac_usage) ++metrics.weekend_usage_minutes["ac"];
        }

        registry.update_power("lights", lights_watts, now);
        registry.update_power("monitors", monitors_watts, now);
        registry.update_power("ac", ac_watts, now);

        result.appliance_watts["lights"].push_back(lights_watts);
        result.appliance_watts["monitors"].push_back(monitors_watts);
        result.appliance_watts["ac"].push_back(ac_watts);

        PowerSample sample;
        sample.timestamp = now;
        sample.active_power_kw = (lights_watts + monitors_watts + ac_watts) / 1000.0;
        sample.reactive_power_kw = 0.0;
        sample.voltage_v = 230.0;
        sample.submeter_wh = {lights_watts / 60.0, monitors_watts / 60.0, ac_watts / 60.0};
        sample.quality = SampleQuality::valid;
        result.global.samples.push_back(sample);

        ContextSample context;
        context.timestamp = now;
        context.temperature_c = temperature;
        context.humidity_pct = humidity;
        context.luminosity = indoor;
        context.occupied = present;
        result.context.push_back(context);
    }

    result.recommendations = engine.recommendations();
    result.audit = registry.audit_log();
    result.automation_issues = engine.config_issues();
    result.bus_trace = config.record_bus_trace ? bus.trace_text() : std::string{};
    result.recommendations_csv = engine.recommendations_text();
    result.audit_text = registry.audit_text();
    return result;
}

std::string SimulationResult::consumption_log_text(const LogFormat& format) const {
    return serialize_consumption_log(global, format);
}

std::string SimulationResult::context_log_text() const {
    return serialize_context_log(context);
}

double Metrics::energy_wh(const std::string& appliance, int day) const {
    return day_watt_minutes[day].at(appliance) / 60.0;
}

double Metrics::usage_hours(const std::string& appliance, int day) const {
    return static_cast<double>(day_usage_minutes[day].at(appliance)) / 60.0;
}

double Metrics::week_mean_daily_usage_hours(const std::string& appliance, int week) const {
    double hours = 0.0;
    for (int d = week * 7; d < (week + 1) * 7; ++d) hours += usage_hours(appliance, d);
    return hours / 7.0;
}

double Metrics::week_energy_wh(const std::string& appliance, int week) const {
    double watt_minutes = 0.0;
    for (int d = week * 7; d < (week + 1) * 7; ++d) {
        watt_minutes += day_watt_minutes[d].at(appliance);
    }
    return watt_minutes / 60.0;
}

double Metrics::total_energy_wh(const std::string& appliance) const {
    double watt_minutes = 0.0;
    for (int d = 0; d < days; ++d) watt_minutes += day_watt_minutes[d].at(appliance);
    return watt_minutes / 60.0;
}

double Metrics::week_mean_office_day_usage_hours(const std::string& appliance, int week) const {
    double hours = 0.0;
    int office_days = 0;
    for (int d = week * 7; d < (week + 1) * 7; ++d) {
        if (day_occupancy_minutes[d] > 0) {
            hours += usage_hours(appliance, d);
            ++office_days;
        }
    }
    return office_days > 0 ? hours / office_days : 0.0;
}

std::string Metrics::to_csv() const {
    std::ostringstream out;
    out << "day,date,appliance,usage_minutes,energy_wh,occupancy_minutes\n";
    for (int d = 0; d < days; ++d) {
        for (const std::string& id : appliance_ids) {
            out << d << ',' << to_iso_string(start + static_cast<std::int64_t>(d) * kMinutesPerDay)
                << ',' << id << ',' << day_usage_minutes[d].at(id) << ','
                << format_double(energy_wh(id, d)) << ',' << day_occupancy_minutes[d] << '\n';
        }
    }
    return out.str();
}

std::string Metrics::summary_text() const {
    std::ostringstream out;
    out << "days=" << days << '\n';
    for (int w = 0; w < weeks(); ++w) {
        for (const std::string& id : appliance_ids) {
            out << "week" << w + 1 << '.' << id
                << ".mean_daily_usage_h=" << format_double(week_mean_daily_usage_hours(id, w))
                << '\n';
            out << "week" << w + 1 << '.' << id
                << ".energy_wh=" << format_double(week_energy_wh(id, w)) << '\n';
        }
    }
    for (const std::string& id : appliance_ids) {
        out << "total." << id << ".energy_wh=" << format_double(total_energy_wh(id)) << '\n';
        out << "night." << id << ".usage_min=" << night_usage_minutes.at(id) << '\n';
        out << "weekend." << id << ".usage_min=" << weekend_usage_minutes.at(id) << '\n';
    }
    return out.str();
}

RatioResult compare_means(const std::vector<double>& group_a,
                          const std::vector<double>& group_b) {
    if (group_a.empty() || group_b.empty()) {
        throw ParameterError("compare: both groups must be non-empty");
    }
    const double mean_a = std::accumulate(group_a.begin(), group_a.end(), 0.0) /
                          static_cast<double>(group_a.size());
    const double mean_b = std::accumulate(group_b.begin(), group_b.end(), 0.0) /
                          static_cast<double>(group_b.size());
    RatioResult result;
    if (mean_a == 0.0) return result;  // undefined, not an error
    result.defined = true;
    result.ratio = mean_b / mean_a;
    result.percent_change = (result.ratio - 1.0) * 100.0;
    return result;
}

ComparisonReport compare(const Metrics& metrics, const std::vector<int>& weeks_a,
                         const std::vector<int>& weeks_b) {
    if (weeks_a.empty() || weeks_b.empty()) {
        throw ParameterError("compare: both week groups must be non-empty");
    }
    ComparisonReport report;
    for (const std::string& id : metrics.appliance_ids) {
        GroupComparison entry;
        entry.appliance = id;
        std::vector<double> usage_a, usage_b, energy_a, energy_b;
        for (int w : weeks_a) {
            usage_a.push_back(metrics.week_mean_daily_usage_hours(id, w));
            energy_a.push_back(metrics.week_energy_wh(id, w));
        }
        for (int w : weeks_b) {
            usage_b.push_back(metrics.week_mean_daily_usage_hours(id, w));
            energy_b.push_back(metrics.week_energy_wh(id, w));
        }
        entry.mean_daily_usage_hours_a =
            std::accumulate(usage_a.begin(), usage_a.end(), 0.0) / usage_a.size();
        entry.mean_daily_usage_hours_b =
            std::accumulate(usage_b.begin(), usage_b.end(), 0.0) / usage_b.size();
        entry.usage = compare_means(usage_a, usage_b);
        entry.energy_wh_a = std::accumulate(energy_a.begin(), energy_a.end(), 0.0);
        entry.energy_wh_b = std::accumulate(energy_b.begin(), energy_b.end(), 0.0);
        entry.energy = compare_means(energy_a, energy_b);
        report.per_appliance.push_back(entry);
    }
    return report;
}

std::string ComparisonReport::to_text() const {
    std::ostringstream out;
    for (const GroupComparison& entry : per_appliance) {
        out << entry.appliance << ".usage_a_h=" << format_double(entry.mean_daily_usage_hours_a)
            << '\n';
        out << entry.appliance << ".usage_b_h=" << format_double(entry.mean_daily_usage_hours_b)
            << '\n';
        out << entry.appliance << ".usage_ratio="
            << (entry.usage.defined ? format_double(entry.usage.ratio) : "undefined") << '\n';
        out << entry.appliance << ".usage_change_pct="
            << (entry.usage.defined ? format_double(entry.usage.percent_change) : "undefined")
            << '\n';
        out << entry.appliance << ".energy_ratio="
            << (entry.energy.defined ? format_double(entry.energy.ratio) : "undefined") << '\n';
    }
    return out.str();
}

namespace {

nlohmann::json rule_to_json(const AutomationRule& rule) {
    nlohmann::json j;
    j["id"] = rule.rule_id;
    if (rule.trigger.kind == Trigger::Kind::message) {
        j["trigger_topic"] = rule.trigger.topic_filter;
        j["trigger_predicate"] = rule.trigger.payload.to_text();
    } else {
        char buf[8];
        std::snprintf(buf, sizeof buf, "%02u:%02u", rule.trigger.hour, rule.trigger.minute);
        j["trigger_topic"] = std::string("@") + buf;
        j["trigger_predicate"] = rule.trigger.days == TriggerDays::weekday   ? "day=weekday"
                                 : rule.trigger.days == TriggerDays::weekend ? "day=weekend"
                                                                              : "*";
    }
    nlohmann::json conditions = nlohmann::json::array();
    for (const Condition& c : rule.conditions) {
        nlohmann::json jc;
        jc["device"] = c.device_id;
        jc["predicate"] = c.predicate.to_text();
        jc["sustained_minutes"] = c.sustained_minutes;
        conditions.push_back(jc);
    }
    j["conditions"] = conditions;
    j["action_kind"] = rule.action.kind == RuleAction::Kind::notify ? "notify" : "command";
    j["action_target"] = rule.action.device_id + ":" + rule.action.command;
    j["direct"] = rule.direct;
    j["enabled"] = rule.enabled;
    return j;
}

AutomationRule rule_from_json(const nlohmann::json& j) {
    AutomationRule rule;
    rule.rule_id = j.at("id").get<std::string>();
    const std::string topic = j.at("trigger_topic").get<std::string>();
    const std::string predicate = j.value("trigger_predicate", std::string("*"));
    if (!topic.empty() && topic[0] == '@') {
        rule.trigger.kind = Trigger::Kind::time;
        unsigned hour = 0, minute = 0;
        std::sscanf(topic.c_str() + 1, "%u:%u", &hour, &minute);
        rule.trigger.hour = hour;
        rule.trigger.minute = minute;
        rule.trigger.days = predicate == "day=weekday"   ? TriggerDays::weekday
                            : predicate == "day=weekend" ? TriggerDays::weekend
                                                          : TriggerDays::all;
    } else {
        rule.trigger.kind = Trigger::Kind::message;
        rule.trigger.topic_filter = topic;
        rule.trigger.payload = Predicate::parse(predicate);
    }
    for (const auto& jc : j.value("conditions", nlohmann::json::array())) {
        Condition c;
        c.device_id = jc.at("device").get<std::string>();
        c.predicate = Predicate::parse(jc.at("predicate").get<std::string>());
        c.sustained_minutes = jc.value("sustained_minutes", 0);
        rule.conditions.push_back(std::move(c));
    }
    const std::string kind = j.value("action_kind", std::string("notify"));
    rule.action.kind =
        kind == "command" ? RuleAction::Kind::device_command : RuleAction::Kind::notify;
    const std::string target = j.at("action_target").get<std::string>();
    const std::size_t colon = target.find(':');
    if (colon == std::string::npos) throw ConfigError("bad action_target '" + target + "'");
    rule.action.device_id = target.substr(0, colon);
    rule.action.command = target.substr(colon + 1);
    rule.direct = j.value("direct", false);
    rule.enabled = j.value("enabled", true);
    return rule;
}

}  // namespace

ScenarioConfig ScenarioConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read scenario '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad scenario file '" + path + "': " + e.what());
    }
    ScenarioConfig c;
    c.name = j.value("name", c.name);
    c.weeks = j.value("weeks", c.weeks);
    c.seed = j.value("seed", c.seed);
    if (j.contains("start")) c.start = parse_iso_minute(j.at("start").get<std::string>());

    if (j.contains("occupant")) {
        const auto& jo = j.at("occupant");
        OccupantSchedule& o = c.occupant;
        o.office_days = jo.value("office_days", o.office_days);
        o.arrival_mean_min = jo.value("arrival_mean_min", o.arrival_mean_min);
        o.arrival_jitter_min = jo.value("arrival_jitter_min", o.arrival_jitter_min);
        o.departure_mean_min = jo.value("departure_mean_min", o.departure_mean_min);
        o.departure_jitter_min = jo.value("departure_jitter_min", o.departure_jitter_min);
        o.forget_lights_final = jo.value("forget_lights_final", o.forget_lights_final);
        o.forget_lights_temporary =
            jo.value("forget_lights_temporary", o.forget_lights_temporary);
        o.relight_bright_probability =
            jo.value("relight_bright_probability", o.relight_bright_probability);
        o.computer_session_offset_max_min =
            jo.value("computer_session_offset_max_min", o.computer_session_offset_max_min);
        o.computer_session_min_min =
            jo.value("computer_session_min_min", o.computer_session_min_min);
        o.computer_session_max_min =
            jo.value("computer_session_max_min", o.computer_session_max_min);
        o.ac_hot_day_probability = jo.value("ac_hot_day_probability", o.ac_hot_day_probability);
        o.forget_ac_final = jo.value("forget_ac_final", o.forget_ac_final);
        for (const auto& jb : jo.value("absences", nlohmann::json::array())) {
            AbsenceBlock block;
            block.name = jb.value("name", std::string("absence"));
            block.start_mean_min = jb.at("start_mean_min").get<int>();
            block.duration_min = jb.at("duration_min").get<int>();
            block.jitter_min = jb.value("jitter_min", 0);
            block.days = jb.value("days", std::vector<unsigned>{});
            o.absences.push_back(std::move(block));
        }
    }
    if (j.contains("daylight")) {
        const auto& jd = j.at("daylight");
        DaylightParams& d = c.daylight;
        d.sunrise_min = jd.value("sunrise_min", d.sunrise_min);
        d.sunset_min = jd.value("sunset_min", d.sunset_min);
        d.peak_luminosity = jd.value("peak_luminosity", d.peak_luminosity);
        d.temperature_base_c = jd.value("temperature_base_c", d.temperature_base_c);
        d.temperature_amplitude_c = jd.value("temperature_amplitude_c", d.temperature_amplitude_c);
        d.temperature_day_jitter_c =
            jd.value("temperature_day_jitter_c", d.temperature_day_jitter_c);
        d.humidity_base_pct = jd.value("humidity_base_pct", d.humidity_base_pct);
        d.humidity_swing_pct = jd.value("humidity_swing_pct", d.humidity_swing_pct);
        d.lights_luminosity_bonus =
            jd.value("lights_luminosity_bonus", d.lights_luminosity_bonus);
    }
    for (const auto& ja : j.value("appliances", nlohmann::json::array())) {
        ApplianceSpec spec;
        spec.appliance_id = ja.at("id").get<std::string>();
        spec.nominal_watts = ja.at("nominal_watts").get<double>();
        spec.standby_watts = ja.value("standby_watts", 0.0);
        if (ja.contains("auto_standby_after_min") && !ja.at("auto_standby_after_min").is_null()) {
            spec.auto_standby_after_min = ja.at("auto_standby_after_min").get<int>();
        }
        spec.initially_on = ja.value("initially_on", false);
        c.appliances.push_back(std::move(spec));
    }
    for (const auto& jr : j.value("automations", nlohmann::json::array())) {
        c.automations.push_back(rule_from_json(jr));
    }
    if (j.contains("automation_weeks")) {
        for (const auto& [rule_id, flags] : j.at("automation_weeks").items()) {
            c.automation_weeks[rule_id] = flags.get<std::vector<bool>>();
        }
    }
    c.accept_probability = j.value("accept_probability", c.accept_probability);
    c.response_latency_min_minutes =
        j.value("response_latency_min_minutes", c.response_latency_min_minutes);
    c.response_latency_max_minutes =
        j.value("response_latency_max_minutes", c.response_latency_max_minutes);
    c.recommendation_expiry_minutes =
        j.value("recommendation_expiry_minutes", c.recommendation_expiry_minutes);
    c.manual_light_dim_threshold =
        j.value("manual_light_dim_threshold", c.manual_light_dim_threshold);
    c.hot_day_threshold_c = j.value("hot_day_threshold_c", c.hot_day_threshold_c);
    c.building_close_min = j.value("building_close_min", c.building_close_min);
    c.record_bus_trace = j.value("record_bus_trace", c.record_bus_trace);
    return c;
}

void ScenarioConfig::save(const std::string& path) const {
    nlohmann::json j;
    j["name"] = name;
    j["weeks"] = weeks;
    j["seed"] = seed;
    j["start"] = to_iso_string(start);
    nlohmann::json jo;
    jo["office_days"] = occupant.office_days;
    jo["arrival_mean_min"] = occupant.arrival_mean_min;
    jo["arrival_jitter_min"] = occupant.arrival_jitter_min;
    jo["departure_mean_min"] = occupant.departure_mean_min;
    jo["departure_jitter_min"] = occupant.departure_jitter_min;
    nlohmann::json jblocks = nlohmann::json::array();
    for (const AbsenceBlock& block : occupant.absences) {
        nlohmann::json jb;
        jb["name"] = block.name;
        jb["start_mean_min"] = block.start_mean_min;
        jb["duration_min"] = block.duration_min;
        jb["jitter_min"] = block.jitter_min;
        jb["days"] = block.days;
        jblocks.push_back(jb);
    }
    jo["absences"] = jblocks;
    jo["forget_lights_final"] = occupant.forget_lights_final;
    jo["forget_lights_temporary"] = occupant.forget_lights_temporary;
    jo["relight_bright_probability"] = occupant.relight_bright_probability;
    jo["computer_session_offset_max_min"] = occupant.computer_session_offset_max_min;
    jo["computer_session_min_min"] = occupant.computer_session_min_min;
    jo["computer_session_max_min"] = occupant.computer_session_max_min;
    jo["ac_hot_day_probability"] = occupant.ac_hot_day_probability;
    jo["forget_ac_final"] = occupant.forget_ac_final;
    j["occupant"] = jo;
    nlohmann::json jd;
    jd["sunrise_min"] = daylight.sunrise_min;
    jd["sunset_min"] = daylight.sunset_min;
    jd["peak_luminosity"] = daylight.peak_luminosity;
    jd["temperature_base_c"] = daylight.temperature_base_c;
    jd["temperature_amplitude_c"] = daylight.temperature_amplitude_c;
    jd["temperature_day_jitter_c"] = daylight.temperature_day_jitter_c;
    jd["humidity_base_pct"] = daylight.humidity_base_pct;
    jd["humidity_swing_pct"] = daylight.humidity_swing_pct;
    jd["lights_luminosity_bonus"] = daylight.lights_luminosity_bonus;
    j["daylight"] = jd;
    nlohmann::json japps = nlohmann::json::array();
    for (const ApplianceSpec& spec : appliances) {
        nlohmann::json ja;
        ja["id"] = spec.appliance_id;
        ja["nominal_watts"] = spec.nominal_watts;
        ja["standby_watts"] = spec.standby_watts;
        if (spec.auto_standby_after_min) {
            ja["auto_standby_after_min"] = *spec.auto_standby_after_min;
        }
        ja["initially_on"] = spec.initially_on;
        japps.push_back(ja);
    }
    j["appliances"] = japps;
    nlohmann::json jrules = nlohmann::json::array();
    for (const AutomationRule& rule : automations) jrules.push_back(rule_to_json(rule));
    j["automations"] = jrules;
    nlohmann::json jweeks;
    for (const auto& [rule_id, flags] : automation_weeks) jweeks[rule_id] = flags;
    j["automation_weeks"] = jweeks;
    j["accept_probability"] = accept_probability;
    j["response_latency_min_minutes"] = response_latency_min_minutes;
    j["response_latency_max_minutes"] = response_latency_max_minutes;
    j["recommendation_expiry_minutes"] = recommendation_expiry_minutes;
    j["manual_light_dim_threshold"] = manual_light_dim_threshold;
    j["hot_day_threshold_c"] = hot_day_threshold_c;
    j["building_close_min"] = building_close_min;
    j["record_bus_trace"] = record_bus_trace;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write scenario '" + path + "'");
    out << j.dump(2) << '\n';
}

namespace {

std::vector<AutomationRule> office_automations() {
    std::vector<AutomationRule> rules;

    AutomationRule lights_inactivity;
    lights_inactivity.rule_id = "lights_inactivity_off";
    lights_inactivity.trigger.kind = Trigger::Kind::message;
    lights_inactivity.trigger.topic_filter = "office/motion/motion";
    lights_inactivity.trigger.payload = Predicate::parse("value=clear");
    lights_inactivity.conditions.push_back(
        {"motion", Predicate::parse("motion=clear"), 15});
    lights_inactivity.conditions.push_back({"lights", Predicate::parse("state=on"), 0});
    lights_inactivity.action = {RuleAction::Kind::notify, "lights", "off"};
    rules.push_back(lights_inactivity);

    AutomationRule lights_sunlight;
    lights_sunlight.rule_id = "lights_sunlight_off";
    lights_sunlight.trigger.kind = Trigger::Kind::message;
    lights_sunlight.trigger.topic_filter = "office/multi/luminosity";
    lights_sunlight.trigger.payload = Predicate::parse("value>=0.7");
    lights_sunlight.conditions.push_back({"multi", Predicate::parse("luminosity>=0.7"), 0});
    lights_sunlight.conditions.push_back({"lights", Predicate::parse("state=on"), 0});
    lights_sunlight.conditions.push_back({"motion", Predicate::parse("motion=detected"), 0});
    lights_sunlight.action = {RuleAction::Kind::notify, "lights", "off"};
    rules.push_back(lights_sunlight);

    AutomationRule monitors_inactivity;
    monitors_inactivity.rule_id = "monitors_inactivity_off";
    monitors_inactivity.trigger.kind = Trigger::Kind::message;
    monitors_inactivity.trigger.topic_filter = "office/motion/motion";
    monitors_inactivity.trigger.payload = Predicate::parse("value=clear");
    monitors_inactivity.conditions.push_back(
        {"motion", Predicate::parse("motion=clear"), 15});
    monitors_inactivity.conditions.push_back({"monitors", Predicate::parse("state=on"), 0});
    monitors_inactivity.action = {RuleAction::Kind::device_command, "monitors", "off"};
    monitors_inactivity.direct = true;  // the paper switched monitors automatically
    rules.push_back(monitors_inactivity);

    return rules;
}

std::vector<ApplianceSpec> office_appliances() {
    std::vector<ApplianceSpec> specs;
    specs.push_back({"lights", 120.0, 0.0, std::nullopt, false});
    ApplianceSpec monitors{"monitors", 76.0, 1.0, 30, true};  // two 38 W panels
    specs.push_back(monitors);
    specs.push_back({"ac", 1200.0, 0.0, std::nullopt, false});
    return specs;
}

ScenarioConfig alice_4weeks() {
    ScenarioConfig c;
    c.name = "alice_4weeks";
    c.weeks = 4;
    c.seed = 20260105;
    c.occupant.absences.push_back({"classes", 10 * 60 + 30, 180, 20, {}});
    c.occupant.absences.push_back({"meeting", 15 * 60, 90, 15, {}});
    c.appliances = office_appliances();
    c.automations = office_automations();
    const std::vector<bool> on_mid_weeks{false, true, true, false};
    for (const AutomationRule& rule : c.automations) {
        c.automation_weeks[rule.rule_id] = on_mid_weeks;
    }
    return c;
}

ScenarioConfig closed_loop() {
    ScenarioConfig c = alice_4weeks();
    c.name = "closed_loop";
    c.seed = 7;
    c.accept_probability = 1.0;
    c.response_latency_min_minutes = 1;
    c.response_latency_max_minutes = 1;
    c.automation_weeks.clear();  // automations stay on throughout
    c.record_bus_trace = false;
    return c;
}

ScenarioConfig all_absent_week() {
    ScenarioConfig c;
    c.name = "all_absent_week";
    c.weeks = 1;
    c.seed = 1;
    c.occupant.office_days.clear();  // nobody comes in
    c.appliances = office_appliances();
    return c;
}

}  // namespace

ScenarioConfig builtin_scenario(const std::string& name) {
    if (name == "alice_4weeks") return alice_4weeks();
    if (name == "closed_loop") return closed_loop();
    if (name == "all_absent_week") return all_absent_week();
    throw ConfigError("unknown scenario '" + name + "'");
}

std::vector<std::string> builtin_scenario_names() {
    return {"alice_4weeks", "all_absent_week", "closed_loop"};
}

}  // namespace wattmine
