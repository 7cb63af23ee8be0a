#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wattmine/automation.hpp"
#include "wattmine/errors.hpp"
#include "wattmine/event_detect.hpp"
#include "wattmine/habit_mine.hpp"
#include "wattmine/ingest.hpp"
#include "wattmine/micro_moment.hpp"
#include "wattmine/reporting.hpp"
#include "wattmine/simulation.hpp"

namespace fs = std::filesystem;
using namespace wattmine;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string digest_hex(const std::string& bytes) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path + "'");
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

/// Collects stage outputs in memory and lands them together so a failing
/// stage leaves no partial artifacts. The manifest carries content digests;
/// rerunning an unchanged stage rewrites byte-identical files.
class StageWriter {
public:
    StageWriter(std::string stage, fs::path dir) : stage_(std::move(stage)), dir_(std::move(dir)) {}

    void add_input(const std::string& label, const std::string& path) {
        inputs_.emplace_back(label, path + "=" + digest_hex(read_file(path)));
    }
    void add_input_text(const std::string& label, const std::string& text) {
        inputs_.emplace_back(label, "inline=" + digest_hex(text));
    }
    void add(const std::string& name, std::string content) {
        files_.emplace_back(name, std::move(content));
    }

    void commit() {
        fs::create_directories(dir_);
        std::ostringstream manifest;
        manifest << "stage=" << stage_ << '\n';
        for (const auto& [label, digest] : inputs_) {
            manifest << "input." << label << '=' << digest << '\n';
        }
        for (const auto& [name, content] : files_) {
            manifest << "output." << name << '=' << digest_hex(content) << '\n';
        }
        for (const auto& [name, content] : files_) {
            std::ofstream out(dir_ / name, std::ios::binary);
            if (!out) throw DataError("cannot write '" + (dir_ / name).string() + "'");
            out << content;
        }
        std::ofstream out(dir_ / "manifest.txt", std::ios::binary);
        out << manifest.str();
    }

private:
    std::string stage_;
    fs::path dir_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<std::pair<std::string, std::string>> files_;
};

fs::path resolve_out(const std::string& out_flag, const std::string& stage) {
    if (!out_flag.empty()) return out_flag;
    if (const char* root = std::getenv("WATTMINE_OUT")) {
        return fs::path(root) / stage;
    }
    throw ConfigError("no --out given and WATTMINE_OUT is not set");
}

ScenarioConfig resolve_scenario(const std::string& name_or_path) {
    for (const std::string& name : builtin_scenario_names()) {
        if (name == name_or_path) return builtin_scenario(name);
    }
    return ScenarioConfig::load(name_or_path);
}

int run_ingest(const std::string& log_path, const std::string& format_path,
               const std::string& out_flag) {
    const LogFormat format =
        format_path.empty() ? LogFormat::uci_household() : LogFormat::load(format_path);
    const ConsumptionLog log = parse_consumption_log_file(log_path, format);

    StageWriter writer("ingest", resolve_out(out_flag, "ingest"));
    writer.add_input("log", log_path);
    for (const PowerSeries& series : log.lines) {
        writer.add("series_" + series.line_id + ".csv", serialize_line_series(series));
    }
    writer.add("parse_report.txt", log.report.to_text());
    writer.commit();
    std::cout << "records=" << log.report.records_parsed
              << " skipped=" << log.report.records_skipped << '\n';
    return kExitOk;
}

int run_detect(const std::string& in_dir, const std::string& signatures_path,
               const std::string& out_flag, int k_override, std::uint64_t seed) {
    const std::vector<ApplianceSignature> signatures =
        parse_signature_table_file(signatures_path);

    std::vector<ApplianceEvent> all_events;
    std::ostringstream cluster_report;
    Minute log_end;
    bool have_end = false;

    for (const auto& entry : fs::directory_iterator(in_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("series_", 0) != 0 || entry.path().extension() != ".csv") continue;
        const std::string line_id = name.substr(7, name.size() - 7 - 4);
        std::vector<ApplianceSignature> line_sigs;
        for (const ApplianceSignature& sig : signatures) {
            if (sig.room == line_id) line_sigs.push_back(sig);
        }
        if (line_sigs.empty()) continue;

        const PowerSeries series = parse_line_series_file(entry.path().string(), line_id);
        if (series.empty()) continue;
        if (!have_end || series.end() > log_end) {
            log_end = series.end();
            have_end = true;
        }
        const std::vector<ChangePoint> changes = compute_deltas(series);

        for (DeltaWindow window : {DeltaWindow::one_minute, DeltaWindow::five_minute}) {
            const bool slow = window == DeltaWindow::five_minute;
            std::size_t sig_count = 0;
            for (const ApplianceSignature& sig : line_sigs) {
                if (sig.slow_ramp == slow) ++sig_count;
            }
            if (sig_count == 0) continue;
            std::vector<double> values;
            for (const ChangePoint& change : changes) {
                if (change.window == window) values.push_back(change.delta_watts);
            }
            if (values.empty()) continue;
            std::vector<double> distinct(values);
            std::sort(distinct.begin(), distinct.end());
            distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
            std::size_t k = k_override > 0 ? static_cast<std::size_t>(k_override)
                                           : default_cluster_count(sig_count);
            k = std::min(k, distinct.size());
            const std::vector<ChangeCluster> clusters = cluster_changes(values, k, seed);
            for (const ChangeCluster& cluster : clusters) {
                cluster_report << line_id << (slow ? ".5min" : ".1min") << " centroid_w="
                               << format_double(cluster.centroid_watts)
                               << " members=" << cluster.member_count << '\n';
            }
            const ActionMapping mapping =
                map_changes_to_actions(changes, clusters, line_sigs, window);
            all_events.insert(all_events.end(), mapping.events.begin(), mapping.events.end());
            for (const Ambiguity& ambiguity : mapping.ambiguities) {
                cluster_report << line_id << " ambiguity at "
                               << to_iso_string(ambiguity.timestamp) << '\n';
            }
            for (const UnmappedCluster& unmapped : mapping.unmapped_clusters) {
                cluster_report << line_id << " unmapped centroid_w="
                               << format_double(unmapped.centroid_watts) << '\n';
            }
        }
    }

    std::stable_sort(all_events.begin(), all_events.end(),
                     [](const ApplianceEvent& a, const ApplianceEvent& b) {
                         if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                         return a.appliance_id < b.appliance_id;
                     });
    if (!have_end) throw DataError("no usable series found in '" + in_dir + "'");

    PeriodDerivation derivation = derive_usage_periods(all_events, signatures, log_end);
    characterize_usage(derivation.periods, {});

    StageWriter writer("detect", resolve_out(out_flag, "detect"));
    writer.add_input("signatures", signatures_path);
    writer.add("events.csv", serialize_events(all_events));
    writer.add("periods.csv", serialize_periods(derivation.periods));
    writer.add("clusters.txt", cluster_report.str());
    writer.commit();
    std::cout << "events=" << all_events.size() << " periods=" << derivation.periods.size()
              << '\n';
    return kExitOk;
}

int run_mine(const std::string& events_path, const std::string& periods_path,
             const std::string& context_path, const std::string& out_flag, double min_support,
             double min_confidence, int grace_min) {
    const std::vector<ApplianceEvent> events = parse_events_file(events_path);
    const std::vector<UsagePeriod> periods =
        periods_path.empty() ? std::vector<UsagePeriod>{} : parse_periods_file(periods_path);
    const std::vector<ContextSample> context = parse_context_log_file(context_path);

    MomentConfig config;
    config.absence_grace_minutes = grace_min;
    const std::vector<MicroMoment> moments = contextualize(events, context, periods, config);
    const std::vector<Transaction> transactions = build_transactions(moments, config.buckets);
    const FrequentItemsets itemsets = frequent_itemsets(transactions, min_support);
    const std::vector<AssociationRule> rules = generate_rules(itemsets, min_confidence);
    const std::vector<HabitRule> habits = extract_habits(rules);

    StageWriter writer("mine", resolve_out(out_flag, "mine"));
    writer.add_input("events", events_path);
    writer.add_input("context", context_path);
    writer.add("transactions.txt", serialize_transactions(transactions));
    writer.add("itemsets.psv", serialize_itemsets(itemsets));
    writer.add("rules.psv", serialize_rules(rules));
    writer.add("habits.psv", serialize_habits(habits));
    writer.commit();
    std::cout << "transactions=" << transactions.size() << " itemsets=" << itemsets.sets.size()
              << " rules=" << rules.size() << " habits=" << habits.size() << '\n';
    return kExitOk;
}

int run_simulate(const std::string& scenario_name, const std::string& out_flag,
                 std::int64_t seed_override, int weeks_override) {
    ScenarioConfig scenario = resolve_scenario(scenario_name);
    if (seed_override >= 0) scenario.seed = static_cast<std::uint64_t>(seed_override);
    if (weeks_override >= 0) {
        scenario.weeks = weeks_override;
        for (auto& [rule_id, flags] : scenario.automation_weeks) {
            flags.resize(static_cast<std::size_t>(weeks_override),
                         flags.empty() ? true : flags.back());
        }
    }

    const SimulationResult result = run_scenario(scenario);

    const fs::path out_dir = resolve_out(out_flag, "simulate");
    StageWriter writer("simulate", out_dir);
    writer.add_input_text("scenario", scenario.name + ":" + std::to_string(scenario.seed));
    writer.add("consumption.log", result.consumption_log_text());
    writer.add("context.csv", result.context_log_text());
    writer.add("metrics.csv", result.metrics.to_csv());
    writer.add("summary.txt", result.metrics.summary_text());
    writer.add("recommendations.csv", result.recommendations_csv);
    writer.add("audit.log", result.audit_text);
    if (!result.bus_trace.empty()) writer.add("trace.log", result.bus_trace);

    // Off/on week groups from the per-week automation plan.
    std::vector<int> weeks_off, weeks_on;
    for (int w = 0; w < scenario.weeks; ++w) {
        bool any_on = scenario.automation_weeks.empty() && !scenario.automations.empty();
        for (const auto& [rule_id, flags] : scenario.automation_weeks) {
            if (flags[static_cast<std::size_t>(w)]) any_on = true;
        }
        (any_on ? weeks_on : weeks_off).push_back(w);
    }
    if (!weeks_off.empty() && !weeks_on.empty()) {
        const ComparisonReport report = compare(result.metrics, weeks_on, weeks_off);
        writer.add("comparison.txt", report.to_text());
    }
    writer.commit();
    scenario.save((out_dir / "scenario.json").string());
    std::cout << "days=" << result.metrics.days
              << " recommendations=" << result.recommendations.size() << '\n';
    return kExitOk;
}

int run_report(const std::string& run_dir, const std::string& out_flag) {
    const fs::path dir(run_dir);
    for (const char* artifact : {"consumption.log", "context.csv", "scenario.json"}) {
        if (!fs::exists(dir / artifact)) {
            throw DataError("missing upstream artifact '" + (dir / artifact).string() +
                            "' from stage simulate");
        }
    }
    const ScenarioConfig scenario = ScenarioConfig::load((dir / "scenario.json").string());
    const ConsumptionLog log = parse_consumption_log_file((dir / "consumption.log").string(),
                                                          LogFormat::uci_household());
    ReportInputs inputs;
    inputs.lights = log.line("sub_metering_1");
    inputs.monitors = log.line("sub_metering_2");
    inputs.context = parse_context_log_file((dir / "context.csv").string());
    inputs.start = scenario.start;
    for (int w = 0; w < scenario.weeks; ++w) {
        bool any_on = scenario.automation_weeks.empty() && !scenario.automations.empty();
        for (const auto& [rule_id, flags] : scenario.automation_weeks) {
            if (flags[static_cast<std::size_t>(w)]) any_on = true;
        }
        (any_on ? inputs.weeks_on : inputs.weeks_off).push_back(w);
    }

    const ReportTables tables = build_report(inputs);
    StageWriter writer("report", out_flag.empty() ? dir : fs::path(out_flag));
    writer.add_input("consumption", (dir / "consumption.log").string());
    writer.add("fig7_hourly_lights.csv", tables.hourly_lights_csv);
    writer.add("fig8_presence_slots.csv", tables.presence_slots_csv);
    writer.add("fig9_monitor_watts.csv", tables.monitor_watts_csv);
    if (!tables.comparison_text.empty()) {
        writer.add("fig_comparison.txt", tables.comparison_text);
    }
    writer.commit();
    std::cout << "report written\n";
    return kExitOk;
}

int run_scenarios(const std::string& dump_name, const std::string& out_path) {
    if (dump_name.empty()) {
        for (const std::string& name : builtin_scenario_names()) std::cout << name << '\n';
        return kExitOk;
    }
    const ScenarioConfig scenario = builtin_scenario(dump_name);
    scenario.save(out_path.empty() ? dump_name + ".json" : out_path);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"appliance event detection, habit mining and office simulation"};
    app.require_subcommand(1);

    std::string log_path, format_path, out_dir, signatures_path;
    std::string events_path, periods_path, context_path, scenario_name, run_dir;
    std::string dump_name, dump_out;
    double min_support = 0.1, min_confidence = 0.6;
    int grace_min = 15, k_override = 0, weeks_override = -1;
    std::int64_t seed_override = -1;
    std::uint64_t detect_seed = 1;

    CLI::App* ingest = app.add_subcommand("ingest", "parse a consumption log");
    ingest->add_option("log", log_path, "consumption log file")->required();
    ingest->add_option("--format", format_path, "format descriptor (JSON)");
    ingest->add_option("--out", out_dir, "output directory");

    CLI::App* detect = app.add_subcommand("detect", "detect appliance events");
    detect->add_option("--in", run_dir, "ingest output directory")->required();
    detect->add_option("--signatures", signatures_path, "appliance signature table")->required();
    detect->add_option("--out", out_dir, "output directory");
    detect->add_option("--k", k_override, "cluster count override");
    detect->add_option("--seed", detect_seed, "clustering seed");

    CLI::App* mine = app.add_subcommand("mine", "mine habit rules from events");
    mine->add_option("--events", events_path, "events.csv from detect")->required();
    mine->add_option("--periods", periods_path, "periods.csv from detect");
    mine->add_option("--context", context_path, "context log")->required();
    mine->add_option("--out", out_dir, "output directory");
    mine->add_option("--min-support", min_support, "Apriori minimum support");
    mine->add_option("--min-confidence", min_confidence, "rule minimum confidence");
    mine->add_option("--grace-min", grace_min, "absence grace interval, minutes");

    CLI::App* simulate = app.add_subcommand("simulate", "run an office scenario");
    simulate->add_option("scenario", scenario_name, "builtin name or scenario JSON path")
        ->required();
    simulate->add_option("--out", out_dir, "output directory");
    simulate->add_option("--seed", seed_override, "seed override");
    simulate->add_option("--weeks", weeks_override, "duration override, weeks");

    CLI::App* report = app.add_subcommand("report", "emit plot data tables for a run");
    report->add_option("run", run_dir, "simulate output directory")->required();
    report->add_option("--out", out_dir, "output directory (default: the run directory)");

    CLI::App* scenarios = app.add_subcommand("scenarios", "list or dump builtin scenarios");
    scenarios->add_option("--dump", dump_name, "write a builtin scenario as JSON");
    scenarios->add_option("--out", dump_out, "path for --dump");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        const auto started = std::chrono::steady_clock::now();
        int rc = kExitInternal;
        if (ingest->parsed()) rc = run_ingest(log_path, format_path, out_dir);
        if (detect->parsed()) rc = run_detect(run_dir, signatures_path, out_dir, k_override,
                                              detect_seed);
        if (mine->parsed()) rc = run_mine(events_path, periods_path, context_path, out_dir,
                                          min_support, min_confidence, grace_min);
        if (simulate->parsed()) rc = run_simulate(scenario_name, out_dir, seed_override,
                                                  weeks_override);
        if (report->parsed()) rc = run_report(run_dir, out_dir);
        if (scenarios->parsed()) rc = run_scenarios(dump_name, dump_out);
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
        std::cerr << "elapsed_ms=" << elapsed.count() << '\n';
        return rc;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}
