#include "wattmine/event_detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "wattmine/errors.hpp"

namespace wattmine {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t begin = 0;
    while (true) {
        const std::size_t pos = line.find(sep, begin);
        if (pos == std::string::npos) {
            out.push_back(line.substr(begin));
            break;
        }
        out.push_back(line.substr(begin, pos - begin));
        begin = pos + 1;
    }
    for (std::string& f : out) {
        while (!f.empty() && (f.back() == ' ' || f.back() == '\r')) f.pop_back();
        while (!f.empty() && f.front() == ' ') f.erase(f.begin());
    }
    return out;
}

struct LloydResult {
    std::vector<double> centroids;  // sorted ascending
    double wcss = kInf;
};

LloydResult lloyd_once(const std::vector<double>& sorted_values,
                       const std::vector<double>& distinct, std::size_t k,
                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> centroids(distinct);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, centroids.size() - 1);
        std::swap(centroids[i], centroids[pick(rng)]);
    }
    centroids.resize(k);
    std::sort(centroids.begin(), centroids.end());

    const std::size_t n = sorted_values.size();
    std::vector<std::size_t> assignment(n, 0);
    for (int iter = 0; iter < 200; ++iter) {
        // Assignment step: sorted centroids partition the line at midpoints,
        // ties going to the lower cluster.
        bool changed = false;
        std::size_t cluster = 0;
        for (std::size_t i = 0; i < n; ++i) {
            while (cluster + 1 < k &&
                   sorted_values[i] > (centroids[cluster] + centroids[cluster + 1]) / 2.0) {
                ++cluster;
            }
            if (assignment[i] != cluster) {
                assignment[i] = cluster;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;

        std::vector<double> sums(k, 0.0);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums[assignment[i]] += sorted_values[i];
            ++counts[assignment[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                centroids[c] = sums[c] / static_cast<double>(counts[c]);
            } else {
                // Reseed an emptied cluster with the member farthest from its
                // current centroid.
                std::size_t worst = 0;
                double worst_dist = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = std::abs(sorted_values[i] - centroids[assignment[i]]);
                    if (d > worst_dist) {
                        worst_dist = d;
                        worst = i;
                    }
                }
                centroids[c] = sorted_values[worst];
            }
        }
        std::sort(centroids.begin(), centroids.end());
    }

    LloydResult result;
    result.centroids = centroids;
    result.wcss = 0.0;
    std::size_t cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (cluster + 1 < k &&
               sorted_values[i] > (centroids[cluster] + centroids[cluster + 1]) / 2.0) {
            ++cluster;
        }
        const double d = sorted_values[i] - centroids[cluster];
        result.wcss += d * d;
    }
    return result;
}

}  // namespace

std::vector<ChangePoint> compute_deltas(const PowerSeries& series) {
    std::vector<ChangePoint> out;
    std::size_t valid_count = 0;
    for (const PowerSample& s : series.samples) {
        if (s.valid()) ++valid_count;
    }
    if (valid_count < 2) return out;

    for (std::size_t i = 1; i < series.samples.size(); ++i) {
        const PowerSample& prev = series.samples[i - 1];
        const PowerSample& cur = series.samples[i];
        if (!prev.valid() || !cur.valid()) continue;
        if (cur.timestamp - prev.timestamp != 1) continue;
        out.push_back({cur.timestamp,
                       (cur.active_power_kw - prev.active_power_kw) * 1000.0,
                       DeltaWindow::one_minute});
    }

    if (!series.empty()) {
        struct BlockMean {
            Minute start;
            double mean = 0.0;
            bool defined = false;
        };
        const Minute origin = series.start();
        const std::int64_t block_count = (series.end() - origin) / 5 + 1;
        std::vector<BlockMean> blocks(static_cast<std::size_t>(block_count));
        std::vector<std::size_t> counts(blocks.size(), 0);
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            blocks[b].start = origin + static_cast<std::int64_t>(b) * 5;
        }
        for (const PowerSample& s : series.samples) {
            if (!s.valid()) continue;
            const std::size_t b = static_cast<std::size_t>((s.timestamp - origin) / 5);
            blocks[b].mean += s.active_power_kw * 1000.0;
            ++counts[b];
        }
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            if (counts[b] > 0) {
                blocks[b].mean /= static_cast<double>(counts[b]);
                blocks[b].defined = true;
            }
        }
        for (std::size_t b = 1; b < blocks.size(); ++b) {
            if (!blocks[b - 1].defined || !blocks[b].defined) continue;
            out.push_back({blocks[b].start, blocks[b].mean - blocks[b - 1].mean,
                           DeltaWindow::five_minute});
        }
    }
    return out;
}

std::size_t default_cluster_count(std::size_t appliances_on_line) {
    return appliances_on_line * 2 + 1;
}

std::vector<ChangeCluster> cluster_changes(const std::vector<double>& values, std::size_t k,
                                           std::uint64_t seed, int restarts) {
    if (values.empty()) throw ParameterError("cluster_changes: no values");
    if (k == 0) throw ParameterError("cluster_changes: k must be at least 1");

    std::vector<double> sorted(values);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> distinct(sorted);
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (k > distinct.size()) {
        throw ParameterError("cluster_changes: k=" + std::to_string(k) + " exceeds " +
                             std::to_string(distinct.size()) + " distinct values");
    }

    LloydResult best;
    for (int r = 0; r < restarts; ++r) {
        LloydResult candidate = lloyd_once(sorted, distinct, k, seed + static_cast<std::uint64_t>(r));
        if (candidate.wcss < best.wcss) best = std::move(candidate);
    }

    std::vector<ChangeCluster> clusters(k);
    for (std::size_t c = 0; c < k; ++c) {
        clusters[c].centroid_watts = best.centroids[c];
        clusters[c].lower_watts =
            c == 0 ? -kInf : (best.centroids[c - 1] + best.centroids[c]) / 2.0;
        clusters[c].upper_watts =
            c + 1 == k ? kInf : (best.centroids[c] + best.centroids[c + 1]) / 2.0;
    }
    for (double v : sorted) {
        for (ChangeCluster& cluster : clusters) {
            if (cluster.contains(v)) {
                ++cluster.member_count;
                break;
            }
        }
    }
    return clusters;
}

double clusters_wcss(const std::vector<ChangeCluster>& clusters,
                     const std::vector<double>& values) {
    double wcss = 0.0;
    for (double v : values) {
        for (const ChangeCluster& cluster : clusters) {
            if (cluster.contains(v)) {
                const double d = v - cluster.centroid_watts;
                wcss += d * d;
                break;
            }
        }
    }
    return wcss;
}

ActionMapping map_changes_to_actions(const std::vector<ChangePoint>& changes,
                                     const std::vector<ChangeCluster>& clusters,
                                     const std::vector<ApplianceSignature>& signatures,
                                     DeltaWindow window) {
    ActionMapping out;
    if (clusters.empty()) return out;

    std::size_t near_zero = 0;
    for (std::size_t c = 1; c < clusters.size(); ++c) {
        if (std::abs(clusters[c].centroid_watts) <
            std::abs(clusters[near_zero].centroid_watts)) {
            near_zero = c;
        }
    }

    std::vector<const ApplianceSignature*> candidates;
    const bool want_slow_ramp = window == DeltaWindow::five_minute;
    for (const ApplianceSignature& sig : signatures) {
        if (sig.slow_ramp == want_slow_ramp) candidates.push_back(&sig);
    }

    std::vector<bool> cluster_unmapped(clusters.size(), false);
    for (const ChangePoint& change : changes) {
        if (change.window != window) continue;
        std::size_t c = 0;
        while (c < clusters.size() && !clusters[c].contains(change.delta_watts)) ++c;
        if (c == clusters.size() || c == near_zero) continue;

        const double magnitude = std::abs(clusters[c].centroid_watts);
        const ApplianceSignature* best = nullptr;
        const ApplianceSignature* second = nullptr;
        for (const ApplianceSignature* sig : candidates) {
            if (std::abs(magnitude - sig->nominal_watts) > sig->tolerance_watts) continue;
            if (!best ||
                std::abs(magnitude - sig->nominal_watts) <
                    std::abs(magnitude - best->nominal_watts)) {
                second = best;
                best = sig;
            } else if (!second ||
                       std::abs(magnitude - sig->nominal_watts) <
                           std::abs(magnitude - second->nominal_watts)) {
                second = sig;
            }
        }
        if (!best) {
            cluster_unmapped[c] = true;
            continue;
        }
        if (second &&
            std::abs(std::abs(magnitude - second->nominal_watts) -
                     std::abs(magnitude - best->nominal_watts)) <= 1.0) {
            out.ambiguities.push_back(
                {change.timestamp, change.delta_watts, {best->appliance_id, second->appliance_id}});
            continue;
        }

        ApplianceEvent event;
        event.timestamp = change.timestamp;
        event.appliance_id = best->appliance_id;
        event.action = change.delta_watts > 0 ? SwitchAction::on : SwitchAction::off;
        event.matched_delta_watts = change.delta_watts;
        const double miss = std::abs(std::abs(change.delta_watts) - best->nominal_watts);
        if (best->tolerance_watts > 0.0) {
            event.confidence = std::clamp(1.0 - miss / best->tolerance_watts, 0.0, 1.0);
        } else {
            event.confidence = miss == 0.0 ? 1.0 : 0.0;
        }
        out.events.push_back(event);
    }

    for (std::size_t c = 0; c < clusters.size(); ++c) {
        if (cluster_unmapped[c]) {
            out.unmapped_clusters.push_back({clusters[c].centroid_watts, clusters[c].member_count});
        }
    }
    return out;
}

PeriodDerivation derive_usage_periods(const std::vector<ApplianceEvent>& events,
                                      const std::vector<ApplianceSignature>& signatures,
                                      Minute log_end) {
    std::map<std::string, double> nominal;
    for (const ApplianceSignature& sig : signatures) nominal[sig.appliance_id] = sig.nominal_watts;

    std::vector<ApplianceEvent> ordered(events);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const ApplianceEvent& a, const ApplianceEvent& b) {
                         return a.timestamp < b.timestamp;
                     });

    PeriodDerivation out;
    std::map<std::string, const ApplianceEvent*> open;
    const auto close = [&](const ApplianceEvent& on, Minute end, UsageClass cls) {
        UsagePeriod period;
        period.appliance_id = on.appliance_id;
        period.start = on.timestamp;
        period.end = end;
        const auto it = nominal.find(on.appliance_id);
        if (it == nominal.end()) {
            throw ConfigError("no signature for appliance '" + on.appliance_id + "'");
        }
        period.energy_wh =
            it->second * static_cast<double>(period.duration_minutes()) / 60.0;
        period.usage_class = cls;
        out.periods.push_back(period);
    };

    for (const ApplianceEvent& event : ordered) {
        auto it = open.find(event.appliance_id);
        if (event.action == SwitchAction::on) {
            if (it != open.end()) {
                out.dropped_duplicate_ons.push_back(event);  // first ON wins
            } else {
                open[event.appliance_id] = &event;
            }
        } else {
            if (it == open.end()) {
                out.orphan_offs.push_back(event);
            } else {
                close(*it->second, event.timestamp, UsageClass::normal);
                open.erase(it);
            }
        }
    }
    for (const auto& [id, on] : open) {
        close(*on, log_end, UsageClass::open_ended);
    }
    std::stable_sort(out.periods.begin(), out.periods.end(),
                     [](const UsagePeriod& a, const UsagePeriod& b) {
                         if (a.start != b.start) return a.start < b.start;
                         return a.appliance_id < b.appliance_id;
                     });
    return out;
}

void characterize_usage(std::vector<UsagePeriod>& periods,
                        const std::map<std::string, std::int64_t>& explicit_thresholds_min,
                        double percentile) {
    std::map<std::string, std::vector<std::int64_t>> durations;
    for (const UsagePeriod& p : periods) {
        if (p.usage_class != UsageClass::open_ended) {
            durations[p.appliance_id].push_back(p.duration_minutes());
        }
    }

    std::map<std::string, std::int64_t> thresholds(explicit_thresholds_min);
    for (auto& [id, values] : durations) {
        if (thresholds.count(id)) continue;
        if (values.empty()) {
            throw ConfigError("appliance '" + id +
                              "': no historical periods and no explicit threshold");
        }
        std::sort(values.begin(), values.end());
        const auto index = static_cast<std::size_t>(
            percentile * static_cast<double>(values.size() - 1));
        thresholds[id] = values[index];
    }

    for (UsagePeriod& p : periods) {
        if (p.usage_class == UsageClass::open_ended) continue;
        const auto it = thresholds.find(p.appliance_id);
        if (it == thresholds.end()) {
            throw ConfigError("appliance '" + p.appliance_id + "': no threshold available");
        }
        p.usage_class =
            p.duration_minutes() > it->second ? UsageClass::excessive : UsageClass::normal;
    }
}

std::vector<ApplianceSignature> parse_signature_table(std::istream& in) {
    std::vector<ApplianceSignature> out;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("appliance_id", 0) == 0) continue;  // header
        const auto fields = split_line(line, ',');
        if (fields.size() != 5) {
            throw DataError("signature table line " + std::to_string(line_number) +
                            ": expected 5 fields");
        }
        ApplianceSignature sig;
        sig.appliance_id = fields[0];
        sig.room = fields[1];
        try {
            sig.nominal_watts = std::stod(fields[2]);
            sig.tolerance_watts = std::stod(fields[3]);
        } catch (const std::exception&) {
            throw DataError("signature table line " + std::to_string(line_number) +
                            ": bad power value");
        }
        sig.slow_ramp = fields[4] == "1" || fields[4] == "true";
        if (sig.nominal_watts <= 0.0 || sig.tolerance_watts < 0.0) {
            throw DataError("signature table line " + std::to_string(line_number) +
                            ": nominal must be positive, tolerance non-negative");
        }
        out.push_back(sig);
    }
    return out;
}

std::vector<ApplianceSignature> parse_signature_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read signature table '" + path + "'");
    return parse_signature_table(in);
}

std::string serialize_signature_table(const std::vector<ApplianceSignature>& signatures) {
    std::ostringstream out;
    out << "appliance_id,room,nominal_power_w,tolerance_w,slow_ramp\n";
    for (const ApplianceSignature& sig : signatures) {
        out << sig.appliance_id << ',' << sig.room << ',' << format_double(sig.nominal_watts)
            << ',' << format_double(sig.tolerance_watts) << ',' << (sig.slow_ramp ? 1 : 0)
            << '\n';
    }
    return out.str();
}

std::string serialize_events(const std::vector<ApplianceEvent>& events) {
    std::ostringstream out;
    out << "timestamp,appliance,action,delta_w,confidence\n";
    for (const ApplianceEvent& e : events) {
        out << to_iso_string(e.timestamp) << ',' << e.appliance_id << ','
            << (e.action == SwitchAction::on ? "on" : "off") << ','
            << format_double(e.matched_delta_watts) << ',' << format_double(e.confidence)
            << '\n';
    }
    return out.str();
}

std::vector<ApplianceEvent> parse_events(std::istream& in) {
    std::vector<ApplianceEvent> out;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.rfind("timestamp", 0) == 0) continue;
        const auto fields = split_line(line, ',');
        if (fields.size() != 5) {
            throw DataError("events line " + std::to_string(line_number) + ": expected 5 fields");
        }
        ApplianceEvent e;
        e.timestamp = parse_iso_minute(fields[0]);
        e.appliance_id = fields[1];
        if (fields[2] == "on") {
            e.action = SwitchAction::on;
        } else if (fields[2] == "off") {
            e.action = SwitchAction::off;
        } else {
            throw DataError("events line " + std::to_string(line_number) + ": bad action");
        }
        e.matched_delta_watts = std::stod(fields[3]);
        e.confidence = std::stod(fields[4]);
        out.push_back(e);
    }
    return out;
}

std::vector<ApplianceEvent> parse_events_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read events file '" + path + "'");
    return parse_events(in);
}

std::string serialize_periods(const std::vector<UsagePeriod>& periods) {
    std::ostringstream out;
    out << "appliance,start,end,duration_min,energy_wh,usage_class\n";
    for (const UsagePeriod& p : periods) {
        const char* cls = p.usage_class == UsageClass::normal     ? "normal"
                          : p.usage_class == UsageClass::excessive ? "excessive"
                                                                    : "open_ended";
        out << p.appliance_id << ',' << to_iso_string(p.start) << ',' << to_iso_string(p.end)
            << ',' << p.duration_minutes() << ',' << format_double(p.energy_wh) << ',' << cls
            << '\n';
    }
    return out.str();
}

std::vector<UsagePeriod> parse_periods_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read periods file '" + path + "'");
    std::vector<UsagePeriod> out;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.rfind("appliance,", 0) == 0) continue;
        const auto fields = split_line(line, ',');
        if (fields.size() != 6) {
            throw DataError("periods line " + std::to_string(line_number) + ": expected 6 fields");
        }
        UsagePeriod p;
        p.appliance_id = fields[0];
        p.start = parse_iso_minute(fields[1]);
        p.end = parse_iso_minute(fields[2]);
        p.energy_wh = std::stod(fields[4]);
        if (fields[5] == "normal") {
            p.usage_class = UsageClass::normal;
        } else if (fields[5] == "excessive") {
            p.usage_class = UsageClass::excessive;
        } else if (fields[5] == "open_ended") {
            p.usage_class = UsageClass::open_ended;
        } else {
            throw DataError("periods line " + std::to_string(line_number) + ": bad usage class");
        }
        out.push_back(p);
    }
    return out;
}

}  // namespace wattmine
