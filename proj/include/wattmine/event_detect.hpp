#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wattmine/ingest.hpp"
#include "wattmine/minute.hpp"

namespace wattmine {

enum class DeltaWindow { one_minute, five_minute };

struct ChangePoint {
    Minute timestamp;         // minute at which the change is observed
    double delta_watts = 0.0; // signed
    DeltaWindow window = DeltaWindow::one_minute;
};

/// One k-means cluster over change magnitudes. Membership ranges are the
/// half-open intervals (lower, upper] between adjacent centroid midpoints;
/// the outermost limits are unbounded so every value lands in exactly one
/// cluster.
struct ChangeCluster {
    double centroid_watts = 0.0;
    std::size_t member_count = 0;
    double lower_watts = 0.0;
    double upper_watts = 0.0;

    bool contains(double value) const { return lower_watts < value && value <= upper_watts; }
};

struct ApplianceSignature {
    std::string appliance_id;
    std::string room;
    double nominal_watts = 0.0;
    double tolerance_watts = 0.0;
    bool slow_ramp = false;  // matched against 5-minute deltas instead of 1-minute
};

enum class SwitchAction { on, off };

struct ApplianceEvent {
    Minute timestamp;
    std::string appliance_id;
    SwitchAction action = SwitchAction::on;
    double matched_delta_watts = 0.0;
    double confidence = 0.0;  // in [0,1]
};

enum class UsageClass { normal, excessive, open_ended };

struct UsagePeriod {
    std::string appliance_id;
    Minute start;
    Minute end;
    double energy_wh = 0.0;  // nominal power integrated over the duration
    UsageClass usage_class = UsageClass::normal;

    std::int64_t duration_minutes() const { return end - start; }
};

/// Both delta streams of a series: one-minute deltas between adjacent valid
/// samples, five-minute deltas between adjacent 5-minute block means. Deltas
/// are in watts; no delta spans a missing-quality gap.
std::vector<ChangePoint> compute_deltas(const PowerSeries& series);

/// Seeded Lloyd k-means on 1-D change values, best of `restarts` restarts by
/// within-cluster sum of squares, deterministic for identical inputs.
/// Requires 1 <= k <= number of distinct values.
std::vector<ChangeCluster> cluster_changes(const std::vector<double>& values, std::size_t k,
                                           std::uint64_t seed, int restarts = 10);

double clusters_wcss(const std::vector<ChangeCluster>& clusters,
                     const std::vector<double>& values);

/// k default when unspecified: one on- and one off-cluster per appliance on
/// the line, plus a near-zero noise cluster.
std::size_t default_cluster_count(std::size_t appliances_on_line);

struct Ambiguity {
    Minute timestamp;
    double delta_watts = 0.0;
    std::vector<std::string> candidates;  // signatures tied within 1 W
};

struct UnmappedCluster {
    double centroid_watts = 0.0;
    std::size_t member_count = 0;
};

struct ActionMapping {
    std::vector<ApplianceEvent> events;
    std::vector<Ambiguity> ambiguities;
    std::vector<UnmappedCluster> unmapped_clusters;  // non-near-zero, no signature
};

/// Maps change points to ON/OFF events: a point whose cluster centroid
/// magnitude matches a signature within tolerance emits an event for that
/// appliance; the near-zero cluster emits nothing; two signatures tied
/// within 1 W produce an ambiguity record instead of an event. All change
/// points and clusters must come from one window population; signatures are
/// filtered to that window by their slow_ramp flag.
ActionMapping map_changes_to_actions(const std::vector<ChangePoint>& changes,
                                     const std::vector<ChangeCluster>& clusters,
                                     const std::vector<ApplianceSignature>& signatures,
                                     DeltaWindow window);

struct PeriodDerivation {
    std::vector<UsagePeriod> periods;
    std::vector<ApplianceEvent> orphan_offs;
    std::vector<ApplianceEvent> dropped_duplicate_ons;
};

/// Pairs each ON with the next OFF of the same appliance. A second ON before
/// the OFF is dropped (first ON wins); an OFF with no open ON is an orphan;
/// an unclosed ON closes at log end as open_ended. Energy is the signature's
/// nominal power times the duration.
PeriodDerivation derive_usage_periods(const std::vector<ApplianceEvent>& events,
                                      const std::vector<ApplianceSignature>& signatures,
                                      Minute log_end);

/// Duration strictly above the threshold reclassifies a period as excessive;
/// open_ended periods are left untouched. Appliances without an explicit
/// threshold fall back to the given percentile of their own closed-period
/// durations (sorted, index floor(p * (n - 1))).
void characterize_usage(std::vector<UsagePeriod>& periods,
                        const std::map<std::string, std::int64_t>& explicit_thresholds_min,
                        double percentile = 0.9);

std::vector<ApplianceSignature> parse_signature_table(std::istream& in);
std::vector<ApplianceSignature> parse_signature_table_file(const std::string& path);
std::string serialize_signature_table(const std::vector<ApplianceSignature>& signatures);

/// "timestamp,appliance,action,delta_w,confidence" records.
std::string serialize_events(const std::vector<ApplianceEvent>& events);
std::vector<ApplianceEvent> parse_events(std::istream& in);
std::vector<ApplianceEvent> parse_events_file(const std::string& path);

std::string serialize_periods(const std::vector<UsagePeriod>& periods);
std::vector<UsagePeriod> parse_periods_file(const std::string& path);

}  // namespace wattmine
