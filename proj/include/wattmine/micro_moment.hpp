#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "wattmine/event_detect.hpp"
#include "wattmine/ingest.hpp"

namespace wattmine {

enum class DayType { weekday, weekend };
enum class Occupancy { present, absent };
enum class LuminosityBucket { dark, dim, bright };
enum class TemperatureBucket { cold, mild, hot };

struct ContextSnapshot {
    unsigned hour = 0;  // 0..23
    DayType day_type = DayType::weekday;
    Occupancy occupancy = Occupancy::present;
    LuminosityBucket luminosity = LuminosityBucket::dark;
    TemperatureBucket temperature = TemperatureBucket::mild;
};

enum class MomentClass { switch_on, switch_off, excessive_use, use_while_absent };

struct MicroMoment {
    ApplianceEvent event;
    ContextSnapshot context;
    ContextSample raw;  // the unbucketed observation at the moment's minute
    MomentClass moment_class = MomentClass::switch_on;
};

/// Cut points for the lossy context buckets, applied half-open [low, high).
/// Luminosity must land in [0,1]; temperature has open outer ranges.
struct BucketingConfig {
    double luminosity_dim = 0.2;     // dark [0, dim), dim [dim, bright), bright [bright, 1]
    double luminosity_bright = 0.5;
    double temperature_mild = 15.0;  // cold (-inf, mild), mild [mild, hot), hot [hot, inf)
    double temperature_hot = 26.0;
};

struct MomentConfig {
    BucketingConfig buckets;
    int absence_grace_minutes = 15;
};

LuminosityBucket bucket_luminosity(double value, const BucketingConfig& config);
TemperatureBucket bucket_temperature(double value, const BucketingConfig& config);
ContextSnapshot snapshot_context(const ContextSample& sample, const BucketingConfig& config);

/// Pairs each event with the context at its minute, classes events that close
/// excessive periods, and emits one use_while_absent moment per contiguous
/// absence of at least the grace interval while a device runs. Events outside
/// the context coverage raise a CoverageError naming them.
std::vector<MicroMoment> contextualize(const std::vector<ApplianceEvent>& events,
                                       const std::vector<ContextSample>& context,
                                       const std::vector<UsagePeriod>& periods,
                                       const MomentConfig& config);

/// Items are "key:value" strings over closed vocabularies; at most one item
/// per key and exactly one action item.
struct Transaction {
    std::vector<std::string> items;  // sorted, unique keys
};

/// One transaction per micro-moment: device + action + the context items.
/// Rebuckets from the moment's raw context so the cut points given here are
/// authoritative.
std::vector<Transaction> build_transactions(const std::vector<MicroMoment>& moments,
                                            const BucketingConfig& config);

/// One transaction per line, items space-separated and sorted.
std::string serialize_transactions(const std::vector<Transaction>& transactions);
std::vector<Transaction> parse_transactions(std::istream& in);
std::vector<Transaction> parse_transactions_file(const std::string& path);

const char* to_string(MomentClass c);

}  // namespace wattmine
