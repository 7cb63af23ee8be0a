#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wattmine/bus.hpp"
#include "wattmine/habit_mine.hpp"
#include "wattmine/micro_moment.hpp"
#include "wattmine/minute.hpp"

namespace wattmine {

enum class PredicateOp { any, eq, ne, ge, le, gt, lt };

/// Comparison against one "key=value" field of a ";"-joined payload, or
/// against a device attribute. Numeric comparisons parse both sides as
/// numbers; eq/ne fall back to string comparison.
struct Predicate {
    std::string key;
    PredicateOp op = PredicateOp::any;
    std::string value;

    bool matches_payload(const std::string& payload) const;
    bool matches_value(const std::string& actual) const;
    std::string to_text() const;  // "*", "key=value", "key>=0.7", ...
    static Predicate parse(const std::string& text);
};

enum class TriggerDays { all, weekday, weekend };

struct Trigger {
    enum class Kind { message, time } kind = Kind::message;
    // message triggers
    std::string topic_filter;
    Predicate payload;
    // time triggers ("@HH:MM")
    unsigned hour = 0;
    unsigned minute = 0;
    TriggerDays days = TriggerDays::all;

    bool matches(const Message& message) const;
    bool matches(Minute now) const;
};

struct Condition {
    std::string device_id;
    Predicate predicate;         // key = attribute name
    int sustained_minutes = 0;   // 0 = instantaneous
};

struct RuleAction {
    enum class Kind { device_command, notify } kind = Kind::notify;
    std::string device_id;
    std::string command;  // "on" / "off"
};

struct AutomationRule {
    std::string rule_id;
    Trigger trigger;
    std::vector<Condition> conditions;
    RuleAction action;
    bool direct = false;  // actuate immediately instead of recommending
    bool enabled = true;
};

enum class RecommendationStatus { pending, accepted, rejected, expired };

struct Recommendation {
    std::uint64_t rec_id = 0;
    RuleAction action;
    std::string rule_id;  // rationale: the habit/automation that proposed it
    Minute issued_at;
    Minute expires_at;
    RecommendationStatus status = RecommendationStatus::pending;
    Minute resolved_at;
    // Drawn from the response policy when the recommendation is issued.
    bool will_accept = false;
    int latency_minutes = 0;
};

const char* to_string(RecommendationStatus status);

/// Stands in for the human behind the messaging channel: a seeded Bernoulli
/// accept draw plus a uniform response latency.
class UserResponsePolicy {
public:
    UserResponsePolicy(double accept_probability, int latency_min_minutes,
                       int latency_max_minutes, std::uint64_t seed);

    static UserResponsePolicy always_accept(int latency_minutes = 0);
    static UserResponsePolicy always_reject();

    struct Decision {
        bool accept = false;
        int latency_minutes = 0;
    };
    Decision draw();

    double accept_probability() const { return accept_probability_; }

private:
    double accept_probability_;
    int latency_min_;
    int latency_max_;
    std::mt19937_64 rng_;
};

enum class EvalOutcome { no_op, armed, fired };

struct RuleConfigIssue {
    std::string rule_id;
    std::string detail;
};

struct AutomationOptions {
    int recommendation_expiry_minutes = 30;
    int refire_cooldown_minutes = 30;  // quiet period after a resolution
};

/// Evaluates TRIGGER -> CONDITION -> ACTION rules over bus messages and the
/// minute tick. Sustained conditions arm a timer that fires only if they hold
/// uninterrupted for their duration; actions default to the recommendation
/// lifecycle unless the rule is marked direct.
class AutomationEngine {
public:
    AutomationEngine(Bus& bus, DeviceRegistry& registry, UserResponsePolicy policy,
                     AutomationOptions options = AutomationOptions{});

    void add_rule(AutomationRule rule);
    bool set_rule_enabled(const std::string& rule_id, bool enabled);
    const std::vector<AutomationRule>& rules() const { return rules_; }

    /// Subscribes the engine to every topic so message triggers see traffic.
    void attach();

    /// Message triggers evaluate against this clock until the next tick.
    void set_clock(Minute now) { now_ = now; }

    /// Single rule against a triggering message. The rule must be enabled and
    /// the message must match its trigger.
    EvalOutcome evaluate(AutomationRule& rule, const Message& message, Minute now);

    /// Advances the engine clock: updates sustained-condition tracking,
    /// cancels or fires armed timers, evaluates time triggers, and resolves
    /// due recommendations.
    void tick(Minute now);

    std::uint64_t issue_recommendation(const std::string& rule_id, const RuleAction& action,
                                       Minute now);
    /// Applies the stored response draw to a pending recommendation; throws
    /// LifecycleError for any other status.
    const Recommendation& dispatch_recommendation(std::uint64_t rec_id, Minute now);

    const std::vector<Recommendation>& recommendations() const { return recommendations_; }
    const std::vector<RuleConfigIssue>& config_issues() const { return config_issues_; }
    bool timer_armed(const std::string& rule_id) const;

    std::string recommendations_text() const;

private:
    struct Timer {
        std::string rule_id;
        Minute armed_at;
        Minute fire_at;
    };

    AutomationRule* find_rule(const std::string& rule_id);
    bool condition_true(const Condition& condition) const;
    /// Since when the condition has held, tracked at tick granularity.
    std::optional<Minute> true_since(const std::string& rule_id, std::size_t condition_index,
                                     bool currently_true, Minute now);
    EvalOutcome evaluate_conditions(AutomationRule& rule, Minute now);
    bool fire(AutomationRule& rule, Minute now);
    void on_message(const Message& message);
    bool disable_on_bad_reference(AutomationRule& rule, const std::string& detail);

    Bus& bus_;
    DeviceRegistry& registry_;
    UserResponsePolicy policy_;
    AutomationOptions options_;
    Minute now_;
    std::vector<AutomationRule> rules_;
    std::vector<Timer> timers_;
    std::vector<Recommendation> recommendations_;
    std::vector<RuleConfigIssue> config_issues_;
    std::map<std::string, Minute> condition_since_;  // "rule#index" -> held since
    std::map<std::string, Minute> last_resolution_;  // rule id -> cooldown anchor
    std::map<std::string, unsigned> fired_time_triggers_;  // rule id -> day stamp
    std::uint64_t next_rec_id_ = 1;
};

struct HabitCompileConfig {
    int lead_minutes = 5;
    std::string occupancy_device = "motion";
    std::string occupancy_attribute = "motion";
    std::string occupancy_present_value = "detected";
    std::string occupancy_absent_value = "clear";
    std::string environment_device = "multi";
    BucketingConfig buckets;
    int recommendation_expiry_minutes = 30;
};

struct CompiledAutomations {
    std::vector<AutomationRule> rules;
    std::vector<std::string> skipped;  // habit description + reason
};

/// Turns mined habit rules into time-triggered automations firing lead_minutes
/// ahead of the habitual hour, gated on the habit's context conditions, always
/// recommendation-mediated. Habits without an hour antecedent or without a
/// device are skipped with a report.
CompiledAutomations compile_habits_to_automations(const std::vector<HabitRule>& habits,
                                                  const HabitCompileConfig& config);

/// One record per rule:
/// id,trigger.topic,trigger.predicate,conditions,duration_min,action.kind,action.target,direct,enabled
/// Conditions are ";"-joined "device.attr<op>value" predicates; duration_min
/// applies to every condition in the record. Time triggers encode as "@HH:MM"
/// with an optional "day=..." predicate.
std::string serialize_automations(const std::vector<AutomationRule>& rules);
std::vector<AutomationRule> parse_automations(std::istream& in);
std::vector<AutomationRule> parse_automations_file(const std::string& path);

}  // namespace wattmine
