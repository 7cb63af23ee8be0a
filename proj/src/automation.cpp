#include "wattmine/automation.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wattmine/errors.hpp"
#include "wattmine/ingest.hpp"

namespace wattmine {

namespace {

std::optional<double> to_number(const std::string& text) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::size_t begin = 0;
    while (true) {
        const std::size_t pos = text.find(sep, begin);
        if (pos == std::string::npos) {
            out.push_back(text.substr(begin));
            return out;
        }
        out.push_back(text.substr(begin, pos - begin));
        begin = pos + 1;
    }
}

std::int64_t day_index(Minute m) {
    const std::int64_t c = m.count();
    return c >= 0 ? c / 1440 : (c - 1439) / 1440;
}

}  // namespace

const char* to_string(RecommendationStatus status) {
    switch (status) {
        case RecommendationStatus::pending: return "pending";
        case RecommendationStatus::accepted: return "accepted";
        case RecommendationStatus::rejected: return "rejected";
        case RecommendationStatus::expired: return "expired";
    }
    return "?";
}

Predicate Predicate::parse(const std::string& text) {
    Predicate p;
    if (text.empty() || text == "*") return p;
    static constexpr struct {
        const char* token;
        PredicateOp op;
    } kOps[] = {{"!=", PredicateOp::ne}, {">=", PredicateOp::ge}, {"<=", PredicateOp::le},
                {">", PredicateOp::gt},  {"<", PredicateOp::lt},  {"=", PredicateOp::eq}};
    for (const auto& candidate : kOps) {
        const std::size_t pos = text.find(candidate.token);
        if (pos != std::string::npos) {
            p.key = text.substr(0, pos);
            p.op = candidate.op;
            p.value = text.substr(pos + std::string(candidate.token).size());
            return p;
        }
    }
    throw ConfigError("unparseable predicate '" + text + "'");
}

std::string Predicate::to_text() const {
    switch (op) {
        case PredicateOp::any: return "*";
        case PredicateOp::eq: return key + "=" + value;
        case PredicateOp::ne: return key + "!=" + value;
        case PredicateOp::ge: return key + ">=" + value;
        case PredicateOp::le: return key + "<=" + value;
        case PredicateOp::gt: return key + ">" + value;
        case PredicateOp::lt: return key + "<" + value;
    }
    return "*";
}

bool Predicate::matches_value(const std::string& actual) const {
    if (op == PredicateOp::any) return true;
    const auto lhs = to_number(actual);
    const auto rhs = to_number(value);
    if (lhs && rhs) {
        switch (op) {
            case PredicateOp::eq: return *lhs == *rhs;
            case PredicateOp::ne: return *lhs != *rhs;
            case PredicateOp::ge: return *lhs >= *rhs;
            case PredicateOp::le: return *lhs <= *rhs;
            case PredicateOp::gt: return *lhs > *rhs;
            case PredicateOp::lt: return *lhs < *rhs;
            default: return false;
        }
    }
    if (op == PredicateOp::eq) return actual == value;
    if (op == PredicateOp::ne) return actual != value;
    return false;
}

bool Predicate::matches_payload(const std::string& payload) const {
    if (op == PredicateOp::any) return true;
    for (const std::string& field : split(payload, ';')) {
        const std::size_t pos = field.find('=');
        if (pos == std::string::npos) continue;
        if (field.substr(0, pos) == key) return matches_value(field.substr(pos + 1));
    }
    return false;
}

bool Trigger::matches(const Message& message) const {
    return kind == Kind::message && topic_matches(topic_filter, message.topic) &&
           payload.matches_payload(message.payload);
}

bool Trigger::matches(Minute now) const {
    if (kind != Kind::time) return false;
    if (now.hour_of_day() != hour || now.minute_of_day() % 60 != minute) return false;
    switch (days) {
        case TriggerDays::all: return true;
        case TriggerDays::weekday: return !now.is_weekend();
        case TriggerDays::weekend: return now.is_weekend();
    }
    return false;
}

UserResponsePolicy::UserResponsePolicy(double accept_probability, int latency_min_minutes,
                                       int latency_max_minutes, std::uint64_t seed)
    : accept_probability_(std::clamp(accept_probability, 0.0, 1.0)),
      latency_min_(latency_min_minutes),
      latency_max_(std::max(latency_min_minutes, latency_max_minutes)),
      rng_(seed) {}

UserResponsePolicy UserResponsePolicy::always_accept(int latency_minutes) {
    return {1.0, latency_minutes, latency_minutes, 0};
}

UserResponsePolicy UserResponsePolicy::always_reject() { return {0.0, 0, 0, 0}; }

UserResponsePolicy::Decision UserResponsePolicy::draw() {
    Decision d;
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    d.accept = u < accept_probability_;
    d.latency_minutes =
        latency_min_ == latency_max_
            ? latency_min_
            : latency_min_ +
                  static_cast<int>(rng_() %
                                   static_cast<std::uint64_t>(latency_max_ - latency_min_ + 1));
    return d;
}

AutomationEngine::AutomationEngine(Bus& bus, DeviceRegistry& registry, UserResponsePolicy policy,
                                   AutomationOptions options)
    : bus_(bus), registry_(registry), policy_(std::move(policy)), options_(options) {}

void AutomationEngine::add_rule(AutomationRule rule) {
    if (rule.rule_id.empty()) throw ConfigError("automation rule without id");
    if (find_rule(rule.rule_id)) throw ConfigError("duplicate rule id '" + rule.rule_id + "'");
    if (rule.trigger.kind == Trigger::Kind::message) validate_filter(rule.trigger.topic_filter);
    rules_.push_back(std::move(rule));
}

AutomationRule* AutomationEngine::find_rule(const std::string& rule_id) {
    for (AutomationRule& rule : rules_) {
        if (rule.rule_id == rule_id) return &rule;
    }
    return nullptr;
}

bool AutomationEngine::set_rule_enabled(const std::string& rule_id, bool enabled) {
    AutomationRule* rule = find_rule(rule_id);
    if (!rule) return false;
    rule->enabled = enabled;
    if (!enabled) {
        std::erase_if(timers_, [&](const Timer& t) { return t.rule_id == rule_id; });
    }
    return true;
}

void AutomationEngine::attach() {
    bus_.subscribe("automation", "#", [this](const Message& message) { on_message(message); });
}

void AutomationEngine::on_message(const Message& message) {
    for (AutomationRule& rule : rules_) {
        if (rule.enabled && rule.trigger.matches(message)) evaluate(rule, message, now_);
    }
}

bool AutomationEngine::disable_on_bad_reference(AutomationRule& rule, const std::string& detail) {
    rule.enabled = false;
    config_issues_.push_back({rule.rule_id, detail});
    std::erase_if(timers_, [&](const Timer& t) { return t.rule_id == rule.rule_id; });
    return true;
}

bool AutomationEngine::condition_true(const Condition& condition) const {
    const DeviceState& state = registry_.device(condition.device_id);
    const auto it = state.attributes.find(condition.predicate.key);
    if (it == state.attributes.end()) return false;  // not reported yet
    return condition.predicate.matches_value(it->second);
}

std::optional<Minute> AutomationEngine::true_since(const std::string& rule_id,
                                                   std::size_t condition_index,
                                                   bool currently_true, Minute now) {
    const std::string key = rule_id + "#" + std::to_string(condition_index);
    if (!currently_true) {
        condition_since_.erase(key);
        return std::nullopt;
    }
    const auto [it, inserted] = condition_since_.emplace(key, now);
    return it->second;
}

EvalOutcome AutomationEngine::evaluate_conditions(AutomationRule& rule, Minute now) {
    Minute fire_at = now;
    for (std::size_t i = 0; i < rule.conditions.size(); ++i) {
        const Condition& condition = rule.conditions[i];
        if (!registry_.has(condition.device_id)) {
            disable_on_bad_reference(rule, "condition references unknown device '" +
                                               condition.device_id + "'");
            return EvalOutcome::no_op;
        }
        const bool ok = condition_true(condition);
        const auto since = true_since(rule.rule_id, i, ok, now);
        if (!ok) {
            std::erase_if(timers_, [&](const Timer& t) { return t.rule_id == rule.rule_id; });
            return EvalOutcome::no_op;
        }
        if (condition.sustained_minutes > 0) {
            fire_at = std::max(fire_at, *since + condition.sustained_minutes);
        }
    }

    if (fire_at > now) {
        for (Timer& timer : timers_) {
            if (timer.rule_id == rule.rule_id) {
                timer.fire_at = fire_at;
                return EvalOutcome::armed;
            }
        }
        timers_.push_back({rule.rule_id, now, fire_at});
        return EvalOutcome::armed;
    }

    return fire(rule, now) ? EvalOutcome::fired : EvalOutcome::no_op;
}

EvalOutcome AutomationEngine::evaluate(AutomationRule& rule, const Message& message, Minute now) {
    now_ = now;
    if (!rule.enabled || !rule.trigger.matches(message)) return EvalOutcome::no_op;
    if (!registry_.has(rule.action.device_id)) {
        disable_on_bad_reference(rule, "action references unknown device '" +
                                           rule.action.device_id + "'");
        return EvalOutcome::no_op;
    }
    return evaluate_conditions(rule, now);
}

bool AutomationEngine::fire(AutomationRule& rule, Minute now) {
    if (rule.direct) {
        registry_.apply_command(rule.action.device_id, rule.action.command, now,
                                {CauseKind::direct_automation, rule.rule_id});
        return true;
    }
    for (const Recommendation& rec : recommendations_) {
        if (rec.rule_id == rule.rule_id && rec.status == RecommendationStatus::pending) {
            return false;  // one open recommendation per rule
        }
    }
    const auto cooled = last_resolution_.find(rule.rule_id);
    if (cooled != last_resolution_.end() &&
        now - cooled->second < options_.refire_cooldown_minutes) {
        return false;
    }
    issue_recommendation(rule.rule_id, rule.action, now);
    return true;
}

std::uint64_t AutomationEngine::issue_recommendation(const std::string& rule_id,
                                                     const RuleAction& action, Minute now) {
    Recommendation rec;
    rec.rec_id = next_rec_id_++;
    rec.action = action;
    rec.rule_id = rule_id;
    rec.issued_at = now;
    rec.expires_at = now + options_.recommendation_expiry_minutes;
    const UserResponsePolicy::Decision decision = policy_.draw();
    rec.will_accept = decision.accept;
    rec.latency_minutes = decision.latency_minutes;
    recommendations_.push_back(rec);
    return rec.rec_id;
}

const Recommendation& AutomationEngine::dispatch_recommendation(std::uint64_t rec_id,
                                                                Minute now) {
    Recommendation* rec = nullptr;
    for (Recommendation& candidate : recommendations_) {
        if (candidate.rec_id == rec_id) {
            rec = &candidate;
            break;
        }
    }
    if (!rec) throw LifecycleError("unknown recommendation " + std::to_string(rec_id));
    if (rec->status != RecommendationStatus::pending) {
        throw LifecycleError("recommendation " + std::to_string(rec_id) + " already " +
                             to_string(rec->status));
    }
    const Minute resolution = rec->issued_at + rec->latency_minutes;
    if (rec->will_accept && resolution <= rec->expires_at) {
        registry_.apply_command(rec->action.device_id, rec->action.command, now,
                                {CauseKind::accepted_recommendation, rec->rule_id});
        rec->status = RecommendationStatus::accepted;
    } else if (!rec->will_accept && resolution <= rec->expires_at) {
        rec->status = RecommendationStatus::rejected;
    } else {
        rec->status = RecommendationStatus::expired;  // the clock beat the response
    }
    rec->resolved_at = now;
    last_resolution_[rec->rule_id] = now;
    return *rec;
}

bool AutomationEngine::timer_armed(const std::string& rule_id) const {
    return std::any_of(timers_.begin(), timers_.end(),
                       [&](const Timer& t) { return t.rule_id == rule_id; });
}

void AutomationEngine::tick(Minute now) {
    now_ = now;

    // Keep sustained-condition history fresh even without message traffic.
    for (AutomationRule& rule : rules_) {
        if (!rule.enabled) continue;
        for (std::size_t i = 0; i < rule.conditions.size(); ++i) {
            const Condition& condition = rule.conditions[i];
            if (!registry_.has(condition.device_id)) {
                disable_on_bad_reference(rule, "condition references unknown device '" +
                                                   condition.device_id + "'");
                break;
            }
            true_since(rule.rule_id, i, condition_true(condition), now);
        }
    }

    // Armed timers: cancel on any violated condition, fire when mature.
    std::vector<Timer> keep;
    for (const Timer& timer : timers_) {
        AutomationRule* rule = find_rule(timer.rule_id);
        if (!rule || !rule->enabled) continue;
        bool violated = false;
        Minute fire_at = timer.armed_at;
        for (std::size_t i = 0; i < rule->conditions.size() && !violated; ++i) {
            const Condition& condition = rule->conditions[i];
            if (!condition_true(condition)) {
                violated = true;
                break;
            }
            const auto since = true_since(rule->rule_id, i, true, now);
            if (condition.sustained_minutes > 0) {
                fire_at = std::max(fire_at, *since + condition.sustained_minutes);
            }
        }
        if (violated) continue;
        if (now >= fire_at) {
            fire(*rule, now);
        } else {
            keep.push_back(timer);
        }
    }
    timers_ = std::move(keep);

    // Time triggers, at most one evaluation per rule per day.
    for (AutomationRule& rule : rules_) {
        if (!rule.enabled || !rule.trigger.matches(now)) continue;
        auto& last_day = fired_time_triggers_[rule.rule_id];
        if (last_day == static_cast<unsigned>(day_index(now)) + 1) continue;
        last_day = static_cast<unsigned>(day_index(now)) + 1;
        if (!registry_.has(rule.action.device_id)) {
            disable_on_bad_reference(rule, "action references unknown device '" +
                                               rule.action.device_id + "'");
            continue;
        }
        evaluate_conditions(rule, now);
    }

    // Resolve due recommendations.
    for (Recommendation& rec : recommendations_) {
        if (rec.status != RecommendationStatus::pending) continue;
        const Minute resolution = rec.issued_at + rec.latency_minutes;
        if (rec.will_accept && resolution > rec.expires_at) {
            if (now > rec.expires_at) dispatch_recommendation(rec.rec_id, now);
        } else if (now >= resolution) {
            dispatch_recommendation(rec.rec_id, now);
        }
    }
}

std::string AutomationEngine::recommendations_text() const {
    std::ostringstream out;
    out << "rec_id,rule_id,device,command,issued_at,expires_at,status,resolved_at\n";
    for (const Recommendation& rec : recommendations_) {
        out << rec.rec_id << ',' << rec.rule_id << ',' << rec.action.device_id << ','
            << rec.action.command << ',' << to_iso_string(rec.issued_at) << ','
            << to_iso_string(rec.expires_at) << ',' << to_string(rec.status) << ','
            << (rec.status == RecommendationStatus::pending ? "-" : to_iso_string(rec.resolved_at))
            << '\n';
    }
    return out.str();
}

CompiledAutomations compile_habits_to_automations(const std::vector<HabitRule>& habits,
                                                  const HabitCompileConfig& config) {
    CompiledAutomations out;
    std::size_t index = 0;
    for (const HabitRule& habit : habits) {
        ++index;
        const std::string hour_text = habit.antecedent_value("hour");
        const std::string describe = "habit#" + std::to_string(index);
        if (hour_text.empty()) {
            out.skipped.push_back(describe + ": no temporal (hour) antecedent");
            continue;
        }
        if (habit.device_id.empty()) {
            out.skipped.push_back(describe + ": no device item");
            continue;
        }
        const int hour = std::stoi(hour_text);
        const int trigger_minute =
            ((hour * 60 - config.lead_minutes) % 1440 + 1440) % 1440;

        AutomationRule rule;
        rule.rule_id = "habit_" + habit.device_id + "_" +
                       (habit.action == SwitchAction::on ? "on" : "off") + "_h" + hour_text +
                       "_" + std::to_string(index);
        rule.trigger.kind = Trigger::Kind::time;
        rule.trigger.hour = static_cast<unsigned>(trigger_minute / 60);
        rule.trigger.minute = static_cast<unsigned>(trigger_minute % 60);
        const std::string day = habit.antecedent_value("day");
        rule.trigger.days = day == "weekday"   ? TriggerDays::weekday
                            : day == "weekend" ? TriggerDays::weekend
                                               : TriggerDays::all;

        const std::string occ = habit.antecedent_value("occ");
        if (!occ.empty()) {
            Condition c;
            c.device_id = config.occupancy_device;
            c.predicate.key = config.occupancy_attribute;
            c.predicate.op = PredicateOp::eq;
            c.predicate.value = occ == "absent" ? config.occupancy_absent_value
                                                : config.occupancy_present_value;
            rule.conditions.push_back(c);
        }
        const auto range_conditions = [&](const std::string& attribute, double low, double high,
                                          bool has_low, bool has_high) {
            if (has_low) {
                Condition c;
                c.device_id = config.environment_device;
                c.predicate = {attribute, PredicateOp::ge, format_double(low)};
                rule.conditions.push_back(c);
            }
            if (has_high) {
                Condition c;
                c.device_id = config.environment_device;
                c.predicate = {attribute, PredicateOp::lt, format_double(high)};
                rule.conditions.push_back(c);
            }
        };
        const std::string lum = habit.antecedent_value("lum");
        if (lum == "dark") {
            range_conditions("luminosity", 0, config.buckets.luminosity_dim, false, true);
        } else if (lum == "dim") {
            range_conditions("luminosity", config.buckets.luminosity_dim,
                             config.buckets.luminosity_bright, true, true);
        } else if (lum == "bright") {
            range_conditions("luminosity", config.buckets.luminosity_bright, 0, true, false);
        }
        const std::string temp = habit.antecedent_value("temp");
        if (temp == "cold") {
            range_conditions("temperature", 0, config.buckets.temperature_mild, false, true);
        } else if (temp == "mild") {
            range_conditions("temperature", config.buckets.temperature_mild,
                             config.buckets.temperature_hot, true, true);
        } else if (temp == "hot") {
            range_conditions("temperature", config.buckets.temperature_hot, 0, true, false);
        }

        // Proposing "off" only makes sense while the device is on, and the
        // other way round.
        Condition gate;
        gate.device_id = habit.device_id;
        gate.predicate = {"state", PredicateOp::eq,
                          habit.action == SwitchAction::on ? "off" : "on"};
        rule.conditions.push_back(gate);

        rule.action.kind = RuleAction::Kind::notify;  // never auto-act, on or off
        rule.action.device_id = habit.device_id;
        rule.action.command = habit.action == SwitchAction::on ? "on" : "off";
        rule.direct = false;
        out.rules.push_back(std::move(rule));
    }
    return out;
}

std::string serialize_automations(const std::vector<AutomationRule>& rules) {
    std::ostringstream out;
    out << "id,trigger.topic,trigger.predicate,conditions,duration_min,action.kind,"
           "action.target,direct,enabled\n";
    for (const AutomationRule& rule : rules) {
        std::string trigger_topic, trigger_predicate;
        if (rule.trigger.kind == Trigger::Kind::message) {
            trigger_topic = rule.trigger.topic_filter;
            trigger_predicate = rule.trigger.payload.to_text();
        } else {
            char buf[8];
            std::snprintf(buf, sizeof buf, "%02u:%02u", rule.trigger.hour, rule.trigger.minute);
            trigger_topic = std::string("@") + buf;
            trigger_predicate = rule.trigger.days == TriggerDays::weekday   ? "day=weekday"
                                : rule.trigger.days == TriggerDays::weekend ? "day=weekend"
                                                                             : "*";
        }
        std::string conditions;
        int duration = 0;
        for (std::size_t i = 0; i < rule.conditions.size(); ++i) {
            if (i > 0) conditions += ';';
            conditions += rule.conditions[i].device_id + "." + rule.conditions[i].predicate.to_text();
            duration = std::max(duration, rule.conditions[i].sustained_minutes);
        }
        out << rule.rule_id << ',' << trigger_topic << ',' << trigger_predicate << ','
            << conditions << ',' << duration << ','
            << (rule.action.kind == RuleAction::Kind::notify ? "notify" : "command") << ','
            << rule.action.device_id << ':' << rule.action.command << ','
            << (rule.direct ? 1 : 0) << ',' << (rule.enabled ? 1 : 0) << '\n';
    }
    return out.str();
}

std::vector<AutomationRule> parse_automations(std::istream& in) {
    std::vector<AutomationRule> out;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#' || line.rfind("id,", 0) == 0) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 9) {
            throw DataError("automations line " + std::to_string(line_number) +
                            ": expected 9 fields, got " + std::to_string(fields.size()));
        }
        AutomationRule rule;
        rule.rule_id = fields[0];
        if (!fields[1].empty() && fields[1][0] == '@') {
            rule.trigger.kind = Trigger::Kind::time;
            unsigned hour = 0, minute = 0;
            if (std::sscanf(fields[1].c_str() + 1, "%u:%u", &hour, &minute) != 2 || hour > 23 ||
                minute > 59) {
                throw DataError("automations line " + std::to_string(line_number) +
                                ": bad time trigger '" + fields[1] + "'");
            }
            rule.trigger.hour = hour;
            rule.trigger.minute = minute;
            rule.trigger.days = fields[2] == "day=weekday"   ? TriggerDays::weekday
                                : fields[2] == "day=weekend" ? TriggerDays::weekend
                                                              : TriggerDays::all;
        } else {
            rule.trigger.kind = Trigger::Kind::message;
            rule.trigger.topic_filter = fields[1];
            validate_filter(rule.trigger.topic_filter);
            rule.trigger.payload = Predicate::parse(fields[2]);
        }
        const int duration = fields[4].empty() ? 0 : std::stoi(fields[4]);
        if (duration < 0) {
            throw DataError("automations line " + std::to_string(line_number) +
                            ": negative duration");
        }
        if (!fields[3].empty()) {
            for (const std::string& text : split(fields[3], ';')) {
                const std::size_t dot = text.find('.');
                if (dot == std::string::npos) {
                    throw DataError("automations line " + std::to_string(line_number) +
                                    ": condition '" + text + "' lacks a device");
                }
                Condition c;
                c.device_id = text.substr(0, dot);
                c.predicate = Predicate::parse(text.substr(dot + 1));
                c.sustained_minutes = duration;
                rule.conditions.push_back(std::move(c));
            }
        }
        if (fields[5] == "notify") {
            rule.action.kind = RuleAction::Kind::notify;
        } else if (fields[5] == "command") {
            rule.action.kind = RuleAction::Kind::device_command;
        } else {
            throw DataError("automations line " + std::to_string(line_number) +
                            ": bad action kind '" + fields[5] + "'");
        }
        const std::size_t colon = fields[6].find(':');
        if (colon == std::string::npos) {
            throw DataError("automations line " + std::to_string(line_number) +
                            ": action target must be device:command");
        }
        rule.action.device_id = fields[6].substr(0, colon);
        rule.action.command = fields[6].substr(colon + 1);
        rule.direct = fields[7] == "1" || fields[7] == "true";
        rule.enabled = fields[8] == "1" || fields[8] == "true";
        out.push_back(std::move(rule));
    }
    return out;
}

std::vector<AutomationRule> parse_automations_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read automations file '" + path + "'");
    return parse_automations(in);
}

}  // namespace wattmine
