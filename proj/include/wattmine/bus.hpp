#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "wattmine/minute.hpp"

namespace wattmine {

enum class Qos : int { at_most_once = 0, exactly_once = 2 };

struct Message {
    std::string topic;  // slash-delimited, non-empty
    std::string payload;
    Qos qos = Qos::at_most_once;
    std::uint64_t message_id = 0;  // unique per publisher session
    std::string publisher_id;
    bool retain = false;
};

using MessageHandler = std::function<void(const Message&)>;

/// Hops of the emulated exchange. QoS 0 uses only the publish hop; QoS 2 runs
/// the full two-phase shape: publish, pubrec, pubrel, pubcomp.
enum class Hop { publish, pubrec, pubrel, pubcomp };

/// Number of copies of a packet that arrive at the far end of a hop:
/// 0 drops it, 2+ injects duplicates.
struct HopOutcome {
    int copies = 1;
};

class FaultPlan {
public:
    virtual ~FaultPlan() = default;
    virtual HopOutcome outcome(Hop hop, const Message& message,
                               const std::string& subscriber_id) = 0;
};

class NoFaults final : public FaultPlan {
public:
    HopOutcome outcome(Hop, const Message&, const std::string&) override { return {1}; }
};

/// Seeded per-hop faults: each packet is dropped with drop_probability,
/// otherwise duplicated up to max_duplicates extra copies.
class RandomFaultPlan final : public FaultPlan {
public:
    RandomFaultPlan(std::uint64_t seed, double drop_probability, int max_duplicates)
        : rng_(seed), drop_probability_(drop_probability), max_duplicates_(max_duplicates) {}

    HopOutcome outcome(Hop, const Message&, const std::string&) override;

private:
    std::mt19937_64 rng_;
    double drop_probability_;
    int max_duplicates_;
};

struct SubscriberDelivery {
    std::string subscriber_id;
    int publish_copies_arrived = 0;
    bool handler_invoked = false;
    bool handshake_complete = false;  // always true for QoS 0 deliveries
};

struct DeliveryReceipt {
    std::uint64_t message_id = 0;
    std::size_t matched_subscribers = 0;
    std::size_t handlers_invoked = 0;
    bool deferred = false;  // re-entrant publish, queued behind the current delivery
    std::vector<SubscriberDelivery> per_subscriber;
};

struct SubscriptionHandle {
    std::string subscriber_id;
    std::string filter;
};

struct TraceEntry {
    Minute timestamp;
    std::string topic;
    Qos qos = Qos::at_most_once;
    std::string payload;
};

/// Standard single-level (+) and multi-level (#) wildcard matching.
bool topic_matches(const std::string& filter, const std::string& topic);
void validate_filter(const std::string& filter);  // throws FilterError

/// In-process topic bus emulating QoS 0 (one send, no acknowledgement) and
/// QoS 2 (two-phase exchange deduplicated by a persisted in-flight record per
/// message and subscriber) under injected faults. Delivery is synchronous and
/// FIFO per publisher-subscriber pair; publishes made from inside a handler
/// are deferred until the current delivery finishes. In-flight exchange
/// records survive stop/start; restart completes interrupted handshakes.
class Bus {
public:
    Bus() = default;

    void start();
    void stop() { running_ = false; }
    bool running() const { return running_; }

    void set_now(Minute now) { now_ = now; }
    void set_trace_enabled(bool enabled) { trace_enabled_ = enabled; }

    SubscriptionHandle subscribe(const std::string& subscriber_id, const std::string& filter,
                                 MessageHandler handler);
    void unsubscribe(const SubscriptionHandle& handle);

    DeliveryReceipt publish(const Message& message, FaultPlan* faults = nullptr);

    const std::vector<TraceEntry>& trace() const { return trace_; }
    std::string trace_text() const;  // "timestamp topic qos payload" lines

    /// QoS 2 exchanges awaiting release (duplicates of these are suppressed).
    std::size_t in_flight_count() const { return in_flight_.size(); }

private:
    struct Subscription {
        std::string subscriber_id;
        std::string filter;
        MessageHandler handler;
    };
    struct ExchangeKey {
        std::string publisher_id;
        std::uint64_t message_id;
        std::string subscriber_id;
        auto operator<=>(const ExchangeKey&) const = default;
    };

    DeliveryReceipt deliver(const Message& message, FaultPlan& faults);
    void deliver_retained_to(const Subscription& sub);

    bool running_ = true;
    bool delivering_ = false;
    bool trace_enabled_ = true;
    Minute now_;
    std::vector<Subscription> subscriptions_;
    std::map<std::string, Message> retained_;
    std::set<ExchangeKey> in_flight_;  // QoS 2 exchanges awaiting release
    std::deque<Message> deferred_;
    std::vector<TraceEntry> trace_;
};

enum class DeviceKind { switch_unit, power_meter, motion_sensor, multi_sensor };
enum class PowerState { on, off, not_applicable };

struct DeviceState {
    std::string device_id;
    std::string room;
    DeviceKind kind = DeviceKind::switch_unit;
    PowerState power_state = PowerState::not_applicable;
    double live_power_watts = 0.0;
    Minute last_seen;
    std::map<std::string, std::string> attributes;
};

enum class CauseKind { user_action, accepted_recommendation, direct_automation };

struct CommandCause {
    CauseKind kind = CauseKind::user_action;
    std::string rule_id;  // empty for user actions
};

struct AuditEntry {
    Minute timestamp;
    CommandCause cause;
    std::string device_id;
    std::string command;
};

const char* to_string(CauseKind kind);

/// Device-state registry over the bus. Switch state changes go out as
/// retained QoS 2 state messages, measurements as QoS 0 channel messages.
/// Every command carries exactly one cause and lands in the audit log.
class DeviceRegistry {
public:
    explicit DeviceRegistry(Bus& bus) : bus_(bus) {}

    void register_device(const std::string& device_id, const std::string& room,
                         DeviceKind kind);
    bool has(const std::string& device_id) const { return devices_.count(device_id) > 0; }
    const DeviceState& device(const std::string& device_id) const;
    std::vector<std::string> device_ids() const;

    const DeviceState& apply_command(const std::string& device_id, const std::string& command,
                                     Minute now, const CommandCause& cause);
    const DeviceState& update_telemetry(const std::string& device_id,
                                        const std::string& channel, const std::string& value,
                                        Minute now);
    const DeviceState& update_power(const std::string& device_id, double watts, Minute now);

    const std::vector<AuditEntry>& audit_log() const { return audit_; }
    std::string audit_text() const;  // "timestamp cause rule_id device command" lines

private:
    DeviceState& require(const std::string& device_id);
    void publish_state(const DeviceState& state, Minute now);

    Bus& bus_;
    std::map<std::string, DeviceState> devices_;
    std::vector<AuditEntry> audit_;
    std::uint64_t next_message_id_ = 1;
};

}  // namespace wattmine
