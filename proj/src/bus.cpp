#include "wattmine/bus.hpp"

#include <algorithm>
#include <sstream>

#include "wattmine/errors.hpp"
#include "wattmine/ingest.hpp"

namespace wattmine {

namespace {

std::vector<std::string> split_levels(const std::string& path) {
    std::vector<std::string> out;
    std::size_t begin = 0;
    while (true) {
        const std::size_t pos = path.find('/', begin);
        if (pos == std::string::npos) {
            out.push_back(path.substr(begin));
            return out;
        }
        out.push_back(path.substr(begin, pos - begin));
        begin = pos + 1;
    }
}

}  // namespace

HopOutcome RandomFaultPlan::outcome(Hop, const Message&, const std::string&) {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    if (u < drop_probability_) return {0};
    if (max_duplicates_ <= 0) return {1};
    return {1 + static_cast<int>(rng_() % static_cast<std::uint64_t>(max_duplicates_ + 1))};
}

void validate_filter(const std::string& filter) {
    if (filter.empty()) throw FilterError("empty topic filter");
    const auto levels = split_levels(filter);
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const std::string& level = levels[i];
        if (level == "#" && i + 1 != levels.size()) {
            throw FilterError("'#' must be the last level in '" + filter + "'");
        }
        if (level != "#" && level != "+" &&
            (level.find('#') != std::string::npos || level.find('+') != std::string::npos)) {
            throw FilterError("wildcard must occupy a whole level in '" + filter + "'");
        }
    }
}

bool topic_matches(const std::string& filter, const std::string& topic) {
    const auto f = split_levels(filter);
    const auto t = split_levels(topic);
    std::size_t i = 0;
    for (; i < f.size(); ++i) {
        if (f[i] == "#") return true;
        if (i >= t.size()) return false;
        if (f[i] != "+" && f[i] != t[i]) return false;
    }
    return i == t.size();
}

void Bus::start() {
    running_ = true;
    // Resume interrupted QoS 2 exchanges: the handler already ran before the
    // shutdown, so completing just releases the dedup records.
    in_flight_.clear();
}

SubscriptionHandle Bus::subscribe(const std::string& subscriber_id, const std::string& filter,
                                  MessageHandler handler) {
    validate_filter(filter);
    Subscription* existing = nullptr;
    for (Subscription& sub : subscriptions_) {
        if (sub.subscriber_id == subscriber_id && sub.filter == filter) {
            existing = &sub;
            break;
        }
    }
    if (existing) {
        existing->handler = std::move(handler);  // replace, never double-deliver
        deliver_retained_to(*existing);
    } else {
        subscriptions_.push_back({subscriber_id, filter, std::move(handler)});
        deliver_retained_to(subscriptions_.back());
    }
    return {subscriber_id, filter};
}

void Bus::unsubscribe(const SubscriptionHandle& handle) {
    std::erase_if(subscriptions_, [&](const Subscription& sub) {
        return sub.subscriber_id == handle.subscriber_id && sub.filter == handle.filter;
    });
}

void Bus::deliver_retained_to(const Subscription& sub) {
    for (const auto& [topic, message] : retained_) {
        if (topic_matches(sub.filter, topic)) sub.handler(message);
    }
}

DeliveryReceipt Bus::publish(const Message& message, FaultPlan* faults) {
    if (!running_) throw LifecycleError("publish on stopped bus");
    if (message.topic.empty()) throw FilterError("publish with empty topic");

    if (delivering_) {
        // Re-entrant publish from a handler: defer until the current delivery
        // unwinds so per-subscriber FIFO order is preserved.
        deferred_.push_back(message);
        DeliveryReceipt receipt;
        receipt.message_id = message.message_id;
        receipt.deferred = true;
        return receipt;
    }

    NoFaults none;
    DeliveryReceipt receipt = deliver(message, faults ? *faults : none);
    while (!deferred_.empty()) {
        const Message next = std::move(deferred_.front());
        deferred_.pop_front();
        deliver(next, none);
    }
    return receipt;
}

DeliveryReceipt Bus::deliver(const Message& message, FaultPlan& faults) {
    if (trace_enabled_) trace_.push_back({now_, message.topic, message.qos, message.payload});
    if (message.retain) retained_[message.topic] = message;

    DeliveryReceipt receipt;
    receipt.message_id = message.message_id;

    delivering_ = true;
    for (const Subscription& sub : subscriptions_) {
        if (!topic_matches(sub.filter, message.topic)) continue;
        ++receipt.matched_subscribers;
        SubscriberDelivery delivery;
        delivery.subscriber_id = sub.subscriber_id;

        if (message.qos == Qos::at_most_once) {
            // Sent exactly once, nothing acknowledges or retransmits; a drop
            // loses the message for good and duplicates cannot arise.
            const int copies = faults.outcome(Hop::publish, message, sub.subscriber_id).copies;
            delivery.publish_copies_arrived = copies > 0 ? 1 : 0;
            if (copies > 0) {
                sub.handler(message);
                delivery.handler_invoked = true;
            }
            delivery.handshake_complete = true;
        } else {
            const int copies = faults.outcome(Hop::publish, message, sub.subscriber_id).copies;
            delivery.publish_copies_arrived = copies;
            const ExchangeKey key{message.publisher_id, message.message_id, sub.subscriber_id};
            bool pubrec_seen = false;
            for (int copy = 0; copy < copies; ++copy) {
                if (!in_flight_.count(key)) {
                    in_flight_.insert(key);
                    sub.handler(message);
                    delivery.handler_invoked = true;
                }
                // Receiver acknowledges every copy it sees.
                if (faults.outcome(Hop::pubrec, message, sub.subscriber_id).copies > 0) {
                    pubrec_seen = true;
                }
            }
            if (pubrec_seen) {
                // Sender releases once; the release itself may drop or
                // duplicate. A lost release leaves the record in flight until
                // the next bus restart.
                const int releases =
                    faults.outcome(Hop::pubrel, message, sub.subscriber_id).copies;
                for (int r = 0; r < releases; ++r) {
                    in_flight_.erase(key);  // idempotent on duplicates
                    if (faults.outcome(Hop::pubcomp, message, sub.subscriber_id).copies > 0) {
                        delivery.handshake_complete = true;
                    }
                }
            }
        }

        if (delivery.handler_invoked) ++receipt.handlers_invoked;
        receipt.per_subscriber.push_back(std::move(delivery));
    }
    delivering_ = false;
    return receipt;
}

std::string Bus::trace_text() const {
    std::ostringstream out;
    for (const TraceEntry& entry : trace_) {
        out << to_iso_string(entry.timestamp) << ' ' << entry.topic << ' '
            << static_cast<int>(entry.qos) << ' ' << entry.payload << '\n';
    }
    return out.str();
}

const char* to_string(CauseKind kind) {
    switch (kind) {
        case CauseKind::user_action: return "user";
        case CauseKind::accepted_recommendation: return "recommendation";
        case CauseKind::direct_automation: return "automation";
    }
    return "?";
}

void DeviceRegistry::register_device(const std::string& device_id, const std::string& room,
                                     DeviceKind kind) {
    if (devices_.count(device_id)) {
        throw RegistryError("device '" + device_id + "' already registered");
    }
    DeviceState state;
    state.device_id = device_id;
    state.room = room;
    state.kind = kind;
    if (kind == DeviceKind::switch_unit || kind == DeviceKind::power_meter) {
        state.power_state = PowerState::off;
    }
    devices_[device_id] = std::move(state);
}

const DeviceState& DeviceRegistry::device(const std::string& device_id) const {
    const auto it = devices_.find(device_id);
    if (it == devices_.end()) throw RegistryError("unknown device '" + device_id + "'");
    return it->second;
}

std::vector<std::string> DeviceRegistry::device_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, state] : devices_) out.push_back(id);
    return out;
}

DeviceState& DeviceRegistry::require(const std::string& device_id) {
    const auto it = devices_.find(device_id);
    if (it == devices_.end()) throw RegistryError("unknown device '" + device_id + "'");
    return it->second;
}

void DeviceRegistry::publish_state(const DeviceState& state, Minute now) {
    Message msg;
    msg.topic = state.room + "/" + state.device_id + "/state";
    std::string payload = "state=";
    payload += state.power_state == PowerState::on    ? "on"
               : state.power_state == PowerState::off ? "off"
                                                       : "na";
    payload += ";power=" + format_double(state.live_power_watts);
    msg.payload = std::move(payload);
    // Switches carry their state with the exactly-once mode, measurements use
    // fire-and-forget.
    msg.qos = state.kind == DeviceKind::switch_unit || state.kind == DeviceKind::power_meter
                  ? Qos::exactly_once
                  : Qos::at_most_once;
    msg.message_id = next_message_id_++;
    msg.publisher_id = "registry";
    msg.retain = true;
    bus_.set_now(now);
    bus_.publish(msg);
}

const DeviceState& DeviceRegistry::apply_command(const std::string& device_id,
                                                 const std::string& command, Minute now,
                                                 const CommandCause& cause) {
    DeviceState& state = require(device_id);
    if (state.kind != DeviceKind::switch_unit && state.kind != DeviceKind::power_meter) {
        throw RegistryError("device '" + device_id + "' does not accept commands");
    }
    if (command != "on" && command != "off") {
        throw RegistryError("unknown command '" + command + "'");
    }
    state.power_state = command == "on" ? PowerState::on : PowerState::off;
    state.attributes["state"] = command;
    state.last_seen = now;
    audit_.push_back({now, cause, device_id, command});
    publish_state(state, now);
    return state;
}

const DeviceState& DeviceRegistry::update_telemetry(const std::string& device_id,
                                                    const std::string& channel,
                                                    const std::string& value, Minute now) {
    DeviceState& state = require(device_id);
    state.attributes[channel] = value;
    state.last_seen = now;

    Message msg;
    msg.topic = state.room + "/" + state.device_id + "/" + channel;
    msg.payload = "value=" + value;
    msg.qos = Qos::at_most_once;
    msg.message_id = next_message_id_++;
    msg.publisher_id = "registry";
    bus_.set_now(now);
    bus_.publish(msg);
    publish_state(state, now);
    return state;
}

const DeviceState& DeviceRegistry::update_power(const std::string& device_id, double watts,
                                                Minute now) {
    if (watts < 0.0) {
        throw RegistryError("negative power telemetry for '" + device_id + "'");
    }
    DeviceState& state = require(device_id);
    state.live_power_watts = watts;
    return update_telemetry(device_id, "power", format_double(watts), now);
}

std::string DeviceRegistry::audit_text() const {
    std::ostringstream out;
    for (const AuditEntry& entry : audit_) {
        out << to_iso_string(entry.timestamp) << ' ' << to_string(entry.cause.kind) << ' '
            << (entry.cause.rule_id.empty() ? "-" : entry.cause.rule_id) << ' '
            << entry.device_id << ' ' << entry.command << '\n';
    }
    return out.str();
}

}  // namespace wattmine
