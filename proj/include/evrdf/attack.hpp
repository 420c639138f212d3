#pragma once

// Ransomware-driven attack injection: command-path latency (DDoS) and
// supervisor threshold override (FDI).

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <optional>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "evrdf/common.hpp"
#include "evrdf/plant.hpp"

namespace evrdf::attack {

using plant::Mode;
using plant::SimConfig;
using plant::ThresholdPair;

struct NoAttack {
    friend bool operator==(const NoAttack&, const NoAttack&) = default;
};

/// Every SCADA command reaches the plant `delay` seconds after it is sent.
struct DDoS {
    double delay = 0.0;
    friend bool operator==(const DDoS&, const DDoS&) = default;
};

/// The supervisor's thresholds are replaced by attacker-chosen values.
struct FDI {
    ThresholdPair thresholds{};
    friend bool operator==(const FDI&, const FDI&) = default;
};

struct AttackScenario {
    std::variant<NoAttack, DDoS, FDI> kind{};

    static constexpr double kMaxDelay = 300.0;

    static AttackScenario none() { return {}; }
    static AttackScenario ddos(double delay) { return {DDoS{delay}}; }
    static AttackScenario fdi(ThresholdPair t) { return {FDI{t}}; }

    std::string type_name() const {
        if (std::holds_alternative<DDoS>(kind)) return "ddos";
        if (std::holds_alternative<FDI>(kind)) return "fdi";
        return "none";
    }

    double delay() const {
        if (const auto* d = std::get_if<DDoS>(&kind)) return d->delay;
        return 0.0;
    }

    void validate(double max_delay = kMaxDelay) const {
        if (const auto* d = std::get_if<DDoS>(&kind)) {
            if (!std::isfinite(d->delay) || d->delay < 0.0 || d->delay > max_delay)
                throw ConfigError("DDoS delay must be in [0, " + format_double(max_delay) + "] s (got " +
                                  format_double(d->delay) + ")");
        } else if (const auto* f = std::get_if<FDI>(&kind)) {
            f->thresholds.validate();
        }
    }

    friend bool operator==(const AttackScenario&, const AttackScenario&) = default;
};

/// FIFO command channel with a constant delivery latency.
class DelayChannel {
public:
    struct InFlight {
        double send_time;
        Mode command;
    };

    explicit DelayChannel(double delay = 0.0) : delay_(delay) {}

    double delay() const { return delay_; }

    void send(double send_time, Mode command) { queue_.push_back({send_time, command}); }

    /// Oldest command due at `now`, removed from the channel.
    std::optional<Mode> deliver(double now) {
        if (queue_.empty()) return std::nullopt;
        const auto& head = queue_.front();
        if (head.send_time + delay_ > now + kDueEps * std::max(1.0, std::abs(now))) return std::nullopt;
        const Mode cmd = head.command;
        queue_.pop_front();
        return cmd;
    }

    const std::deque<InFlight>& in_flight() const { return queue_; }

    /// Discards commands that cannot arrive by `horizon`; returns how many.
    std::size_t drop_undeliverable(double horizon) {
        std::size_t dropped = 0;
        while (!queue_.empty() &&
               queue_.back().send_time + delay_ > horizon + kDueEps * std::max(1.0, std::abs(horizon))) {
            queue_.pop_back();
            ++dropped;
        }
        return dropped;
    }

private:
    static constexpr double kDueEps = 1e-12;

    double delay_;
    std::deque<InFlight> queue_;
};

inline SimConfig apply_fdi(const SimConfig& cfg, const ThresholdPair& injected) {
    injected.validate();
    SimConfig out = cfg;
    out.thresholds = injected;
    return out;
}

inline nlohmann::json to_json(const AttackScenario& a) {
    nlohmann::json j;
    j["type"] = a.type_name();
    if (const auto* d = std::get_if<DDoS>(&a.kind)) j["delay_s"] = d->delay;
    if (const auto* f = std::get_if<FDI>(&a.kind)) {
        j["low"] = f->thresholds.low;
        j["high"] = f->thresholds.high;
    }
    return j;
}

/// Scenario document: {"type": "none"|"ddos"|"fdi", "delay_s": s, "low": pct, "high": pct}.
inline AttackScenario scenario_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        throw DataError("scenario: missing string field 'type'");
    const auto type = j["type"].get<std::string>();
    const auto number = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_number())
            throw DataError(std::string("scenario: '") + type + "' requires numeric field '" + key + "'");
        return j[key].get<double>();
    };
    AttackScenario a;
    if (type == "none")
        a = AttackScenario::none();
    else if (type == "ddos")
        a = AttackScenario::ddos(number("delay_s"));
    else if (type == "fdi")
        a = AttackScenario::fdi({number("low"), number("high")});
    else
        throw DataError("scenario: unknown type '" + type + "'");
    a.validate();
    return a;
}

inline AttackScenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open scenario file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("scenario file " + path + ": " + e.what());
    }
    return scenario_from_json(j);
}

}  // namespace evrdf::attack
