#pragma once

#include <cstddef>
#include <vector>

#include "evrdf/attack.hpp"
#include "evrdf/plant.hpp"

namespace evrdf::plant {

struct SimResult {
    SocTrace trace;
    /// First (up to) five edges from window open to the horizon.
    std::vector<TransitionEdge> edges;
    /// Commands still in flight at the horizon, discarded.
    std::size_t dropped_commands = 0;

    friend bool operator==(const SimResult&, const SimResult&) = default;
};

inline constexpr std::size_t kRecordedEdges = 5;

/// Runs the supervised plant over t = 0, dt, ..., duration.
///
/// Each step: the supervisor decides on the sampled SOC (FDI replaces its
/// thresholds), the command enters the delay channel, due commands take
/// effect, the sample is recorded, and the plant integrates one step under
/// the mode in effect. Delayed commands keep their effect after the window
/// closes. After the window the BMS will not discharge below the low
/// threshold.
///
/// Edges are recorded from window open up to the horizon so that transitions
/// pushed past window_end by a delay are still paired with the reference.
inline SimResult run_simulation(const SimConfig& cfg, const attack::AttackScenario& scenario) {
    cfg.validate();
    scenario.validate();

    SimConfig eff = cfg;
    if (const auto* f = std::get_if<attack::FDI>(&scenario.kind)) eff = attack::apply_fdi(cfg, f->thresholds);

    const Window window = eff.window();
    const ThresholdPair& thr = eff.thresholds;
    attack::DelayChannel channel(scenario.delay());

    SimResult result;
    const std::size_t n = eff.sample_count();
    result.trace.samples.reserve(n);

    double soc = eff.initial_soc;
    Mode in_effect = Mode::Idle;
    Mode issued = Mode::Idle;
    bool session_open = false;

    for (std::size_t k = 0; k < n; ++k) {
        const double t = eff.time_at(k);
        if (!session_open && !window.before(t)) {
            // Local switch-on at window open, not routed through SCADA.
            in_effect = session_start_mode(soc, thr);
            issued = in_effect;
            session_open = true;
        }
        if (const auto cmd = supervisor_decide(soc, thr, t, window, issued)) {
            channel.send(t, *cmd);
            issued = *cmd;
        }
        while (const auto delivered = channel.deliver(t)) in_effect = *delivered;

        result.trace.samples.push_back({t, soc, in_effect});

        double next = plant_step(soc, in_effect, eff);
        if (window.after(t) && in_effect == Mode::Discharging)
            next = soc >= thr.low ? std::max(next, thr.low) : soc;
        soc = next;
    }
    result.dropped_commands = channel.drop_undeliverable(eff.time_at(n - 1));
    result.edges = extract_edges(result.trace, Window{window.start, eff.duration}, kRecordedEdges);
    return result;
}

inline SimResult run_simulation(const SimConfig& cfg) {
    return run_simulation(cfg, attack::AttackScenario::none());
}

inline nlohmann::json to_json(const SimConfig& c) {
    return {{"dt", c.dt},
            {"duration", c.duration},
            {"initial_soc", c.initial_soc},
            {"charge_rate", c.charge_rate},
            {"discharge_rate", c.discharge_rate},
            {"window_start", c.window_start},
            {"window_end", c.window_end},
            {"low", c.thresholds.low},
            {"high", c.thresholds.high}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline SimConfig sim_config_from_json(const nlohmann::json& j, SimConfig c = {}) {
    if (!j.is_object()) throw DataError("plant parameters must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!value.is_number()) throw DataError("plant parameter '" + key + "' must be a number");
        const double v = value.get<double>();
        if (key == "dt") c.dt = v;
        else if (key == "duration") c.duration = v;
        else if (key == "initial_soc") c.initial_soc = v;
        else if (key == "charge_rate") c.charge_rate = v;
        else if (key == "discharge_rate") c.discharge_rate = v;
        else if (key == "window_start") c.window_start = v;
        else if (key == "window_end") c.window_end = v;
        else if (key == "low") c.thresholds.low = v;
        else if (key == "high") c.thresholds.high = v;
        else throw DataError("unknown plant parameter '" + key + "'");
    }
    c.validate();
    return c;
}

}  // namespace evrdf::plant
