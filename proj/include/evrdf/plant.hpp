#pragma once

// Reduced-order battery energy storage (BES) plant and the SCADA hysteresis
// supervisor that drives it.
//
// The plant integrates SOC linearly under the mode currently in effect. The
// supervisor runs a two-threshold hysteresis inside the control window (the EV
// charging session). After the window closes only the recharge leg remains:
// a depleted BES is recharged up to the high threshold, then left idle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "evrdf/common.hpp"

namespace evrdf::plant {

enum class Mode { Idle, Charging, Discharging };

inline std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::Idle: return "idle";
        case Mode::Charging: return "charging";
        case Mode::Discharging: return "discharging";
    }
    return "idle";
}

inline Mode mode_from_string(std::string_view s) {
    if (s == "idle") return Mode::Idle;
    if (s == "charging") return Mode::Charging;
    if (s == "discharging") return Mode::Discharging;
    throw DataError("unknown mode '" + std::string(s) + "'");
}

inline bool is_active(Mode m) { return m != Mode::Idle; }

/// SOC thresholds in percent: charge at or below `low`, discharge at or above `high`.
struct ThresholdPair {
    double low = 35.0;
    double high = 80.0;

    void validate() const {
        if (!(std::isfinite(low) && std::isfinite(high)) || low < 0.0 || high > 100.0 || !(low < high))
            throw ConfigError("thresholds must satisfy 0 <= low < high <= 100 (got low=" +
                              format_double(low) + ", high=" + format_double(high) + ")");
    }

    friend bool operator==(const ThresholdPair&, const ThresholdPair&) = default;
};

/// Closed time interval [start, end] in seconds.
struct Window {
    double start = 50.0;
    double end = 150.0;

    static constexpr double kTimeEps = 1e-9;

    bool contains(double t) const { return t >= start - kTimeEps && t <= end + kTimeEps; }
    bool before(double t) const { return t < start - kTimeEps; }
    bool after(double t) const { return t > end + kTimeEps; }
};

struct SimConfig {
    double dt = 0.1;               ///< seconds
    double duration = 600.0;       ///< seconds
    double initial_soc = 78.0;     ///< percent
    double charge_rate = 1.0;      ///< percent per second
    double discharge_rate = 1.0;   ///< percent per second
    double window_start = 50.0;    ///< seconds
    double window_end = 150.0;     ///< seconds
    ThresholdPair thresholds{};
    std::uint64_t seed = 0;        ///< reserved for stochastic extensions

    Window window() const { return {window_start, window_end}; }

    /// Number of samples on the grid t = k*dt, k*dt <= duration.
    std::size_t sample_count() const {
        return static_cast<std::size_t>(std::floor(duration / dt + 1e-9)) + 1;
    }

    double time_at(std::size_t k) const { return static_cast<double>(k) * dt; }

    void validate() const {
        const auto bad = [](const std::string& what) { throw ConfigError("SimConfig: " + what); };
        if (!(dt > 0.0) || !std::isfinite(dt)) bad("dt must be > 0");
        if (!std::isfinite(duration) || !std::isfinite(window_start) || !std::isfinite(window_end))
            bad("times must be finite");
        if (!(window_start >= 0.0)) bad("window_start must be >= 0");
        if (!(window_end > window_start)) bad("window_end must be > window_start");
        if (!(duration >= window_end)) bad("duration must be >= window_end");
        if (!(initial_soc >= 0.0 && initial_soc <= 100.0)) bad("initial_soc must be in [0, 100]");
        if (!(charge_rate > 0.0) || !std::isfinite(charge_rate)) bad("charge_rate must be > 0");
        if (!(discharge_rate > 0.0) || !std::isfinite(discharge_rate)) bad("discharge_rate must be > 0");
        thresholds.validate();
    }

    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct Sample {
    double time = 0.0;
    double soc = 0.0;
    Mode mode = Mode::Idle;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct SocTrace {
    std::vector<Sample> samples;

    friend bool operator==(const SocTrace&, const SocTrace&) = default;
};

struct TransitionEdge {
    double time = 0.0;
    double soc = 0.0;
    Mode from_mode = Mode::Idle;
    Mode to_mode = Mode::Idle;

    friend bool operator==(const TransitionEdge&, const TransitionEdge&) = default;
};

/// Hysteresis decision inside the control window. Re-issuing `current_mode`
/// is suppressed; outside the window no command is issued.
inline std::optional<Mode> controller_decide(double soc, const ThresholdPair& thresholds, double t,
                                             const Window& window, Mode current_mode) {
    if (!window.contains(t)) return std::nullopt;
    std::optional<Mode> cmd;
    if (soc >= thresholds.high)
        cmd = Mode::Discharging;
    else if (soc <= thresholds.low)
        cmd = Mode::Charging;
    if (cmd && *cmd == current_mode) return std::nullopt;
    return cmd;
}

/// Recharge supervision after the session: charge a depleted BES, stop at high.
inline std::optional<Mode> post_session_decide(double soc, const ThresholdPair& thresholds,
                                               Mode current_mode) {
    if (soc <= thresholds.low && current_mode != Mode::Charging) return Mode::Charging;
    if (soc >= thresholds.high && current_mode == Mode::Charging) return Mode::Idle;
    return std::nullopt;
}

/// Full supervisor policy over the timeline: silent before the window,
/// hysteresis inside it, recharge-only after it.
inline std::optional<Mode> supervisor_decide(double soc, const ThresholdPair& thresholds, double t,
                                             const Window& window, Mode current_mode) {
    if (window.before(t)) return std::nullopt;
    if (window.contains(t)) return controller_decide(soc, thresholds, t, window, current_mode);
    return post_session_decide(soc, thresholds, current_mode);
}

/// Session opening: the plant starts in the hysteresis leg that matches its SOC.
inline Mode session_start_mode(double soc, const ThresholdPair& thresholds) {
    return soc >= thresholds.high ? Mode::Discharging : Mode::Charging;
}

inline double plant_step(double soc, Mode mode, const SimConfig& cfg) {
    double next = soc;
    if (mode == Mode::Charging)
        next = soc + cfg.charge_rate * cfg.dt;
    else if (mode == Mode::Discharging)
        next = soc - cfg.discharge_rate * cfg.dt;
    return std::clamp(next, 0.0, 100.0);
}

/// Changes of the active leg (Charging <-> Discharging) with time in `window`,
/// in time order, at most `max_edges`. Idle spans are skipped: an edge is
/// recorded where the new active mode differs from the previous active one.
inline std::vector<TransitionEdge> extract_edges(const SocTrace& trace, const Window& window,
                                                 std::size_t max_edges = 5) {
    std::vector<TransitionEdge> edges;
    std::optional<Mode> last_active;
    for (const auto& s : trace.samples) {
        if (!is_active(s.mode)) continue;
        if (last_active && *last_active != s.mode && window.contains(s.time)) {
            if (edges.size() == max_edges) break;
            edges.push_back({s.time, s.soc, *last_active, s.mode});
        }
        last_active = s.mode;
    }
    return edges;
}

inline void write_trace_csv(std::ostream& os, const SocTrace& trace) {
    os << "time,soc,mode\n";
    for (const auto& s : trace.samples)
        os << format_double(s.time) << ',' << format_double(s.soc) << ',' << to_string(s.mode) << '\n';
}

inline void write_edges_csv(std::ostream& os, const std::vector<TransitionEdge>& edges) {
    os << "time,soc,from,to\n";
    for (const auto& e : edges)
        os << format_double(e.time) << ',' << format_double(e.soc) << ',' << to_string(e.from_mode) << ','
           << to_string(e.to_mode) << '\n';
}

/// max(soc) - min(soc) over samples at or after `from_time`.
inline double realized_swing(const SocTrace& trace, double from_time) {
    double lo = 100.0, hi = 0.0;
    bool any = false;
    for (const auto& s : trace.samples) {
        if (s.time < from_time - Window::kTimeEps) continue;
        lo = std::min(lo, s.soc);
        hi = std::max(hi, s.soc);
        any = true;
    }
    return any ? hi - lo : 0.0;
}

}  // namespace evrdf::plant
