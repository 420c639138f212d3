#pragma once

// Attacked-vs-reference comparison of simulated SOC traces.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "evrdf/common.hpp"
#include "evrdf/simulation.hpp"

namespace evrdf::attack {

using plant::SimResult;
using plant::SocTrace;
using plant::TransitionEdge;
using plant::Window;

enum class Threshold { Low, High };

inline std::string_view to_string(Threshold t) { return t == Threshold::Low ? "low" : "high"; }

struct ThresholdViolation {
    double time = 0.0;
    double soc = 0.0;
    Threshold which = Threshold::High;

    friend bool operator==(const ThresholdViolation&, const ThresholdViolation&) = default;
};

struct ImpactReport {
    std::vector<double> edge_delay_pct;     ///< 100 (t_att - t_ref) / t_ref per matched edge
    std::vector<double> soc_overshoot_pct;  ///< 100 (soc_att - soc_ref) / soc_ref per matched edge
    std::vector<TransitionEdge> reference_edges;
    std::vector<TransitionEdge> attacked_edges;
    std::vector<ThresholdViolation> threshold_violations;
    bool starved = false;

    std::size_t matched() const { return edge_delay_pct.size(); }
};

namespace detail {
inline double relative_pct(double attacked, double reference) {
    if (reference == 0.0) return attacked == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    return 100.0 * (attacked - reference) / reference;
}
}  // namespace detail

/// True when no sample after the window has Charging in effect below `high`.
inline bool is_starved(const SocTrace& trace, const Window& window, double high) {
    return std::none_of(trace.samples.begin(), trace.samples.end(), [&](const plant::Sample& s) {
        return window.after(s.time) && s.mode == plant::Mode::Charging && s.soc < high;
    });
}

/// Compares an attacked run against the reference run on the same time grid.
///
/// `thresholds` and `window` describe the legitimate supervisor: a violation is
/// any attacked sample at which that supervisor would already have switched
/// away from the mode in effect.
inline ImpactReport impact_report(const SimResult& reference, const SimResult& attacked,
                                  const plant::ThresholdPair& thresholds, const Window& window) {
    const auto& ref = reference.trace.samples;
    const auto& att = attacked.trace.samples;
    if (ref.size() != att.size())
        throw DataError("impact_report: traces have different lengths (" + std::to_string(ref.size()) + " vs " +
                        std::to_string(att.size()) + ")");
    for (std::size_t i = 0; i < ref.size(); ++i) {
        if (ref[i].time != att[i].time)
            throw DataError("impact_report: time grids differ at sample " + std::to_string(i));
    }

    ImpactReport r;
    r.reference_edges = reference.edges;
    r.attacked_edges = attacked.edges;
    const std::size_t m = std::min(reference.edges.size(), attacked.edges.size());
    for (std::size_t i = 0; i < m; ++i) {
        const auto& e_ref = reference.edges[i];
        const auto& e_att = attacked.edges[i];
        r.edge_delay_pct.push_back(detail::relative_pct(e_att.time, e_ref.time));
        r.soc_overshoot_pct.push_back(detail::relative_pct(e_att.soc, e_ref.soc));
    }

    for (const auto& s : att) {
        if (plant::supervisor_decide(s.soc, thresholds, s.time, window, s.mode))
            r.threshold_violations.push_back(
                {s.time, s.soc, s.soc >= thresholds.high ? Threshold::High : Threshold::Low});
    }
    r.starved = is_starved(attacked.trace, window, thresholds.high);
    return r;
}

/// One row per matched edge.
inline void write_impact_csv(std::ostream& os, const ImpactReport& r) {
    os << "edge,ref_time,ref_soc,att_time,att_soc,edge_delay_pct,soc_overshoot_pct\n";
    for (std::size_t i = 0; i < r.matched(); ++i) {
        const auto& a = r.attacked_edges[i];
        const auto& b = r.reference_edges[i];
        os << i << ',' << format_double(b.time) << ',' << format_double(b.soc) << ',' << format_double(a.time)
           << ',' << format_double(a.soc) << ',' << format_double(r.edge_delay_pct[i]) << ','
           << format_double(r.soc_overshoot_pct[i]) << '\n';
    }
}

inline nlohmann::json summary_json(const ImpactReport& r) {
    nlohmann::json j;
    j["matched_edges"] = r.matched();
    const auto range = [](const std::vector<double>& v) {
        nlohmann::json out = nlohmann::json::object();
        if (v.empty()) return out;
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        out["min"] = *lo;
        out["max"] = *hi;
        return out;
    };
    j["edge_delay_pct"] = range(r.edge_delay_pct);
    j["soc_overshoot_pct"] = range(r.soc_overshoot_pct);
    j["threshold_violation_samples"] = r.threshold_violations.size();
    j["starved"] = r.starved;
    return j;
}

}  // namespace evrdf::attack
