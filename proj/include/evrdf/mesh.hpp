#pragma once

// Layered detection mesh: detection nodes with a trained model, an unreliable
// message bus with ack/retransmit, alert deduplication and a monotone
// mitigation ladder. Logical time only; one deterministic event queue.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "evrdf/common.hpp"
#include "evrdf/features.hpp"
#include "evrdf/nn.hpp"

namespace evrdf::mesh {

enum class Layer { SCADA, GenTransDist, EVSENetwork, CAEV };
inline constexpr std::array<Layer, 4> kLayers{Layer::SCADA, Layer::GenTransDist, Layer::EVSENetwork, Layer::CAEV};

inline std::string_view to_string(Layer l) {
    switch (l) {
        case Layer::SCADA: return "SCADA";
        case Layer::GenTransDist: return "GenTransDist";
        case Layer::EVSENetwork: return "EVSENetwork";
        case Layer::CAEV: return "CAEV";
    }
    return "?";
}

struct NodeId {
    Layer layer = Layer::SCADA;
    std::size_t index = 0;

    std::string str() const { return std::string(to_string(layer)) + "." + std::to_string(index); }
    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

/// Parses "LAYER.INDEX", e.g. "SCADA.0".
inline NodeId parse_node_id(std::string_view s) {
    const auto dot = s.rfind('.');
    if (dot == std::string_view::npos) throw DataError("node id '" + std::string(s) + "' is not LAYER.INDEX");
    const auto layer = s.substr(0, dot);
    const auto idx = s.substr(dot + 1);
    NodeId id;
    bool found = false;
    for (auto l : kLayers)
        if (to_string(l) == layer) {
            id.layer = l;
            found = true;
        }
    if (!found) throw DataError("unknown layer '" + std::string(layer) + "'");
    if (idx.empty() || !std::all_of(idx.begin(), idx.end(), [](char c) { return c >= '0' && c <= '9'; }))
        throw DataError("bad node index in '" + std::string(s) + "'");
    id.index = std::stoul(std::string(idx));
    return id;
}

enum class Severity { Low, High, Critical };
enum class Mitigation { Normal, BackupOn, Isolated, Shutdown };

inline std::string_view to_string(Severity s) {
    switch (s) {
        case Severity::Low: return "Low";
        case Severity::High: return "High";
        case Severity::Critical: return "Critical";
    }
    return "?";
}

inline std::string_view to_string(Mitigation m) {
    switch (m) {
        case Mitigation::Normal: return "Normal";
        case Mitigation::BackupOn: return "BackupOn";
        case Mitigation::Isolated: return "Isolated";
        case Mitigation::Shutdown: return "Shutdown";
    }
    return "?";
}

/// Bands: Low [threshold, 0.9), High [0.9, 0.99), Critical [0.99, 1].
inline Severity severity_for(double ransomware_score) {
    if (ransomware_score >= 0.99) return Severity::Critical;
    if (ransomware_score >= 0.9) return Severity::High;
    return Severity::Low;
}

inline Mitigation required_mitigation(Severity s) {
    switch (s) {
        case Severity::Low: return Mitigation::BackupOn;
        case Severity::High: return Mitigation::Isolated;
        case Severity::Critical: return Mitigation::Shutdown;
    }
    return Mitigation::Shutdown;
}

struct Alert {
    std::uint64_t alert_id = 0;
    NodeId origin;
    std::uint64_t detected_at = 0;
    double score = 0.0;  ///< ransomware score, 1 - P(normal)
    Severity severity = Severity::Low;
};

struct NodeState {
    Mitigation mitigation = Mitigation::Normal;
    std::set<std::uint64_t> seen_alerts;

    friend bool operator==(const NodeState&, const NodeState&) = default;
};

/// Records the alert and escalates to at least its required level; a seen
/// alert leaves the state untouched.
inline NodeState handle_alert(const NodeState& state, const Alert& alert) {
    if (state.seen_alerts.count(alert.alert_id)) return state;
    NodeState next = state;
    next.seen_alerts.insert(alert.alert_id);
    next.mitigation = std::max(next.mitigation, required_mitigation(alert.severity));
    return next;
}

/// Trained model plus the scaler fitted with it.
struct Detector {
    std::shared_ptr<const nn::ModelParams> model;
    features::ScalerParams scaler;
    double threshold = 0.5;  ///< on the ransomware score

    void validate() const {
        if (!model) throw ConfigError("detector has no model");
        if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("detection threshold must be in (0, 1]");
    }
};

/// Ransomware score of one scaled feature vector; same computation as the
/// offline evaluation path (one row per forward pass).
inline double ransomware_score(const Detector& d, const std::vector<double>& scaled) {
    const auto n = nn::input_size(d.model->spec);
    if (scaled.size() != n)
        throw DataError("feature vector has " + std::to_string(scaled.size()) + " values, expected " +
                        std::to_string(n));
    for (double v : scaled) {
        if (!std::isfinite(v)) throw DataError("feature vector has non-finite values");
        if (d.scaler.kind == features::ScalerKind::MinMax && !(v >= 0.0 && v <= 1.0))
            throw DataError("feature vector is not scaled to [0, 1]");
    }
    nn::Matrix x(1, static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) x(0, static_cast<Eigen::Index>(j)) = scaled[j];
    return 1.0 - nn::predict(*d.model, x)[0];
}

/// Alert iff the ransomware score reaches the detector threshold. The id is
/// left 0 for the caller to assign.
inline std::optional<Alert> ingest_sample(const Detector& d, const NodeId& node, const std::vector<double>& scaled,
                                          std::uint64_t now) {
    const double score = ransomware_score(d, scaled);
    if (score < d.threshold) return std::nullopt;
    return Alert{0, node, now, score, severity_for(score)};
}

struct BusConfig {
    std::uint64_t latency = 1;      ///< ticks per hop
    double drop_probability = 0.0;  ///< per message, data and acks alike
    std::size_t max_retries = 3;
    std::uint64_t ack_timeout = 3;  ///< ticks after a send before retrying
    std::uint64_t seed = 1;

    void validate() const {
        if (!(drop_probability >= 0.0 && drop_probability <= 1.0))
            throw ConfigError("bus: drop probability must be in [0, 1]");
        if (ack_timeout == 0) throw ConfigError("bus: ack_timeout must be >= 1 tick");
    }
};

enum class Propagation { Global, Downstream };

struct MeshConfig {
    std::array<std::size_t, 4> nodes_per_layer{1, 1, 1, 1};
    /// Global: every node hears every alert. Downstream (not the default):
    /// only nodes in the origin's layer and the layers after it.
    Propagation propagation = Propagation::Global;

    std::vector<NodeId> nodes() const {
        std::vector<NodeId> out;
        for (std::size_t l = 0; l < kLayers.size(); ++l)
            for (std::size_t i = 0; i < nodes_per_layer[l]; ++i) out.push_back({kLayers[l], i});
        return out;
    }
};

struct Injection {
    std::uint64_t tick = 0;
    NodeId node;
    std::vector<double> features;  ///< scaled
    std::string ref;
};

struct TranscriptEvent {
    std::uint64_t tick = 0;
    std::uint64_t seq = 0;
    std::string type;
    std::string node;
    std::uint64_t alert_id = 0;  ///< 0 when not about an alert
    std::string detail;
};

struct MeshResult {
    std::vector<TranscriptEvent> transcript;
    std::map<NodeId, NodeState> states;
    std::vector<Alert> alerts;

    std::size_t count(std::string_view type) const {
        return static_cast<std::size_t>(std::count_if(transcript.begin(), transcript.end(),
                                                      [&](const TranscriptEvent& e) { return e.type == type; }));
    }
};

namespace detail {

struct Event {
    enum Kind { Ingest, Deliver, Ack, Timeout } kind;
    std::uint64_t tick;
    std::uint64_t seq;
    std::size_t injection = 0;  ///< Ingest
    std::size_t alert = 0;      ///< index into alerts
    NodeId from, to;
    std::size_t attempt = 0;
};

struct Later {
    bool operator()(const Event& a, const Event& b) const {
        return a.tick != b.tick ? a.tick > b.tick : a.seq > b.seq;
    }
};

}  // namespace detail

/// Runs the scenario to quiescence. Every ingest, alert, send, drop,
/// delivery, ack, retry and state change is logged in order of (tick, seq).
inline MeshResult run_mesh_sim(const std::vector<Injection>& scenario, const MeshConfig& mesh, const BusConfig& bus,
                               const Detector& detector) {
    bus.validate();
    detector.validate();
    const auto nodes = mesh.nodes();
    const auto exists = [&](const NodeId& n) { return std::find(nodes.begin(), nodes.end(), n) != nodes.end(); };
    for (const auto& inj : scenario) {
        if (!exists(inj.node)) throw DataError("scenario names unknown node " + inj.node.str());
        ransomware_score(detector, inj.features);  // rejects mis-sized or unscaled vectors up front
    }

    MeshResult r;
    for (const auto& n : nodes) r.states[n] = {};
    Rng rng(derive_seed(bus.seed, 0xB05));
    std::priority_queue<detail::Event, std::vector<detail::Event>, detail::Later> queue;
    std::uint64_t event_seq = 0, log_seq = 0;
    std::set<std::tuple<std::size_t, NodeId>> acked;

    const auto log = [&](std::uint64_t tick, std::string type, const NodeId& node, std::uint64_t alert_id,
                         std::string detail) {
        r.transcript.push_back({tick, log_seq++, std::move(type), node.str(), alert_id, std::move(detail)});
    };
    const auto push = [&](detail::Event e) {
        e.seq = event_seq++;
        queue.push(e);
    };
    const auto apply = [&](std::uint64_t tick, const NodeId& node, const Alert& a) {
        auto& st = r.states[node];
        const NodeState next = handle_alert(st, a);
        if (next == st) {
            log(tick, "duplicate", node, a.alert_id, "already handled");
            return;
        }
        if (next.mitigation != st.mitigation)
            log(tick, "state", node, a.alert_id,
                std::string(to_string(st.mitigation)) + "->" + std::string(to_string(next.mitigation)));
        st = next;
    };
    const auto send = [&](std::uint64_t tick, std::size_t ai, const NodeId& from, const NodeId& to,
                          std::size_t attempt) {
        const auto id = r.alerts[ai].alert_id;
        log(tick, "send", from, id, "to=" + to.str() + ";attempt=" + std::to_string(attempt));
        if (unit_uniform(rng) < bus.drop_probability)
            log(tick, "drop", from, id, "to=" + to.str() + ";attempt=" + std::to_string(attempt));
        else
            push({detail::Event::Deliver, tick + bus.latency, 0, 0, ai, from, to, attempt});
        push({detail::Event::Timeout, tick + bus.ack_timeout, 0, 0, ai, from, to, attempt});
    };

    for (std::size_t i = 0; i < scenario.size(); ++i)
        push({detail::Event::Ingest, scenario[i].tick, 0, i, 0, scenario[i].node, scenario[i].node, 0});

    while (!queue.empty()) {
        const detail::Event e = queue.top();
        queue.pop();
        switch (e.kind) {
            case detail::Event::Ingest: {
                const auto& inj = scenario[e.injection];
                const double score = ransomware_score(detector, inj.features);
                log(e.tick, "ingest", inj.node, 0, "ref=" + inj.ref + ";score=" + format_double(score));
                if (score < detector.threshold) break;
                Alert a{r.alerts.size() + 1, inj.node, e.tick, score, severity_for(score)};
                r.alerts.push_back(a);
                const std::size_t ai = r.alerts.size() - 1;
                log(e.tick, "alert", inj.node, a.alert_id, "severity=" + std::string(to_string(a.severity)));
                apply(e.tick, inj.node, a);
                for (const auto& n : nodes) {
                    if (n == inj.node) continue;
                    if (mesh.propagation == Propagation::Downstream && n.layer < inj.node.layer) continue;
                    send(e.tick, ai, inj.node, n, 1);
                }
                break;
            }
            case detail::Event::Deliver: {
                const auto& a = r.alerts[e.alert];
                log(e.tick, "deliver", e.to, a.alert_id, "from=" + e.from.str() + ";attempt=" + std::to_string(e.attempt));
                apply(e.tick, e.to, a);
                if (unit_uniform(rng) < bus.drop_probability)
                    log(e.tick, "ack_drop", e.to, a.alert_id, "to=" + e.from.str());
                else
                    push({detail::Event::Ack, e.tick + bus.latency, 0, 0, e.alert, e.to, e.from, e.attempt});
                break;
            }
            case detail::Event::Ack: {
                const auto& a = r.alerts[e.alert];
                log(e.tick, "ack", e.to, a.alert_id, "from=" + e.from.str() + ";attempt=" + std::to_string(e.attempt));
                acked.insert({e.alert, e.from});
                break;
            }
            case detail::Event::Timeout: {
                if (acked.count({e.alert, e.to})) break;
                const auto& a = r.alerts[e.alert];
                if (e.attempt > bus.max_retries) {
                    log(e.tick, "give_up", e.from, a.alert_id, "to=" + e.to.str() + ";attempts=" + std::to_string(e.attempt));
                    break;
                }
                send(e.tick, e.alert, e.from, e.to, e.attempt + 1);
                break;
            }
        }
    }
    return r;
}

/// `tick,seq,event_type,node,alert_id,detail`
inline void write_transcript_csv(std::ostream& os, const MeshResult& r) {
    os << "tick,seq,event_type,node,alert_id,detail\n";
    for (const auto& e : r.transcript) {
        os << e.tick << ',' << e.seq << ',' << e.type << ',' << e.node << ',';
        if (e.alert_id) os << e.alert_id;
        os << ',' << e.detail << '\n';
    }
}

inline std::string transcript_csv(const MeshResult& r) {
    std::ostringstream os;
    write_transcript_csv(os, r);
    return os.str();
}

// ---------------------------------------------------------------------------
// Scenario files

struct ScenarioLine {
    std::uint64_t tick = 0;
    NodeId node;
    std::string ref;
};

/// Lines `tick,node,ref`; blank lines and '#' comments are skipped.
inline std::vector<ScenarioLine> parse_scenario(std::istream& is, const std::string& origin = "scenario") {
    std::vector<ScenarioLine> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto fail = [&](const std::string& m) {
            throw DataError(origin + ":" + std::to_string(lineno) + ": " + m);
        };
        const auto c1 = t.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : t.find(',', c1 + 1);
        if (c2 == std::string_view::npos) fail("expected tick,node,ref");
        const auto tick = trim(t.substr(0, c1));
        if (tick.empty() || !std::all_of(tick.begin(), tick.end(), [](char c) { return c >= '0' && c <= '9'; }))
            fail("tick must be a non-negative integer");
        ScenarioLine s;
        s.tick = std::stoull(std::string(tick));
        try {
            s.node = parse_node_id(trim(t.substr(c1 + 1, c2 - c1 - 1)));
        } catch (const DataError& e) {
            fail(e.what());
        }
        s.ref = std::string(trim(t.substr(c2 + 1)));
        if (s.ref.empty()) fail("empty sample reference");
        out.push_back(std::move(s));
    }
    return out;
}

/// Resolves every reference to a scaled vector before anything runs.
/// References: a trace file path, or `row:CSV#N` for 0-based row N of a
/// dataset CSV with raw counts. Relative paths are taken from `base_dir`.
inline std::vector<Injection> resolve_scenario(const std::vector<ScenarioLine>& lines, const MeshConfig& mesh,
                                               const features::FeatureLayout& layout,
                                               const features::ScalerParams& scaler, const std::string& base_dir = "") {
    const auto nodes = mesh.nodes();
    const auto path_of = [&](const std::string& p) {
        if (p.empty() || p.front() == '/' || base_dir.empty()) return p;
        return base_dir + "/" + p;
    };
    std::map<std::string, features::Dataset> csv_cache;
    std::vector<Injection> out;
    for (const auto& l : lines) {
        if (std::find(nodes.begin(), nodes.end(), l.node) == nodes.end())
            throw DataError("scenario names unknown node " + l.node.str());
        std::vector<double> raw;
        if (l.ref.rfind("row:", 0) == 0) {
            const auto hash = l.ref.rfind('#');
            if (hash == std::string::npos || hash < 4) throw DataError("bad row reference " + l.ref);
            const std::string file = path_of(l.ref.substr(4, hash - 4));
            const std::string idx = l.ref.substr(hash + 1);
            if (idx.empty() || !std::all_of(idx.begin(), idx.end(), [](char c) { return c >= '0' && c <= '9'; }))
                throw DataError("bad row index in " + l.ref);
            auto it = csv_cache.find(file);
            if (it == csv_cache.end()) it = csv_cache.emplace(file, features::read_csv(file, layout)).first;
            const auto row = std::stoull(idx);
            if (row >= it->second.size()) throw DataError("row " + idx + " out of range in " + file);
            raw = it->second.rows[row].values;
        } else {
            raw = features::featurize(features::load_trace(path_of(l.ref)), layout);
        }
        out.push_back({l.tick, l.node, features::apply_scaler(scaler, raw), l.ref});
    }
    return out;
}

}  // namespace evrdf::mesh
