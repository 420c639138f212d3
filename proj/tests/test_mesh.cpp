#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "evrdf/mesh.hpp"
#include "test_util.hpp"

using namespace evrdf;
using namespace evrdf::mesh;

namespace {

// One hidden unit reading feature 0: P(normal) = sigmoid(5 - 20 relu(x0)).
Detector step_detector() {
    auto p = nn::build(nn::DnnSpec{features::kFeatureCount, {1}, 0.0, 0.0}, 1);
    for (auto& t : p.tensors) t.value.setZero();
    p.tensors[0].value(0, 0) = 1.0;
    p.tensors[2].value(0, 0) = -20.0;
    p.tensors[3].value(0, 0) = 5.0;
    Detector d;
    d.model = std::make_shared<const nn::ModelParams>(p);
    d.scaler.min.assign(features::kFeatureCount, 0.0);
    d.scaler.max.assign(features::kFeatureCount, 1.0);
    return d;
}

std::vector<double> sample(double x0) {
    std::vector<double> v(features::kFeatureCount, 0.0);
    v[0] = x0;
    return v;
}

Injection at(const char* node, double x0, std::uint64_t tick = 0) { return {tick, parse_node_id(node), sample(x0), "s"}; }

bool all_at_least(const MeshResult& r, Mitigation m) {
    for (const auto& [id, st] : r.states)
        if (st.mitigation < m) return false;
    return true;
}

}  // namespace

TEST(NodeId, ParseAndFormat) {
    const auto id = parse_node_id("EVSENetwork.3");
    EXPECT_EQ(id.layer, Layer::EVSENetwork);
    EXPECT_EQ(id.index, 3u);
    EXPECT_EQ(id.str(), "EVSENetwork.3");
    EXPECT_THROW(parse_node_id("SCADA"), DataError);
    EXPECT_THROW(parse_node_id("Grid.0"), DataError);
    EXPECT_THROW(parse_node_id("SCADA.x"), DataError);
}

TEST(Severity, BandsAndLadder) {
    EXPECT_EQ(severity_for(0.5), Severity::Low);
    EXPECT_EQ(severity_for(0.9), Severity::High);
    EXPECT_EQ(severity_for(0.99), Severity::Critical);
    EXPECT_EQ(required_mitigation(Severity::Low), Mitigation::BackupOn);
    EXPECT_EQ(required_mitigation(Severity::High), Mitigation::Isolated);
    EXPECT_EQ(required_mitigation(Severity::Critical), Mitigation::Shutdown);
}

TEST(StateMachine, IdempotentAndMonotone) {
    NodeState s;
    const Alert low{1, {}, 0, 0.6, Severity::Low};
    const Alert crit{2, {}, 0, 0.995, Severity::Critical};
    const auto s1 = handle_alert(s, low);
    EXPECT_EQ(s1.mitigation, Mitigation::BackupOn);
    EXPECT_EQ(handle_alert(s1, low), s1);
    const auto s2 = handle_alert(s1, crit);
    EXPECT_EQ(s2.mitigation, Mitigation::Shutdown);
    const Alert low2{3, {}, 0, 0.6, Severity::Low};
    EXPECT_EQ(handle_alert(s2, low2).mitigation, Mitigation::Shutdown);
}

TEST(Detector, ScoreMatchesOfflinePrediction) {
    const auto d = step_detector();
    for (double x0 : {0.0, 0.2, 0.25, 0.5, 1.0}) {
        nn::Matrix x = nn::Matrix::Zero(1, features::kFeatureCount);
        x(0, 0) = x0;
        EXPECT_EQ(ransomware_score(d, sample(x0)), 1.0 - nn::predict(*d.model, x)[0]);
    }
    EXPECT_THROW(ransomware_score(d, std::vector<double>(3, 0.0)), DataError);
    EXPECT_THROW(ransomware_score(d, sample(2.0)), DataError);
    EXPECT_THROW(ransomware_score(d, sample(std::nan(""))), DataError);
    EXPECT_FALSE(ingest_sample(d, {}, sample(0.0), 0));
    const auto a = ingest_sample(d, {}, sample(1.0), 4);
    ASSERT_TRUE(a);
    EXPECT_EQ(a->severity, Severity::Critical);
    EXPECT_EQ(a->detected_at, 4u);
}

TEST(Bus, Validation) {
    BusConfig b;
    b.drop_probability = 1.5;
    EXPECT_THROW(b.validate(), ConfigError);
    b = {};
    b.ack_timeout = 0;
    EXPECT_THROW(b.validate(), ConfigError);
    Detector d = step_detector();
    d.threshold = 0.0;
    EXPECT_THROW(d.validate(), ConfigError);
    EXPECT_THROW(Detector{}.validate(), ConfigError);
}

TEST(Sim, LosslessBroadcastReachesEveryLayer) {
    const auto r = run_mesh_sim({at("SCADA.0", 1.0)}, MeshConfig{}, BusConfig{}, step_detector());
    ASSERT_EQ(r.alerts.size(), 1u);
    EXPECT_EQ(r.alerts[0].alert_id, 1u);
    EXPECT_TRUE(all_at_least(r, Mitigation::Shutdown));
    EXPECT_EQ(r.count("send"), 3u);
    EXPECT_EQ(r.count("deliver"), 3u);
    EXPECT_EQ(r.count("ack"), 3u);
    EXPECT_EQ(r.count("drop"), 0u);
    EXPECT_EQ(r.count("give_up"), 0u);
    EXPECT_EQ(r.count("state"), 4u);
    for (const auto& e : r.transcript)
        if (e.type == "deliver") EXPECT_EQ(e.tick, 1u);
}

TEST(Sim, TotalLossExhaustsRetries) {
    BusConfig bus;
    bus.drop_probability = 1.0;
    bus.max_retries = 3;
    const auto r = run_mesh_sim({at("SCADA.0", 1.0)}, MeshConfig{}, bus, step_detector());
    EXPECT_EQ(r.count("send"), 3u * 4u);
    EXPECT_EQ(r.count("drop"), 3u * 4u);
    EXPECT_EQ(r.count("give_up"), 3u);
    EXPECT_EQ(r.count("deliver"), 0u);
    EXPECT_EQ(r.states.at(parse_node_id("SCADA.0")).mitigation, Mitigation::Shutdown);
    EXPECT_EQ(r.states.at(parse_node_id("CAEV.0")).mitigation, Mitigation::Normal);
}

TEST(Sim, BelowThresholdRaisesNothing) {
    const auto r = run_mesh_sim({at("CAEV.0", 0.0)}, MeshConfig{}, BusConfig{}, step_detector());
    EXPECT_TRUE(r.alerts.empty());
    ASSERT_EQ(r.transcript.size(), 1u);
    EXPECT_EQ(r.transcript[0].type, "ingest");
    EXPECT_TRUE(all_at_least(r, Mitigation::Normal));
    for (const auto& [id, st] : r.states) EXPECT_EQ(st.mitigation, Mitigation::Normal);
}

TEST(Sim, DownstreamSkipsUpperLayers) {
    MeshConfig mc;
    mc.propagation = Propagation::Downstream;
    mc.nodes_per_layer = {1, 2, 2, 1};
    const auto r = run_mesh_sim({at("EVSENetwork.1", 1.0)}, mc, BusConfig{}, step_detector());
    EXPECT_EQ(r.states.at(parse_node_id("SCADA.0")).mitigation, Mitigation::Normal);
    EXPECT_EQ(r.states.at(parse_node_id("GenTransDist.1")).mitigation, Mitigation::Normal);
    EXPECT_EQ(r.states.at(parse_node_id("EVSENetwork.0")).mitigation, Mitigation::Shutdown);
    EXPECT_EQ(r.states.at(parse_node_id("CAEV.0")).mitigation, Mitigation::Shutdown);
    EXPECT_EQ(r.count("send"), 2u);
}

TEST(Sim, RejectsBadScenarios) {
    EXPECT_THROW(run_mesh_sim({at("SCADA.1", 1.0)}, MeshConfig{}, BusConfig{}, step_detector()), DataError);
    Injection bad = at("SCADA.0", 1.0);
    bad.features.pop_back();
    EXPECT_THROW(run_mesh_sim({bad}, MeshConfig{}, BusConfig{}, step_detector()), DataError);
}

TEST(Sim, TranscriptReplaysBitExactly) {
    BusConfig bus;
    bus.drop_probability = 0.3;
    bus.seed = 17;
    const std::vector<Injection> scen{at("SCADA.0", 1.0, 0), at("CAEV.0", 0.27, 2), at("GenTransDist.0", 0.0, 5)};
    const auto a = transcript_csv(run_mesh_sim(scen, MeshConfig{}, bus, step_detector()));
    const auto b = transcript_csv(run_mesh_sim(scen, MeshConfig{}, bus, step_detector()));
    EXPECT_EQ(a, b);
    bus.seed = 18;
    EXPECT_NE(a, transcript_csv(run_mesh_sim(scen, MeshConfig{}, bus, step_detector())));
    EXPECT_EQ(a.substr(0, a.find('\n')), "tick,seq,event_type,node,alert_id,detail");
}

TEST(Sim, DuplicatesNeverChangeStateTwice) {
    BusConfig bus;
    bus.drop_probability = 0.4;
    bus.max_retries = 10;
    std::size_t duplicates = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        bus.seed = seed;
        const auto r = run_mesh_sim({at("SCADA.0", 1.0), at("CAEV.0", 1.0, 1)}, MeshConfig{}, bus, step_detector());
        std::map<std::pair<std::string, std::uint64_t>, int> changes;
        for (const auto& e : r.transcript) {
            if (e.type == "state") ASSERT_EQ(++changes[std::make_pair(e.node, e.alert_id)], 1);
            duplicates += e.type == "duplicate";
        }
    }
    EXPECT_GT(duplicates, 0u);
}

TEST(Sim, HopFailureRateMatchesGeometricBound) {
    // One hop, drop 0.5, 2 attempts: delivery fails with probability 0.25.
    MeshConfig mc;
    mc.nodes_per_layer = {1, 1, 0, 0};
    BusConfig bus;
    bus.drop_probability = 0.5;
    bus.max_retries = 1;
    const int n = 4000;
    int failed = 0;
    for (int s = 0; s < n; ++s) {
        bus.seed = static_cast<std::uint64_t>(s);
        const auto r = run_mesh_sim({at("SCADA.0", 1.0)}, mc, bus, step_detector());
        failed += r.states.at(parse_node_id("GenTransDist.0")).mitigation == Mitigation::Normal;
    }
    EXPECT_NEAR(failed / static_cast<double>(n), 0.25, 5.0 * std::sqrt(0.25 * 0.75 / n));
}

TEST(Scenario, ParseAndResolve) {
    testutil::TempDir dir("mesh");
    testutil::spit(dir.path() / "t.txt", "xor\nshl\n");
    {
        features::Dataset d;
        d.rows.push_back({std::vector<double>(features::kFeatureCount, 0.5), 1});
        d.rows.push_back({std::vector<double>(features::kFeatureCount, 1.0), 0});
        features::write_csv(d, dir / "rows.csv");
    }
    std::istringstream text("# tick,node,ref\n0,SCADA.0,t.txt\n\n3, CAEV.0 ,row:rows.csv#1\n");
    const auto lines = parse_scenario(text);
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[1].tick, 3u);
    EXPECT_EQ(lines[1].node.layer, Layer::CAEV);
    const auto d = step_detector();
    const auto inj = resolve_scenario(lines, MeshConfig{}, features::FeatureLayout::default_layout(), d.scaler,
                                      dir.path().string());
    ASSERT_EQ(inj.size(), 2u);
    const auto& l = features::FeatureLayout::default_layout();
    EXPECT_EQ(inj[0].features[static_cast<std::size_t>(l.slot_of("xor"))], 1.0);
    EXPECT_EQ(inj[1].features[5], 1.0);

    const auto fails = [&](const std::string& s) {
        std::istringstream is(s);
        EXPECT_THROW(resolve_scenario(parse_scenario(is), MeshConfig{}, l, d.scaler, dir.path().string()), DataError)
            << s;
    };
    fails("0,SCADA.0\n");
    fails("x,SCADA.0,t.txt\n");
    fails("0,SCADA.9,t.txt\n");
    fails("0,SCADA.0,missing.txt\n");
    fails("0,SCADA.0,row:rows.csv#7\n");
    fails("0,SCADA.0,row:rows.csv#a\n");
}
