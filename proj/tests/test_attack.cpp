#include <gtest/gtest.h>

#include <fstream>

#include "evrdf/impact.hpp"
#include "evrdf/simulation.hpp"
#include "test_util.hpp"

using namespace evrdf;
using namespace evrdf::plant;
using evrdf::attack::AttackScenario;

TEST(DelayChannel, FifoWithConstantLatency) {
    attack::DelayChannel ch(2.0);
    ch.send(0.0, Mode::Charging);
    ch.send(1.0, Mode::Discharging);
    EXPECT_FALSE(ch.deliver(1.9));
    EXPECT_EQ(ch.deliver(2.0), Mode::Charging);
    EXPECT_FALSE(ch.deliver(2.0));
    EXPECT_EQ(ch.deliver(3.0), Mode::Discharging);
    EXPECT_TRUE(ch.in_flight().empty());

    ch.send(9.0, Mode::Idle);
    EXPECT_EQ(ch.drop_undeliverable(10.0), 1u);
}

TEST(DelayChannel, ZeroDelayDeliversSameStep) {
    attack::DelayChannel ch;
    ch.send(5.0, Mode::Charging);
    EXPECT_EQ(ch.deliver(5.0), Mode::Charging);
}

TEST(Scenario, Validation) {
    EXPECT_THROW(AttackScenario::ddos(-1.0).validate(), ConfigError);
    EXPECT_THROW(AttackScenario::ddos(300.5).validate(), ConfigError);
    EXPECT_NO_THROW(AttackScenario::ddos(300.0).validate());
    EXPECT_THROW(AttackScenario::fdi({90.0, 10.0}).validate(), ConfigError);
    EXPECT_THROW(AttackScenario::fdi({0.0, 101.0}).validate(), ConfigError);
    EXPECT_NO_THROW(AttackScenario::fdi({0.0, 100.0}).validate());
}

TEST(Scenario, JsonRoundTrip) {
    for (const auto& s : {AttackScenario::none(), AttackScenario::ddos(120.0), AttackScenario::fdi({10.0, 90.0})})
        EXPECT_EQ(attack::scenario_from_json(attack::to_json(s)), s);
    EXPECT_THROW(attack::scenario_from_json({{"type", "ddos"}}), DataError);
    EXPECT_THROW(attack::scenario_from_json({{"type", "mitm"}}), DataError);
    EXPECT_THROW(attack::scenario_from_json({{"type", "ddos"}, {"delay_s", 400}}), ConfigError);

    testutil::TempDir dir("scen");
    testutil::spit(dir.path() / "bad.json", "{ not json");
    EXPECT_THROW(attack::load_scenario(dir / "bad.json"), DataError);
    EXPECT_THROW(attack::load_scenario(dir / "missing.json"), DataError);
    testutil::spit(dir.path() / "ok.json", R"({"type": "fdi", "low": 5, "high": 95})");
    EXPECT_EQ(attack::load_scenario(dir / "ok.json"), AttackScenario::fdi({5.0, 95.0}));
}

TEST(Ddos, ZeroDelayIsIdentity) {
    SimConfig c;
    EXPECT_EQ(run_simulation(c, AttackScenario::ddos(0.0)).trace, run_simulation(c).trace);
}

TEST(Ddos, FirstEdgeOvershootMatchesRampOracle) {
    for (double rate : {1.0, 0.25}) {
        SimConfig c;
        c.charge_rate = rate;
        const auto ref = run_simulation(c);
        for (double d : {10.0, 60.0, 120.0, 180.0, 240.0, 300.0}) {
            const auto att = run_simulation(c, AttackScenario::ddos(d));
            ASSERT_FALSE(att.edges.empty()) << "d=" << d;
            const double expected = std::min(rate * d, 100.0 - c.thresholds.high);
            const double overshoot = att.edges[0].soc - ref.edges[0].soc;
            EXPECT_NEAR(overshoot, expected, rate * c.dt + 1e-9) << "rate=" << rate << " d=" << d;
            EXPECT_NEAR(att.edges[0].time - ref.edges[0].time, d, c.dt + 1e-9);
        }
    }
}

TEST(Ddos, SeverityIsMonotoneInDelay) {
    SimConfig c;
    const auto ref = run_simulation(c);
    double last_delay = -1.0, last_over = -1.0;
    for (double d = 0.0; d <= 300.0; d += 20.0) {
        const auto att = run_simulation(c, AttackScenario::ddos(d));
        const auto rep = attack::impact_report(ref, att, c.thresholds, c.window());
        ASSERT_GE(rep.matched(), 1u);
        EXPECT_GT(rep.edge_delay_pct[0], last_delay);
        EXPECT_GE(rep.soc_overshoot_pct[0], last_over);
        last_delay = rep.edge_delay_pct[0];
        last_over = rep.soc_overshoot_pct[0];
    }
}

TEST(Ddos, StarvationBoundary) {
    SimConfig c;
    const auto ref = run_simulation(c);
    const auto starved = [&](double d) {
        return attack::impact_report(ref, run_simulation(c, AttackScenario::ddos(d)), c.thresholds, c.window())
            .starved;
    };
    EXPECT_FALSE(starved(0.0));
    EXPECT_FALSE(starved(120.0));
    EXPECT_FALSE(starved(240.0));
    EXPECT_TRUE(starved(245.0));
    EXPECT_TRUE(starved(300.0));
}

TEST(Ddos, LongDelayHoldsAboveLowWithoutCharging) {
    SimConfig c;
    const auto att = run_simulation(c, AttackScenario::ddos(300.0));
    for (const auto& s : att.trace.samples) {
        if (s.time <= c.window_end) continue;
        // a saturated pack may still have the stale charge command in effect
        if (s.soc < c.thresholds.high) EXPECT_NE(s.mode, Mode::Charging) << "t=" << s.time;
        EXPECT_GE(s.soc, c.thresholds.low - 1e-9) << "t=" << s.time;
    }
}

TEST(Fdi, SwingTracksInjectedBand) {
    SimConfig c;
    double last = -1.0;
    const ThresholdPair tuples[] = {{35, 80}, {10, 90}, {5, 95}, {0, 100}};
    for (const auto& t : tuples) {
        const auto r = run_simulation(c, AttackScenario::fdi(t));
        const double swing = realized_swing(r.trace, c.window_start);
        EXPECT_GE(swing, t.high - t.low - 1e-9);
        EXPECT_LE(swing, t.high - t.low + 2.0 * c.dt * c.charge_rate + 1e-9);
        EXPECT_GT(swing, last);
        last = swing;
    }
    const auto full = run_simulation(c, AttackScenario::fdi({0.0, 100.0}));
    bool hit0 = false, hit100 = false;
    for (const auto& s : full.trace.samples) {
        hit0 |= s.soc == 0.0;
        hit100 |= s.soc == 100.0;
    }
    EXPECT_TRUE(hit0);
    EXPECT_TRUE(hit100);
}

TEST(Fdi, LegitimateThresholdsAreViolated) {
    SimConfig c;
    const auto ref = run_simulation(c);
    const auto rep =
        attack::impact_report(ref, run_simulation(c, AttackScenario::fdi({10.0, 90.0})), c.thresholds, c.window());
    ASSERT_FALSE(rep.threshold_violations.empty());
    bool high = false, low = false;
    for (const auto& v : rep.threshold_violations) {
        high |= v.which == attack::Threshold::High;
        low |= v.which == attack::Threshold::Low;
    }
    EXPECT_TRUE(high);
    EXPECT_TRUE(low);
}

TEST(Impact, SelfComparisonIsClean) {
    SimConfig c;
    const auto ref = run_simulation(c);
    const auto rep = attack::impact_report(ref, ref, c.thresholds, c.window());
    EXPECT_TRUE(rep.threshold_violations.empty());
    EXPECT_FALSE(rep.starved);
    for (double v : rep.edge_delay_pct) EXPECT_EQ(v, 0.0);
    for (double v : rep.soc_overshoot_pct) EXPECT_EQ(v, 0.0);
}

TEST(Impact, RejectsMismatchedGrids) {
    SimConfig a, b;
    b.duration = 500.0;
    EXPECT_THROW(attack::impact_report(run_simulation(a), run_simulation(b), a.thresholds, a.window()), DataError);
    b = a;
    b.dt = 0.2;
    b.duration = 1200.0;
    EXPECT_THROW(attack::impact_report(run_simulation(a), run_simulation(b), a.thresholds, a.window()), DataError);
}

TEST(Impact, RelativePctZeroReference) {
    EXPECT_EQ(attack::detail::relative_pct(0.0, 0.0), 0.0);
    EXPECT_TRUE(std::isnan(attack::detail::relative_pct(1.0, 0.0)));
    EXPECT_DOUBLE_EQ(attack::detail::relative_pct(110.0, 100.0), 10.0);
}
