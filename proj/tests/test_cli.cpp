#include <gtest/gtest.h>

#include <sstream>

#include "evrdf/cli.hpp"
#include "test_util.hpp"

using namespace evrdf;
using evrdf::testutil::slurp;
using evrdf::testutil::spit;
using evrdf::testutil::TempDir;

namespace {

struct Outcome {
    int code;
    std::string out, err;
};

Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"bogus"}).code, 2);
    EXPECT_EQ(run({"simulate", "--attack", "mitm"}).code, 2);
    EXPECT_EQ(run({"simulate", "--delay", "abc"}).code, 2);
    EXPECT_EQ(run({"simulate", "--nope"}).code, 2);
    TempDir dir("cli");
    const auto r = run({"train", "--out", dir / "o"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--data"), std::string::npos);
}

TEST(Cli, HelpAndVersionExitZero) {
    const auto h = run({"--help"});
    EXPECT_EQ(h.code, 0);
    EXPECT_NE(h.out.find("attack-impact"), std::string::npos);
    EXPECT_EQ(run({"--version"}).code, 0);
}

TEST(Cli, DomainErrorsExitOne) {
    TempDir dir("cli");
    EXPECT_EQ(run({"train", "--out", dir / "a", "--epochs", "0", "--data", dir / "none.csv"}).code, 1);
    EXPECT_EQ(run({"simulate", "--out", dir / "b", "--attack", "ddos", "--delay", "400"}).code, 1);
    EXPECT_EQ(run({"simulate", "--out", dir / "c", "--attack", "fdi"}).code, 1);
    EXPECT_EQ(run({"simulate", "--out", dir / "d", "--attack", "fdi", "--low", "90", "--high", "10"}).code, 1);
    const auto missing = run({"cv", "--out", dir / "e", "--data", dir / "none.csv"});
    EXPECT_EQ(missing.code, 1);
    EXPECT_NE(missing.err.find("cannot open"), std::string::npos);
    spit(dir.path() / "bad.csv", "f0,label\n1,0\n");
    EXPECT_EQ(run({"train", "--out", dir / "f", "--data", dir / "bad.csv"}).code, 1);
    spit(dir.path() / "p.json", R"({"dt": 0})");
    EXPECT_EQ(run({"simulate", "--out", dir / "g", "--params", dir / "p.json"}).code, 1);
}

TEST(Cli, SimulateIsByteReproducibleAndWritesManifest) {
    TempDir dir("cli");
    ASSERT_EQ(run({"simulate", "--out", dir / "a"}).code, 0);
    ASSERT_EQ(run({"simulate", "--out", dir / "b"}).code, 0);
    EXPECT_EQ(slurp(dir.path() / "a/trace.csv"), slurp(dir.path() / "b/trace.csv"));
    ASSERT_EQ(run({"simulate", "--out", dir / "c", "--attack", "ddos", "--delay", "0"}).code, 0);
    EXPECT_EQ(slurp(dir.path() / "a/trace.csv"), slurp(dir.path() / "c/trace.csv"));

    const auto m = nlohmann::json::parse(slurp(dir.path() / "a/manifest.json"));
    EXPECT_EQ(m["command"], "simulate");
    EXPECT_EQ(m["config"]["plant"]["high"], 80.0);
    const auto outs = m["outputs"].get<std::vector<std::string>>();
    for (const auto& o : outs) EXPECT_TRUE(std::filesystem::exists(dir.path() / "a" / o)) << o;
    EXPECT_NE(std::find(outs.begin(), outs.end(), "summary.json"), outs.end());
}

TEST(Cli, SimulateFdiUsesInjectedThresholds) {
    TempDir dir("cli");
    ASSERT_EQ(run({"simulate", "--out", dir / "f", "--attack", "fdi", "--low", "0", "--high", "100"}).code, 0);
    const auto s = nlohmann::json::parse(slurp(dir.path() / "f/summary.json"));
    EXPECT_EQ(s["swing"], 100.0);
    EXPECT_GT(s["threshold_violation_samples"].get<int>(), 0);

    spit(dir.path() / "scen.json", R"({"type": "ddos", "delay_s": 300})");
    ASSERT_EQ(run({"simulate", "--out", dir / "s", "--scenario", dir / "scen.json"}).code, 0);
    EXPECT_TRUE(nlohmann::json::parse(slurp(dir.path() / "s/summary.json"))["starved"].get<bool>());
}

TEST(Cli, AttackImpactSweeps) {
    TempDir dir("cli");
    ASSERT_EQ(run({"attack-impact", "--out", dir / "a"}).code, 0);
    const auto sweep = slurp(dir.path() / "a/ddos_sweep.csv");
    EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 6);
    const auto soc = slurp(dir.path() / "a/fdi_soc.csv");
    EXPECT_EQ(soc.substr(0, soc.find('\n')), "time,fdi_35_80,fdi_10_90,fdi_5_95,fdi_0_100");
    EXPECT_EQ(run({"attack-impact", "--out", dir / "b", "--fdi", "80:35"}).code, 1);
}

TEST(Cli, DataTrainEvaluateMeshPipeline) {
    TempDir dir("cli");
    const auto d = [&](const std::string& s) { return dir / s; };
    ASSERT_EQ(run({"gen-data", "--out", d("gen"), "--n-ransomware", "40", "--n-normal", "30", "--traces"}).code, 0);

    ASSERT_EQ(run({"featurize", "--out", d("feat"), "--traces", d("gen/traces")}).code, 0);
    EXPECT_EQ(slurp(dir.path() / "gen/corpus.csv"), slurp(dir.path() / "feat/dataset.csv"));

    ASSERT_EQ(run({"train", "--out", d("tr"), "--data", d("gen/corpus.csv"), "--epochs", "30", "--batch", "10"}).code,
              0);
    for (const char* f : {"model.bin", "model.json", "scaler.json", "history.csv", "test_report.json"})
        EXPECT_TRUE(std::filesystem::exists(dir.path() / "tr" / f)) << f;
    const auto test_report = nlohmann::json::parse(slurp(dir.path() / "tr/test_report.json"));
    EXPECT_EQ(test_report["n_test"], 21);

    const auto ev = run({"evaluate", "--out", d("ev"), "--data", d("gen/corpus.csv"), "--weights", d("tr/model.bin"),
                         "--scaler", d("tr/scaler.json")});
    ASSERT_EQ(ev.code, 0) << ev.err;
    const auto report = nlohmann::json::parse(slurp(dir.path() / "ev/report.json"));
    EXPECT_GE(report["acc"].get<double>(), 0.9);

    spit(dir.path() / "scen.csv", "0,SCADA.0,row:" + d("gen/corpus.csv") + "#0\n1,CAEV.0,row:" +
                                      d("gen/corpus.csv") + "#69\n");
    const std::vector<std::string> mesh_args{"mesh",     "--scenario", d("scen.csv"), "--weights", d("tr/model.bin"),
                                             "--scaler", d("tr/scaler.json"), "--drop", "0.2", "--retries", "10"};
    auto a1 = mesh_args, a2 = mesh_args;
    a1.insert(a1.end(), {"--out", d("m1")});
    a2.insert(a2.end(), {"--out", d("m2")});
    const auto m = run(a1);
    ASSERT_EQ(m.code, 0) << m.err;
    ASSERT_EQ(run(a2).code, 0);
    EXPECT_EQ(slurp(dir.path() / "m1/transcript.csv"), slurp(dir.path() / "m2/transcript.csv"));
    EXPECT_NE(slurp(dir.path() / "m1/transcript.csv").find(",alert,SCADA.0,1,"), std::string::npos);

    EXPECT_EQ(run({"evaluate", "--out", d("ev2"), "--data", d("gen/corpus.csv"), "--weights", d("tr/scaler.json"),
                   "--scaler", d("tr/scaler.json")})
                  .code,
              1);
}

TEST(Cli, CrossValidationOutputs) {
    TempDir dir("cli");
    ASSERT_EQ(run({"gen-data", "--out", dir / "g", "--n-ransomware", "30", "--n-normal", "25"}).code, 0);
    const auto r = run({"cv", "--out", dir / "cv", "--data", dir / "g/corpus.csv", "--model", "dnn", "--folds", "5",
                        "--epochs", "5", "--batch", "10", "--jobs", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(slurp(dir.path() / "cv/cv_report.json"));
    ASSERT_EQ(j["reports"].size(), 1u);
    EXPECT_EQ(j["reports"][0]["folds"].size(), 5u);
    const auto folds = slurp(dir.path() / "cv/folds.csv");
    EXPECT_EQ(std::count(folds.begin(), folds.end(), '\n'), 6);
    EXPECT_NE(slurp(dir.path() / "cv/table.txt").find("5 FOLD"), std::string::npos);
}
