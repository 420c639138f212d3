#pragma once

// Command-line front end. dispatch() returns 0 on success, 1 on a domain
// error (bad configuration, unusable data) and 2 on a usage error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evrdf/attack.hpp"
#include "evrdf/common.hpp"
#include "evrdf/eval.hpp"
#include "evrdf/features.hpp"
#include "evrdf/impact.hpp"
#include "evrdf/mesh.hpp"
#include "evrdf/nn.hpp"
#include "evrdf/simulation.hpp"

namespace evrdf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Output directory plus the manifest being assembled for this run.
class Run {
public:
    Run(std::string command, std::vector<std::string> argv, fs::path out, std::ostream& log)
        : command_(std::move(command)), argv_(std::move(argv)), out_(std::move(out)), log_(log) {}

    std::ostream& log() { return log_; }
    json& config() { return config_; }

    fs::path path(const std::string& name) {
        fs::create_directories(out_);
        const fs::path p = out_ / name;
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        outputs_.push_back(name);
        return p;
    }

    std::ofstream open(const std::string& name, std::ios::openmode mode = std::ios::out) {
        const auto p = path(name);
        std::ofstream os(p, mode);
        if (!os) throw DataError("cannot write " + p.string());
        return os;
    }

    void write(const std::string& name, const std::string& content) { open(name) << content; }
    void write_json(const std::string& name, const json& j) { open(name) << j.dump(2) << '\n'; }

    void finish() {
        json m;
        m["tool"] = "evrdf";
        m["version"] = kVersion;
        m["command"] = command_;
        m["argv"] = argv_;
        m["config"] = config_;
        std::vector<std::string> outs = outputs_;
        outs.push_back("manifest.json");
        m["outputs"] = outs;
        fs::create_directories(out_);
        std::ofstream os(out_ / "manifest.json");
        if (!os) throw DataError("cannot write manifest in " + out_.string());
        os << m.dump(2) << '\n';
    }

private:
    std::string command_;
    std::vector<std::string> argv_;
    fs::path out_;
    std::ostream& log_;
    json config_ = json::object();
    std::vector<std::string> outputs_;
};

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path + ": " + e.what());
    }
}

inline features::FeatureLayout layout_from(const std::string& path) {
    return path.empty() ? features::FeatureLayout::default_layout() : features::load_layout(path);
}

inline features::ScalerParams load_scaler(const std::string& path) {
    return features::scaler_from_json(read_json_file(path));
}

inline std::vector<double> to_std(const nn::Vector& v) { return {v.data(), v.data() + v.size()}; }

// ---------------------------------------------------------------------------
// simulate / attack-impact

struct SimulateOptions {
    std::string attack = "none";
    double delay = 0.0;
    double low = -1.0, high = -1.0;
    std::string scenario, params;
};

inline plant::SimConfig plant_config(const std::string& params_path) {
    return params_path.empty() ? plant::SimConfig{} : plant::sim_config_from_json(read_json_file(params_path));
}

inline void write_trace_file(Run& run, const std::string& name, const plant::SocTrace& t) {
    auto os = run.open(name);
    plant::write_trace_csv(os, t);
}

inline void write_edges_file(Run& run, const std::string& name, const std::vector<plant::TransitionEdge>& e) {
    auto os = run.open(name);
    plant::write_edges_csv(os, e);
}

inline void cmd_simulate(Run& run, const SimulateOptions& o, std::uint64_t seed) {
    plant::SimConfig cfg = plant_config(o.params);
    cfg.seed = seed;
    const bool have_low = o.low >= 0.0, have_high = o.high >= 0.0;
    if (have_low != have_high) throw ConfigError("--low and --high go together");

    attack::AttackScenario scen;
    if (!o.scenario.empty()) {
        scen = attack::load_scenario(o.scenario);
    } else if (o.attack == "none") {
        scen = attack::AttackScenario::none();
    } else if (o.attack == "ddos") {
        scen = attack::AttackScenario::ddos(o.delay);
    } else {
        if (!have_low) throw ConfigError("--attack fdi needs --low and --high");
        scen = attack::AttackScenario::fdi({o.low, o.high});
    }
    // outside FDI the pair sets the legitimate supervisor thresholds
    if (have_low && !std::holds_alternative<attack::FDI>(scen.kind)) cfg.thresholds = {o.low, o.high};
    cfg.validate();
    scen.validate();

    const auto reference = plant::run_simulation(cfg);
    const auto attacked = plant::run_simulation(cfg, scen);
    const auto report = attack::impact_report(reference, attacked, cfg.thresholds, cfg.window());

    write_trace_file(run, "trace.csv", attacked.trace);
    write_edges_file(run, "edges.csv", attacked.edges);
    write_trace_file(run, "reference_trace.csv", reference.trace);
    write_edges_file(run, "reference_edges.csv", reference.edges);
    {
        auto os = run.open("impact.csv");
        attack::write_impact_csv(os, report);
    }
    json summary = attack::summary_json(report);
    summary["swing"] = plant::realized_swing(attacked.trace, cfg.window_start);
    summary["dropped_commands"] = attacked.dropped_commands;
    run.write_json("summary.json", summary);

    run.config()["plant"] = plant::to_json(cfg);
    run.config()["scenario"] = attack::to_json(scen);
    run.log() << "simulate: " << scen.type_name() << ", " << attacked.edges.size() << " edges, "
              << report.threshold_violations.size() << " violating samples, starved="
              << (report.starved ? "yes" : "no") << '\n';
}

struct SweepOptions {
    std::vector<double> delays{60, 120, 180, 240, 300};
    std::vector<std::string> fdi{"35:80", "10:90", "5:95", "0:100"};
    std::string params;
};

inline plant::ThresholdPair parse_pair(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw ConfigError("threshold pair '" + s + "' is not LOW:HIGH");
    try {
        plant::ThresholdPair p{std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
        p.validate();
        return p;
    } catch (const std::invalid_argument&) {
        throw ConfigError("threshold pair '" + s + "' is not numeric");
    }
}

/// Writes time-aligned SOC columns, one per run.
inline void write_soc_columns(Run& run, const std::string& name, const std::vector<std::string>& headers,
                              const std::vector<const plant::SocTrace*>& traces) {
    auto os = run.open(name);
    os << "time";
    for (const auto& h : headers) os << ',' << h;
    os << '\n';
    const auto n = traces.front()->samples.size();
    for (std::size_t i = 0; i < n; ++i) {
        os << format_double(traces.front()->samples[i].time);
        for (const auto* t : traces) os << ',' << format_double(t->samples[i].soc);
        os << '\n';
    }
}

inline void cmd_attack_impact(Run& run, const SweepOptions& o, std::uint64_t seed) {
    plant::SimConfig cfg = plant_config(o.params);
    cfg.seed = seed;
    const auto reference = plant::run_simulation(cfg);
    const double ref_soc = reference.edges.empty() ? cfg.thresholds.high : reference.edges.front().soc;

    std::vector<plant::SimResult> ddos;
    json jd = json::array();
    {
        auto os = run.open("ddos_sweep.csv");
        os << "delay,first_edge_time,first_edge_soc,overshoot,overshoot_pct,starved,violating_samples\n";
        for (double d : o.delays) {
            ddos.push_back(plant::run_simulation(cfg, attack::AttackScenario::ddos(d)));
            const auto& r = ddos.back();
            const auto rep = attack::impact_report(reference, r, cfg.thresholds, cfg.window());
            const double t = r.edges.empty() ? std::nan("") : r.edges.front().time;
            const double s = r.edges.empty() ? std::nan("") : r.edges.front().soc;
            os << format_double(d) << ',' << format_double(t) << ',' << format_double(s) << ','
               << format_double(s - ref_soc) << ','
               << format_double(rep.soc_overshoot_pct.empty() ? std::nan("") : rep.soc_overshoot_pct.front()) << ','
               << (rep.starved ? 1 : 0) << ',' << rep.threshold_violations.size() << '\n';
            jd.push_back({{"delay", d}, {"overshoot", s - ref_soc}, {"starved", rep.starved}});
        }
    }
    std::vector<plant::SimResult> fdi;
    json jf = json::array();
    {
        auto os = run.open("fdi_sweep.csv");
        os << "low,high,swing,violating_samples\n";
        for (const auto& spec : o.fdi) {
            const auto pair = parse_pair(spec);
            fdi.push_back(plant::run_simulation(cfg, attack::AttackScenario::fdi(pair)));
            const auto rep = attack::impact_report(reference, fdi.back(), cfg.thresholds, cfg.window());
            const double swing = plant::realized_swing(fdi.back().trace, cfg.window_start);
            os << format_double(pair.low) << ',' << format_double(pair.high) << ',' << format_double(swing) << ','
               << rep.threshold_violations.size() << '\n';
            jf.push_back({{"low", pair.low}, {"high", pair.high}, {"swing", swing}});
        }
    }
    std::vector<std::string> hd{"none"};
    std::vector<const plant::SocTrace*> td{&reference.trace};
    for (std::size_t i = 0; i < ddos.size(); ++i) {
        hd.push_back("ddos_" + format_double(o.delays[i]));
        td.push_back(&ddos[i].trace);
    }
    write_soc_columns(run, "ddos_soc.csv", hd, td);
    if (!fdi.empty()) {
        std::vector<std::string> hf;
        std::vector<const plant::SocTrace*> tf;
        for (std::size_t i = 0; i < fdi.size(); ++i) {
            const auto p = parse_pair(o.fdi[i]);
            hf.push_back("fdi_" + format_double(p.low) + "_" + format_double(p.high));
            tf.push_back(&fdi[i].trace);
        }
        write_soc_columns(run, "fdi_soc.csv", hf, tf);
    }
    run.write_json("summary.json", {{"ddos", jd}, {"fdi", jf}});
    run.config()["plant"] = plant::to_json(cfg);
    run.config()["delays"] = o.delays;
    run.config()["fdi"] = o.fdi;
    run.log() << "attack-impact: " << o.delays.size() << " DDoS runs, " << o.fdi.size() << " FDI runs\n";
}

// ---------------------------------------------------------------------------
// data

struct GenOptions {
    std::size_t n_ransomware = 561, n_normal = 447;
    double separation = 0.9;
    bool traces = false;
    std::string layout;
};

inline void cmd_gen_data(Run& run, const GenOptions& o, std::uint64_t seed) {
    const auto layout = layout_from(o.layout);
    const auto traces = features::synth_traces(o.n_ransomware, o.n_normal, layout, o.separation, seed);
    const auto data = features::featurize_all(traces, layout);
    {
        auto os = run.open("corpus.csv");
        features::write_csv(os, data);
    }
    {
        auto os = run.open("layout.txt");
        features::write_layout(os, layout);
    }
    if (o.traces) {
        std::size_t i = 0;
        for (const auto& t : traces) {
            char name[64];
            std::snprintf(name, sizeof name, "traces/%s/%05zu.txt",
                          t.label == features::kLabelRansomware ? "ransomware" : "normal", i++);
            auto os = run.open(name);
            features::write_trace(os, t.trace);
        }
    }
    run.config()["n_ransomware"] = o.n_ransomware;
    run.config()["n_normal"] = o.n_normal;
    run.config()["separation"] = o.separation;
    run.config()["seed"] = seed;
    run.config()["layout"] = o.layout.empty() ? "default" : o.layout;
    run.log() << "gen-data: " << data.size() << " rows x " << layout.size() << " features\n";
}

struct FeaturizeOptions {
    std::string traces, layout;
};

inline void cmd_featurize(Run& run, const FeaturizeOptions& o) {
    if (o.traces.empty()) throw UsageError("featurize needs --traces DIR");
    const auto layout = layout_from(o.layout);
    features::Dataset data;
    data.layout = layout;
    std::size_t skipped = 0;
    json files = json::array();
    for (const auto& [sub, label] : {std::pair{"ransomware", features::kLabelRansomware},
                                     std::pair{"normal", features::kLabelNormal}}) {
        const fs::path dir = fs::path(o.traces) / sub;
        if (!fs::is_directory(dir)) continue;
        std::vector<fs::path> paths;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file()) paths.push_back(e.path());
        std::sort(paths.begin(), paths.end());
        for (const auto& p : paths) {
            const auto t = features::load_trace(p.string());
            skipped += t.skipped_lines;
            data.rows.push_back({features::featurize(t, layout), label});
            files.push_back({{"file", p.string()}, {"label", label}});
        }
    }
    if (data.rows.empty())
        throw DataError("no trace files under " + o.traces + "/ransomware or " + o.traces + "/normal");
    {
        auto os = run.open("dataset.csv");
        features::write_csv(os, data);
    }
    run.write_json("files.json", files);
    run.config()["traces"] = o.traces;
    run.config()["layout"] = o.layout.empty() ? "default" : o.layout;
    run.log() << "featurize: " << data.size() << " traces, " << skipped << " unparseable lines skipped\n";
}

// ---------------------------------------------------------------------------
// models

struct TrainOptions {
    std::string data, layout, model = "dnn";
    std::size_t epochs = 70, batch = 100;
    double l1 = -1.0, l2 = -1.0;
};

inline nn::TrainConfig train_config(std::size_t epochs, std::size_t batch, double l1, double l2, std::uint64_t seed) {
    nn::TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch;
    c.seed = seed;
    if (l1 >= 0.0) c.l1 = l1;
    if (l2 >= 0.0) c.l2 = l2;
    c.validate();
    return c;
}

inline json to_json(const nn::TrainConfig& c) {
    json j{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"seed", c.seed},
           {"shuffle", c.shuffle},
           {"adam", {{"alpha", c.adam.alpha}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}}};
    if (c.l1) j["l1"] = *c.l1;
    if (c.l2) j["l2"] = *c.l2;
    return j;
}

inline void cmd_train(Run& run, const TrainOptions& o, std::uint64_t seed) {
    const auto spec = nn::spec_for(o.model);
    const auto cfg = train_config(o.epochs, o.batch, o.l1, o.l2, seed);
    if (o.data.empty()) throw UsageError("train needs --data FILE");
    const auto layout = layout_from(o.layout);
    const auto raw = features::read_csv(o.data, layout);
    const auto split = eval::split_40_30_30(raw.labels(), seed);
    const auto scaler = features::fit_scaler(raw.subset(split.train));
    const auto tr = features::apply_scaler(scaler, raw.subset(split.train));
    const auto va = features::apply_scaler(scaler, raw.subset(split.val));
    const auto te = features::apply_scaler(scaler, raw.subset(split.test));

    const auto result = nn::train(spec, tr, &va, cfg, [&](std::size_t e, const nn::EpochStats& s) {
        if ((e + 1) % 10 == 0 || e == 0 || e + 1 == cfg.epochs)
            run.log() << "epoch " << e + 1 << "/" << cfg.epochs << " loss=" << format_fixed(s.train_loss, 4)
                      << " acc=" << format_fixed(s.train_acc, 4) << " val_acc=" << format_fixed(s.val_acc, 4) << '\n';
    });
    const auto scores = to_std(nn::predict(result.params, te));
    auto rep = eval::evaluate_scores(scores, te.labels());
    rep.n_train = tr.size();
    rep.train_seconds = result.history.wall_time;

    nn::save_model(run.path("model.bin").string(), result.params);
    json meta = to_json(cfg);
    meta["wall_time_s"] = result.history.wall_time;
    meta["data"] = o.data;
    meta["split"] = {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}};
    run.write_json("model.json", nn::model_sidecar(result.params, meta));
    run.write_json("scaler.json", features::to_json(scaler));
    {
        auto os = run.open("history.csv");
        os << "epoch,train_loss,train_acc,val_loss,val_acc\n";
        for (std::size_t e = 0; e < result.history.epochs.size(); ++e) {
            const auto& s = result.history.epochs[e];
            os << e + 1 << ',' << format_double(s.train_loss) << ',' << format_double(s.train_acc) << ','
               << format_double(s.val_loss) << ',' << format_double(s.val_acc) << '\n';
        }
    }
    run.write_json("test_report.json", eval::to_json(rep));
    run.config()["model"] = nn::to_json(spec);
    run.config()["train"] = to_json(cfg);
    run.config()["data"] = o.data;
    run.config()["layout"] = o.layout.empty() ? "default" : o.layout;
    run.log() << "train: test acc=" << format_fixed(rep.metrics.acc, 4) << " auc=" << format_fixed(rep.auc, 4)
              << " far=" << format_fixed(rep.metrics.far, 4) << " (" << format_fixed(result.history.wall_time, 3)
              << " s)\n";
}

struct EvaluateOptions {
    std::string data, layout, weights, scaler;
    double threshold = 0.5;
};

inline void cmd_evaluate(Run& run, const EvaluateOptions& o) {
    if (o.data.empty() || o.weights.empty() || o.scaler.empty())
        throw UsageError("evaluate needs --data, --weights and --scaler");
    const auto layout = layout_from(o.layout);
    const auto params = nn::load_model(o.weights);
    const auto data = features::apply_scaler(load_scaler(o.scaler), features::read_csv(o.data, layout));
    const auto scores = to_std(nn::predict(params, data));
    const auto labels = data.labels();
    eval::FoldReport rep;
    rep.n_test = labels.size();
    rep.confusion = eval::confusion_at(scores, labels, o.threshold);
    rep.metrics = eval::metrics(rep.confusion);
    rep.auc = eval::roc_auc(scores, labels);
    run.write_json("report.json", eval::to_json(rep, false));
    {
        auto os = run.open("scores.csv");
        os << "index,label,score\n";
        for (std::size_t i = 0; i < scores.size(); ++i) os << i << ',' << labels[i] << ',' << format_double(scores[i]) << '\n';
    }
    run.config()["data"] = o.data;
    run.config()["weights"] = o.weights;
    run.config()["scaler"] = o.scaler;
    run.config()["threshold"] = o.threshold;
    run.log() << "evaluate: acc=" << format_fixed(rep.metrics.acc, 4) << " auc=" << format_fixed(rep.auc, 4) << '\n';
}

struct CvOptions {
    std::string data, layout, model = "all";
    std::size_t folds = 10, epochs = 70, batch = 100, jobs = 1;
};

inline void cmd_cv(Run& run, const CvOptions& o, std::uint64_t seed) {
    std::vector<std::string> models;
    if (o.model == "all")
        models = {"dnn", "cnn", "lstm"};
    else
        models = {o.model};
    const auto cfg = train_config(o.epochs, o.batch, -1.0, -1.0, seed);
    if (o.data.empty()) throw UsageError("cv needs --data FILE");
    const auto layout = layout_from(o.layout);
    const auto raw = features::read_csv(o.data, layout);
    // the held-out folds share the corpus-wide min/max
    const auto data = features::apply_scaler(features::fit_scaler(raw), raw);

    std::vector<eval::CvReport> reports;
    json all = json::array();
    for (const auto& m : models) {
        eval::CvOptions copt;
        copt.jobs = o.jobs;
        copt.on_fold = [&](std::size_t f, const eval::FoldReport& r) {
            run.log() << m << " fold " << f + 1 << "/" << o.folds << " acc=" << format_fixed(r.metrics.acc, 4)
                      << " auc=" << format_fixed(r.auc, 4) << " (" << format_fixed(r.train_seconds, 2) << " s)\n";
        };
        reports.push_back(eval::cross_validate(nn::spec_for(m), data, o.folds, cfg, copt));
        all.push_back(eval::to_json(reports.back()));
    }
    run.write_json("cv_report.json", {{"reports", all}});
    run.write("table.txt", eval::render_table(reports));
    {
        auto os = run.open("folds.csv");
        for (std::size_t i = 0; i < reports.size(); ++i) {
            std::ostringstream tmp;
            eval::write_folds_csv(tmp, reports[i]);
            auto text = tmp.str();
            if (i > 0) text = text.substr(text.find('\n') + 1);
            os << text;
        }
    }
    run.config()["models"] = models;
    run.config()["folds"] = o.folds;
    run.config()["train"] = to_json(cfg);
    run.config()["jobs"] = o.jobs;
    run.config()["data"] = o.data;
    run.config()["layout"] = o.layout.empty() ? "default" : o.layout;
    run.log() << eval::render_table(reports);
}

struct MeshOptions {
    std::string scenario, weights, scaler, layout, propagation = "global";
    double drop = 0.0, threshold = 0.5;
    std::size_t retries = 3, nodes = 1;
    std::uint64_t latency = 1, ack_timeout = 3;
};

inline void cmd_mesh(Run& run, const MeshOptions& o, std::uint64_t seed) {
    if (o.scenario.empty() || o.weights.empty() || o.scaler.empty())
        throw UsageError("mesh needs --scenario, --weights and --scaler");
    mesh::BusConfig bus{o.latency, o.drop, o.retries, o.ack_timeout, seed};
    bus.validate();
    mesh::MeshConfig mc;
    mc.nodes_per_layer.fill(o.nodes);
    if (o.nodes == 0) throw ConfigError("--nodes must be >= 1");
    mc.propagation = o.propagation == "downstream" ? mesh::Propagation::Downstream : mesh::Propagation::Global;

    mesh::Detector det;
    det.model = std::make_shared<const nn::ModelParams>(nn::load_model(o.weights));
    det.scaler = load_scaler(o.scaler);
    det.threshold = o.threshold;
    det.validate();
    const auto layout = layout_from(o.layout);

    std::ifstream in(o.scenario);
    if (!in) throw DataError("cannot open scenario " + o.scenario);
    const auto lines = mesh::parse_scenario(in, o.scenario);
    const auto base = fs::path(o.scenario).parent_path().string();
    const auto injections = mesh::resolve_scenario(lines, mc, layout, det.scaler, base);
    const auto result = mesh::run_mesh_sim(injections, mc, bus, det);

    run.write("transcript.csv", mesh::transcript_csv(result));
    {
        auto os = run.open("states.csv");
        os << "node,mitigation,alerts_seen\n";
        for (const auto& [id, st] : result.states)
            os << id.str() << ',' << mesh::to_string(st.mitigation) << ',' << st.seen_alerts.size() << '\n';
    }
    run.write_json("summary.json", {{"alerts", result.alerts.size()},
                                    {"events", result.transcript.size()},
                                    {"deliveries", result.count("deliver")},
                                    {"drops", result.count("drop")}});
    run.config()["bus"] = {{"latency", bus.latency},
                           {"drop_probability", bus.drop_probability},
                           {"max_retries", bus.max_retries},
                           {"ack_timeout", bus.ack_timeout},
                           {"seed", bus.seed}};
    run.config()["nodes_per_layer"] = o.nodes;
    run.config()["propagation"] = o.propagation;
    run.config()["threshold"] = o.threshold;
    run.config()["scenario"] = o.scenario;
    run.config()["weights"] = o.weights;
    run.config()["scaler"] = o.scaler;
    run.log() << "mesh: " << result.alerts.size() << " alerts, " << result.transcript.size() << " events\n";
    for (const auto& [id, st] : result.states) run.log() << "  " << id.str() << ' ' << mesh::to_string(st.mitigation) << '\n';
}

// ---------------------------------------------------------------------------

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"EV charging plant attack simulator and ransomware detection toolkit", "evrdf"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string out_dir = "out";
    std::uint64_t seed = 1;
    const auto common = [&](CLI::App* sub) {
        sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
        sub->add_option("--seed", seed, "Random seed")->capture_default_str();
    };
    std::function<void(Run&)> action;

    SimulateOptions so;
    auto* sim = app.add_subcommand("simulate", "Run the supervised plant with and without an attack");
    common(sim);
    sim->add_option("--attack", so.attack, "none, ddos or fdi")
        ->check(CLI::IsMember({"none", "ddos", "fdi"}))
        ->capture_default_str();
    sim->add_option("--delay", so.delay, "DDoS command latency, seconds")->capture_default_str();
    sim->add_option("--low", so.low, "Low SOC threshold, percent (injected under fdi)");
    sim->add_option("--high", so.high, "High SOC threshold, percent (injected under fdi)");
    sim->add_option("--scenario", so.scenario, "Attack scenario JSON (overrides --attack)");
    sim->add_option("--params", so.params, "Plant parameter JSON");
    sim->callback([&] { action = [&](Run& r) { cmd_simulate(r, so, seed); }; });

    SweepOptions wo;
    auto* sweep = app.add_subcommand("attack-impact", "DDoS delay sweep and FDI threshold sweep");
    common(sweep);
    sweep->add_option("--delays", wo.delays, "DDoS delays, seconds")->delimiter(',')->capture_default_str();
    sweep->add_option("--fdi", wo.fdi, "Injected threshold pairs LOW:HIGH")->delimiter(',')->capture_default_str();
    sweep->add_option("--params", wo.params, "Plant parameter JSON");
    sweep->callback([&] { action = [&](Run& r) { cmd_attack_impact(r, wo, seed); }; });

    GenOptions go;
    auto* gen = app.add_subcommand("gen-data", "Generate a labelled synthetic opcode corpus");
    common(gen);
    gen->add_option("--n-ransomware", go.n_ransomware)->capture_default_str();
    gen->add_option("--n-normal", go.n_normal)->capture_default_str();
    gen->add_option("--separation", go.separation, "0 = identical classes, 1 = disjoint supports")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    gen->add_flag("--traces", go.traces, "Also write the instruction traces");
    gen->add_option("--layout", go.layout, "Feature layout manifest");
    gen->callback([&] { action = [&](Run& r) { cmd_gen_data(r, go, seed); }; });

    FeaturizeOptions fo;
    auto* feat = app.add_subcommand("featurize", "Featurize traces under DIR/ransomware and DIR/normal");
    common(feat);
    feat->add_option("--traces", fo.traces, "Trace directory");
    feat->add_option("--layout", fo.layout, "Feature layout manifest");
    feat->callback([&] { action = [&](Run& r) { cmd_featurize(r, fo); }; });

    TrainOptions to;
    auto* tr = app.add_subcommand("train", "Train one model on a 40/30/30 split");
    common(tr);
    tr->add_option("--data", to.data, "Dataset CSV (raw counts)");
    tr->add_option("--layout", to.layout, "Feature layout manifest");
    tr->add_option("--model", to.model)->check(CLI::IsMember({"dnn", "cnn", "lstm"}))->capture_default_str();
    tr->add_option("--epochs", to.epochs)->capture_default_str();
    tr->add_option("--batch", to.batch)->capture_default_str();
    tr->add_option("--l1", to.l1, "Override the L1 coefficient");
    tr->add_option("--l2", to.l2, "Override the L2 coefficient");
    tr->callback([&] { action = [&](Run& r) { cmd_train(r, to, seed); }; });

    EvaluateOptions eo;
    auto* ev = app.add_subcommand("evaluate", "Score a dataset with a trained model");
    common(ev);
    ev->add_option("--data", eo.data, "Dataset CSV (raw counts)");
    ev->add_option("--layout", eo.layout, "Feature layout manifest");
    ev->add_option("--weights", eo.weights, "model.bin from train");
    ev->add_option("--scaler", eo.scaler, "scaler.json from train");
    ev->add_option("--threshold", eo.threshold, "Flag ransomware when P(normal) < threshold")->capture_default_str();
    ev->callback([&] { action = [&](Run& r) { cmd_evaluate(r, eo); }; });

    CvOptions co;
    auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
    common(cv);
    cv->add_option("--data", co.data, "Dataset CSV (raw counts)");
    cv->add_option("--layout", co.layout, "Feature layout manifest");
    cv->add_option("--model", co.model)->check(CLI::IsMember({"dnn", "cnn", "lstm", "all"}))->capture_default_str();
    cv->add_option("--folds", co.folds)->capture_default_str();
    cv->add_option("--epochs", co.epochs)->capture_default_str();
    cv->add_option("--batch", co.batch)->capture_default_str();
    cv->add_option("--jobs", co.jobs, "Folds trained in parallel")->capture_default_str();
    cv->callback([&] { action = [&](Run& r) { cmd_cv(r, co, seed); }; });

    MeshOptions mo;
    auto* me = app.add_subcommand("mesh", "Replay a scenario through the detection mesh");
    common(me);
    me->add_option("--scenario", mo.scenario, "Lines tick,node,ref");
    me->add_option("--weights", mo.weights, "model.bin from train");
    me->add_option("--scaler", mo.scaler, "scaler.json from train");
    me->add_option("--layout", mo.layout, "Feature layout manifest");
    me->add_option("--drop", mo.drop, "Per-message drop probability")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    me->add_option("--retries", mo.retries)->capture_default_str();
    me->add_option("--latency", mo.latency, "Ticks per hop")->capture_default_str();
    me->add_option("--ack-timeout", mo.ack_timeout, "Ticks before a resend")->capture_default_str();
    me->add_option("--threshold", mo.threshold, "Alert when the ransomware score reaches this")->capture_default_str();
    me->add_option("--nodes", mo.nodes, "Nodes per layer")->capture_default_str();
    me->add_option("--propagation", mo.propagation)
        ->check(CLI::IsMember({"global", "downstream"}))
        ->capture_default_str();
    me->callback([&] { action = [&](Run& r) { cmd_mesh(r, mo, seed); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, err, err);
        return 2;
    }

    std::vector<std::string> args(argv + 1, argv + argc);
    const auto* chosen = app.get_subcommands().front();
    Run run(chosen->get_name(), args, out_dir, out);
    run.config()["seed"] = seed;
    try {
        action(run);
        run.finish();
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n" << chosen->help();
        return 2;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    std::vector<const char*> argv{"evrdf"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace evrdf::cli
