#pragma once

// Stratified k-fold cross-validation, 40/30/30 splits, and the metric suite.
// Ransomware (label 0) is the positive class throughout.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "evrdf/common.hpp"
#include "evrdf/features.hpp"
#include "evrdf/nn.hpp"

namespace evrdf::eval {

using features::kLabelNormal;
using features::kLabelRansomware;

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    friend bool operator==(const Confusion&, const Confusion&) = default;
};

inline void check_binary(const std::vector<int>& labels) {
    for (int y : labels)
        if (y != 0 && y != 1) throw DataError("labels must be 0 or 1 (got " + std::to_string(y) + ")");
}

/// `scores` are probabilities of the normal class; a sample is flagged as
/// ransomware iff its score is strictly below `threshold`.
inline Confusion confusion_at(const std::vector<double>& scores, const std::vector<int>& labels,
                              double threshold = 0.5) {
    if (scores.size() != labels.size())
        throw DataError("confusion: " + std::to_string(scores.size()) + " scores vs " +
                        std::to_string(labels.size()) + " labels");
    check_binary(labels);
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool flagged = scores[i] < threshold;
        const bool ransom = labels[i] == kLabelRansomware;
        if (flagged && ransom) ++c.tp;
        else if (flagged) ++c.fp;
        else if (ransom) ++c.fn;
        else ++c.tn;
    }
    return c;
}

struct Metrics {
    double acc = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0, far = 0.0;
    /// Metrics whose denominator was zero; their value is defined as 0.
    std::vector<std::string> degenerate;

    bool is_degenerate(std::string_view name) const {
        return std::find(degenerate.begin(), degenerate.end(), name) != degenerate.end();
    }
};

inline Metrics metrics(const Confusion& c) {
    if (c.total() == 0) throw DataError("metrics: empty confusion matrix");
    Metrics m;
    const auto ratio = [&](std::size_t num, std::size_t den, const char* name) {
        if (den == 0) {
            m.degenerate.emplace_back(name);
            return 0.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.acc = ratio(c.tp + c.tn, c.total(), "acc");
    m.precision = ratio(c.tp, c.tp + c.fp, "precision");
    m.recall = ratio(c.tp, c.tp + c.fn, "recall");
    m.far = ratio(c.fp, c.fp + c.tn, "far");
    // 2PR/(P+R) rewritten over the counts, so one rounding
    if (c.tp == 0) {
        m.degenerate.emplace_back("f1");
        m.f1 = 0.0;
    } else {
        m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, "f1");
    }
    return m;
}

/// Mann-Whitney AUC: (concordant + 0.5 tied) / (#pos * #neg) over all
/// positive/negative pairs, where a pair is concordant when the positive has
/// the higher `likelihood`.
inline double auc_mann_whitney(const std::vector<double>& likelihood, const std::vector<bool>& positive) {
    if (likelihood.size() != positive.size()) throw DataError("auc: length mismatch");
    std::vector<std::size_t> order(likelihood.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return likelihood[a] < likelihood[b]; });

    std::size_t n_pos = 0, n_neg = 0, neg_below = 0;
    double concordant = 0.0, tied = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i, p = 0, n = 0;
        while (j < order.size() && likelihood[order[j]] == likelihood[order[i]]) {
            (positive[order[j]] ? p : n) += 1;
            ++j;
        }
        concordant += static_cast<double>(p) * static_cast<double>(neg_below);
        tied += static_cast<double>(p) * static_cast<double>(n);
        neg_below += n;
        n_pos += p;
        n_neg += n;
        i = j;
    }
    if (n_pos == 0 || n_neg == 0) throw DataError("auc: both classes must be present");
    return (concordant + 0.5 * tied) / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// AUC for normal-class probabilities: ransomware-likeness is 1 - score.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw DataError("auc: length mismatch");
    check_binary(labels);
    std::vector<double> like(scores.size());
    std::vector<bool> pos(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        like[i] = -scores[i];  // exact negation keeps every tie and ordering
        pos[i] = labels[i] == kLabelRansomware;
    }
    return auc_mann_whitney(like, pos);
}

// ---------------------------------------------------------------------------
// Splitting

/// Folds are filled round-robin class by class after a seeded shuffle; the
/// fold counter carries over between classes so fold sizes stay balanced.
inline std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels, std::size_t k,
                                                              std::uint64_t seed) {
    check_binary(labels);
    if (k < 2) throw ConfigError("folds: k must be >= 2");
    std::vector<std::vector<std::size_t>> by_class(2);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    for (int c = 0; c < 2; ++c)
        if (by_class[static_cast<std::size_t>(c)].size() < k)
            throw ConfigError("folds: class " + std::to_string(c) + " has " +
                              std::to_string(by_class[static_cast<std::size_t>(c)].size()) +
                              " samples, fewer than k = " + std::to_string(k));
    Rng rng(derive_seed(seed, 0xF01D));
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t slot = 0;
    for (auto& members : by_class) {
        shuffle(members, rng);
        for (auto i : members) folds[slot++ % k].push_back(i);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

namespace detail {

/// Largest-remainder apportionment of `total` over `weights`, never giving a
/// part more than its capacity.
inline std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& weights,
                                          const std::vector<std::size_t>& capacity) {
    const double sum = static_cast<double>(std::accumulate(weights.begin(), weights.end(), std::size_t{0}));
    std::vector<std::size_t> out(weights.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t given = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double q = static_cast<double>(total) * static_cast<double>(weights[i]) / sum;
        out[i] = std::min(static_cast<std::size_t>(std::floor(q)), capacity[i]);
        given += out[i];
        rem.emplace_back(q - std::floor(q), i);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    while (given < total) {
        bool moved = false;
        for (const auto& r : rem) {
            if (given == total) break;
            if (out[r.second] < capacity[r.second]) {
                ++out[r.second];
                ++given;
                moved = true;
            }
        }
        if (!moved) throw ConfigError("split: capacity exhausted");
    }
    return out;
}

}  // namespace detail

/// Stratified split with sizes round(0.4 N), round(0.3 N) and the remainder.
inline SplitIndices split_40_30_30(const std::vector<int>& labels, std::uint64_t seed) {
    check_binary(labels);
    const std::size_t n = labels.size();
    if (n < 10) throw ConfigError("split: need at least 10 samples (got " + std::to_string(n) + ")");
    const auto n_train = static_cast<std::size_t>(std::llround(0.4 * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(0.3 * static_cast<double>(n)));

    std::vector<std::vector<std::size_t>> by_class(2);
    for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    const std::vector<std::size_t> sizes{by_class[0].size(), by_class[1].size()};
    const auto tr = detail::apportion(n_train, sizes, sizes);
    const std::vector<std::size_t> left{sizes[0] - tr[0], sizes[1] - tr[1]};
    const auto va = detail::apportion(n_val, sizes, left);

    Rng rng(derive_seed(seed, 0x5B17));
    SplitIndices s;
    for (std::size_t c = 0; c < 2; ++c) {
        auto& m = by_class[c];
        shuffle(m, rng);
        s.train.insert(s.train.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(tr[c]));
        s.val.insert(s.val.end(), m.begin() + static_cast<std::ptrdiff_t>(tr[c]),
                     m.begin() + static_cast<std::ptrdiff_t>(tr[c] + va[c]));
        s.test.insert(s.test.end(), m.begin() + static_cast<std::ptrdiff_t>(tr[c] + va[c]), m.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldReport {
    std::size_t fold = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    Confusion confusion;
    Metrics metrics;
    double auc = 0.0;
    double train_seconds = 0.0;
};

struct Stat {
    double mean = 0.0, std = 0.0, min = 0.0, max = 0.0;
};

/// Mean and population standard deviation.
inline Stat summarize(const std::vector<double>& v) {
    if (v.empty()) throw DataError("summarize: no values");
    Stat s;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    s.min = *lo;
    s.max = *hi;
    // keep the mean inside [min, max] despite rounding
    s.mean = std::clamp(std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()), s.min, s.max);
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size()));
    return s;
}

inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"acc", "auc", "precision", "recall", "f1", "far"};
    return names;
}

inline double metric_value(const FoldReport& f, std::string_view name) {
    if (name == "acc") return f.metrics.acc;
    if (name == "auc") return f.auc;
    if (name == "precision") return f.metrics.precision;
    if (name == "recall") return f.metrics.recall;
    if (name == "f1") return f.metrics.f1;
    if (name == "far") return f.metrics.far;
    throw ConfigError("unknown metric " + std::string(name));
}

struct CvReport {
    std::string model;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::vector<FoldReport> folds;
    std::map<std::string, Stat> summary;
    double train_seconds_total = 0.0;

    const Stat& stat(const std::string& metric) const { return summary.at(metric); }
};

inline void aggregate(CvReport& r) {
    r.summary.clear();
    for (const auto& name : metric_names()) {
        std::vector<double> v;
        for (const auto& f : r.folds) v.push_back(metric_value(f, name));
        r.summary[name] = summarize(v);
    }
    r.train_seconds_total = 0.0;
    for (const auto& f : r.folds) r.train_seconds_total += f.train_seconds;
}

inline FoldReport evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels) {
    FoldReport f;
    f.n_test = labels.size();
    f.confusion = confusion_at(scores, labels);
    f.metrics = metrics(f.confusion);
    f.auc = roc_auc(scores, labels);
    return f;
}

struct CvOptions {
    std::size_t jobs = 1;
    std::function<void(std::size_t fold, const FoldReport&)> on_fold;
};

/// Trains on k - 1 folds and scores the held-out fold, for every fold. Fold
/// f trains with seed derive_seed(cfg.seed, f); folds run on up to `jobs`
/// threads and are reported in fold order.
inline CvReport cross_validate(const nn::ModelSpec& spec, const features::Dataset& data, std::size_t k,
                               const nn::TrainConfig& cfg, const CvOptions& opt = {}) {
    cfg.validate();
    nn::validate(spec);
    const auto labels = data.labels();
    const auto folds = stratified_folds(labels, k, cfg.seed);
    const nn::Matrix x = nn::to_matrix(data);

    CvReport r;
    r.model = nn::model_name(spec);
    r.k = k;
    r.seed = cfg.seed;
    r.folds.resize(k);
    std::vector<std::exception_ptr> errors(k);
    std::atomic<std::size_t> next{0};
    std::mutex cb_mutex;

    const auto run_fold = [&](std::size_t f) {
        std::vector<std::size_t> train_idx;
        for (std::size_t g = 0; g < k; ++g)
            if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
        std::sort(train_idx.begin(), train_idx.end());
        const nn::Matrix xt = nn::gather_rows(x, train_idx);
        std::vector<int> yt;
        for (auto i : train_idx) yt.push_back(labels[i]);
        nn::TrainConfig fc = cfg;
        fc.seed = derive_seed(cfg.seed, f);
        const auto trained = nn::train(spec, xt, yt, {}, fc);

        const nn::Matrix xh = nn::gather_rows(x, folds[f]);
        std::vector<int> yh;
        for (auto i : folds[f]) yh.push_back(labels[i]);
        const nn::Vector p = nn::predict(trained.params, xh);
        FoldReport rep = evaluate_scores(std::vector<double>(p.data(), p.data() + p.size()), yh);
        rep.fold = f;
        rep.n_train = train_idx.size();
        rep.train_seconds = trained.history.wall_time;
        r.folds[f] = rep;
        if (opt.on_fold) {
            std::lock_guard<std::mutex> lock(cb_mutex);
            opt.on_fold(f, rep);
        }
    };
    const auto worker = [&]() {
        for (std::size_t f; (f = next.fetch_add(1)) < k;) {
            try {
                run_fold(f);
            } catch (...) {
                errors[f] = std::current_exception();
            }
        }
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(opt.jobs, k));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    aggregate(r);
    return r;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {
inline std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return buf;
}
inline std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : std::string(w - s.size(), ' ') + s; }
inline std::string padr(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }
}  // namespace detail

/// Two aligned tables in percent: AUC/ACC mean and std per model, then
/// precision/recall/F1/FAR mean and std per model. Held-out fold metrics.
inline std::string render_table(const std::vector<CvReport>& reports) {
    using detail::pad;
    using detail::padr;
    using detail::pct;
    std::ostringstream os;
    const std::size_t k = reports.empty() ? 0 : reports.front().k;
    os << k << " FOLD STRATIFIED CROSS-VALIDATION (held-out folds, %)\n";
    const auto row = [&](const std::vector<std::string>& cells) {
        os << padr(cells[0], 6);
        for (std::size_t i = 1; i < cells.size(); ++i) os << ' ' << pad(cells[i], 10);
        os << '\n';
    };
    row({"Model", "AUC(Mean)", "AUC(std)", "ACC(Mean)", "ACC(std)"});
    for (const auto& r : reports)
        row({r.model, pct(r.stat("auc").mean), pct(r.stat("auc").std), pct(r.stat("acc").mean),
             pct(r.stat("acc").std)});
    os << '\n';
    const auto row2 = [&](const std::vector<std::string>& cells) {
        os << padr(cells[0], 6);
        for (std::size_t i = 1; i < cells.size(); ++i) os << ' ' << pad(cells[i], 7);
        os << '\n';
    };
    os << padr("", 6) << ' ' << padr("Precision", 15) << ' ' << padr("Recall", 15) << ' ' << padr("F1", 15) << ' '
       << "FAR\n";
    row2({"Model", "Mean", "std", "Mean", "std", "Mean", "std", "Mean", "std"});
    for (const auto& r : reports) {
        std::vector<std::string> cells{r.model};
        for (const char* m : {"precision", "recall", "f1", "far"}) {
            cells.push_back(pct(r.stat(m).mean));
            cells.push_back(pct(r.stat(m).std));
        }
        row2(cells);
    }
    return os.str();
}

inline nlohmann::json to_json(const Confusion& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}; }

inline nlohmann::json to_json(const FoldReport& f, bool timing = true) {
    nlohmann::json j{{"fold", f.fold},
                     {"n_train", f.n_train},
                     {"n_test", f.n_test},
                     {"confusion", to_json(f.confusion)},
                     {"acc", f.metrics.acc},
                     {"precision", f.metrics.precision},
                     {"recall", f.metrics.recall},
                     {"f1", f.metrics.f1},
                     {"far", f.metrics.far},
                     {"auc", f.auc},
                     {"degenerate", f.metrics.degenerate}};
    if (timing) j["train_seconds"] = f.train_seconds;
    return j;
}

inline nlohmann::json to_json(const CvReport& r) {
    nlohmann::json j;
    j["model"] = r.model;
    j["k"] = r.k;
    j["seed"] = r.seed;
    j["evaluated_on"] = "held-out folds";
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : r.folds) folds.push_back(to_json(f));
    j["folds"] = folds;
    nlohmann::json sum;
    for (const auto& [name, s] : r.summary) sum[name] = {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}};
    j["summary"] = sum;
    j["train_seconds_total"] = r.train_seconds_total;
    return j;
}

/// Per-fold metrics; timing is left out so the file is reproducible.
inline void write_folds_csv(std::ostream& os, const CvReport& r) {
    os << "model,fold,n_train,n_test,tp,fp,tn,fn,acc,precision,recall,f1,far,auc\n";
    for (const auto& f : r.folds) {
        os << r.model << ',' << f.fold << ',' << f.n_train << ',' << f.n_test << ',' << f.confusion.tp << ','
           << f.confusion.fp << ',' << f.confusion.tn << ',' << f.confusion.fn << ',' << format_double(f.metrics.acc)
           << ',' << format_double(f.metrics.precision) << ',' << format_double(f.metrics.recall) << ','
           << format_double(f.metrics.f1) << ',' << format_double(f.metrics.far) << ',' << format_double(f.auc)
           << '\n';
    }
}

}  // namespace evrdf::eval
