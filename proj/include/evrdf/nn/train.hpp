#pragma once

// Adam and the mini-batch training loop.

#include <chrono>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "evrdf/nn/model.hpp"

namespace evrdf::nn {

struct AdamConfig {
    double alpha = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const {
        if (!(alpha > 0.0)) throw ConfigError("adam: alpha must be > 0");
        if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
            throw ConfigError("adam: beta1 and beta2 must be in (0, 1)");
        if (!(epsilon > 0.0)) throw ConfigError("adam: epsilon must be > 0");
    }
};

struct AdamState {
    Gradients m;
    Gradients v;
    std::uint64_t t = 0;  ///< steps taken
};

inline AdamState adam_init(const ModelParams& p) { return {zero_gradients(p), zero_gradients(p), 0}; }

/// One bias-corrected Adam update; advances state.t.
inline void adam_step(ModelParams& p, const Gradients& g, AdamState& st, const AdamConfig& cfg) {
    if (g.size() != p.tensors.size() || st.m.size() != p.tensors.size())
        throw ShapeError("adam: gradient/state count does not match parameters");
    ++st.t;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
        auto m = st.m[i].array();
        auto v = st.v[i].array();
        const auto gi = g[i].array();
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * gi;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * gi.square();
        p.tensors[i].value.array() -= cfg.alpha * (m / c1) / ((v / c2).sqrt() + cfg.epsilon);
    }
}

struct TrainConfig {
    std::size_t batch_size = 100;
    std::size_t epochs = 70;
    AdamConfig adam{};
    /// Override the spec's regularization coefficients when set.
    std::optional<double> l1;
    std::optional<double> l2;
    std::uint64_t seed = 1;
    bool shuffle = true;

    void validate() const {
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if ((l1 && *l1 < 0.0) || (l2 && *l2 < 0.0)) throw ConfigError("train: l1/l2 must be >= 0");
        adam.validate();
    }

    Regularization regularization(const ModelSpec& spec) const {
        Regularization r = spec_regularization(spec);
        if (l1) r.l1 = *l1;
        if (l2) r.l2 = *l2;
        return r;
    }
};

struct EpochStats {
    double train_loss = 0.0;  ///< mean mini-batch loss, penalty included
    double train_acc = 0.0;   ///< on the training-mode predictions of the epoch
    double val_loss = 0.0;    ///< NaN without a validation set
    double val_acc = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    double wall_time = 0.0;  ///< seconds
};

struct TrainResult {
    ModelParams params;
    TrainHistory history;
};

/// Accuracy at threshold 0.5: predicted normal iff p >= 0.5.
inline double accuracy(const Vector& probs, const std::vector<int>& labels) {
    check_labels(probs, labels);
    std::size_t ok = 0;
    for (Eigen::Index i = 0; i < probs.size(); ++i)
        ok += (probs[i] >= 0.5 ? 1 : 0) == labels[static_cast<std::size_t>(i)];
    return static_cast<double>(ok) / static_cast<double>(probs.size());
}

using EpochCallback = std::function<void(std::size_t epoch, const EpochStats&)>;

struct Split {
    const Matrix* x = nullptr;
    const std::vector<int>* y = nullptr;
};

inline TrainResult train(const ModelSpec& spec, const Matrix& x, const std::vector<int>& y, Split val,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
    cfg.validate();
    validate(spec);
    if (x.rows() == 0) throw DataError("train: empty training set");
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw ShapeError("train: feature/label count mismatch");
    if ((val.x == nullptr) != (val.y == nullptr)) throw ConfigError("train: validation features and labels go together");

    const auto t0 = std::chrono::steady_clock::now();
    TrainResult r{build(spec, cfg.seed), {}};
    const Regularization reg = cfg.regularization(spec);
    AdamState st = adam_init(r.params);
    Rng order_rng(derive_seed(cfg.seed, 1));
    const std::uint64_t dropout_base = derive_seed(cfg.seed, 2);

    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        if (cfg.shuffle) shuffle(order, order_rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t end = std::min(n, start + cfg.batch_size);
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
            const Matrix xb = gather_rows(x, idx);
            std::vector<int> yb(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = y[idx[i]];

            const auto state = forward_state(r.params, xb, true, derive_seed(dropout_base, st.t));
            loss_sum += loss(state.probs, yb, r.params, reg) * static_cast<double>(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i)
                correct += (state.probs[static_cast<Eigen::Index>(i)] >= 0.5 ? 1 : 0) == yb[i];
            const Gradients g = backward(r.params, state, yb, reg);
            adam_step(r.params, g, st, cfg.adam);
        }
        EpochStats es;
        es.train_loss = loss_sum / static_cast<double>(n);
        es.train_acc = static_cast<double>(correct) / static_cast<double>(n);
        es.val_loss = es.val_acc = std::numeric_limits<double>::quiet_NaN();
        if (val.x && val.x->rows() > 0) {
            const Vector pv = predict(r.params, *val.x, 256);
            es.val_loss = loss(pv, *val.y, r.params, reg);
            es.val_acc = accuracy(pv, *val.y);
        }
        r.history.epochs.push_back(es);
        if (on_epoch) on_epoch(e, es);
    }
    r.history.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline TrainResult train(const ModelSpec& spec, const features::Dataset& train_set, const features::Dataset* val_set,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
    const Matrix x = to_matrix(train_set);
    const auto y = train_set.labels();
    if (!val_set) return train(spec, x, y, {}, cfg, on_epoch);
    const Matrix vx = to_matrix(*val_set);
    const auto vy = val_set->labels();
    return train(spec, x, y, {&vx, &vy}, cfg, on_epoch);
}

}  // namespace evrdf::nn
