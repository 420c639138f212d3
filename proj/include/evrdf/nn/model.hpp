#pragma once

// Architecture dispatch: build, forward, loss, backward, predict.

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include "evrdf/features.hpp"
#include "evrdf/nn/cnn.hpp"
#include "evrdf/nn/core.hpp"
#include "evrdf/nn/dnn.hpp"
#include "evrdf/nn/lstm.hpp"

namespace evrdf::nn {

inline constexpr double kProbClip = 1e-7;

inline ModelParams build(const ModelSpec& spec, std::uint64_t seed) {
    validate(spec);
    ModelParams p;
    p.spec = spec;
    p.seed = seed;
    Rng rng(derive_seed(seed, 0x1417));
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, DnnSpec>) dnn::init(s, rng, p.tensors);
            else if constexpr (std::is_same_v<S, CnnSpec>) cnn::init(s, rng, p.tensors);
            else lstm::init(s, rng, p.tensors);
        },
        spec);
    return p;
}

struct ForwardState {
    Vector probs;
    std::variant<dnn::Cache, cnn::Cache, lstm::Cache> cache;
};

inline void check_input(const ModelParams& p, const Matrix& x) {
    const auto n = input_size(p.spec);
    if (static_cast<std::size_t>(x.cols()) != n)
        throw ShapeError(model_name(p.spec) + " expects " + std::to_string(n) + " features per sample, got " +
                         std::to_string(x.cols()));
    if (x.rows() == 0) throw ShapeError("empty batch");
    if (!x.allFinite()) throw DataError("batch contains non-finite values");
}

namespace detail {

/// Sigmoid kept strictly inside (0, 1) in double precision.
inline Vector sigmoid_probs(const Vector& logits) {
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    Vector p(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i) p[i] = std::clamp(1.0 / (1.0 + std::exp(-logits[i])), lo, hi);
    return p;
}

inline Vector run(const ModelParams& p, const Matrix& x, bool training, std::uint64_t seed, ForwardState* st,
                  PatternHash* kinks) {
    check_input(p, x);
    Rng rng(seed);
    return std::visit(
        [&](const auto& s) -> Vector {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, DnnSpec>) {
                dnn::Cache* c = nullptr;
                if (st) c = &st->cache.template emplace<dnn::Cache>();
                return dnn::forward(s, p.tensors, x, c, kinks);
            } else if constexpr (std::is_same_v<S, CnnSpec>) {
                cnn::Cache* c = nullptr;
                if (st) c = &st->cache.template emplace<cnn::Cache>();
                return cnn::forward(s, p.tensors, x, training, rng, c, kinks);
            } else {
                lstm::Cache* c = nullptr;
                if (st) c = &st->cache.template emplace<lstm::Cache>();
                return lstm::forward(s, p.tensors, x, training, rng, c);
            }
        },
        p.spec);
}

}  // namespace detail

/// Probabilities of the normal class. `training` enables dropout with masks
/// drawn from `seed`.
inline Vector forward(const ModelParams& p, const Matrix& x, bool training = false, std::uint64_t seed = 0) {
    return detail::sigmoid_probs(detail::run(p, x, training, seed, nullptr, nullptr));
}

/// Forward pass that keeps what backward() needs.
inline ForwardState forward_state(const ModelParams& p, const Matrix& x, bool training, std::uint64_t seed) {
    ForwardState st;
    st.probs = detail::sigmoid_probs(detail::run(p, x, training, seed, &st, nullptr));
    return st;
}

/// Hash of every ReLU sign and pooling choice; equal hashes mean the same
/// piecewise-smooth region.
inline std::uint64_t activation_signature(const ModelParams& p, const Matrix& x) {
    PatternHash h;
    if (std::holds_alternative<LstmSpec>(p.spec)) return h.value();  // smooth everywhere
    detail::run(p, x, false, 0, nullptr, &h);
    return h.value();
}

inline void check_labels(const Vector& probs, const std::vector<int>& labels) {
    if (static_cast<std::size_t>(probs.size()) != labels.size())
        throw ShapeError("got " + std::to_string(labels.size()) + " labels for " + std::to_string(probs.size()) +
                         " predictions");
    for (int y : labels)
        if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
}

/// Mean binary cross-entropy with probabilities clipped to [1e-7, 1 - 1e-7].
inline double bce(const Vector& probs, const std::vector<int>& labels) {
    check_labels(probs, labels);
    double s = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        const double q = std::clamp(probs[i], kProbClip, 1.0 - kProbClip);
        s -= labels[static_cast<std::size_t>(i)] == 1 ? std::log(q) : std::log(1.0 - q);
    }
    return s / static_cast<double>(probs.size());
}

inline double loss(const Vector& probs, const std::vector<int>& labels, const ModelParams& p,
                   const Regularization& reg) {
    return bce(probs, labels) + regularization_penalty(p, reg);
}

inline Gradients backward(const ModelParams& p, const ForwardState& st, const std::vector<int>& labels,
                          const Regularization& reg) {
    check_labels(st.probs, labels);
    const auto n = st.probs.size();
    Vector dlogit(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double q = st.probs[i];
        // d(bce)/d(logit) = p - y, zero where the clip is active
        dlogit[i] = (q > kProbClip && q < 1.0 - kProbClip)
                        ? (q - labels[static_cast<std::size_t>(i)]) / static_cast<double>(n)
                        : 0.0;
    }
    Gradients g = zero_gradients(p);
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, DnnSpec>)
                dnn::backward(s, p.tensors, std::get<dnn::Cache>(st.cache), dlogit, g);
            else if constexpr (std::is_same_v<S, CnnSpec>)
                cnn::backward(s, p.tensors, std::get<cnn::Cache>(st.cache), dlogit, g);
            else
                lstm::backward(s, p.tensors, std::get<lstm::Cache>(st.cache), dlogit, g);
        },
        p.spec);
    add_regularization_gradient(p, reg, g);
    return g;
}

// ---------------------------------------------------------------------------
// Dataset bridging

inline Matrix to_matrix(const features::Dataset& d) {
    if (d.rows.empty()) return Matrix(0, static_cast<Eigen::Index>(d.layout.size()));
    const auto cols = d.rows.front().values.size();
    Matrix x(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.rows[i].values.size() != cols) throw ShapeError("ragged dataset rows");
        for (std::size_t j = 0; j < cols; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d.rows[i].values[j];
    }
    return x;
}

inline Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

/// Inference without dropout, `chunk` rows per forward pass. The default of
/// one row makes every score bit-identical to scoring that row on its own,
/// which is what a detection node does.
inline Vector predict(const ModelParams& p, const Matrix& x, std::size_t chunk = 1) {
    Vector out(x.rows());
    for (Eigen::Index start = 0; start < x.rows(); start += static_cast<Eigen::Index>(chunk)) {
        const auto n = std::min<Eigen::Index>(static_cast<Eigen::Index>(chunk), x.rows() - start);
        out.segment(start, n) = forward(p, x.middleRows(start, n));
    }
    return out;
}

inline Vector predict(const ModelParams& p, const features::Dataset& d) { return predict(p, to_matrix(d)); }

}  // namespace evrdf::nn
