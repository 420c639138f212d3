#pragma once

// Tensors, architecture specs and parameter containers shared by the three
// classifiers.

#include <cstdint>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "evrdf/common.hpp"

namespace evrdf::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;  ///< logical shape; `value` holds it row-major
    Matrix value;
    bool is_weight = true;           ///< weights are regularized, biases are not

    std::size_t size() const { return static_cast<std::size_t>(value.size()); }
};

using Gradients = std::vector<Matrix>;

/// Two hidden ReLU layers feeding one sigmoid unit.
struct DnnSpec {
    std::size_t input = 140;
    std::vector<std::size_t> hidden{64, 64};
    double l1 = 1e-5;
    double l2 = 1e-5;

    friend bool operator==(const DnnSpec&, const DnnSpec&) = default;
};

struct ConvLayerSpec {
    std::size_t filters = 64;
    std::size_t kernel = 3;

    friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

/// Valid stride-1 convolutions, each followed by ReLU and max-pooling, then a
/// dropout-regularized dense layer.
struct CnnSpec {
    std::size_t input_len = 140;
    std::size_t channels_in = 1;
    std::vector<ConvLayerSpec> conv{{64, 3}, {64, 3}};
    std::size_t pool = 2;
    std::size_t fc = 128;
    double dropout = 0.5;
    double l1 = 0.0;
    double l2 = 0.0;

    friend bool operator==(const CnnSpec&, const CnnSpec&) = default;
};

/// Stacked LSTM over the feature vector read as a sequence; the last hidden
/// state of the top layer feeds the sigmoid unit.
struct LstmSpec {
    std::vector<std::size_t> units{64, 64, 64};
    std::size_t seq_len = 140;
    std::size_t features_per_step = 1;
    double inter_layer_dropout = 0.1;
    double l1 = 0.0;
    double l2 = 0.0;

    friend bool operator==(const LstmSpec&, const LstmSpec&) = default;
};

using ModelSpec = std::variant<DnnSpec, CnnSpec, LstmSpec>;

inline std::string model_name(const ModelSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::string {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, DnnSpec>) return "dnn";
            else if constexpr (std::is_same_v<S, CnnSpec>) return "cnn";
            else return "lstm";
        },
        spec);
}

inline ModelSpec spec_for(std::string_view name) {
    if (name == "dnn") return DnnSpec{};
    if (name == "cnn") return CnnSpec{};
    if (name == "lstm") return LstmSpec{};
    throw ConfigError("unknown model '" + std::string(name) + "' (expected dnn, cnn or lstm)");
}

inline std::size_t input_size(const ModelSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::size_t {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, DnnSpec>) return s.input;
            else if constexpr (std::is_same_v<S, CnnSpec>) return s.input_len * s.channels_in;
            else return s.seq_len * s.features_per_step;
        },
        spec);
}

struct Regularization {
    double l1 = 0.0;
    double l2 = 0.0;
};

inline Regularization spec_regularization(const ModelSpec& spec) {
    return std::visit([](const auto& s) { return Regularization{s.l1, s.l2}; }, spec);
}

/// Length after the conv/pool stack, or 0 when the input is too short.
inline std::size_t cnn_flat_length(const CnnSpec& s) {
    std::size_t len = s.input_len;
    for (const auto& c : s.conv) {
        if (len < c.kernel) return 0;
        len = (len - c.kernel + 1) / s.pool;
    }
    return len;
}

inline void validate(const ModelSpec& spec) {
    const auto bad = [](const std::string& m) { throw ConfigError("model spec: " + m); };
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if (s.l1 < 0.0 || s.l2 < 0.0) bad("regularization must be >= 0");
            if constexpr (std::is_same_v<S, DnnSpec>) {
                if (s.input == 0 || s.hidden.empty()) bad("dnn needs input > 0 and at least one hidden layer");
                for (auto h : s.hidden)
                    if (h == 0) bad("hidden widths must be > 0");
            } else if constexpr (std::is_same_v<S, CnnSpec>) {
                if (s.input_len == 0 || s.channels_in == 0 || s.conv.empty() || s.pool == 0 || s.fc == 0)
                    bad("cnn dimensions must be positive");
                for (const auto& c : s.conv)
                    if (c.filters == 0 || c.kernel == 0) bad("conv filters and kernel must be > 0");
                if (cnn_flat_length(s) == 0) bad("input too short for the conv/pool stack");
                if (!(s.dropout >= 0.0 && s.dropout < 1.0)) bad("dropout must be in [0, 1)");
            } else {
                if (s.units.empty() || s.seq_len == 0 || s.features_per_step == 0)
                    bad("lstm dimensions must be positive");
                for (auto u : s.units)
                    if (u == 0) bad("lstm units must be > 0");
                if (!(s.inter_layer_dropout >= 0.0 && s.inter_layer_dropout < 1.0))
                    bad("dropout must be in [0, 1)");
            }
        },
        spec);
}

struct ModelParams {
    ModelSpec spec;
    std::uint64_t seed = 0;
    std::vector<Tensor> tensors;

    std::size_t parameter_count() const {
        return std::accumulate(tensors.begin(), tensors.end(), std::size_t{0},
                               [](std::size_t a, const Tensor& t) { return a + t.size(); });
    }

    double sum_squared_weights() const {
        double s = 0.0;
        for (const auto& t : tensors)
            if (t.is_weight) s += t.value.squaredNorm();
        return s;
    }
};

inline bool operator==(const ModelParams& a, const ModelParams& b) {
    if (!(a.spec == b.spec) || a.seed != b.seed || a.tensors.size() != b.tensors.size()) return false;
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
        const auto& x = a.tensors[i];
        const auto& y = b.tensors[i];
        if (x.name != y.name || x.shape != y.shape || x.is_weight != y.is_weight) return false;
        if (x.value.rows() != y.value.rows() || x.value.cols() != y.value.cols() || x.value != y.value) return false;
    }
    return true;
}

inline Gradients zero_gradients(const ModelParams& p) {
    Gradients g;
    g.reserve(p.tensors.size());
    for (const auto& t : p.tensors) g.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
    return g;
}

/// l1 * sum|w| + l2 * sum w^2 over weight tensors.
inline double regularization_penalty(const ModelParams& p, const Regularization& reg) {
    double pen = 0.0;
    for (const auto& t : p.tensors) {
        if (!t.is_weight) continue;
        if (reg.l1 != 0.0) pen += reg.l1 * t.value.cwiseAbs().sum();
        if (reg.l2 != 0.0) pen += reg.l2 * t.value.squaredNorm();
    }
    return pen;
}

/// Adds the (sub)gradient of the penalty: l1 * sign(w) (0 at w = 0) + 2 l2 w.
inline void add_regularization_gradient(const ModelParams& p, const Regularization& reg, Gradients& g) {
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
        const auto& t = p.tensors[i];
        if (!t.is_weight) continue;
        if (reg.l1 != 0.0) g[i].array() += reg.l1 * t.value.array().sign();
        if (reg.l2 != 0.0) g[i].array() += 2.0 * reg.l2 * t.value.array();
    }
}

// ---------------------------------------------------------------------------
// Elementwise helpers

template <class Derived>
inline auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
    return 1.0 / (1.0 + (-x).exp());
}

/// tanh through the vectorized exp; saturates cleanly to +-1.
template <class Derived>
inline auto fast_tanh(const Eigen::ArrayBase<Derived>& x) {
    return 2.0 / (1.0 + (-2.0 * x).exp()) - 1.0;
}

inline void relu_inplace(Matrix& x) { x = x.cwiseMax(0.0); }

/// Inverted-dropout mask: 0 with probability `rate`, else 1 / (1 - rate).
inline Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Matrix m(rows, cols);
    const double keep = 1.0 / (1.0 - rate);
    double* d = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) d[i] = unit_uniform(rng) < rate ? 0.0 : keep;
    return m;
}

/// Uniform(-limit, limit) fill, row-major order.
inline void fill_uniform(Matrix& m, double limit, Rng& rng) {
    double* d = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) d[i] = uniform(rng, -limit, limit);
}

/// Order-sensitive hash of a boolean pattern; used to detect activation kinks.
class PatternHash {
public:
    void add(bool bit) {
        h_ ^= static_cast<std::uint64_t>(bit) + 0x9E3779B97F4A7C15ULL + (h_ << 6) + (h_ >> 2);
    }
    void add_index(std::uint64_t v) { h_ ^= v + 0x9E3779B97F4A7C15ULL + (h_ << 6) + (h_ >> 2); }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

template <class Derived>
inline void hash_positive(PatternHash& h, const Eigen::MatrixBase<Derived>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) h.add(m(r, c) > 0.0);
}

// ---------------------------------------------------------------------------
// JSON descriptors

inline nlohmann::json to_json(const ModelSpec& spec) {
    nlohmann::json j;
    j["model"] = model_name(spec);
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            j["l1"] = s.l1;
            j["l2"] = s.l2;
            if constexpr (std::is_same_v<S, DnnSpec>) {
                j["input"] = s.input;
                j["hidden"] = s.hidden;
            } else if constexpr (std::is_same_v<S, CnnSpec>) {
                j["input_len"] = s.input_len;
                j["channels_in"] = s.channels_in;
                nlohmann::json conv = nlohmann::json::array();
                for (const auto& c : s.conv) conv.push_back({{"filters", c.filters}, {"kernel", c.kernel}});
                j["conv"] = conv;
                j["pool"] = s.pool;
                j["fc"] = s.fc;
                j["dropout"] = s.dropout;
            } else {
                j["units"] = s.units;
                j["seq_len"] = s.seq_len;
                j["features_per_step"] = s.features_per_step;
                j["inter_layer_dropout"] = s.inter_layer_dropout;
            }
        },
        spec);
    return j;
}

inline ModelSpec spec_from_json(const nlohmann::json& j) {
    try {
        const auto name = j.at("model").get<std::string>();
        ModelSpec spec = spec_for(name);
        std::visit(
            [&](auto& s) {
                using S = std::decay_t<decltype(s)>;
                s.l1 = j.at("l1").get<double>();
                s.l2 = j.at("l2").get<double>();
                if constexpr (std::is_same_v<S, DnnSpec>) {
                    s.input = j.at("input").get<std::size_t>();
                    s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
                } else if constexpr (std::is_same_v<S, CnnSpec>) {
                    s.input_len = j.at("input_len").get<std::size_t>();
                    s.channels_in = j.at("channels_in").get<std::size_t>();
                    s.conv.clear();
                    for (const auto& c : j.at("conv"))
                        s.conv.push_back({c.at("filters").get<std::size_t>(), c.at("kernel").get<std::size_t>()});
                    s.pool = j.at("pool").get<std::size_t>();
                    s.fc = j.at("fc").get<std::size_t>();
                    s.dropout = j.at("dropout").get<double>();
                } else {
                    s.units = j.at("units").get<std::vector<std::size_t>>();
                    s.seq_len = j.at("seq_len").get<std::size_t>();
                    s.features_per_step = j.at("features_per_step").get<std::size_t>();
                    s.inter_layer_dropout = j.at("inter_layer_dropout").get<double>();
                }
            },
            spec);
        validate(spec);
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model spec: ") + e.what());
    }
}

}  // namespace evrdf::nn
