#pragma once

#include <string>
#include <vector>

#include "evrdf/nn/core.hpp"

namespace evrdf::nn::dnn {

/// Post-activation outputs of every hidden layer; acts[0] is the input.
struct Cache {
    std::vector<Matrix> acts;
};

inline void init(const DnnSpec& s, Rng& rng, std::vector<Tensor>& out) {
    std::size_t fan_in = s.input;
    for (std::size_t l = 0; l < s.hidden.size(); ++l) {
        const auto h = s.hidden[l];
        Tensor w{"dense" + std::to_string(l) + ".W", {fan_in, h}, Matrix(fan_in, h), true};
        fill_uniform(w.value, std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
        out.push_back(std::move(w));
        out.push_back({"dense" + std::to_string(l) + ".b", {h}, Matrix::Zero(1, h), false});
        fan_in = h;
    }
    Tensor w{"out.W", {fan_in, 1}, Matrix(fan_in, 1), true};
    fill_uniform(w.value, std::sqrt(3.0 / static_cast<double>(fan_in)), rng);
    out.push_back(std::move(w));
    out.push_back({"out.b", {1}, Matrix::Zero(1, 1), false});
}

inline Vector forward(const DnnSpec& s, const std::vector<Tensor>& t, const Matrix& x, Cache* cache,
                      PatternHash* kinks) {
    Matrix a = x;
    if (cache) {
        cache->acts.clear();
        cache->acts.push_back(x);
    }
    for (std::size_t l = 0; l < s.hidden.size(); ++l) {
        Matrix z = a * t[2 * l].value;
        z.rowwise() += t[2 * l + 1].value.row(0);
        if (kinks) hash_positive(*kinks, z);
        relu_inplace(z);
        a = std::move(z);
        if (cache) cache->acts.push_back(a);
    }
    const std::size_t o = 2 * s.hidden.size();
    Vector logits = a * t[o].value.col(0);
    logits.array() += t[o + 1].value(0, 0);
    return logits;
}

inline void backward(const DnnSpec& s, const std::vector<Tensor>& t, const Cache& c, const Vector& dlogit,
                     Gradients& g) {
    const std::size_t o = 2 * s.hidden.size();
    g[o].noalias() += c.acts.back().transpose() * dlogit;
    g[o + 1](0, 0) += dlogit.sum();
    Matrix da = dlogit * t[o].value.transpose();
    for (std::size_t l = s.hidden.size(); l-- > 0;) {
        const Matrix& a = c.acts[l + 1];
        Matrix dz = (a.array() > 0.0).select(da.array(), 0.0).matrix();
        g[2 * l].noalias() += c.acts[l].transpose() * dz;
        g[2 * l + 1].row(0) += dz.colwise().sum();
        if (l > 0) da.noalias() = dz * t[2 * l].value.transpose();
    }
}

}  // namespace evrdf::nn::dnn
