#pragma once

// Stacked LSTM. Sequences are stored time-major as (steps * batch) x width
// matrices, so the rows of one time step are contiguous and the input
// projection of a whole layer is a single GEMM. Gate column blocks are
// ordered input, forget, cell, output.

#include <string>
#include <vector>

#include "evrdf/nn/core.hpp"

namespace evrdf::nn::lstm {

struct LayerCache {
    Matrix input;  ///< (T * B) x n_in, after inter-layer dropout
    Matrix gates;  ///< activated gates, (T * B) x 4H
    Matrix cell;   ///< (T * B) x H
    Matrix tcell;  ///< tanh(cell)
    Matrix hidden; ///< (T * B) x H
    Matrix mask;   ///< dropout mask applied to `hidden` before the next layer; may be empty
};

struct Cache {
    std::vector<LayerCache> layers;
};

inline void init(const LstmSpec& s, Rng& rng, std::vector<Tensor>& out) {
    std::size_t n_in = s.features_per_step;
    for (std::size_t l = 0; l < s.units.size(); ++l) {
        const std::size_t h = s.units[l];
        const std::string p = "lstm" + std::to_string(l);
        Tensor wx{p + ".Wx", {n_in, 4 * h}, Matrix(n_in, 4 * h), true};
        fill_uniform(wx.value, std::sqrt(3.0 / static_cast<double>(n_in)), rng);
        Tensor wh{p + ".Wh", {h, 4 * h}, Matrix(h, 4 * h), true};
        fill_uniform(wh.value, std::sqrt(3.0 / static_cast<double>(h)), rng);
        Tensor b{p + ".b", {4 * h}, Matrix::Zero(1, 4 * h), false};
        b.value.middleCols(h, h).setOnes();
        out.push_back(std::move(wx));
        out.push_back(std::move(wh));
        out.push_back(std::move(b));
        n_in = h;
    }
    const std::size_t h = s.units.back();
    Tensor w{"out.W", {h, 1}, Matrix(h, 1), true};
    fill_uniform(w.value, std::sqrt(3.0 / static_cast<double>(h)), rng);
    out.push_back(std::move(w));
    out.push_back({"out.b", {1}, Matrix::Zero(1, 1), false});
}

/// Reorders B x (T * F) samples into the time-major (T * B) x F layout.
inline Matrix to_time_major(const Matrix& x, std::size_t steps, std::size_t width) {
    const auto batch = static_cast<std::size_t>(x.rows());
    Matrix seq(steps * batch, width);
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < width; ++j) seq(t * batch + b, j) = x(b, t * width + j);
    return seq;
}

inline Vector forward(const LstmSpec& s, const std::vector<Tensor>& t, const Matrix& x, bool training, Rng& rng,
                      Cache* cache) {
    const auto B = static_cast<Eigen::Index>(x.rows());
    const auto T = static_cast<Eigen::Index>(s.seq_len);
    Matrix input = to_time_major(x, s.seq_len, s.features_per_step);
    if (cache) cache->layers.assign(s.units.size(), {});

    Matrix hidden;
    for (std::size_t l = 0; l < s.units.size(); ++l) {
        const auto H = static_cast<Eigen::Index>(s.units[l]);
        const Matrix& wx = t[3 * l].value;
        const Matrix& wh = t[3 * l + 1].value;

        Matrix gates = input * wx;
        gates.rowwise() += t[3 * l + 2].value.row(0);
        Matrix cell(T * B, H), tcell(T * B, H);
        hidden.resize(T * B, H);

        for (Eigen::Index k = 0; k < T; ++k) {
            auto g = gates.middleRows(k * B, B);
            if (k > 0) g.noalias() += hidden.middleRows((k - 1) * B, B) * wh;
            g.leftCols(2 * H).array() = sigmoid(g.leftCols(2 * H).array());
            g.middleCols(2 * H, H).array() = fast_tanh(g.middleCols(2 * H, H).array());
            g.rightCols(H).array() = sigmoid(g.rightCols(H).array());

            auto c = cell.middleRows(k * B, B);
            c.array() = g.leftCols(H).array() * g.middleCols(2 * H, H).array();
            if (k > 0) c.array() += g.middleCols(H, H).array() * cell.middleRows((k - 1) * B, B).array();
            tcell.middleRows(k * B, B).array() = fast_tanh(c.array());
            hidden.middleRows(k * B, B).array() = g.rightCols(H).array() * tcell.middleRows(k * B, B).array();
        }

        Matrix mask;
        const bool last = l + 1 == s.units.size();
        Matrix next;
        if (!last) {
            if (training && s.inter_layer_dropout > 0.0) {
                mask = dropout_mask(hidden.rows(), hidden.cols(), s.inter_layer_dropout, rng);
                next = hidden.cwiseProduct(mask);
            } else {
                next = hidden;
            }
        }
        if (cache) {
            auto& lc = cache->layers[l];
            lc.input = std::move(input);
            lc.gates = std::move(gates);
            lc.cell = std::move(cell);
            lc.tcell = std::move(tcell);
            lc.mask = std::move(mask);
            if (last)
                lc.hidden = hidden;
            else
                lc.hidden = std::move(hidden);
        }
        if (!last) input = std::move(next);
    }

    const std::size_t o = 3 * s.units.size();
    Vector logits = hidden.middleRows((T - 1) * B, B) * t[o].value.col(0);
    logits.array() += t[o + 1].value(0, 0);
    return logits;
}

inline void backward(const LstmSpec& s, const std::vector<Tensor>& t, const Cache& c, const Vector& dlogit,
                     Gradients& g) {
    const auto B = static_cast<Eigen::Index>(dlogit.size());
    const auto T = static_cast<Eigen::Index>(s.seq_len);
    const std::size_t o = 3 * s.units.size();

    const auto& top = c.layers.back();
    g[o].noalias() += top.hidden.middleRows((T - 1) * B, B).transpose() * dlogit;
    g[o + 1](0, 0) += dlogit.sum();

    Matrix dhseq = Matrix::Zero(T * B, static_cast<Eigen::Index>(s.units.back()));
    dhseq.middleRows((T - 1) * B, B) = dlogit * t[o].value.transpose();

    for (std::size_t l = s.units.size(); l-- > 0;) {
        const auto& lc = c.layers[l];
        const auto H = static_cast<Eigen::Index>(s.units[l]);
        const Matrix wh_t = t[3 * l + 1].value.transpose();

        Matrix dg(T * B, 4 * H);
        Matrix dh_next = Matrix::Zero(B, H);
        Matrix dc_next = Matrix::Zero(B, H);
        RowArray dc(B, H), dh(B, H);

        for (Eigen::Index k = T; k-- > 0;) {
            const auto gk = lc.gates.middleRows(k * B, B).array();
            const auto i = gk.leftCols(H);
            const auto f = gk.middleCols(H, H);
            const auto gg = gk.middleCols(2 * H, H);
            const auto og = gk.rightCols(H);
            const auto tc = lc.tcell.middleRows(k * B, B).array();

            dh = dhseq.middleRows(k * B, B).array() + dh_next.array();
            dc = dc_next.array() + dh * og * (1.0 - tc.square());

            auto d = dg.middleRows(k * B, B);
            d.leftCols(H).array() = dc * gg * i * (1.0 - i);
            if (k > 0)
                d.middleCols(H, H).array() = dc * lc.cell.middleRows((k - 1) * B, B).array() * f * (1.0 - f);
            else
                d.middleCols(H, H).setZero();
            d.middleCols(2 * H, H).array() = dc * i * (1.0 - gg.square());
            d.rightCols(H).array() = dh * tc * og * (1.0 - og);

            dc_next.array() = dc * f;
            dh_next.noalias() = d * wh_t;
        }

        g[3 * l].noalias() += lc.input.transpose() * dg;
        if (T > 1) g[3 * l + 1].noalias() += lc.hidden.topRows((T - 1) * B).transpose() * dg.bottomRows((T - 1) * B);
        g[3 * l + 2].row(0) += dg.colwise().sum();

        if (l > 0) {
            dhseq.noalias() = dg * t[3 * l].value.transpose();
            const auto& below = c.layers[l - 1];
            if (below.mask.size() > 0) dhseq.array() *= below.mask.array();
        }
    }
}

}  // namespace evrdf::nn::lstm
