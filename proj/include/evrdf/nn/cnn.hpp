#pragma once

// 1-D convolutional classifier. Activations are kept as (batch * length) x
// channels row-major matrices so a sample's positions are contiguous rows;
// convolution is im2col followed by one GEMM.

#include <cstdint>
#include <string>
#include <vector>

#include "evrdf/nn/core.hpp"

namespace evrdf::nn::cnn {

struct ConvCache {
    std::size_t len_in = 0, ch_in = 0, len_conv = 0, len_pool = 0;
    Matrix cols;                   ///< (B * len_conv) x (ch_in * kernel)
    Matrix act;                    ///< post-ReLU conv output, (B * len_conv) x filters
    std::vector<std::int32_t> arg; ///< row of `act` chosen by each pooled cell
};

struct Cache {
    std::vector<ConvCache> conv;
    Matrix flat;
    Matrix hidden;  ///< post-ReLU fc output
    Matrix mask;    ///< empty when dropout is inactive
    Matrix dropped;
};

/// Column index c * kernel + j holds input channel c at offset j, so the weight
/// matrix read row-major is the (channels_in, kernel, filters) tensor.
inline Matrix im2col(const Matrix& in, std::size_t batch, std::size_t len, std::size_t ch, std::size_t k) {
    const std::size_t lo = len - k + 1;
    Matrix cols(batch * lo, ch * k);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t p = 0; p < lo; ++p) {
            double* row = cols.row(b * lo + p).data();
            for (std::size_t c = 0; c < ch; ++c)
                for (std::size_t j = 0; j < k; ++j) row[c * k + j] = in(b * len + p + j, c);
        }
    return cols;
}

inline Matrix col2im(const Matrix& cols, std::size_t batch, std::size_t len, std::size_t ch, std::size_t k) {
    const std::size_t lo = len - k + 1;
    Matrix out = Matrix::Zero(batch * len, ch);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t p = 0; p < lo; ++p) {
            const double* row = cols.row(b * lo + p).data();
            for (std::size_t c = 0; c < ch; ++c)
                for (std::size_t j = 0; j < k; ++j) out(b * len + p + j, c) += row[c * k + j];
        }
    return out;
}

inline void init(const CnnSpec& s, Rng& rng, std::vector<Tensor>& out) {
    std::size_t ch = s.channels_in;
    for (std::size_t l = 0; l < s.conv.size(); ++l) {
        const auto& cv = s.conv[l];
        const std::size_t fan_in = ch * cv.kernel;
        Tensor w{"conv" + std::to_string(l) + ".W", {ch, cv.kernel, cv.filters}, Matrix(fan_in, cv.filters), true};
        fill_uniform(w.value, std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
        out.push_back(std::move(w));
        out.push_back({"conv" + std::to_string(l) + ".b", {cv.filters}, Matrix::Zero(1, cv.filters), false});
        ch = cv.filters;
    }
    const std::size_t flat = cnn_flat_length(s) * ch;
    Tensor fc{"fc.W", {flat, s.fc}, Matrix(flat, s.fc), true};
    fill_uniform(fc.value, std::sqrt(6.0 / static_cast<double>(flat)), rng);
    out.push_back(std::move(fc));
    out.push_back({"fc.b", {s.fc}, Matrix::Zero(1, s.fc), false});
    Tensor w{"out.W", {s.fc, 1}, Matrix(s.fc, 1), true};
    fill_uniform(w.value, std::sqrt(3.0 / static_cast<double>(s.fc)), rng);
    out.push_back(std::move(w));
    out.push_back({"out.b", {1}, Matrix::Zero(1, 1), false});
}

inline Vector forward(const CnnSpec& s, const std::vector<Tensor>& t, const Matrix& x, bool training, Rng& rng,
                      Cache* cache, PatternHash* kinks) {
    const std::size_t batch = static_cast<std::size_t>(x.rows());
    std::size_t len = s.input_len, ch = s.channels_in;
    Matrix cur = Eigen::Map<const Matrix>(x.data(), static_cast<Eigen::Index>(batch * len),
                                          static_cast<Eigen::Index>(ch));
    if (cache) cache->conv.assign(s.conv.size(), {});

    for (std::size_t l = 0; l < s.conv.size(); ++l) {
        const auto k = s.conv[l].kernel, f = s.conv[l].filters;
        const std::size_t lo = len - k + 1, lp = lo / s.pool;
        Matrix cols = im2col(cur, batch, len, ch, k);
        Matrix z = cols * t[2 * l].value;
        z.rowwise() += t[2 * l + 1].value.row(0);
        if (kinks) hash_positive(*kinks, z);
        relu_inplace(z);

        Matrix pooled(batch * lp, f);
        std::vector<std::int32_t> arg(batch * lp * f);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t q = 0; q < lp; ++q)
                for (std::size_t c = 0; c < f; ++c) {
                    std::size_t best = b * lo + q * s.pool;
                    for (std::size_t w = 1; w < s.pool; ++w) {
                        const std::size_t r = b * lo + q * s.pool + w;
                        if (z(r, c) > z(best, c)) best = r;
                    }
                    pooled(b * lp + q, c) = z(best, c);
                    arg[(b * lp + q) * f + c] = static_cast<std::int32_t>(best);
                }
        if (kinks)
            for (auto a : arg) kinks->add_index(static_cast<std::uint64_t>(a));
        if (cache) {
            auto& cc = cache->conv[l];
            cc.len_in = len;
            cc.ch_in = ch;
            cc.len_conv = lo;
            cc.len_pool = lp;
            cc.cols = std::move(cols);
            cc.act = std::move(z);
            cc.arg = std::move(arg);
        }
        cur = std::move(pooled);
        len = lp;
        ch = f;
    }

    const std::size_t fo = 2 * s.conv.size();
    Matrix flat = Eigen::Map<const Matrix>(cur.data(), static_cast<Eigen::Index>(batch),
                                           static_cast<Eigen::Index>(len * ch));
    Matrix h = flat * t[fo].value;
    h.rowwise() += t[fo + 1].value.row(0);
    if (kinks) hash_positive(*kinks, h);
    relu_inplace(h);

    Matrix mask;
    Matrix dropped;
    if (training && s.dropout > 0.0) {
        mask = dropout_mask(h.rows(), h.cols(), s.dropout, rng);
        dropped = h.cwiseProduct(mask);
    } else {
        dropped = h;
    }
    Vector logits = dropped * t[fo + 2].value.col(0);
    logits.array() += t[fo + 3].value(0, 0);

    if (cache) {
        cache->flat = std::move(flat);
        cache->hidden = std::move(h);
        cache->mask = std::move(mask);
        cache->dropped = std::move(dropped);
    }
    return logits;
}

inline void backward(const CnnSpec& s, const std::vector<Tensor>& t, const Cache& c, const Vector& dlogit,
                     Gradients& g) {
    const std::size_t fo = 2 * s.conv.size();
    const std::size_t batch = static_cast<std::size_t>(dlogit.size());

    g[fo + 2].noalias() += c.dropped.transpose() * dlogit;
    g[fo + 3](0, 0) += dlogit.sum();
    Matrix dh = dlogit * t[fo + 2].value.transpose();
    if (c.mask.size() > 0) dh.array() *= c.mask.array();
    dh = (c.hidden.array() > 0.0).select(dh.array(), 0.0).matrix();
    g[fo].noalias() += c.flat.transpose() * dh;
    g[fo + 1].row(0) += dh.colwise().sum();

    Matrix dflat = dh * t[fo].value.transpose();
    const auto& top = c.conv.back();
    const auto top_f = static_cast<Eigen::Index>(s.conv.back().filters);
    Matrix dpool =
        Eigen::Map<const Matrix>(dflat.data(), static_cast<Eigen::Index>(batch * top.len_pool), top_f);

    for (std::size_t l = s.conv.size(); l-- > 0;) {
        const auto& cc = c.conv[l];
        const std::size_t f = s.conv[l].filters;
        Matrix dz = Matrix::Zero(cc.act.rows(), cc.act.cols());
        for (std::size_t r = 0; r < static_cast<std::size_t>(dpool.rows()); ++r)
            for (std::size_t ch = 0; ch < f; ++ch) {
                const auto src = static_cast<Eigen::Index>(cc.arg[r * f + ch]);
                dz(src, static_cast<Eigen::Index>(ch)) += dpool(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(ch));
            }
        dz = (cc.act.array() > 0.0).select(dz.array(), 0.0).matrix();
        g[2 * l].noalias() += cc.cols.transpose() * dz;
        g[2 * l + 1].row(0) += dz.colwise().sum();
        if (l > 0) {
            Matrix dcols = dz * t[2 * l].value.transpose();
            dpool = col2im(dcols, batch, cc.len_in, cc.ch_in, s.conv[l].kernel);
        }
    }
}

}  // namespace evrdf::nn::cnn
