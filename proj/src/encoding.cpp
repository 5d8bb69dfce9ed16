#include "afl/encoding.hpp"

#include <string>

#include "afl/errors.hpp"
#include "afl/rng.hpp"

namespace afl {

encoding_set make_encoding_set(std::uint64_t seed, const model_spec& spec) {
    const std::size_t total = spec.trainable_count();
    encoding_set enc;
    enc.seed = seed;
    rng base = rng(seed).derive(stream::ENCODING);
    for (std::size_t l = 1; l < total; ++l) {
        auto [d, m] = spec.weight_dims(l);
        (void)d;
        rng r = base.derive(l);
        matrix2d q(spec.label_dim, m);
        for (double& v : q.data()) v = r.next_normal();
        enc.mats.push_back(std::move(q));
    }
    return enc;
}

matrix2d encode_labels(const matrix2d& y_batch, const encoding_set& enc, std::size_t l) {
    if (l == 0 || l > enc.total_layers())
        throw shape_error("encode_labels: layer " + std::to_string(l) + " out of range");
    if (l == enc.total_layers()) return y_batch;
    const matrix2d& q = enc.mats[l - 1];
    if (y_batch.cols() != q.rows())
        throw shape_error("encode_labels: label dim " + std::to_string(y_batch.cols()) +
                          " != encoder rows " + std::to_string(q.rows()));
    return matmul(y_batch, q);
}

const matrix2d& select_encoder(const encoding_set& enc) {
    if (enc.mats.empty()) throw empty_set("select_encoder: no encoding matrices");
    std::size_t best = 0;
    for (std::size_t i = 1; i < enc.mats.size(); ++i)
        if (enc.mats[i].cols() < enc.mats[best].cols()) best = i;
    return enc.mats[best];
}

std::vector<double> encode_distribution(const matrix2d& labels, const matrix2d& q_enc) {
    if (labels.rows() == 0) throw empty_dataset("encode_distribution: no samples");
    if (labels.cols() != q_enc.rows())
        throw shape_error("encode_distribution: label dim " + std::to_string(labels.cols()) +
                          " != encoder rows " + std::to_string(q_enc.rows()));
    const std::size_t classes = labels.cols();
    std::vector<double> freq(classes, 0.0);
    for (std::size_t i = 0; i < labels.rows(); ++i) {
        const double* r = labels.row_ptr(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < classes; ++j)
            if (r[j] > r[best]) best = j;
        freq[best] += 1.0;
    }
    const double inv = 1.0 / static_cast<double>(labels.rows());
    for (double& f : freq) f *= inv;

    std::vector<double> h(q_enc.cols(), 0.0);
    for (std::size_t c = 0; c < classes; ++c) {
        if (freq[c] == 0.0) continue;
        const double* qr = q_enc.row_ptr(c);
        for (std::size_t j = 0; j < h.size(); ++j) h[j] += freq[c] * qr[j];
    }
    return h;
}

}  // namespace afl
