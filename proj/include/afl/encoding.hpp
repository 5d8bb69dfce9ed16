#pragma once

#include <cstdint>
#include <vector>

#include "afl/matrix.hpp"
#include "afl/model.hpp"

namespace afl {

// Fixed random label-encoding matrices, one per hidden trainable layer.
// mats[l-1] maps label space (label_dim) to the output dimension of layer l.
// The output layer has no matrix: it regresses on the labels themselves.
struct encoding_set {
    std::uint64_t seed = 0;
    std::vector<matrix2d> mats;

    std::size_t total_layers() const { return mats.size() + 1; }
};

// Standard-normal entries drawn from seed-derived streams, one stream per
// layer, filled in row-major order. Same seed and spec always reproduce the
// same matrices bit-for-bit; every participant derives them locally.
encoding_set make_encoding_set(std::uint64_t seed, const model_spec& spec);

// Regression targets for layer l: y_batch * mats[l-1] for hidden layers, the
// labels themselves for the output layer.
matrix2d encode_labels(const matrix2d& y_batch, const encoding_set& enc, std::size_t l);

// The member with the smallest output dimension (ties: lowest layer index).
// Used to embed client label distributions for clustering.
const matrix2d& select_encoder(const encoding_set& enc);

// Projects a client's class-frequency vector through q_enc (label_dim x d):
// h_j = sum_c q_enc(c, j) * freq_c, classes summed in ascending order.
std::vector<double> encode_distribution(const matrix2d& labels, const matrix2d& q_enc);

}  // namespace afl
