#pragma once

#include <cstdint>

#include "afl/data.hpp"
#include "afl/encoding.hpp"
#include "afl/matrix.hpp"
#include "afl/model.hpp"

namespace afl {

// Builds the regularized least-squares statistics for trainable layer l from
// one dataset: forwards inputs through the already-trained prefix, encodes
// labels for layer l (replicated over patch rows for conv layers), and
// accumulates gram/cross in batches of `batch_size` rows taken in dataset
// order. Statistics are exact sums, so the batch size never changes the
// result beyond floating-point round-off.
layer_stats collect_layer_stats(const dataset& d, const weight_set& w, const model_spec& spec,
                                const encoding_set& enc, std::size_t l, std::size_t batch_size);

struct acnnl_config {
    double gamma = 100.0;        // ridge regularizer
    std::size_t batch_size = 256;  // accumulation granularity
};

// Analytic layer-wise training: for l = 1..L, solve
//   W_l = (X_l^T X_l + gamma I)^(-1) X_l^T Z_l
// where X_l is the layer input under the already-trained prefix and Z_l the
// encoded labels. One pass per layer, no gradients, no iteration.
weight_set train_acnnl(const dataset& d, const model_spec& spec, const encoding_set& enc,
                       const acnnl_config& cfg);

weight_set train_acnnl(const dataset& d, const model_spec& spec, std::uint64_t seed,
                       const acnnl_config& cfg);

}  // namespace afl
