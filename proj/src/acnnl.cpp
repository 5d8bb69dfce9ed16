#include "afl/acnnl.hpp"

#include <algorithm>
#include <string>

#include "afl/errors.hpp"

namespace afl {

layer_stats collect_layer_stats(const dataset& d, const weight_set& w, const model_spec& spec,
                                const encoding_set& enc, std::size_t l,
                                std::size_t batch_size) {
    if (d.size() == 0) throw empty_dataset("collect_layer_stats: empty dataset");
    if (batch_size == 0) throw domain_error("collect_layer_stats: batch_size must be positive");
    if (enc.total_layers() != spec.trainable_count())
        throw shape_error("collect_layer_stats: encoding set built for a different depth");

    // Pseudo-label width equals the layer's output dim for hidden layers and
    // label_dim for the output layer; both coincide with weight_dims().second.
    auto [dim, odim] = spec.weight_dims(l);
    const std::size_t rows_per = spec.rows_per_sample(l);

    layer_stats stats(dim, odim);
    std::vector<std::size_t> idx(std::min(batch_size, d.size()));
    for (std::size_t start = 0; start < d.size(); start += batch_size) {
        std::size_t count = std::min(batch_size, d.size() - start);
        idx.resize(count);
        for (std::size_t i = 0; i < count; ++i) idx[i] = start + i;
        dataset batch = take_rows(d, idx);
        matrix2d x = forward_to_layer(batch.features, w, spec, l);
        matrix2d z = encode_labels(batch.labels, enc, l);
        if (rows_per > 1) z = replicate_rows(z, rows_per);
        accumulate_stats(stats, x, z);
    }
    return stats;
}

weight_set train_acnnl(const dataset& d, const model_spec& spec, const encoding_set& enc,
                       const acnnl_config& cfg) {
    if (!(cfg.gamma > 0.0)) throw domain_error("train_acnnl: gamma must be positive");
    weight_set w = weight_set::untrained(spec);
    const std::size_t total = spec.trainable_count();
    for (std::size_t l = 1; l <= total; ++l) {
        layer_stats stats = collect_layer_stats(d, w, spec, enc, l, cfg.batch_size);
        w.at(l) = solve_regularized_ls(stats.gram, stats.cross, cfg.gamma);
    }
    return w;
}

weight_set train_acnnl(const dataset& d, const model_spec& spec, std::uint64_t seed,
                       const acnnl_config& cfg) {
    return train_acnnl(d, spec, make_encoding_set(seed, spec), cfg);
}

}  // namespace afl
