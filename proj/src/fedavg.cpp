#include "afl/fedavg.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "afl/errors.hpp"
#include "afl/rng.hpp"

namespace afl {

namespace {

void check_fc_only(const model_spec& spec) {
    for (const auto& l : spec.layers)
        if (l.kind != layer_kind::fully_connected)
            throw domain_error("fedavg baseline supports fully-connected models only");
}

// Forward pass keeping pre-activation inputs of every layer for backprop.
struct forward_cache {
    std::vector<matrix2d> inputs;  // inputs[l] = activation entering layer l+1
    matrix2d probs;                // softmax output
};

forward_cache forward_cached(const weight_set& w, const model_spec& spec, const matrix2d& x) {
    forward_cache fc;
    matrix2d cur = x;
    for (std::size_t l = 1; l <= spec.trainable_count(); ++l) {
        fc.inputs.push_back(cur);
        const layer_spec& s = spec.layers[spec.trainable_index(l)];
        cur = matmul(cur, w.at(l));
        if (l < spec.trainable_count())
            apply_activation(cur, s.act, s.leaky_slope);
        else
            apply_activation(cur, activation::softmax, 0.0);
    }
    fc.probs = std::move(cur);
    return fc;
}

}  // namespace

weight_set sgd_step(const weight_set& w, const model_spec& spec, const matrix2d& x,
                    const matrix2d& y, double learning_rate) {
    check_fc_only(spec);
    const std::size_t total = spec.trainable_count();
    forward_cache fc = forward_cached(w, spec, x);
    const double invb = 1.0 / static_cast<double>(x.rows());

    weight_set out = w;
    // delta = dLoss/dZ of the current layer, starting from softmax + CE.
    matrix2d delta = fc.probs;
    for (std::size_t i = 0; i < delta.size(); ++i)
        delta.data()[i] = (delta.data()[i] - y.data()[i]) * invb;

    for (std::size_t l = total; l >= 1; --l) {
        matrix2d grad = matmul(transpose(fc.inputs[l - 1]), delta);
        if (l > 1) {
            const layer_spec& prev = spec.layers[spec.trainable_index(l - 1)];
            matrix2d back = matmul(delta, transpose(w.at(l)));
            // Gate by the activation derivative at the previous layer's
            // output (its input to layer l).
            const matrix2d& act_out = fc.inputs[l - 1];
            if (prev.act == activation::relu) {
                for (std::size_t i = 0; i < back.size(); ++i)
                    if (act_out.data()[i] <= 0.0) back.data()[i] = 0.0;
            } else if (prev.act == activation::leaky_relu) {
                for (std::size_t i = 0; i < back.size(); ++i)
                    if (act_out.data()[i] <= 0.0) back.data()[i] *= prev.leaky_slope;
            }
            delta = std::move(back);
        }
        matrix2d& wl = out.at(l);
        for (std::size_t i = 0; i < wl.size(); ++i)
            wl.data()[i] -= learning_rate * grad.data()[i];
    }
    return out;
}

fedavg_result run_fedavg_baseline(const std::vector<client_state>& clients,
                                  const model_spec& spec, const fedavg_config& cfg) {
    if (clients.empty()) throw domain_error("fedavg: no clients");
    check_fc_only(spec);
    if (!(cfg.learning_rate > 0.0)) throw domain_error("fedavg: learning rate must be positive");
    if (cfg.rounds == 0 || cfg.local_epochs == 0 || cfg.batch_size == 0)
        throw domain_error("fedavg: rounds, epochs and batch size must be positive");

    rng base = rng(cfg.seed).derive(stream::FEDAVG);
    weight_set global = random_init(spec, base.derive(0).next_u64());

    std::size_t total_samples = 0;
    for (const auto& c : clients) {
        if (c.data.size() == 0) throw empty_dataset("fedavg: empty shard");
        total_samples += c.data.size();
    }

    fedavg_result res;
    for (std::size_t round = 0; round < cfg.rounds; ++round) {
        std::vector<weight_set> locals;
        locals.reserve(clients.size());
        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (std::size_t ci = 0; ci < clients.size(); ++ci) {
            const auto& c = clients[ci];
            weight_set w = global;
            for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
                std::vector<std::size_t> order(c.data.size());
                std::iota(order.begin(), order.end(), 0);
                base.derive(1 + round).derive(ci).derive(epoch).shuffle(order);
                for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                    std::size_t count = std::min(cfg.batch_size, order.size() - start);
                    std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                                 order.begin() +
                                                     static_cast<long>(start + count));
                    dataset batch = take_rows(c.data, idx);
                    w = sgd_step(w, spec, batch.features, batch.labels, cfg.learning_rate);
                }
            }
            // Training loss of the updated local model on its shard.
            forward_cache fc = forward_cached(w, spec, c.data.features);
            for (std::size_t i = 0; i < c.data.size(); ++i) {
                double p = fc.probs(i, c.data.label_of(i));
                loss_sum += -std::log(std::max(p, 1e-12));
            }
            loss_count += c.data.size();
            locals.push_back(std::move(w));
        }

        // Sample-count-weighted average in ascending client order.
        weight_set next = weight_set::untrained(spec);
        for (std::size_t l = 1; l <= spec.trainable_count(); ++l) {
            auto [d, m] = spec.weight_dims(l);
            matrix2d acc(d, m);
            for (std::size_t ci = 0; ci < clients.size(); ++ci) {
                double wgt = static_cast<double>(clients[ci].data.size()) /
                             static_cast<double>(total_samples);
                const matrix2d& wl = locals[ci].at(l);
                for (std::size_t i = 0; i < acc.size(); ++i)
                    acc.data()[i] += wgt * wl.data()[i];
            }
            next.at(l) = std::move(acc);
        }
        global = std::move(next);
        res.per_round.push_back(global);
        res.round_loss.push_back(loss_sum / static_cast<double>(loss_count));
    }
    res.weights = std::move(global);
    return res;
}

}  // namespace afl
