#pragma once

#include <cstdint>
#include <vector>

#include "afl/federated.hpp"

namespace afl {

struct fedavg_config {
    double learning_rate = 0.05;
    std::size_t local_epochs = 1;
    std::size_t rounds = 20;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

struct fedavg_result {
    weight_set weights;                    // final global model
    std::vector<weight_set> per_round;     // global model after each round
    std::vector<double> round_loss;        // mean training loss per round
};

// Reference gradient-descent baseline: synchronous model averaging with local
// mini-batch SGD on softmax cross-entropy. Supports fully-connected models
// (hidden ReLU); convolutional specs are rejected. Deterministic for a fixed
// seed: init, batch order, and the sample-count-weighted average (ascending
// client order) all derive from it.
fedavg_result run_fedavg_baseline(const std::vector<client_state>& clients,
                                  const model_spec& spec, const fedavg_config& cfg);

// One SGD step on one batch starting from `w`; exposed for direct testing.
weight_set sgd_step(const weight_set& w, const model_spec& spec, const matrix2d& x,
                    const matrix2d& y, double learning_rate);

}  // namespace afl
