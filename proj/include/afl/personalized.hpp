#pragma once

#include <cstdint>
#include <vector>

#include "afl/federated.hpp"

namespace afl {

// Client grouping produced by seeded k-means over label-distribution
// embeddings.
struct group_assignment {
    std::size_t k = 0;
    std::vector<std::size_t> membership;          // client -> group
    std::vector<std::vector<int>> groups;          // group -> ascending client ids
    matrix2d centroids;                            // k x dim
    std::vector<double> sse_history;               // objective after each update

    std::size_t group_of(std::size_t client) const { return membership[client]; }
};

// Seeded k-means++ initialization followed by Lloyd iterations. Assignment
// ties resolve to the lowest center index; an empty cluster steals the point
// farthest from its own center (ties: lowest point index). Deterministic for
// a fixed seed.
group_assignment cluster_clients(const std::vector<std::vector<double>>& embeddings,
                                 std::size_t k, std::uint64_t seed);

// Within-cluster sum of squared distances.
double clustering_sse(const std::vector<std::vector<double>>& embeddings,
                      const std::vector<std::size_t>& membership, const matrix2d& centroids);

// Closed-form local adaptation of one layer toward the group meta weights:
//   W = (gram + eps I)^(-1) (cross + eps M).
matrix2d personalize_layer(const layer_stats& stats, double epsilon, const matrix2d& meta_layer);

// Layer-by-layer personalization of a whole model. Layer l's statistics are
// collected by forwarding through the already-personalized prefix, so later
// layers adapt to the earlier personalized ones.
weight_set personalize_client(const client_state& c, const weight_set& meta,
                              const model_spec& spec, const encoding_set& enc, double epsilon);

struct pfed_config {
    double gamma = 100.0;
    double epsilon = 2500.0;
    std::size_t k_groups = 10;
    bool adaptive = true;
    std::uint64_t seed = 0;
};

struct pfed_result {
    group_assignment groups;
    std::vector<weight_set> meta;          // per group
    std::vector<weight_set> personalized;  // per client
    std::vector<round_timing> rounds;
    std::vector<std::vector<std::size_t>> batch_sizes;
    protocol_trace trace;
    std::vector<double> personalize_compute_ns;  // stage-3 local compute per client
    double min_first_interval_ns = 0.0;
};

// Three stages: (1) cluster clients on label-distribution embeddings through
// the narrowest encoding matrix (the identity embedding when the model has a
// single layer and therefore no encoding matrices); (2) train one federated
// meta model per group, all groups in lockstep; (3) every client personalizes
// its group's meta model locally, layer by layer.
pfed_result run_pfedacnnl(std::vector<client_state>& clients, const model_spec& spec,
                          const pfed_config& cfg, const timing_model& tm);

}  // namespace afl
