#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afl/acnnl.hpp"
#include "afl/data.hpp"
#include "afl/encoding.hpp"
#include "afl/matrix.hpp"
#include "afl/model.hpp"

namespace afl {

// One client's contribution to a round: layer statistics plus the bookkeeping
// the simulator and the op-count audit need.
struct upload_message {
    int client_id = -1;
    std::size_t layer = 0;
    layer_stats stats;
    std::size_t batches = 0;
    std::size_t samples = 0;
    std::size_t matmul_count = 0;   // batch-level matrix products performed
    std::size_t forward_count = 0;  // prefix forward passes performed
};

// A simulated participant: local shard, local model copy, batch bookkeeping.
struct client_state {
    int client_id = -1;
    dataset data;
    weight_set model;
    std::size_t batch_size = 0;          // current round's batch size
    std::size_t initial_batch_size = 0;  // B_1
    std::size_t max_batch_size = 0;      // hardware cap B_max
    std::uint64_t order_seed = 0;        // run seed; per-round order derives from it
};

std::vector<client_state> make_clients(const std::vector<dataset>& shards,
                                       const model_spec& spec, std::size_t batch_size,
                                       std::size_t max_batch_size, std::uint64_t seed);

// Wall-clock cost model for the discrete-event simulation. Compute charges a
// fixed overhead per batch plus a per-row cost, scaled by client speed; a
// partial batch is charged for the rows it actually holds, so per-round
// compute is non-increasing in batch size. Transfers pay latency plus size
// over bandwidth.
//
// All simulated times are integer nanosecond counts carried in doubles.
// Integers below 2^53 add and subtract exactly in double arithmetic, so the
// per-client identity compute + idle + comm == round_end - round_start holds
// bit-exactly, not just to within round-off.
struct timing_model {
    std::vector<double> speeds;            // relative speed per client, > 0
    double batch_overhead_s = 0.005;
    double row_cost_s = 1e-4;
    double bandwidth_bytes_per_s = 12.5e6;  // 100 Mbit/s
    double latency_s = 0.01;

    void validate(std::size_t clients) const;
    double compute_ns(std::size_t client, std::size_t batches, std::size_t rows) const;
    double transfer_ns(std::size_t bytes) const;
};

timing_model uniform_timing(std::size_t clients);

inline double ns_to_s(double ns) { return ns * 1e-9; }

// Per-round wall-clock decomposition, all in integer nanoseconds. For every
// client, compute + idle + comm == round_end - round_start exactly: idle is
// the wait for the slowest upload and the shared broadcast closes the round.
struct round_timing {
    double round_start_ns = 0.0;
    double round_end_ns = 0.0;
    std::vector<double> arrival_ns;  // server-side arrival time of each upload
    std::vector<double> compute_ns;
    std::vector<double> comm_ns;
    std::vector<double> idle_ns;
};

struct client_round_work {
    std::size_t batches = 0;
    std::size_t rows = 0;
    std::size_t upload_bytes = 0;
};

round_timing simulate_round(const timing_model& tm, const std::vector<client_round_work>& work,
                            double round_start_ns, std::size_t broadcast_bytes);

// Append-only protocol log; lets tests audit round structure without poking
// into the engine.
struct trace_event {
    std::size_t round = 0;
    int client = -1;  // -1 marks server events
    std::string what;
    double sim_time_ns = 0.0;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

struct protocol_trace {
    std::vector<trace_event> events;
    std::size_t rounds = 0;

    std::size_t count(const std::string& what) const;
};

// Local statistics pass for layer `layer` over the client's shard, batched at
// the client's current batch size in a seeded per-(seed, client, layer)
// sample order. Order never changes the sums; it exists so the simulation
// mirrors how a real client would stream its data.
upload_message client_compute_round(const client_state& c, const model_spec& spec,
                                    const encoding_set& enc, std::size_t layer);

// Barrier + aggregation + solve. Expects exactly one message per client id in
// [0, expected_clients) for layer `layer`; sums statistics in ascending
// client id order and solves the regularized system.
matrix2d server_aggregate_and_solve(const std::vector<upload_message>& msgs,
                                    std::size_t expected_clients, std::size_t layer,
                                    double gamma);

// Batch size for the next round from the measured round interval:
//   B_next = min(ceil(interval / min_first_interval * B_1), B_max).
std::size_t next_batch_size(double interval_ns, double min_first_interval_ns, std::size_t b1,
                            std::size_t bmax);

struct fed_config {
    double gamma = 100.0;
    bool adaptive = true;
    std::uint64_t seed = 0;
};

// Multi-group engine shared by the single-group run and the group-wise
// personalized variant: groups progress in lockstep (one global barrier per
// round, one round per trainable layer), each group aggregating only its own
// members' uploads. The first-round interval minimum is taken over all
// clients and frozen; adaptive batch sizes first apply in round 2.
struct grouped_result {
    std::vector<weight_set> group_weights;
    std::vector<round_timing> rounds;
    std::vector<std::vector<std::size_t>> batch_sizes;  // [round][client]
    std::vector<upload_message> uploads;                // all rounds, client-major per round
    protocol_trace trace;
    double min_first_interval_ns = 0.0;
};

grouped_result run_rounds_grouped(std::vector<client_state>& clients,
                                  const std::vector<std::size_t>& membership,
                                  std::size_t n_groups, const model_spec& spec,
                                  const encoding_set& enc, const fed_config& cfg,
                                  const timing_model& tm);

struct fed_result {
    weight_set weights;
    std::vector<round_timing> rounds;
    std::vector<std::vector<std::size_t>> batch_sizes;  // [round][client]
    std::vector<upload_message> uploads;                // all rounds, client-major per round
    protocol_trace trace;
    double min_first_interval_ns = 0.0;
};

// Federated analytic training (single group): exactly one round per trainable
// layer. Each round every client uploads statistics once, the server solves,
// and the result is installed on every client before the next round starts.
// Adaptive batch sizing rescales each client's batch size from its measured
// round interval relative to the fastest first round.
fed_result run_fedacnnl(std::vector<client_state>& clients, const model_spec& spec,
                        const encoding_set& enc, const fed_config& cfg,
                        const timing_model& tm);

fed_result run_fedacnnl(std::vector<client_state>& clients, const model_spec& spec,
                        const fed_config& cfg, const timing_model& tm);

// Serialized size in bytes of one statistics upload / weight broadcast.
std::size_t stats_bytes(std::size_t d, std::size_t m);
std::size_t weight_bytes(std::size_t d, std::size_t m);

}  // namespace afl
