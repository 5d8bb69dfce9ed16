#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "afl/data.hpp"
#include "afl/fedavg.hpp"
#include "afl/federated.hpp"
#include "afl/personalized.hpp"

namespace afl {

enum class algo_kind { acnnl, fedacnnl, pfedacnnl, fedavg };

std::string algo_name(algo_kind a);
algo_kind parse_algo(const std::string& name);

struct partition_config {
    std::string kind = "dirichlet";  // dirichlet | random
    double beta = 0.1;
};

struct dataset_config {
    std::string kind;  // mnist | synthetic | binary
    std::string images, labels;  // mnist idx paths
    std::string extra_images, extra_labels;  // optional second idx pair, concatenated
    std::string path;            // binary dataset path
    std::size_t subset = 0;      // 0 = all samples
    std::size_t clients = 1;
    bool center = false;  // subtract the pool's per-feature mean before partitioning
    partition_config partition;
    double test_fraction = 0.25;
    // synthetic knobs
    double alpha = 0.5, beta = 0.5;
    synthetic_params synth;
};

struct model_config {
    std::string kind = "logistic_regression";  // logistic_regression | mlp | dcnn
    std::vector<std::size_t> hidden;           // mlp
    std::size_t base_width = 512;              // dcnn
};

struct batch_config {
    std::size_t initial = 64;  // 0 = whole shard
    std::size_t max = 1024;    // 0 = shard size
};

struct timing_config {
    std::vector<double> speeds;    // explicit per-client speeds, or:
    std::vector<double> choices;   // seeded draw from this set per client
    double min_speed = 0.0, max_speed = 0.0;  // or a seeded uniform range
    double batch_overhead_s = 0.005;
    double row_cost_s = 1e-4;
    double bandwidth_mbps = 100.0;
    double latency_s = 0.01;
};

struct experiment_config {
    std::uint64_t seed = 0;
    algo_kind algo = algo_kind::fedacnnl;
    double gamma = 100.0;
    double epsilon = 2500.0;
    std::size_t k_groups = 10;
    bool adaptive = true;
    dataset_config dataset;
    model_config model;
    batch_config batch;
    timing_config timing;
    fedavg_config fedavg;
    std::string out_dir = "out";
    bool write_weights = true;
};

// Parses and validates a config document; throws config_error with the
// offending key path in the message.
experiment_config parse_config(const nlohmann::json& doc);
experiment_config load_config(const std::string& path);

// Materialized experiment: client train shards, held-out test shards, model
// spec sized to the data, and the resolved timing model.
struct prepared_experiment {
    experiment_config cfg;
    model_spec spec;
    std::vector<client_state> clients;
    std::vector<dataset> test_shards;
    timing_model timing;
};

prepared_experiment prepare_experiment(const experiment_config& cfg);

struct accuracy_report {
    double overall = 0.0;
    std::vector<double> per_client;
    std::size_t total_samples = 0;
};

// One shared model evaluated over every client's test shard.
accuracy_report evaluate_accuracy(const weight_set& model, const model_spec& spec,
                                  const std::vector<dataset>& shards);
// One model per client, each evaluated on its own shard.
accuracy_report evaluate_accuracy(const std::vector<weight_set>& models, const model_spec& spec,
                                  const std::vector<dataset>& shards);

// Schema: round,client_id,compute_s,idle_s,comm_s,batch_size,acc_overall,acc_client
struct metrics_row {
    std::size_t round = 0;
    int client_id = -1;
    double compute_ns = 0.0;
    double idle_ns = 0.0;
    double comm_ns = 0.0;
    std::size_t batch_size = 0;
    double acc_overall = 0.0;
    double acc_client = 0.0;
};

std::string metrics_csv_header();
void write_metrics_csv(const std::vector<metrics_row>& rows, const std::string& path);

struct run_output {
    std::vector<metrics_row> rows;
    nlohmann::json summary;
    accuracy_report final_accuracy;
};

// Runs the configured algorithm end to end and writes metrics.csv,
// summary.json, and weight files into cfg.out_dir (which is created).
run_output run_experiment(const experiment_config& cfg);

// Federated-vs-centralized equivalence check on the prepared scenario:
// returns the maximum per-layer relative Frobenius deviation between the
// federated weights and a single-machine pass over the pooled shards.
double oracle_deviation(const experiment_config& cfg);

}  // namespace afl
