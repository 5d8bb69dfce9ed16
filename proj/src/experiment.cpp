#include "afl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <string>

#include "afl/acnnl.hpp"
#include "afl/errors.hpp"
#include "afl/rng.hpp"

namespace afl {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& why) {
    throw config_error(path + ": " + why);
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) bad(path + "." + it.key(), "unknown key");
}

double get_number(const json& obj, const std::string& path, const std::string& key,
                  double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) bad(path + "." + key, "expected a number");
    return obj[key].get<double>();
}

// JSON itself has no unsigned type; accept any integer that is not negative.
bool is_count(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

std::size_t get_count(const json& obj, const std::string& path, const std::string& key,
                      std::size_t fallback) {
    if (!obj.contains(key)) return fallback;
    if (!is_count(obj[key])) bad(path + "." + key, "expected a non-negative integer");
    return obj[key].get<std::size_t>();
}

std::string get_string(const json& obj, const std::string& path, const std::string& key,
                       const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string()) bad(path + "." + key, "expected a string");
    return obj[key].get<std::string>();
}

bool get_bool(const json& obj, const std::string& path, const std::string& key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_boolean()) bad(path + "." + key, "expected a boolean");
    return obj[key].get<bool>();
}

}  // namespace

std::string algo_name(algo_kind a) {
    switch (a) {
        case algo_kind::acnnl: return "acnnl";
        case algo_kind::fedacnnl: return "fedacnnl";
        case algo_kind::pfedacnnl: return "pfedacnnl";
        case algo_kind::fedavg: return "fedavg";
    }
    return "?";
}

algo_kind parse_algo(const std::string& name) {
    if (name == "acnnl") return algo_kind::acnnl;
    if (name == "fedacnnl") return algo_kind::fedacnnl;
    if (name == "pfedacnnl") return algo_kind::pfedacnnl;
    if (name == "fedavg") return algo_kind::fedavg;
    throw config_error("algo: unknown algorithm '" + name + "'");
}

experiment_config parse_config(const json& doc) {
    if (!doc.is_object()) throw config_error("config root must be an object");
    check_keys(doc, "config",
               {"seed", "algo", "gamma", "epsilon", "k_groups", "adaptive_batching", "dataset",
                "model", "batch", "timing", "fedavg", "output"});
    experiment_config cfg;
    if (doc.contains("seed")) {
        if (!is_count(doc["seed"])) bad("config.seed", "expected a non-negative integer");
        cfg.seed = doc["seed"].get<std::uint64_t>();
    }
    cfg.algo = parse_algo(get_string(doc, "config", "algo", "fedacnnl"));
    cfg.gamma = get_number(doc, "config", "gamma", cfg.gamma);
    if (!(cfg.gamma > 0.0)) bad("config.gamma", "must be positive");
    cfg.epsilon = get_number(doc, "config", "epsilon", cfg.epsilon);
    if (!(cfg.epsilon > 0.0)) bad("config.epsilon", "must be positive");
    cfg.k_groups = get_count(doc, "config", "k_groups", cfg.k_groups);
    if (cfg.k_groups == 0) bad("config.k_groups", "must be positive");
    cfg.adaptive = get_bool(doc, "config", "adaptive_batching", cfg.adaptive);

    if (!doc.contains("dataset") || !doc["dataset"].is_object())
        bad("config.dataset", "required object");
    const json& ds = doc["dataset"];
    check_keys(ds, "dataset",
               {"kind", "images", "labels", "extra_images", "extra_labels", "path", "subset",
                "clients", "center", "partition", "test_fraction", "alpha", "beta", "samples",
                "dim", "classes", "count_exponent", "min_count", "feature_decay"});
    cfg.dataset.kind = get_string(ds, "dataset", "kind", "");
    if (cfg.dataset.kind != "mnist" && cfg.dataset.kind != "synthetic" &&
        cfg.dataset.kind != "binary")
        bad("dataset.kind", "must be one of mnist, synthetic, binary");
    cfg.dataset.images = get_string(ds, "dataset", "images", "");
    cfg.dataset.labels = get_string(ds, "dataset", "labels", "");
    cfg.dataset.extra_images = get_string(ds, "dataset", "extra_images", "");
    cfg.dataset.extra_labels = get_string(ds, "dataset", "extra_labels", "");
    cfg.dataset.path = get_string(ds, "dataset", "path", "");
    if (cfg.dataset.kind == "mnist" && (cfg.dataset.images.empty() || cfg.dataset.labels.empty()))
        bad("dataset.images", "mnist requires images and labels paths");
    if (cfg.dataset.extra_images.empty() != cfg.dataset.extra_labels.empty())
        bad("dataset.extra_images", "extra images and labels must be given together");
    if (!cfg.dataset.extra_images.empty() && cfg.dataset.kind != "mnist")
        bad("dataset.extra_images", "only valid for mnist datasets");
    if (cfg.dataset.kind == "binary" && cfg.dataset.path.empty())
        bad("dataset.path", "binary dataset requires a path");
    cfg.dataset.subset = get_count(ds, "dataset", "subset", 0);
    cfg.dataset.center = get_bool(ds, "dataset", "center", false);
    cfg.dataset.clients = get_count(ds, "dataset", "clients", 1);
    if (cfg.dataset.clients == 0) bad("dataset.clients", "must be positive");
    if (ds.contains("partition")) {
        if (!ds["partition"].is_object()) bad("dataset.partition", "expected an object");
        const json& p = ds["partition"];
        check_keys(p, "dataset.partition", {"kind", "beta"});
        cfg.dataset.partition.kind = get_string(p, "dataset.partition", "kind", "dirichlet");
        if (cfg.dataset.partition.kind != "dirichlet" && cfg.dataset.partition.kind != "random")
            bad("dataset.partition.kind", "must be dirichlet or random");
        cfg.dataset.partition.beta = get_number(p, "dataset.partition", "beta", 0.1);
        if (!(cfg.dataset.partition.beta > 0.0)) bad("dataset.partition.beta", "must be positive");
    }
    cfg.dataset.test_fraction = get_number(ds, "dataset", "test_fraction", 0.25);
    if (!(cfg.dataset.test_fraction > 0.0) || !(cfg.dataset.test_fraction < 1.0))
        bad("dataset.test_fraction", "must be in (0, 1)");
    cfg.dataset.alpha = get_number(ds, "dataset", "alpha", 0.5);
    cfg.dataset.beta = get_number(ds, "dataset", "beta", 0.5);
    if (cfg.dataset.alpha < 0.0 || cfg.dataset.beta < 0.0)
        bad("dataset.alpha", "synthetic alpha/beta must be non-negative");
    cfg.dataset.synth.total_samples = get_count(ds, "dataset", "samples", 50000);
    cfg.dataset.synth.dim = get_count(ds, "dataset", "dim", 60);
    cfg.dataset.synth.classes = get_count(ds, "dataset", "classes", 10);
    cfg.dataset.synth.count_exponent = get_number(ds, "dataset", "count_exponent", 1.8);
    cfg.dataset.synth.min_count = get_count(ds, "dataset", "min_count", 20);
    cfg.dataset.synth.feature_decay = get_number(ds, "dataset", "feature_decay", 1.2);

    if (doc.contains("model")) {
        if (!doc["model"].is_object()) bad("config.model", "expected an object");
        const json& m = doc["model"];
        check_keys(m, "model", {"kind", "hidden", "base_width"});
        cfg.model.kind = get_string(m, "model", "kind", "logistic_regression");
        if (cfg.model.kind != "logistic_regression" && cfg.model.kind != "mlp" &&
            cfg.model.kind != "dcnn")
            bad("model.kind", "must be one of logistic_regression, mlp, dcnn");
        if (m.contains("hidden")) {
            if (!m["hidden"].is_array()) bad("model.hidden", "expected an array");
            for (const auto& h : m["hidden"]) {
                if (!is_count(h) || h.get<std::size_t>() == 0)
                    bad("model.hidden", "entries must be positive integers");
                cfg.model.hidden.push_back(h.get<std::size_t>());
            }
        }
        cfg.model.base_width = get_count(m, "model", "base_width", 512);
        if (cfg.model.base_width == 0) bad("model.base_width", "must be positive");
    }
    if (cfg.model.kind == "mlp" && cfg.model.hidden.empty()) cfg.model.hidden = {128, 64};

    if (doc.contains("batch")) {
        if (!doc["batch"].is_object()) bad("config.batch", "expected an object");
        const json& b = doc["batch"];
        check_keys(b, "batch", {"initial", "max"});
        cfg.batch.initial = get_count(b, "batch", "initial", 64);
        cfg.batch.max = get_count(b, "batch", "max", 1024);
    }

    if (doc.contains("timing")) {
        if (!doc["timing"].is_object()) bad("config.timing", "expected an object");
        const json& t = doc["timing"];
        check_keys(t, "timing",
                   {"speeds", "batch_overhead_s", "row_cost_s", "bandwidth_mbps", "latency_s"});
        if (t.contains("speeds")) {
            const json& s = t["speeds"];
            if (s.is_array()) {
                for (const auto& v : s) {
                    if (!v.is_number() || !(v.get<double>() > 0.0))
                        bad("timing.speeds", "entries must be positive numbers");
                    cfg.timing.speeds.push_back(v.get<double>());
                }
            } else if (s.is_object()) {
                check_keys(s, "timing.speeds", {"choices", "min", "max"});
                if (s.contains("choices")) {
                    if (!s["choices"].is_array() || s["choices"].empty())
                        bad("timing.speeds.choices", "expected a non-empty array");
                    for (const auto& v : s["choices"]) {
                        if (!v.is_number() || !(v.get<double>() > 0.0))
                            bad("timing.speeds.choices", "entries must be positive numbers");
                        cfg.timing.choices.push_back(v.get<double>());
                    }
                } else {
                    cfg.timing.min_speed = get_number(s, "timing.speeds", "min", 0.0);
                    cfg.timing.max_speed = get_number(s, "timing.speeds", "max", 0.0);
                    if (!(cfg.timing.min_speed > 0.0) ||
                        !(cfg.timing.max_speed >= cfg.timing.min_speed))
                        bad("timing.speeds", "need 0 < min <= max");
                }
            } else {
                bad("timing.speeds", "expected an array or an object");
            }
        }
        cfg.timing.batch_overhead_s = get_number(t, "timing", "batch_overhead_s", 0.005);
        cfg.timing.row_cost_s = get_number(t, "timing", "row_cost_s", 1e-4);
        cfg.timing.bandwidth_mbps = get_number(t, "timing", "bandwidth_mbps", 100.0);
        cfg.timing.latency_s = get_number(t, "timing", "latency_s", 0.01);
        if (!(cfg.timing.batch_overhead_s > 0.0) || !(cfg.timing.row_cost_s > 0.0) ||
            !(cfg.timing.bandwidth_mbps > 0.0) || !(cfg.timing.latency_s > 0.0))
            bad("timing", "cost parameters must be positive");
    }

    if (doc.contains("fedavg")) {
        if (!doc["fedavg"].is_object()) bad("config.fedavg", "expected an object");
        const json& f = doc["fedavg"];
        check_keys(f, "fedavg", {"learning_rate", "local_epochs", "rounds", "batch_size"});
        cfg.fedavg.learning_rate = get_number(f, "fedavg", "learning_rate", 0.05);
        cfg.fedavg.local_epochs = get_count(f, "fedavg", "local_epochs", 1);
        cfg.fedavg.rounds = get_count(f, "fedavg", "rounds", 20);
        cfg.fedavg.batch_size = get_count(f, "fedavg", "batch_size", 32);
        if (!(cfg.fedavg.learning_rate > 0.0)) bad("fedavg.learning_rate", "must be positive");
        if (cfg.fedavg.local_epochs == 0 || cfg.fedavg.rounds == 0 || cfg.fedavg.batch_size == 0)
            bad("fedavg", "epochs, rounds and batch_size must be positive");
    }

    if (doc.contains("output")) {
        if (!doc["output"].is_object()) bad("config.output", "expected an object");
        const json& o = doc["output"];
        check_keys(o, "output", {"dir", "write_weights"});
        cfg.out_dir = get_string(o, "output", "dir", "out");
        cfg.write_weights = get_bool(o, "output", "write_weights", true);
    }

    if (cfg.model.kind == "dcnn" && cfg.dataset.kind == "synthetic")
        bad("model.kind", "dcnn requires image data");
    return cfg;
}

experiment_config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw config_error("config parse error in " + path + ": " + e.what());
    }
    return parse_config(doc);
}

namespace {

// Largest-shard-donates repair so every shard can afford a train/test split.
void ensure_min_shard(std::vector<std::vector<std::size_t>>& members, std::size_t min_size) {
    for (;;) {
        std::size_t small = members.size();
        for (std::size_t i = 0; i < members.size(); ++i)
            if (members[i].size() < min_size) {
                small = i;
                break;
            }
        if (small == members.size()) return;
        std::size_t donor = 0;
        for (std::size_t i = 1; i < members.size(); ++i)
            if (members[i].size() > members[donor].size()) donor = i;
        if (members[donor].size() <= min_size)
            throw domain_error("partition: not enough samples for every client");
        members[small].push_back(members[donor].back());
        members[donor].pop_back();
    }
}

}  // namespace

prepared_experiment prepare_experiment(const experiment_config& cfg) {
    prepared_experiment prep;
    prep.cfg = cfg;

    std::vector<dataset> local_full;
    if (cfg.dataset.kind == "synthetic") {
        local_full = generate_synthetic(cfg.dataset.alpha, cfg.dataset.beta, cfg.dataset.clients,
                                        cfg.seed, cfg.dataset.synth);
        if (cfg.dataset.center) {
            std::vector<double> mean = feature_mean(local_full);
            for (dataset& d : local_full) shift_features(d, mean);
        }
    } else {
        dataset parent = cfg.dataset.kind == "mnist"
                             ? load_idx(cfg.dataset.images, cfg.dataset.labels)
                             : load_dataset(cfg.dataset.path);
        if (!cfg.dataset.extra_images.empty())
            parent = concat_datasets(
                {parent, load_idx(cfg.dataset.extra_images, cfg.dataset.extra_labels)});
        if (cfg.dataset.subset > 0 && cfg.dataset.subset < parent.size()) {
            std::vector<std::size_t> head(cfg.dataset.subset);
            std::iota(head.begin(), head.end(), 0);
            parent = take_rows(parent, head);
        }
        if (cfg.dataset.center) shift_features(parent, feature_mean({parent}));
        federated_split split =
            cfg.dataset.partition.kind == "dirichlet"
                ? partition_dirichlet(parent, cfg.dataset.clients, cfg.dataset.partition.beta,
                                      cfg.seed)
                : partition_random(parent, cfg.dataset.clients, cfg.seed);
        ensure_min_shard(split.members, 2);
        local_full.reserve(split.members.size());
        for (const auto& m : split.members) local_full.push_back(take_rows(parent, m));
    }

    std::vector<dataset> train_shards;
    train_shards.reserve(local_full.size());
    prep.test_shards.reserve(local_full.size());
    rng split_base = rng(cfg.seed).derive(stream::SPLIT);
    for (std::size_t i = 0; i < local_full.size(); ++i) {
        auto [train_idx, test_idx] = split_train_test(
            local_full[i].size(), 1.0 - cfg.dataset.test_fraction,
            split_base.derive(i).next_u64());
        train_shards.push_back(take_rows(local_full[i], train_idx));
        prep.test_shards.push_back(take_rows(local_full[i], test_idx));
    }

    const dataset& probe = train_shards[0];
    if (cfg.model.kind == "logistic_regression") {
        prep.spec = make_logistic_regression(probe.feature_dim(), probe.class_count());
    } else if (cfg.model.kind == "mlp") {
        prep.spec = make_mlp(probe.feature_dim(), cfg.model.hidden, probe.class_count());
    } else {
        if (probe.shape.flat()) throw config_error("model.kind: dcnn requires image data");
        prep.spec = make_dcnn(probe.shape, probe.class_count(), cfg.model.base_width);
    }

    prep.clients = make_clients(train_shards, prep.spec, cfg.batch.initial, cfg.batch.max,
                                cfg.seed);

    timing_model tm;
    const std::size_t n = prep.clients.size();
    if (!cfg.timing.speeds.empty()) {
        if (cfg.timing.speeds.size() != n)
            throw config_error("timing.speeds: " + std::to_string(cfg.timing.speeds.size()) +
                               " entries for " + std::to_string(n) + " clients");
        tm.speeds = cfg.timing.speeds;
    } else if (!cfg.timing.choices.empty()) {
        rng r = rng(cfg.seed).derive(stream::SPEEDS);
        for (std::size_t i = 0; i < n; ++i)
            tm.speeds.push_back(cfg.timing.choices[r.next_below(cfg.timing.choices.size())]);
    } else if (cfg.timing.min_speed > 0.0) {
        rng r = rng(cfg.seed).derive(stream::SPEEDS);
        for (std::size_t i = 0; i < n; ++i)
            tm.speeds.push_back(cfg.timing.min_speed +
                                r.next_double() *
                                    (cfg.timing.max_speed - cfg.timing.min_speed));
    } else {
        tm.speeds.assign(n, 1.0);
    }
    tm.batch_overhead_s = cfg.timing.batch_overhead_s;
    tm.row_cost_s = cfg.timing.row_cost_s;
    tm.bandwidth_bytes_per_s = cfg.timing.bandwidth_mbps * 1e6 / 8.0;
    tm.latency_s = cfg.timing.latency_s;
    prep.timing = tm;
    return prep;
}

accuracy_report evaluate_accuracy(const weight_set& model, const model_spec& spec,
                                  const std::vector<dataset>& shards) {
    std::vector<weight_set> models(shards.size(), model);
    return evaluate_accuracy(models, spec, shards);
}

accuracy_report evaluate_accuracy(const std::vector<weight_set>& models, const model_spec& spec,
                                  const std::vector<dataset>& shards) {
    if (models.size() != shards.size())
        throw domain_error("evaluate_accuracy: model/shard count mismatch");
    if (shards.empty()) throw empty_dataset("evaluate_accuracy: no shards");
    accuracy_report rep;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < shards.size(); ++i) {
        const dataset& d = shards[i];
        if (d.size() == 0) throw empty_dataset("evaluate_accuracy: empty shard");
        std::vector<std::size_t> pred = predict(d.features, models[i], spec);
        std::size_t c = 0;
        for (std::size_t s = 0; s < d.size(); ++s)
            if (pred[s] == d.label_of(s)) ++c;
        rep.per_client.push_back(static_cast<double>(c) / static_cast<double>(d.size()));
        correct += c;
        rep.total_samples += d.size();
    }
    rep.overall = static_cast<double>(correct) / static_cast<double>(rep.total_samples);
    return rep;
}

std::string metrics_csv_header() {
    return "round,client_id,compute_s,idle_s,comm_s,batch_size,acc_overall,acc_client";
}

void write_metrics_csv(const std::vector<metrics_row>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << metrics_csv_header() << "\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%d,%.9f,%.9f,%.9f,%zu,%.6f,%.6f\n", r.round,
                      r.client_id, ns_to_s(r.compute_ns), ns_to_s(r.idle_ns), ns_to_s(r.comm_ns),
                      r.batch_size, r.acc_overall, r.acc_client);
        out << buf;
    }
    if (!out) throw io_error("write failed: " + path);
}

namespace {

// Evaluation model for a partially trained run: reference-initialized suffix
// behind the trained prefix, so mid-run accuracy is defined without peeking
// at untrained layers.
weight_set with_reference_suffix(const weight_set& trained, std::size_t prefix,
                                 const model_spec& spec, std::uint64_t seed) {
    weight_set w = random_init(spec, rng(seed).derive(stream::SERVER_INIT).next_u64());
    for (std::size_t l = 1; l <= prefix; ++l) w.at(l) = trained.at(l);
    return w;
}

double weighted_overall(const std::vector<double>& acc, const std::vector<dataset>& shards) {
    double correct = 0.0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < shards.size(); ++i) {
        correct += acc[i] * static_cast<double>(shards[i].size());
        total += shards[i].size();
    }
    return correct / static_cast<double>(total);
}

double shard_accuracy(const weight_set& w, const model_spec& spec, const dataset& d) {
    std::vector<std::size_t> pred = predict(d.features, w, spec);
    std::size_t c = 0;
    for (std::size_t s = 0; s < d.size(); ++s)
        if (pred[s] == d.label_of(s)) ++c;
    return static_cast<double>(c) / static_cast<double>(d.size());
}

json accuracy_json(const accuracy_report& rep) {
    double mn = rep.per_client[0], mx = rep.per_client[0], sum = 0.0;
    for (double a : rep.per_client) {
        mn = std::min(mn, a);
        mx = std::max(mx, a);
        sum += a;
    }
    return json{{"overall", rep.overall},
                {"per_client_mean", sum / static_cast<double>(rep.per_client.size())},
                {"per_client_min", mn},
                {"per_client_max", mx},
                {"test_samples", rep.total_samples}};
}

}  // namespace

run_output run_experiment(const experiment_config& cfg) {
    prepared_experiment prep = prepare_experiment(cfg);
    const model_spec& spec = prep.spec;
    const std::size_t total = spec.trainable_count();
    const std::size_t n = prep.clients.size();

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    run_output out;
    json summary;
    summary["algo"] = algo_name(cfg.algo);
    summary["seed"] = cfg.seed;
    summary["clients"] = n;
    summary["trainable_layers"] = total;
    summary["gamma"] = cfg.gamma;

    if (cfg.algo == algo_kind::acnnl) {
        std::vector<dataset> shards;
        for (const auto& c : prep.clients) shards.push_back(c.data);
        dataset pooled = concat_datasets(shards);
        encoding_set enc = make_encoding_set(cfg.seed, spec);
        std::size_t batch = cfg.batch.initial == 0 ? pooled.size() : cfg.batch.initial;
        weight_set w = weight_set::untrained(spec);
        for (std::size_t l = 1; l <= total; ++l) {
            layer_stats stats = collect_layer_stats(pooled, w, spec, enc, l, batch);
            w.at(l) = solve_regularized_ls(stats.gram, stats.cross, cfg.gamma);
            weight_set eval = with_reference_suffix(w, l, spec, cfg.seed);
            accuracy_report rep = evaluate_accuracy(eval, spec, prep.test_shards);
            out.rows.push_back({l, -1, 0.0, 0.0, 0.0, batch, rep.overall, rep.overall});
        }
        out.final_accuracy = evaluate_accuracy(w, spec, prep.test_shards);
        summary["rounds"] = total;
        if (cfg.write_weights) save_weights(w, cfg.out_dir + "/weights.bin");
    } else if (cfg.algo == algo_kind::fedacnnl) {
        fed_config fc{cfg.gamma, cfg.adaptive, cfg.seed};
        fed_result res = run_fedacnnl(prep.clients, spec, fc, prep.timing);
        for (std::size_t l = 1; l <= total; ++l) {
            weight_set eval = with_reference_suffix(res.weights, l, spec, cfg.seed);
            accuracy_report rep = evaluate_accuracy(eval, spec, prep.test_shards);
            const round_timing& rt = res.rounds[l - 1];
            for (std::size_t i = 0; i < n; ++i)
                out.rows.push_back({l, static_cast<int>(i), rt.compute_ns[i], rt.idle_ns[i],
                                    rt.comm_ns[i], res.batch_sizes[l - 1][i], rep.overall,
                                    rep.per_client[i]});
        }
        out.final_accuracy = evaluate_accuracy(res.weights, spec, prep.test_shards);
        summary["rounds"] = res.trace.rounds;
        summary["min_first_interval_s"] = ns_to_s(res.min_first_interval_ns);
        summary["sim_duration_s"] = ns_to_s(res.rounds.back().round_end_ns);
        summary["final_batch_sizes"] = res.batch_sizes.back();
        if (cfg.write_weights) save_weights(res.weights, cfg.out_dir + "/weights.bin");
    } else if (cfg.algo == algo_kind::pfedacnnl) {
        pfed_config pc{cfg.gamma, cfg.epsilon, cfg.k_groups, cfg.adaptive, cfg.seed};
        pfed_result res = run_pfedacnnl(prep.clients, spec, pc, prep.timing);
        for (std::size_t l = 1; l <= total; ++l) {
            // Each client is scored under its own group's model.
            std::vector<double> acc(n);
            std::vector<weight_set> group_eval;
            for (std::size_t g = 0; g < res.meta.size(); ++g)
                group_eval.push_back(with_reference_suffix(res.meta[g], l, spec, cfg.seed));
            for (std::size_t i = 0; i < n; ++i)
                acc[i] = shard_accuracy(group_eval[res.groups.membership[i]], spec,
                                        prep.test_shards[i]);
            double overall = weighted_overall(acc, prep.test_shards);
            const round_timing& rt = res.rounds[l - 1];
            for (std::size_t i = 0; i < n; ++i)
                out.rows.push_back({l, static_cast<int>(i), rt.compute_ns[i], rt.idle_ns[i],
                                    rt.comm_ns[i], res.batch_sizes[l - 1][i], overall, acc[i]});
        }
        out.final_accuracy = evaluate_accuracy(res.personalized, spec, prep.test_shards);
        for (std::size_t i = 0; i < n; ++i)
            out.rows.push_back({total + 1, static_cast<int>(i), res.personalize_compute_ns[i],
                                0.0, 0.0, prep.clients[i].batch_size,
                                out.final_accuracy.overall, out.final_accuracy.per_client[i]});
        summary["rounds"] = res.trace.rounds;
        summary["groups"] = res.groups.k;
        summary["epsilon"] = cfg.epsilon;
        summary["min_first_interval_s"] = ns_to_s(res.min_first_interval_ns);
        summary["sim_duration_s"] = ns_to_s(res.rounds.back().round_end_ns);
        json sizes = json::array();
        for (const auto& g : res.groups.groups) sizes.push_back(g.size());
        summary["group_sizes"] = sizes;
        if (cfg.write_weights) {
            for (std::size_t g = 0; g < res.meta.size(); ++g)
                save_weights(res.meta[g], cfg.out_dir + "/meta_group_" + std::to_string(g) + ".bin");
            for (std::size_t i = 0; i < n; ++i)
                save_weights(res.personalized[i],
                             cfg.out_dir + "/personalized_client_" + std::to_string(i) + ".bin");
        }
    } else {
        fedavg_config fa = cfg.fedavg;
        fa.seed = cfg.seed;
        fedavg_result res = run_fedavg_baseline(prep.clients, spec, fa);
        // Every round moves the full model both ways and runs the same local
        // work; simulate the rounds with the shared cost model.
        std::size_t model_bytes = 0;
        for (std::size_t l = 1; l <= total; ++l) {
            auto [d, m] = spec.weight_dims(l);
            model_bytes += weight_bytes(d, m);
        }
        std::vector<client_round_work> work(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t sz = prep.clients[i].data.size();
            std::size_t batches = (sz + fa.batch_size - 1) / fa.batch_size;
            work[i] = {fa.local_epochs * batches, fa.local_epochs * sz, model_bytes};
        }
        double start = 0.0;
        for (std::size_t r = 0; r < fa.rounds; ++r) {
            round_timing rt = simulate_round(prep.timing, work, start, model_bytes);
            accuracy_report rep = evaluate_accuracy(res.per_round[r], spec, prep.test_shards);
            for (std::size_t i = 0; i < n; ++i)
                out.rows.push_back({r + 1, static_cast<int>(i), rt.compute_ns[i], rt.idle_ns[i],
                                    rt.comm_ns[i], fa.batch_size, rep.overall,
                                    rep.per_client[i]});
            start = rt.round_end_ns;
        }
        out.final_accuracy = evaluate_accuracy(res.weights, spec, prep.test_shards);
        summary["rounds"] = fa.rounds;
        summary["learning_rate"] = fa.learning_rate;
        summary["final_loss"] = res.round_loss.back();
        summary["sim_duration_s"] = ns_to_s(start);
        if (cfg.write_weights) save_weights(res.weights, cfg.out_dir + "/weights.bin");
    }

    summary["final_accuracy"] = accuracy_json(out.final_accuracy);
    out.summary = summary;
    write_metrics_csv(out.rows, cfg.out_dir + "/metrics.csv");
    std::ofstream js(cfg.out_dir + "/summary.json");
    if (!js) throw io_error("cannot write summary.json");
    js << summary.dump(2) << "\n";
    return out;
}

double oracle_deviation(const experiment_config& cfg) {
    if (cfg.algo == algo_kind::fedavg)
        throw config_error("oracle-check requires an analytic algorithm");
    prepared_experiment prep = prepare_experiment(cfg);
    encoding_set enc = make_encoding_set(cfg.seed, prep.spec);

    std::vector<dataset> shards;
    for (const auto& c : prep.clients) shards.push_back(c.data);

    fed_config fc{cfg.gamma, cfg.adaptive, cfg.seed};
    fed_result fed = run_fedacnnl(prep.clients, prep.spec, enc, fc, prep.timing);

    dataset pooled = concat_datasets(shards);
    acnnl_config ac;
    ac.gamma = cfg.gamma;
    ac.batch_size = 256;
    weight_set central = train_acnnl(pooled, prep.spec, enc, ac);

    double worst = 0.0;
    for (std::size_t l = 1; l <= prep.spec.trainable_count(); ++l)
        worst = std::max(worst,
                         relative_frobenius_distance(fed.weights.at(l), central.at(l)));
    return worst;
}

}  // namespace afl
