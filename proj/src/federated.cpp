#include "afl/federated.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "afl/errors.hpp"
#include "afl/rng.hpp"

namespace afl {

std::vector<client_state> make_clients(const std::vector<dataset>& shards,
                                       const model_spec& spec, std::size_t batch_size,
                                       std::size_t max_batch_size, std::uint64_t seed) {
    if (shards.empty()) throw domain_error("make_clients: no shards");
    std::vector<client_state> out;
    out.reserve(shards.size());
    for (std::size_t i = 0; i < shards.size(); ++i) {
        if (shards[i].size() == 0)
            throw empty_dataset("make_clients: shard " + std::to_string(i) + " is empty");
        client_state c;
        c.client_id = static_cast<int>(i);
        c.data = shards[i];
        c.model = weight_set::untrained(spec);
        c.batch_size = batch_size == 0 ? shards[i].size() : batch_size;
        c.initial_batch_size = c.batch_size;
        c.max_batch_size = max_batch_size == 0 ? shards[i].size() : max_batch_size;
        c.order_seed = seed;
        out.push_back(std::move(c));
    }
    return out;
}

namespace {

double round_ns(double seconds) { return std::round(seconds * 1e9); }

}  // namespace

void timing_model::validate(std::size_t clients) const {
    if (speeds.size() != clients)
        throw domain_error("timing_model: " + std::to_string(speeds.size()) + " speeds for " +
                           std::to_string(clients) + " clients");
    for (double s : speeds)
        if (!(s > 0.0)) throw domain_error("timing_model: speeds must be positive");
    if (!(batch_overhead_s > 0.0) || !(row_cost_s > 0.0))
        throw domain_error("timing_model: compute costs must be positive");
    if (!(bandwidth_bytes_per_s > 0.0) || !(latency_s > 0.0))
        throw domain_error("timing_model: transfer costs must be positive");
}

double timing_model::compute_ns(std::size_t client, std::size_t batches,
                                std::size_t rows) const {
    double s = (static_cast<double>(batches) * batch_overhead_s +
                static_cast<double>(rows) * row_cost_s) /
               speeds[client];
    return round_ns(s);
}

double timing_model::transfer_ns(std::size_t bytes) const {
    return round_ns(static_cast<double>(bytes) / bandwidth_bytes_per_s + latency_s);
}

timing_model uniform_timing(std::size_t clients) {
    timing_model tm;
    tm.speeds.assign(clients, 1.0);
    return tm;
}

round_timing simulate_round(const timing_model& tm, const std::vector<client_round_work>& work,
                            double round_start_ns, std::size_t broadcast_bytes) {
    const std::size_t n = work.size();
    tm.validate(n);
    if (n == 0) throw domain_error("simulate_round: no clients");
    round_timing rt;
    rt.round_start_ns = round_start_ns;
    rt.arrival_ns.resize(n);
    rt.compute_ns.resize(n);
    rt.comm_ns.resize(n);
    rt.idle_ns.resize(n);
    const double bcast = tm.transfer_ns(broadcast_bytes);
    double max_arrival = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rt.compute_ns[i] = tm.compute_ns(i, work[i].batches, work[i].rows);
        double up = tm.transfer_ns(work[i].upload_bytes);
        rt.comm_ns[i] = up + bcast;
        rt.arrival_ns[i] = round_start_ns + rt.compute_ns[i] + up;
        max_arrival = std::max(max_arrival, rt.arrival_ns[i]);
    }
    for (std::size_t i = 0; i < n; ++i) rt.idle_ns[i] = max_arrival - rt.arrival_ns[i];
    rt.round_end_ns = max_arrival + bcast;
    return rt;
}

std::size_t protocol_trace::count(const std::string& what) const {
    std::size_t n = 0;
    for (const auto& e : events)
        if (e.what == what) ++n;
    return n;
}

std::size_t stats_bytes(std::size_t d, std::size_t m) { return 8 * (d * d + d * m); }
std::size_t weight_bytes(std::size_t d, std::size_t m) { return 8 * d * m; }

upload_message client_compute_round(const client_state& c, const model_spec& spec,
                                    const encoding_set& enc, std::size_t layer) {
    if (c.client_id < 0) throw domain_error("client_compute_round: negative client id");
    if (c.data.size() == 0) throw empty_dataset("client_compute_round: empty shard");
    if (c.batch_size == 0) throw domain_error("client_compute_round: batch_size must be positive");
    if (enc.total_layers() != spec.trainable_count())
        throw shape_error("client_compute_round: encoding set depth mismatch");

    const std::size_t total = spec.trainable_count();
    auto [dim, odim] = spec.weight_dims(layer);
    const std::size_t rows_per = spec.rows_per_sample(layer);

    // Seeded per-(seed, client, layer) sample order. The statistics are exact
    // sums, so the order only models how a real client streams its shard.
    std::vector<std::size_t> order(c.data.size());
    std::iota(order.begin(), order.end(), 0);
    rng(c.order_seed)
        .derive(stream::BATCH_ORDER)
        .derive(static_cast<std::uint64_t>(c.client_id))
        .derive(layer)
        .shuffle(order);

    upload_message msg;
    msg.client_id = c.client_id;
    msg.layer = layer;
    msg.stats = layer_stats(dim, odim);
    msg.samples = c.data.size();

    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < order.size(); start += c.batch_size) {
        std::size_t count = std::min(c.batch_size, order.size() - start);
        idx.assign(order.begin() + static_cast<long>(start),
                   order.begin() + static_cast<long>(start + count));
        dataset batch = take_rows(c.data, idx);
        matrix2d x = forward_to_layer(batch.features, c.model, spec, layer);
        if (layer > 1) msg.forward_count += 1;
        matrix2d z = encode_labels(batch.labels, enc, layer);
        if (layer < total) msg.matmul_count += 1;
        if (rows_per > 1) z = replicate_rows(z, rows_per);
        accumulate_stats(msg.stats, x, z);
        msg.matmul_count += 2;
        msg.batches += 1;
    }
    return msg;
}

namespace {

matrix2d aggregate_members(const std::vector<upload_message>& msgs,
                           const std::vector<std::size_t>& members, std::size_t layer,
                           double gamma) {
    if (members.empty()) throw missing_client("aggregate: no expected clients");
    // Index messages by client id, rejecting duplicates and strays.
    std::vector<const upload_message*> by_id(members.back() + 1, nullptr);
    std::vector<bool> expected(members.back() + 1, false);
    for (std::size_t id : members) expected[id] = true;
    for (const auto& m : msgs) {
        if (m.client_id < 0 || static_cast<std::size_t>(m.client_id) >= expected.size() ||
            !expected[static_cast<std::size_t>(m.client_id)])
            throw missing_client("aggregate: unexpected client " + std::to_string(m.client_id));
        if (m.layer != layer)
            throw missing_client("aggregate: client " + std::to_string(m.client_id) +
                                 " sent layer " + std::to_string(m.layer) + ", expected " +
                                 std::to_string(layer));
        if (by_id[static_cast<std::size_t>(m.client_id)])
            throw missing_client("aggregate: duplicate upload from client " +
                                 std::to_string(m.client_id));
        by_id[static_cast<std::size_t>(m.client_id)] = &m;
    }
    layer_stats total;
    bool first = true;
    for (std::size_t id : members) {
        const upload_message* m = by_id[id];
        if (!m) throw missing_client("aggregate: missing upload from client " + std::to_string(id));
        if (first) {
            total = m->stats;
            first = false;
        } else {
            total.add(m->stats);
        }
    }
    return solve_regularized_ls(total.gram, total.cross, gamma);
}

}  // namespace

matrix2d server_aggregate_and_solve(const std::vector<upload_message>& msgs,
                                    std::size_t expected_clients, std::size_t layer,
                                    double gamma) {
    if (expected_clients == 0) throw missing_client("aggregate: zero expected clients");
    std::vector<std::size_t> members(expected_clients);
    std::iota(members.begin(), members.end(), 0);
    return aggregate_members(msgs, members, layer, gamma);
}

std::size_t next_batch_size(double interval_ns, double min_first_interval_ns, std::size_t b1,
                            std::size_t bmax) {
    if (!(interval_ns > 0.0)) throw domain_error("next_batch_size: interval must be positive");
    if (!(min_first_interval_ns > 0.0))
        throw domain_error("next_batch_size: reference interval must be positive");
    if (b1 == 0 || bmax == 0) throw domain_error("next_batch_size: batch bounds must be positive");
    double scaled = std::ceil(interval_ns / min_first_interval_ns * static_cast<double>(b1));
    if (!(scaled >= 1.0)) scaled = 1.0;
    if (scaled >= static_cast<double>(bmax)) return bmax;
    return static_cast<std::size_t>(scaled);
}

grouped_result run_rounds_grouped(std::vector<client_state>& clients,
                                  const std::vector<std::size_t>& membership,
                                  std::size_t n_groups, const model_spec& spec,
                                  const encoding_set& enc, const fed_config& cfg,
                                  const timing_model& tm) {
    const std::size_t n = clients.size();
    if (n == 0) throw domain_error("run_rounds_grouped: no clients");
    if (membership.size() != n)
        throw domain_error("run_rounds_grouped: membership size mismatch");
    if (n_groups == 0) throw domain_error("run_rounds_grouped: need at least one group");
    if (!(cfg.gamma > 0.0)) throw domain_error("run_rounds_grouped: gamma must be positive");
    tm.validate(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (clients[i].client_id != static_cast<int>(i))
            throw domain_error("run_rounds_grouped: client ids must be 0..n-1 in order");
        if (membership[i] >= n_groups)
            throw domain_error("run_rounds_grouped: membership out of range");
    }
    std::vector<std::vector<std::size_t>> group_members(n_groups);
    for (std::size_t i = 0; i < n; ++i) group_members[membership[i]].push_back(i);
    for (std::size_t g = 0; g < n_groups; ++g)
        if (group_members[g].empty())
            throw missing_client("run_rounds_grouped: group " + std::to_string(g) +
                                 " has no clients");

    const std::size_t total = spec.trainable_count();
    grouped_result res;
    res.group_weights.assign(n_groups, weight_set::untrained(spec));

    std::vector<double> prev_arrival(n, 0.0);
    double round_start = 0.0;

    for (std::size_t l = 1; l <= total; ++l) {
        auto [d, m] = spec.weight_dims(l);
        const std::size_t rows_per = spec.rows_per_sample(l);

        res.batch_sizes.emplace_back();
        for (const auto& c : clients) res.batch_sizes.back().push_back(c.batch_size);

        std::vector<upload_message> msgs;
        msgs.reserve(n);
        std::vector<client_round_work> work(n);
        for (std::size_t i = 0; i < n; ++i) {
            msgs.push_back(client_compute_round(clients[i], spec, enc, l));
            work[i].batches = msgs.back().batches;
            work[i].rows = msgs.back().samples * rows_per;
            work[i].upload_bytes = stats_bytes(d, m);
        }

        round_timing rt = simulate_round(tm, work, round_start, weight_bytes(d, m));
        for (std::size_t i = 0; i < n; ++i)
            res.trace.events.push_back(
                {l, static_cast<int>(i), "upload", rt.arrival_ns[i], d, m});

        double solve_time = *std::max_element(rt.arrival_ns.begin(), rt.arrival_ns.end());
        for (std::size_t g = 0; g < n_groups; ++g) {
            std::vector<upload_message> group_msgs;
            for (std::size_t i : group_members[g]) group_msgs.push_back(msgs[i]);
            matrix2d w = aggregate_members(group_msgs, group_members[g], l, cfg.gamma);
            res.trace.events.push_back({l, -1, "solve", solve_time, d, m});
            for (std::size_t i : group_members[g]) clients[i].model.at(l) = w;
            res.group_weights[g].at(l) = std::move(w);
        }
        for (std::size_t i = 0; i < n; ++i)
            res.trace.events.push_back(
                {l, static_cast<int>(i), "install", rt.round_end_ns, d, m});

        std::vector<double> interval(n);
        for (std::size_t i = 0; i < n; ++i) interval[i] = rt.arrival_ns[i] - prev_arrival[i];
        if (l == 1)
            res.min_first_interval_ns = *std::min_element(interval.begin(), interval.end());
        if (cfg.adaptive && l < total) {
            for (std::size_t i = 0; i < n; ++i)
                clients[i].batch_size =
                    next_batch_size(interval[i], res.min_first_interval_ns,
                                    clients[i].initial_batch_size, clients[i].max_batch_size);
        }

        prev_arrival = rt.arrival_ns;
        round_start = rt.round_end_ns;
        for (auto& msg : msgs) res.uploads.push_back(std::move(msg));
        res.rounds.push_back(std::move(rt));
    }
    res.trace.rounds = total;
    return res;
}

fed_result run_fedacnnl(std::vector<client_state>& clients, const model_spec& spec,
                        const encoding_set& enc, const fed_config& cfg,
                        const timing_model& tm) {
    std::vector<std::size_t> membership(clients.size(), 0);
    grouped_result g = run_rounds_grouped(clients, membership, 1, spec, enc, cfg, tm);
    fed_result r;
    r.weights = std::move(g.group_weights[0]);
    r.rounds = std::move(g.rounds);
    r.batch_sizes = std::move(g.batch_sizes);
    r.uploads = std::move(g.uploads);
    r.trace = std::move(g.trace);
    r.min_first_interval_ns = g.min_first_interval_ns;
    return r;
}

fed_result run_fedacnnl(std::vector<client_state>& clients, const model_spec& spec,
                        const fed_config& cfg, const timing_model& tm) {
    return run_fedacnnl(clients, spec, make_encoding_set(cfg.seed, spec), cfg, tm);
}

}  // namespace afl
