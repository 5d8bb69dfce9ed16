#include "afl/personalized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "afl/acnnl.hpp"
#include "afl/errors.hpp"
#include "afl/rng.hpp"

namespace afl {

namespace {

double dist2(const std::vector<double>& a, const double* b, std::size_t dim) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

}  // namespace

double clustering_sse(const std::vector<std::vector<double>>& embeddings,
                      const std::vector<std::size_t>& membership, const matrix2d& centroids) {
    double s = 0.0;
    for (std::size_t i = 0; i < embeddings.size(); ++i)
        s += dist2(embeddings[i], centroids.row_ptr(membership[i]), centroids.cols());
    return s;
}

group_assignment cluster_clients(const std::vector<std::vector<double>>& embeddings,
                                 std::size_t k, std::uint64_t seed) {
    const std::size_t n = embeddings.size();
    if (n == 0) throw empty_dataset("cluster_clients: no embeddings");
    if (k == 0) throw domain_error("cluster_clients: k must be positive");
    if (k > n)
        throw domain_error("cluster_clients: k " + std::to_string(k) + " > clients " +
                           std::to_string(n));
    const std::size_t dim = embeddings[0].size();
    if (dim == 0) throw domain_error("cluster_clients: zero-dimensional embeddings");
    for (const auto& e : embeddings)
        if (e.size() != dim) throw shape_error("cluster_clients: ragged embeddings");

    rng r = rng(seed).derive(stream::KMEANS);
    matrix2d centers(k, dim);

    // k-means++ seeding: first center uniform, then proportional to squared
    // distance from the nearest chosen center.
    std::size_t first = static_cast<std::size_t>(r.next_below(n));
    for (std::size_t j = 0; j < dim; ++j) centers(0, j) = embeddings[first][j];
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = dist2(embeddings[i], centers.row_ptr(0), dim);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t pick;
        if (total > 0.0) {
            double target = r.next_double() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(r.next_below(n));
        }
        for (std::size_t j = 0; j < dim; ++j) centers(c, j) = embeddings[pick][j];
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], dist2(embeddings[i], centers.row_ptr(c), dim));
    }

    std::vector<std::size_t> membership(n, 0);
    group_assignment out;
    constexpr std::size_t MAX_ITERS = 100;
    constexpr double SHIFT_TOL = 1e-8;
    for (std::size_t iter = 0; iter < MAX_ITERS; ++iter) {
        // Assign to the nearest center; ties go to the lowest index.
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = dist2(embeddings[i], centers.row_ptr(0), dim);
            for (std::size_t c = 1; c < k; ++c) {
                double d = dist2(embeddings[i], centers.row_ptr(c), dim);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            membership[i] = best;
        }

        // Repair empty clusters: move the point farthest from its own center
        // out of any cluster that can spare one.
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t m : membership) ++sizes[m];
        for (std::size_t c = 0; c < k; ++c) {
            while (sizes[c] == 0) {
                std::size_t worst = n;
                double worst_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (sizes[membership[i]] < 2) continue;
                    double d = dist2(embeddings[i], centers.row_ptr(membership[i]), dim);
                    if (d > worst_d) {
                        worst_d = d;
                        worst = i;
                    }
                }
                if (worst == n)
                    throw domain_error("cluster_clients: cannot repair empty cluster");
                --sizes[membership[worst]];
                membership[worst] = c;
                ++sizes[c];
            }
        }

        // Update centers.
        matrix2d next(k, dim);
        std::vector<double> count(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            count[membership[i]] += 1.0;
            for (std::size_t j = 0; j < dim; ++j) next(membership[i], j) += embeddings[i][j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            double inv = 1.0 / count[c];
            for (std::size_t j = 0; j < dim; ++j) next(c, j) *= inv;
        }
        // Largest squared center movement this iteration.
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                double d = next(c, j) - centers(c, j);
                s += d * d;
            }
            shift = std::max(shift, s);
        }
        centers = std::move(next);
        out.sse_history.push_back(clustering_sse(embeddings, membership, centers));
        if (shift < SHIFT_TOL * SHIFT_TOL) break;
    }

    out.k = k;
    out.membership = membership;
    out.centroids = std::move(centers);
    out.groups.assign(k, {});
    for (std::size_t i = 0; i < n; ++i) out.groups[membership[i]].push_back(static_cast<int>(i));
    return out;
}

matrix2d personalize_layer(const layer_stats& stats, double epsilon, const matrix2d& meta_layer) {
    if (!(epsilon > 0.0)) throw domain_error("personalize_layer: epsilon must be positive");
    if (meta_layer.rows() != stats.feature_dim() || meta_layer.cols() != stats.target_dim())
        throw shape_error("personalize_layer: meta shape mismatch");
    matrix2d rhs = stats.cross;
    for (std::size_t i = 0; i < rhs.size(); ++i)
        rhs.data()[i] += epsilon * meta_layer.data()[i];
    return solve_regularized_ls(stats.gram, rhs, epsilon);
}

weight_set personalize_client(const client_state& c, const weight_set& meta,
                              const model_spec& spec, const encoding_set& enc, double epsilon) {
    if (c.data.size() == 0) throw empty_dataset("personalize_client: empty shard");
    const std::size_t total = spec.trainable_count();
    if (meta.trained_prefix() < total)
        throw missing_weights("personalize_client: meta model is not fully trained");
    weight_set w = weight_set::untrained(spec);
    std::size_t batch = c.batch_size == 0 ? c.data.size() : c.batch_size;
    for (std::size_t l = 1; l <= total; ++l) {
        // The prefix is the already-personalized layers 1..l-1, so deeper
        // layers adapt to the client's own earlier layers, not the meta ones.
        layer_stats stats = collect_layer_stats(c.data, w, spec, enc, l, batch);
        w.at(l) = personalize_layer(stats, epsilon, meta.at(l));
    }
    return w;
}

pfed_result run_pfedacnnl(std::vector<client_state>& clients, const model_spec& spec,
                          const pfed_config& cfg, const timing_model& tm) {
    const std::size_t n = clients.size();
    if (n == 0) throw domain_error("run_pfedacnnl: no clients");
    if (!(cfg.epsilon > 0.0)) throw domain_error("run_pfedacnnl: epsilon must be positive");
    if (cfg.k_groups == 0) throw domain_error("run_pfedacnnl: need at least one group");
    tm.validate(n);

    encoding_set enc = make_encoding_set(cfg.seed, spec);

    // Stage 1: cluster clients on their label distributions pushed through
    // the narrowest encoder. A single-layer model has no encoding matrices;
    // the raw class-frequency vector serves as the embedding.
    matrix2d identity_enc;
    const matrix2d* q_enc;
    if (enc.mats.empty()) {
        identity_enc = matrix2d::identity(spec.label_dim);
        q_enc = &identity_enc;
    } else {
        q_enc = &select_encoder(enc);
    }
    std::vector<std::vector<double>> embeddings;
    embeddings.reserve(n);
    for (const auto& c : clients) embeddings.push_back(encode_distribution(c.data.labels, *q_enc));
    std::size_t k = std::min(cfg.k_groups, n);
    group_assignment groups = cluster_clients(embeddings, k, cfg.seed);

    // Stage 2: one federated meta model per group, trained in lockstep.
    fed_config fed{cfg.gamma, cfg.adaptive, cfg.seed};
    grouped_result stage2 =
        run_rounds_grouped(clients, groups.membership, k, spec, enc, fed, tm);

    // Stage 3: local closed-form personalization, one pass per layer.
    pfed_result res;
    res.groups = std::move(groups);
    res.meta = std::move(stage2.group_weights);
    res.rounds = std::move(stage2.rounds);
    res.batch_sizes = std::move(stage2.batch_sizes);
    res.trace = std::move(stage2.trace);
    res.min_first_interval_ns = stage2.min_first_interval_ns;
    res.personalized.reserve(n);
    res.personalize_compute_ns.resize(n);
    const std::size_t total = spec.trainable_count();
    for (std::size_t i = 0; i < n; ++i) {
        const weight_set& meta = res.meta[res.groups.membership[i]];
        res.personalized.push_back(personalize_client(clients[i], meta, spec, enc, cfg.epsilon));
        // Stage-3 cost: one statistics pass per layer at the client's final
        // batch size, no communication.
        double ns = 0.0;
        std::size_t batch = clients[i].batch_size == 0 ? clients[i].data.size()
                                                       : clients[i].batch_size;
        std::size_t batches = (clients[i].data.size() + batch - 1) / batch;
        for (std::size_t l = 1; l <= total; ++l)
            ns += tm.compute_ns(i, batches, clients[i].data.size() * spec.rows_per_sample(l));
        res.personalize_compute_ns[i] = ns;
        res.trace.events.push_back({total + 1, static_cast<int>(i), "personalize",
                                    res.rounds.back().round_end_ns + ns, 0, 0});
    }
    return res;
}

}  // namespace afl
