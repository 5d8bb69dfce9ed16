#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "afl/acnnl.hpp"
#include "afl/data.hpp"
#include "afl/encoding.hpp"
#include "afl/errors.hpp"
#include "afl/experiment.hpp"
#include "afl/federated.hpp"
#include "afl/matrix.hpp"
#include "afl/model.hpp"
#include "afl/personalized.hpp"
#include "afl/rng.hpp"
#include "oracle_helpers.hpp"

// End-to-end acceptance gate. Every criterion prints exactly one PASS/FAIL
// line with its measured numbers next to the pinned tolerance, so a transcript
// of this binary is a complete scorecard.

namespace {

using namespace afl;
using nlohmann::json;

// Pinned tolerances and targets.
constexpr double kWeightTol = 1e-9;    // relative Frobenius, federated vs pooled
constexpr double kResidualTol = 1e-8;  // personalization degeneracy residuals
constexpr double kMnistLrFed = 87.1, kMnistLrFedTol = 2.0;
constexpr double kMnistLrPfed = 95.8, kMnistLrPfedTol = 2.0;
constexpr double kSynFed = 81.8, kSynFedTol = 3.0;
constexpr double kSynPfed = 89.0, kSynPfedTol = 3.0;
constexpr double kDnnFed = 90.8, kDnnFedTol = 2.5;
constexpr double kDnnPfed = 96.2, kDnnPfedTol = 2.0;
constexpr double kGainLr = 5.0, kGainDnn = 3.5;

struct stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string strf(const char* format, ...) {
    char buf[768];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

void report(int idx, bool pass, const std::string& detail) {
    std::printf("criterion %2d: %s - %s\n", idx, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

bool in_band(double value, double center, double tol) {
    return std::fabs(value - center) <= tol;
}

dataset mnist_head(std::size_t n) {
    dataset full = load_idx(AFL_DATA_DIR "/mnist/train-images-idx3-ubyte.gz",
                            AFL_DATA_DIR "/mnist/train-labels-idx1-ubyte.gz");
    if (n == 0 || n >= full.size()) return full;
    std::vector<std::size_t> head(n);
    std::iota(head.begin(), head.end(), 0);
    return take_rows(full, head);
}

// Full 70k-image pool, non-iid over 100 clients. The linear model gets
// feature centering (the standard stand-in for its missing intercept); the
// deep model takes raw [0,1] pixels.
json mnist_dataset_doc(bool center) {
    json d{{"kind", "mnist"},
           {"images", AFL_DATA_DIR "/mnist/train-images-idx3-ubyte.gz"},
           {"labels", AFL_DATA_DIR "/mnist/train-labels-idx1-ubyte.gz"},
           {"extra_images", AFL_DATA_DIR "/mnist/t10k-images-idx3-ubyte.gz"},
           {"extra_labels", AFL_DATA_DIR "/mnist/t10k-labels-idx1-ubyte.gz"},
           {"clients", 100},
           {"partition", {{"kind", "dirichlet"}, {"beta", 0.1}}}};
    if (center) d["center"] = true;
    return d;
}

// One federated + one personalized run over the same prepared scenario;
// accuracies in percent over the held-out client shards.
struct pair_result {
    double fed = 0.0;
    double pfed = 0.0;
    double secs = 0.0;
};

pair_result run_pair(const json& dataset_doc, const json& model_doc) {
    stopwatch sw;
    json doc = {{"seed", 1},          {"gamma", 100.0},
                {"epsilon", 2500.0},  {"k_groups", 10},
                {"adaptive_batching", true},
                {"dataset", dataset_doc},
                {"model", model_doc},
                {"batch", {{"initial", 64}, {"max", 1024}}}};
    experiment_config cfg = parse_config(doc);
    prepared_experiment prep = prepare_experiment(cfg);

    pair_result out;
    {
        std::vector<client_state> cs = prep.clients;
        fed_config fc{cfg.gamma, cfg.adaptive, cfg.seed};
        fed_result fed = run_fedacnnl(cs, prep.spec, fc, prep.timing);
        out.fed = 100.0 * evaluate_accuracy(fed.weights, prep.spec, prep.test_shards).overall;
    }
    {
        std::vector<client_state> cs = prep.clients;
        pfed_config pc{cfg.gamma, cfg.epsilon, cfg.k_groups, cfg.adaptive, cfg.seed};
        pfed_result pf = run_pfedacnnl(cs, prep.spec, pc, prep.timing);
        out.pfed =
            100.0 * evaluate_accuracy(pf.personalized, prep.spec, prep.test_shards).overall;
    }
    out.secs = sw.seconds();
    return out;
}

// The three desk-scale scenarios feed criteria 3-6; each runs once.
struct desk_table {
    pair_result mnist_lr, synthetic_lr, mnist_dnn;
    bool have_mnist_lr = false, have_syn = false, have_dnn = false;
};

desk_table& table() {
    static desk_table t;
    return t;
}

const pair_result& mnist_lr_results() {
    desk_table& t = table();
    if (!t.have_mnist_lr) {
        t.mnist_lr = run_pair(mnist_dataset_doc(true), json{{"kind", "logistic_regression"}});
        t.have_mnist_lr = true;
    }
    return t.mnist_lr;
}

const pair_result& synthetic_results() {
    desk_table& t = table();
    if (!t.have_syn) {
        t.synthetic_lr = run_pair(json{{"kind", "synthetic"}, {"clients", 100}},
                                  json{{"kind", "logistic_regression"}});
        t.have_syn = true;
    }
    return t.synthetic_lr;
}

const pair_result& mnist_dnn_results() {
    desk_table& t = table();
    if (!t.have_dnn) {
        t.mnist_dnn =
            run_pair(mnist_dataset_doc(false), json{{"kind", "mlp"}, {"hidden", {128, 64}}});
        t.have_dnn = true;
    }
    return t.mnist_dnn;
}

double max_layer_deviation(const weight_set& a, const weight_set& b, std::size_t layers) {
    double worst = 0.0;
    for (std::size_t l = 1; l <= layers; ++l)
        worst = std::max(worst, relative_frobenius_distance(a.at(l), b.at(l)));
    return worst;
}

}  // namespace

TEST_SUITE("acceptance") {
    TEST_CASE("01 federated weights are invariant to partitioning and batching") {
        stopwatch sw;
        dataset pool = mnist_head(5000);
        model_spec spec = make_mlp(pool.feature_dim(), {128, 64}, pool.class_count());
        encoding_set enc = make_encoding_set(1, spec);
        acnnl_config ac;
        ac.gamma = 100.0;
        ac.batch_size = 256;
        weight_set central = train_acnnl(pool, spec, enc, ac);

        double worst = 0.0;
        std::size_t runs = 0;
        auto run_one = [&](std::size_t n_clients, std::uint64_t part_seed, std::size_t batch) {
            std::vector<dataset> shards;
            if (n_clients == 1) {
                shards.push_back(pool);
            } else {
                federated_split split = partition_random(pool, n_clients, part_seed);
                for (const auto& m : split.members) shards.push_back(take_rows(pool, m));
            }
            std::vector<client_state> clients =
                make_clients(shards, spec, batch, batch == 0 ? 0 : 1024, 1);
            fed_config fc{100.0, false, 1};
            fed_result res = run_fedacnnl(clients, spec, enc, fc, uniform_timing(n_clients));
            worst = std::max(worst,
                             max_layer_deviation(res.weights, central, spec.trainable_count()));
            ++runs;
        };
        for (std::size_t batch : {std::size_t{16}, std::size_t{64}, std::size_t{0}}) {
            run_one(1, 21, batch);  // one client admits a single partition
            for (std::uint64_t part_seed : {21, 22, 23})
                for (std::size_t c : {std::size_t{4}, std::size_t{10}})
                    run_one(c, part_seed, batch);
        }
        double secs = sw.seconds();
        bool pass = worst < kWeightTol && secs < 120.0;
        report(1, pass,
               strf("%zu federated runs (clients {1,4,10}, three partitions, batches "
                    "{16,64,whole-shard}) vs one pooled pass on 5000 samples: max relative "
                    "weight deviation %.2e (tol 1e-9), %.1fs (budget 120s)",
                    runs, worst, secs));
        CHECK(worst < kWeightTol);
        CHECK(secs < 120.0);
    }

    TEST_CASE("02 every federated stage runs one round per trainable layer") {
        stopwatch sw;
        dataset pool = mnist_head(1000);
        federated_split split = partition_random(pool, 4, 9);
        std::vector<dataset> shards;
        for (const auto& m : split.members) shards.push_back(take_rows(pool, m));
        model_spec lr = make_logistic_regression(pool.feature_dim(), pool.class_count());
        model_spec dnn = make_mlp(pool.feature_dim(), {128, 64}, pool.class_count());
        timing_model tm = uniform_timing(4);

        auto fed_rounds = [&](const model_spec& spec) {
            std::vector<client_state> cs = make_clients(shards, spec, 16, 1024, 1);
            fed_config fc{100.0, true, 1};
            fed_result r = run_fedacnnl(cs, spec, fc, tm);
            CHECK(r.trace.rounds == spec.trainable_count());
            CHECK(r.rounds.size() == spec.trainable_count());
            CHECK(r.trace.count("solve") == spec.trainable_count());
            CHECK(r.trace.count("upload") == spec.trainable_count() * 4);
            return r.trace.rounds;
        };
        auto pfed_rounds = [&](const model_spec& spec) {
            std::vector<client_state> cs = make_clients(shards, spec, 16, 1024, 1);
            pfed_config pc{100.0, 2500.0, 2, true, 1};
            pfed_result r = run_pfedacnnl(cs, spec, pc, tm);
            CHECK(r.trace.rounds == spec.trainable_count());
            CHECK(r.rounds.size() == spec.trainable_count());
            CHECK(r.trace.count("solve") == spec.trainable_count() * r.groups.k);
            CHECK(r.trace.count("personalize") == 4);
            return r.trace.rounds;
        };

        std::size_t f_lr = fed_rounds(lr);
        std::size_t f_dnn = fed_rounds(dnn);
        std::size_t p_lr = pfed_rounds(lr);
        std::size_t p_dnn = pfed_rounds(dnn);
        bool pass = f_lr == 1 && p_lr == 1 && f_dnn == 3 && p_dnn == 3;
        report(2, pass,
               strf("protocol traces show %zu/%zu rounds for the linear model and %zu/%zu for "
                    "the [128,64] network (federated/personalized); expected 1 and 3 (%.1fs)",
                    f_lr, p_lr, f_dnn, p_dnn, sw.seconds()));
        CHECK(pass);
    }

    TEST_CASE("03 mnist linear model reaches the reference accuracy band") {
        const pair_result& r = mnist_lr_results();
        bool pass = in_band(r.fed, kMnistLrFed, kMnistLrFedTol) &&
                    in_band(r.pfed, kMnistLrPfed, kMnistLrPfedTol) && r.secs < 600.0;
        report(3, pass,
               strf("full mnist, 100 clients, dirichlet 0.1: federated %.2f%% (target %.1f±%.1f), "
                    "personalized %.2f%% (target %.1f±%.1f), %.0fs (budget 600s)",
                    r.fed, kMnistLrFed, kMnistLrFedTol, r.pfed, kMnistLrPfed, kMnistLrPfedTol,
                    r.secs));
        CHECK(in_band(r.fed, kMnistLrFed, kMnistLrFedTol));
        CHECK(in_band(r.pfed, kMnistLrPfed, kMnistLrPfedTol));
        CHECK(r.secs < 600.0);
    }

    TEST_CASE("04 synthetic linear model reaches the reference accuracy band") {
        const pair_result& r = synthetic_results();
        bool pass = in_band(r.fed, kSynFed, kSynFedTol) && in_band(r.pfed, kSynPfed, kSynPfedTol);
        report(4, pass,
               strf("synthetic(0.5,0.5), 100 power-law clients: federated %.2f%% (target "
                    "%.1f±%.1f), personalized %.2f%% (target %.1f±%.1f), %.0fs",
                    r.fed, kSynFed, kSynFedTol, r.pfed, kSynPfed, kSynPfedTol, r.secs));
        CHECK(in_band(r.fed, kSynFed, kSynFedTol));
        CHECK(in_band(r.pfed, kSynPfed, kSynPfedTol));
    }

    TEST_CASE("05 mnist deep model reaches the reference accuracy band") {
        const pair_result& r = mnist_dnn_results();
        bool pass = in_band(r.fed, kDnnFed, kDnnFedTol) &&
                    in_band(r.pfed, kDnnPfed, kDnnPfedTol) && r.secs < 1200.0;
        report(5, pass,
               strf("full mnist, [128,64] network: federated %.2f%% (target %.1f±%.1f), "
                    "personalized %.2f%% (target %.1f±%.1f), %.0fs (budget 1200s)",
                    r.fed, kDnnFed, kDnnFedTol, r.pfed, kDnnPfed, kDnnPfedTol, r.secs));
        CHECK(in_band(r.fed, kDnnFed, kDnnFedTol));
        CHECK(in_band(r.pfed, kDnnPfed, kDnnPfedTol));
        CHECK(r.secs < 1200.0);
    }

    TEST_CASE("06 personalization gains clear the floors") {
        double g_lr = mnist_lr_results().pfed - mnist_lr_results().fed;
        double g_syn = synthetic_results().pfed - synthetic_results().fed;
        double g_dnn = mnist_dnn_results().pfed - mnist_dnn_results().fed;
        bool pass = g_lr >= kGainLr && g_syn >= kGainLr && g_dnn >= kGainDnn;
        report(6, pass,
               strf("personalized minus federated: mnist linear +%.2f (floor %.1f), synthetic "
                    "+%.2f (floor %.1f), mnist deep +%.2f (floor %.1f)",
                    g_lr, kGainLr, g_syn, kGainLr, g_dnn, kGainDnn));
        CHECK(g_lr >= kGainLr);
        CHECK(g_syn >= kGainLr);
        CHECK(g_dnn >= kGainDnn);
    }

    TEST_CASE("07 adaptive batching cuts idle time without moving the weights") {
        stopwatch sw;
        // Regime the batching scheme targets: per-batch overhead dominates the
        // per-row cost and the network is fast relative to compute, so arrival
        // intervals reflect the clients' speed spread.
        json doc = {{"seed", 1},
                    {"gamma", 100.0},
                    {"dataset",
                     {{"kind", "mnist"},
                      {"images", AFL_DATA_DIR "/mnist/train-images-idx3-ubyte.gz"},
                      {"labels", AFL_DATA_DIR "/mnist/train-labels-idx1-ubyte.gz"},
                      {"subset", 4000},
                      {"clients", 20},
                      {"partition", {{"kind", "random"}}}}},
                    {"model", {{"kind", "mlp"}, {"hidden", {64, 64}}}},
                    {"batch", {{"initial", 16}, {"max", 1024}}},
                    {"timing",
                     {{"speeds", {{"min", 0.25}, {"max", 1.0}}},
                      {"batch_overhead_s", 0.02},
                      {"row_cost_s", 1e-5},
                      {"bandwidth_mbps", 8000.0},
                      {"latency_s", 1e-4}}}};
        experiment_config cfg = parse_config(doc);
        prepared_experiment prep = prepare_experiment(cfg);

        auto run_mode = [&](bool adaptive) {
            std::vector<client_state> cs = prep.clients;
            fed_config fc{100.0, adaptive, 1};
            return run_fedacnnl(cs, prep.spec, fc, prep.timing);
        };
        fed_result adaptive = run_mode(true);
        fed_result fixed = run_mode(false);
        auto idle_sum = [](const fed_result& r) {
            double s = 0.0;
            for (const auto& rt : r.rounds)
                for (double v : rt.idle_ns) s += v;
            return s;
        };
        double idle_on = idle_sum(adaptive);
        double idle_off = idle_sum(fixed);
        double dev =
            max_layer_deviation(adaptive.weights, fixed.weights, prep.spec.trainable_count());
        double cut = (1.0 - idle_on / idle_off) * 100.0;
        bool pass = idle_on < idle_off && dev < kWeightTol;
        report(7, pass,
               strf("20 clients, speeds 0.25-1.0x: summed idle %.1fs adaptive vs %.1fs fixed "
                    "(%.0f%% lower); weight deviation %.2e (tol 1e-9); %.1fs",
                    ns_to_s(idle_on), ns_to_s(idle_off), cut, dev, sw.seconds()));
        CHECK(idle_on < idle_off);
        CHECK(dev < kWeightTol);
    }

    TEST_CASE("08 personalization degeneracies hold over 100 seeded instances") {
        stopwatch sw;
        double worst_dist = 0.0, worst_resid = 0.0, worst_increase = 0.0;
        for (std::uint64_t s = 0; s < 100; ++s) {
            rng r(1000 + s);
            const std::size_t d = 2 + r.next_below(19);
            const std::size_t m = 1 + r.next_below(8);
            matrix2d a(d, d);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) a(i, j) = r.next_normal();
            matrix2d gram = oracle::naive_matmul(transpose(a), a);
            matrix2d meta(d, m);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < m; ++j) meta(i, j) = r.next_normal();

            layer_stats zero(d, m);
            worst_dist = std::max(worst_dist, relative_frobenius_distance(
                                                  personalize_layer(zero, 2500.0, meta), meta));

            layer_stats consistent(d, m);
            consistent.gram = gram;
            consistent.cross = oracle::naive_matmul(gram, meta);
            worst_dist =
                std::max(worst_dist, relative_frobenius_distance(
                                         personalize_layer(consistent, 2500.0, meta), meta));

            layer_stats noisy(d, m);
            noisy.gram = gram;
            noisy.cross = matrix2d(d, m);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < m; ++j) noisy.cross(i, j) = 50.0 * r.next_normal();
            double prev = std::numeric_limits<double>::infinity();
            for (double eps : {1e0, 1e2, 1e4, 1e6, 1e8}) {
                matrix2d w = personalize_layer(noisy, eps, meta);
                double dist = relative_frobenius_distance(w, meta);
                if (dist > prev) worst_increase = std::max(worst_increase, dist - prev);
                prev = dist;

                // Linear-system residual of the solve itself.
                matrix2d lhs = oracle::naive_matmul(gram, w);
                double num = 0.0, den = 0.0;
                for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = 0; j < m; ++j) {
                        double rhs = noisy.cross(i, j) + eps * meta(i, j);
                        double got = lhs(i, j) + eps * w(i, j);
                        num += (got - rhs) * (got - rhs);
                        den += rhs * rhs;
                    }
                worst_resid = std::max(worst_resid, std::sqrt(num / std::max(den, 1.0)));
            }
        }
        bool pass =
            worst_dist <= kResidualTol && worst_resid <= kResidualTol && worst_increase <= 1e-12;
        report(8, pass,
               strf("zero/consistent statistics deviate from the meta weights by at most %.2e, "
                    "solve residuals at most %.2e (tol 1e-8), epsilon sweep monotone (max "
                    "increase %.2e), %.1fs",
                    worst_dist, worst_resid, worst_increase, sw.seconds()));
        CHECK(worst_dist <= kResidualTol);
        CHECK(worst_resid <= kResidualTol);
        CHECK(worst_increase <= 1e-12);
    }

    TEST_CASE("09 planted client groups are recovered exactly") {
        stopwatch sw;
        const std::size_t dim = 8, per_group = 4, k = 3;
        rng noise(77);
        std::vector<std::vector<double>> pts;
        for (std::size_t g = 0; g < k; ++g)
            for (std::size_t i = 0; i < per_group; ++i) {
                std::vector<double> p(dim, 0.0);
                p[g] = 1.0;
                for (double& v : p) v += 0.01 * noise.next_normal();
                pts.push_back(p);
            }
        group_assignment ga = cluster_clients(pts, k, 5);

        bool exact = true;
        std::set<std::size_t> labels;
        for (std::size_t g = 0; g < k; ++g) {
            std::size_t label = ga.membership[g * per_group];
            labels.insert(label);
            for (std::size_t i = 1; i < per_group; ++i)
                exact = exact && ga.membership[g * per_group + i] == label;
        }
        exact = exact && labels.size() == k;

        double sse = ga.sse_history.back();
        double best = oracle::best_sse_exhaustive(pts, k);
        double gap = std::fabs(sse - best);
        bool pass = exact && gap <= 1e-10 * std::max(1.0, best);
        report(9, pass,
               strf("12 embeddings in 3 planted blobs (sigma 0.01): partition recovered %s; "
                    "objective %.6e vs exhaustive optimum %.6e (gap %.2e), %.1fs",
                    exact ? "exactly" : "WRONG", sse, best, gap, sw.seconds()));
        CHECK(exact);
        CHECK(gap <= 1e-10 * std::max(1.0, best));
        CHECK(clustering_sse(pts, ga.membership, ga.centroids) ==
              doctest::Approx(sse).epsilon(1e-12));
    }

    TEST_CASE("10 full-scale baselines substituted by structural checks") {
        stopwatch sw;

        // Per-batch operation audit on a three-layer run: hidden layers cost
        // three matrix products plus one prefix forward per batch; the output
        // layer skips the label projection, the first layer the forward.
        rng r(31);
        std::vector<dataset> shards(2);
        for (dataset& d : shards) {
            d.features = matrix2d(12, 20);
            d.labels = matrix2d(12, 4);
            for (std::size_t i = 0; i < 12; ++i) {
                for (std::size_t j = 0; j < 20; ++j) d.features(i, j) = r.next_normal();
                d.labels(i, i % 4) = 1.0;
            }
        }
        model_spec mlp = make_mlp(20, {16, 8}, 4);
        std::vector<client_state> clients = make_clients(shards, mlp, 4, 64, 1);
        fed_config fc{100.0, false, 1};
        fed_result res = run_fedacnnl(clients, mlp, fc, uniform_timing(2));
        bool ops_ok = res.uploads.size() == 6;
        for (const upload_message& u : res.uploads) {
            ops_ok = ops_ok && u.batches == 3;
            std::size_t want_mm = u.batches * (u.layer < 3 ? 3 : 2);
            std::size_t want_fw = u.batches * (u.layer > 1 ? 1 : 0);
            ops_ok = ops_ok && u.matmul_count == want_mm && u.forward_count == want_fw;
        }
        CHECK(ops_ok);

        // Convolution stacks trace to full width on both native image shapes.
        auto dims_match = [](const model_spec& spec,
                             const std::vector<std::pair<std::size_t, std::size_t>>& want) {
            if (spec.trainable_count() != want.size()) return false;
            for (std::size_t l = 1; l <= want.size(); ++l)
                if (spec.weight_dims(l) != want[l - 1]) return false;
            return true;
        };
        bool shapes_ok =
            dims_match(make_dcnn(image_shape{28, 28, 1}, 10, 512),
                       {{25, 512}, {4608, 1024}, {9216, 2048}, {18432, 2048}, {401408, 10}}) &&
            dims_match(make_dcnn(image_shape{32, 32, 3}, 10, 512),
                       {{75, 512}, {4608, 1024}, {9216, 2048}, {18432, 2048}, {524288, 10}});
        CHECK(shapes_ok);

        // A width-reduced instance of the same stack trains analytically on
        // 500 CIFAR-shaped samples end to end.
        model_spec conv = make_dcnn(image_shape{32, 32, 3}, 10, 2);
        bool reduced_ok = dims_match(
            conv, {{75, 2}, {18, 4}, {36, 8}, {72, 8}, {2048, 10}});
        dataset cifar_like;
        cifar_like.features = matrix2d(500, 32 * 32 * 3);
        cifar_like.labels = matrix2d(500, 10);
        cifar_like.shape = image_shape{32, 32, 3};
        for (std::size_t i = 0; i < 500; ++i) {
            for (std::size_t j = 0; j < cifar_like.features.cols(); ++j)
                cifar_like.features(i, j) = r.next_double();
            cifar_like.labels(i, i % 10) = 1.0;
        }
        acnnl_config ac;
        ac.gamma = 100.0;
        ac.batch_size = 50;
        encoding_set enc = make_encoding_set(1, conv);
        weight_set trained = train_acnnl(cifar_like, conv, enc, ac);
        bool train_ok = true;
        for (std::size_t l = 1; l <= conv.trainable_count(); ++l) {
            train_ok = train_ok && trained.has(l) &&
                       trained.at(l).rows() == conv.weight_dims(l).first &&
                       trained.at(l).cols() == conv.weight_dims(l).second;
            for (double v : trained.at(l).data()) train_ok = train_ok && std::isfinite(v);
        }
        std::vector<std::size_t> pred = predict(cifar_like.features, trained, conv);
        train_ok = train_ok && pred.size() == 500;
        CHECK(reduced_ok);
        CHECK(train_ok);

        bool pass = ops_ok && shapes_ok && reduced_ok && train_ok;
        report(10, pass,
               strf("no full-scale gradient baselines; structural surrogates hold: every upload "
                    "audited at 3 matmuls + 1 forward per batch on hidden layers, conv stacks "
                    "trace to full width (last dense layer 401408x10 / 524288x10), and the "
                    "width-reduced conv stack trains end to end on 500 CIFAR-shaped samples "
                    "(%.1fs)",
                    sw.seconds()));
        CHECK(pass);
    }
}
