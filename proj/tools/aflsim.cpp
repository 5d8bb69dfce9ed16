#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "afl/errors.hpp"
#include "afl/experiment.hpp"

namespace {

constexpr int EXIT_OK = 0;
constexpr int EXIT_CONFIG = 2;
constexpr int EXIT_NUMERIC = 3;

int run_cmd(const std::string& config_path, const std::string& out_dir,
            const std::string& algo_override, bool has_seed, std::uint64_t seed_override) {
    afl::experiment_config cfg = afl::load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!algo_override.empty()) cfg.algo = afl::parse_algo(algo_override);
    if (has_seed) cfg.seed = seed_override;
    afl::run_output out = afl::run_experiment(cfg);
    std::printf("algo=%s rounds=%s clients=%zu\n", afl::algo_name(cfg.algo).c_str(),
                out.summary["rounds"].dump().c_str(), out.final_accuracy.per_client.size());
    std::printf("final accuracy: overall=%.4f (over %zu held-out samples)\n",
                out.final_accuracy.overall, out.final_accuracy.total_samples);
    std::printf("wrote %s/metrics.csv and %s/summary.json\n", cfg.out_dir.c_str(),
                cfg.out_dir.c_str());
    return EXIT_OK;
}

int validate_cmd(const std::string& config_path) {
    try {
        afl::load_config(config_path);
    } catch (const afl::io_error& e) {
        // An unreadable config cannot be a valid one.
        std::fprintf(stderr, "config error: %s\n", e.what());
        return EXIT_CONFIG;
    }
    std::printf("config ok: %s\n", config_path.c_str());
    return EXIT_OK;
}

int oracle_cmd(const std::string& config_path, bool has_seed, std::uint64_t seed_override) {
    afl::experiment_config cfg = afl::load_config(config_path);
    if (has_seed) cfg.seed = seed_override;
    double dev = afl::oracle_deviation(cfg);
    std::printf("max per-layer relative deviation (federated vs pooled): %.3e\n", dev);
    if (!(dev < 1e-9)) {
        std::fprintf(stderr, "oracle-check FAILED: deviation %.3e exceeds 1e-9\n", dev);
        return EXIT_NUMERIC;
    }
    std::printf("oracle-check passed (threshold 1e-9)\n");
    return EXIT_OK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"analytic federated learning simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir, algo_override;
    std::uint64_t seed_override = 0;

    CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("--config", config_path, "experiment config (json)")->required();
    run->add_option("--out", out_dir, "output directory override");
    run->add_option("--algo", algo_override,
                    "algorithm override: acnnl, fedacnnl, pfedacnnl, fedavg");
    CLI::Option* run_seed = run->add_option("--seed", seed_override, "seed override");

    CLI::App* validate = app.add_subcommand("validate", "check a config file");
    validate->add_option("--config", config_path, "experiment config (json)")->required();

    CLI::App* oracle = app.add_subcommand("oracle-check",
                                          "verify federated/pooled weight equivalence");
    oracle->add_option("--config", config_path, "experiment config (json)")->required();
    CLI::Option* oracle_seed = oracle->add_option("--seed", seed_override, "seed override");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return run_cmd(config_path, out_dir, algo_override, run_seed->count() > 0,
                           seed_override);
        if (validate->parsed()) return validate_cmd(config_path);
        return oracle_cmd(config_path, oracle_seed->count() > 0, seed_override);
    } catch (const afl::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return EXIT_CONFIG;
    } catch (const afl::numeric_error& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return EXIT_NUMERIC;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
