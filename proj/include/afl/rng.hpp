#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "afl/errors.hpp"

namespace afl {

// Deterministic PRNG used everywhere in the library. The generator is
// splitmix64: state advances by the golden-ratio constant and each output is
// the finalizer mix64(state). Substreams are derived by re-seeding a child
// with mix64(base + (tag + 1) * GOLDEN), which places the child on an
// unrelated orbit position so parent and child sequences do not overlap.
// Every stochastic component takes an explicit seed or rng; nothing reads
// global state, so runs are bit-reproducible across executions.
class rng {
public:
    static constexpr std::uint64_t GOLDEN = 0x9e3779b97f4a7c15ULL;

    explicit rng(std::uint64_t seed) : base_(seed), state_(seed) {}

    // splitmix64 finalizer; bijective on 64-bit words.
    static std::uint64_t mix64(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    // Independent child stream identified by tag; derivation depends only on
    // the seed this rng was constructed with, not on how much it has drawn.
    rng derive(std::uint64_t tag) const {
        return rng(mix64(base_ + (tag + 1) * GOLDEN));
    }

    std::uint64_t next_u64() {
        state_ += GOLDEN;
        return mix64(state_);
    }

    // Uniform on [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer on [0, n) via Lemire's multiply-shift with rejection.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw domain_error("next_below: n must be positive");
        std::uint64_t x = next_u64();
        unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
        std::uint64_t lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                x = next_u64();
                m = static_cast<unsigned __int128>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Standard normal via Box-Muller; the second variate of each pair is
    // cached so consecutive draws consume one uniform pair per two normals.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] keeps the log finite.
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Gamma(shape, 1) via Marsaglia-Tsang squeeze; shape < 1 handled by
    // boosting and scaling with u^(1/shape).
    double next_gamma(double shape) {
        if (!(shape > 0.0)) throw domain_error("next_gamma: shape must be positive");
        if (shape < 1.0) {
            double u = 0.0;
            while (u <= 0.0) u = next_double();
            return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = next_normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = 0.0;
            while (u <= 0.0) u = next_double();
            double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
            if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Symmetric Dirichlet(alpha) over k categories.
    std::vector<double> next_dirichlet(double alpha, std::size_t k) {
        if (k == 0) throw domain_error("next_dirichlet: k must be positive");
        std::vector<double> g(k);
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            g[i] = next_gamma(alpha);
            sum += g[i];
        }
        if (sum <= 0.0) {
            // All-zero draws are possible only through underflow at tiny
            // alpha; fall back to a uniform simplex corner draw.
            std::vector<double> p(k, 0.0);
            p[next_below(k)] = 1.0;
            return p;
        }
        for (std::size_t i = 0; i < k; ++i) g[i] /= sum;
        return g;
    }

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t base_;
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Stream tags used to derive the library's named substreams from a run seed.
// Keeping them in one table documents the full derivation graph.
namespace stream {
inline constexpr std::uint64_t ENCODING = 0x01;        // label-encoding matrices, then derive(layer)
inline constexpr std::uint64_t SERVER_INIT = 0x02;     // reference init for untrained suffix layers
inline constexpr std::uint64_t CLIENT_INIT = 0x03;     // per-client local init, then derive(client)
inline constexpr std::uint64_t BATCH_ORDER = 0x04;     // derive(client), derive(layer) -> sample order
inline constexpr std::uint64_t PARTITION = 0x05;       // dataset partitioning
inline constexpr std::uint64_t SPLIT = 0x06;           // local train/test split, then derive(client)
inline constexpr std::uint64_t KMEANS = 0x07;          // clustering of clients
inline constexpr std::uint64_t SYNTHETIC = 0x08;       // synthetic generator, then derive(client)
inline constexpr std::uint64_t SPEEDS = 0x09;          // simulated client speed draw
inline constexpr std::uint64_t FEDAVG = 0x0a;          // baseline init and batch order
}  // namespace stream

}  // namespace afl
