#include "afl/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "afl/errors.hpp"
#include "afl/rng.hpp"

namespace afl {

void dataset::validate() const {
    if (features.rows() == 0) throw empty_dataset("dataset: no samples");
    if (features.rows() != labels.rows())
        throw shape_error("dataset: feature rows " + std::to_string(features.rows()) +
                          " != label rows " + std::to_string(labels.rows()));
    if (labels.cols() == 0) throw shape_error("dataset: no label columns");
    if (!shape.flat() && shape.flat_dim() != features.cols())
        throw shape_error("dataset: image shape does not match feature dim");
    if (!features.all_finite() || !labels.all_finite())
        throw numeric_error("dataset: non-finite values");
    for (std::size_t i = 0; i < labels.rows(); ++i) {
        const double* r = labels.row_ptr(i);
        std::size_t ones = 0;
        for (std::size_t j = 0; j < labels.cols(); ++j) {
            if (r[j] == 1.0)
                ++ones;
            else if (r[j] != 0.0)
                throw domain_error("dataset: label row " + std::to_string(i) +
                                   " is not one-hot");
        }
        if (ones != 1)
            throw domain_error("dataset: label row " + std::to_string(i) + " is not one-hot");
    }
}

std::size_t dataset::label_of(std::size_t i) const {
    const double* r = labels.row_ptr(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < labels.cols(); ++j)
        if (r[j] > r[best]) best = j;
    return best;
}

dataset take_rows(const dataset& d, const std::vector<std::size_t>& idx) {
    dataset out;
    out.shape = d.shape;
    out.features = matrix2d(idx.size(), d.features.cols());
    out.labels = matrix2d(idx.size(), d.labels.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= d.size())
            throw domain_error("take_rows: index " + std::to_string(idx[i]) + " out of range");
        std::memcpy(out.features.row_ptr(i), d.features.row_ptr(idx[i]),
                    d.features.cols() * sizeof(double));
        std::memcpy(out.labels.row_ptr(i), d.labels.row_ptr(idx[i]),
                    d.labels.cols() * sizeof(double));
    }
    return out;
}

dataset concat_datasets(const std::vector<dataset>& parts) {
    if (parts.empty()) throw empty_dataset("concat_datasets: nothing to concatenate");
    std::size_t n = 0;
    for (const auto& p : parts) {
        if (p.feature_dim() != parts[0].feature_dim() ||
            p.class_count() != parts[0].class_count())
            throw shape_error("concat_datasets: mismatched part dims");
        n += p.size();
    }
    dataset out;
    out.shape = parts[0].shape;
    out.features = matrix2d(n, parts[0].feature_dim());
    out.labels = matrix2d(n, parts[0].class_count());
    std::size_t row = 0;
    for (const auto& p : parts) {
        std::memcpy(out.features.row_ptr(row), p.features.data().data(),
                    p.features.size() * sizeof(double));
        std::memcpy(out.labels.row_ptr(row), p.labels.data().data(),
                    p.labels.size() * sizeof(double));
        row += p.size();
    }
    return out;
}

std::vector<double> feature_mean(const std::vector<dataset>& parts) {
    if (parts.empty()) throw empty_dataset("feature_mean: no parts");
    const std::size_t d = parts[0].feature_dim();
    std::vector<double> mean(d, 0.0);
    std::size_t rows = 0;
    for (const auto& p : parts) {
        if (p.feature_dim() != d) throw shape_error("feature_mean: mismatched part dims");
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double* x = p.features.row_ptr(i);
            for (std::size_t j = 0; j < d; ++j) mean[j] += x[j];
        }
        rows += p.size();
    }
    if (rows == 0) throw empty_dataset("feature_mean: no rows");
    for (double& m : mean) m /= static_cast<double>(rows);
    return mean;
}

void shift_features(dataset& d, const std::vector<double>& offset) {
    if (offset.size() != d.feature_dim())
        throw shape_error("shift_features: offset length does not match feature dim");
    for (std::size_t i = 0; i < d.size(); ++i) {
        double* x = d.features.row_ptr(i);
        for (std::size_t j = 0; j < offset.size(); ++j) x[j] -= offset[j];
    }
}

namespace {

std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

// Inflates gzip-wrapped data; passes anything else through untouched.
std::vector<unsigned char> maybe_gunzip(std::vector<unsigned char> bytes,
                                        const std::string& path) {
    if (bytes.size() < 2 || bytes[0] != 0x1f || bytes[1] != 0x8b) return bytes;
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK) throw io_error("zlib init failed");
    std::vector<unsigned char> out;
    out.reserve(bytes.size() * 4);
    unsigned char buf[1 << 16];
    zs.next_in = bytes.data();
    zs.avail_in = static_cast<uInt>(bytes.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buf;
        zs.avail_out = sizeof buf;
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw format_error("corrupt gzip stream in " + path);
        }
        out.insert(out.end(), buf, buf + (sizeof buf - zs.avail_out));
    }
    inflateEnd(&zs);
    return out;
}

std::uint32_t read_be32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

}  // namespace

dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::vector<unsigned char> img = maybe_gunzip(read_file_bytes(images_path), images_path);
    std::vector<unsigned char> lab = maybe_gunzip(read_file_bytes(labels_path), labels_path);

    if (img.size() < 16) throw format_error("idx image file too short: " + images_path);
    if (read_be32(img.data()) != 0x00000803)
        throw format_error("bad idx image magic in " + images_path);
    std::uint32_t n = read_be32(img.data() + 4);
    std::uint32_t h = read_be32(img.data() + 8);
    std::uint32_t w = read_be32(img.data() + 12);
    std::size_t pixels = std::size_t(n) * h * w;
    if (img.size() != 16 + pixels)
        throw format_error("idx image payload size mismatch in " + images_path);

    if (lab.size() < 8) throw format_error("idx label file too short: " + labels_path);
    if (read_be32(lab.data()) != 0x00000801)
        throw format_error("bad idx label magic in " + labels_path);
    std::uint32_t ln = read_be32(lab.data() + 4);
    if (ln != n)
        throw format_error("idx image/label count mismatch: " + std::to_string(n) + " vs " +
                           std::to_string(ln));
    if (lab.size() != 8 + ln)
        throw format_error("idx label payload size mismatch in " + labels_path);

    std::size_t classes = 0;
    for (std::uint32_t i = 0; i < ln; ++i) {
        if (lab[8 + i] + 1u > classes) classes = lab[8 + i] + 1u;
    }
    if (classes == 0) throw format_error("idx label file has no samples");

    dataset d;
    d.shape = image_shape{h, w, 1};
    d.features = matrix2d(n, std::size_t(h) * w);
    d.labels = matrix2d(n, classes);
    const unsigned char* px = img.data() + 16;
    for (std::size_t i = 0; i < pixels; ++i)
        d.features.data()[i] = static_cast<double>(px[i]) / 255.0;
    for (std::uint32_t i = 0; i < ln; ++i) d.labels(i, lab[8 + i]) = 1.0;
    return d;
}

namespace {

// Integer allocation proportional to weights, largest remainder rounding;
// the result sums to total exactly.
std::vector<std::size_t> apportion(const std::vector<double>& weights, std::size_t total) {
    const std::size_t k = weights.size();
    double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> counts(k, 0);
    if (wsum <= 0.0) {
        for (std::size_t i = 0; i < total; ++i) counts[i % k] += 1;
        return counts;
    }
    std::vector<double> remainder(k);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        double exact = static_cast<double>(total) * weights[i] / wsum;
        counts[i] = static_cast<std::size_t>(exact);
        remainder[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) counts[order[i % k]] += 1;
    return counts;
}

}  // namespace

federated_split partition_dirichlet(const dataset& d, std::size_t clients, double beta,
                                    std::uint64_t seed) {
    if (clients == 0) throw domain_error("partition_dirichlet: need at least one client");
    if (!(beta > 0.0)) throw domain_error("partition_dirichlet: beta must be positive");
    if (d.size() < clients)
        throw domain_error("partition_dirichlet: fewer samples than clients");

    const std::size_t classes = d.class_count();
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < d.size(); ++i) by_class[d.label_of(i)].push_back(i);

    rng base = rng(seed).derive(stream::PARTITION);
    federated_split split;
    split.members.resize(clients);
    for (std::size_t c = 0; c < classes; ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        base.derive(2000 + c).shuffle(idx);
        std::vector<double> props = base.derive(1000 + c).next_dirichlet(beta, clients);
        std::vector<std::size_t> counts = apportion(props, idx.size());
        std::size_t pos = 0;
        for (std::size_t i = 0; i < clients; ++i)
            for (std::size_t t = 0; t < counts[i]; ++t) split.members[i].push_back(idx[pos++]);
    }

    // Repair empty clients by moving one sample at a time from the largest.
    for (;;) {
        std::size_t empty = clients;
        for (std::size_t i = 0; i < clients; ++i)
            if (split.members[i].empty()) {
                empty = i;
                break;
            }
        if (empty == clients) break;
        std::size_t donor = 0;
        for (std::size_t i = 1; i < clients; ++i)
            if (split.members[i].size() > split.members[donor].size()) donor = i;
        if (split.members[donor].size() <= 1)
            throw domain_error("partition_dirichlet: cannot give every client a sample");
        split.members[empty].push_back(split.members[donor].back());
        split.members[donor].pop_back();
    }
    return split;
}

federated_split partition_random(const dataset& d, std::size_t clients, std::uint64_t seed) {
    if (clients == 0) throw domain_error("partition_random: need at least one client");
    if (d.size() < clients) throw domain_error("partition_random: fewer samples than clients");
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng(seed).derive(stream::PARTITION).shuffle(idx);
    federated_split split;
    split.members.resize(clients);
    for (std::size_t i = 0; i < idx.size(); ++i) split.members[i % clients].push_back(idx[i]);
    return split;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_test(
    std::size_t n, double fraction, std::uint64_t seed) {
    if (n < 2) throw domain_error("split_train_test: need at least two samples");
    if (!(fraction > 0.0) || !(fraction < 1.0))
        throw domain_error("split_train_test: fraction must be in (0, 1)");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng(seed).derive(stream::SPLIT).shuffle(idx);
    std::size_t train = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * fraction + 0.5));
    if (train == 0) train = 1;
    if (train == n) train = n - 1;
    std::vector<std::size_t> a(idx.begin(), idx.begin() + static_cast<long>(train));
    std::vector<std::size_t> b(idx.begin() + static_cast<long>(train), idx.end());
    return {a, b};
}

std::vector<dataset> generate_synthetic(double alpha_bar, double beta_bar, std::size_t clients,
                                        std::uint64_t seed, const synthetic_params& p) {
    if (clients == 0) throw domain_error("generate_synthetic: need at least one client");
    if (alpha_bar < 0.0 || beta_bar < 0.0)
        throw domain_error("generate_synthetic: alpha/beta must be non-negative");
    if (p.dim == 0 || p.classes == 0 || p.total_samples == 0)
        throw domain_error("generate_synthetic: dims must be positive");

    // Power-law client sizes: weight rank^(-count_exponent), floor min_count.
    std::vector<double> weights(clients);
    for (std::size_t i = 0; i < clients; ++i)
        weights[i] = std::pow(static_cast<double>(i + 1), -p.count_exponent);
    std::vector<std::size_t> counts = apportion(weights, p.total_samples);
    if (p.min_count * clients > p.total_samples)
        throw domain_error("generate_synthetic: total_samples too small for min_count");
    for (std::size_t i = 0; i < clients; ++i) {
        while (counts[i] < p.min_count) {
            std::size_t donor = 0;
            for (std::size_t j = 1; j < clients; ++j)
                if (counts[j] > counts[donor]) donor = j;
            std::size_t need = p.min_count - counts[i];
            std::size_t spare = counts[donor] > p.min_count ? counts[donor] - p.min_count : 0;
            std::size_t moved = std::min(need, spare);
            if (moved == 0) throw domain_error("generate_synthetic: cannot satisfy min_count");
            counts[donor] -= moved;
            counts[i] += moved;
        }
    }

    std::vector<double> feature_sd(p.dim);
    for (std::size_t j = 0; j < p.dim; ++j)
        feature_sd[j] = std::pow(static_cast<double>(j + 1), -p.feature_decay / 2.0);

    rng base = rng(seed).derive(stream::SYNTHETIC);
    std::vector<dataset> out(clients);
    for (std::size_t i = 0; i < clients; ++i) {
        rng r = base.derive(3000 + i);
        double u = r.next_normal() * std::sqrt(alpha_bar);
        matrix2d w(p.dim, p.classes);
        for (double& v : w.data()) v = u + r.next_normal();
        std::vector<double> b(p.classes);
        for (double& v : b) v = u + r.next_normal();
        double bcenter = r.next_normal() * std::sqrt(beta_bar);
        std::vector<double> vcenter(p.dim);
        for (double& v : vcenter) v = bcenter + r.next_normal();

        dataset d;
        d.features = matrix2d(counts[i], p.dim);
        d.labels = matrix2d(counts[i], p.classes);
        for (std::size_t s = 0; s < counts[i]; ++s) {
            double* x = d.features.row_ptr(s);
            for (std::size_t j = 0; j < p.dim; ++j)
                x[j] = vcenter[j] + r.next_normal() * feature_sd[j];
            std::size_t best = 0;
            double best_score = 0.0;
            for (std::size_t c = 0; c < p.classes; ++c) {
                double score = b[c];
                for (std::size_t j = 0; j < p.dim; ++j) score += x[j] * w(j, c);
                if (c == 0 || score > best_score) {
                    best = c;
                    best_score = score;
                }
            }
            d.labels(s, best) = 1.0;
        }
        out[i] = std::move(d);
    }
    return out;
}

namespace {

constexpr char DATA_MAGIC[8] = {'A', 'F', 'L', 'D', 'A', 'T', '0', '1'};

void put_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t get_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw format_error("dataset file truncated");
    return v;
}

}  // namespace

void save_dataset(const dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out.write(DATA_MAGIC, sizeof DATA_MAGIC);
    put_u64(out, d.size());
    put_u64(out, d.feature_dim());
    put_u64(out, d.shape.height);
    put_u64(out, d.shape.width);
    put_u64(out, d.shape.channels);
    put_u64(out, d.class_count());
    out.write(reinterpret_cast<const char*>(d.features.data().data()),
              static_cast<std::streamsize>(d.features.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(d.labels.data().data()),
              static_cast<std::streamsize>(d.labels.size() * sizeof(double)));
    if (!out) throw io_error("write failed: " + path);
}

dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, DATA_MAGIC, sizeof magic) != 0)
        throw format_error("bad dataset magic in " + path);
    std::uint64_t n = get_u64(in), dim = get_u64(in);
    std::uint64_t h = get_u64(in), w = get_u64(in), c = get_u64(in);
    std::uint64_t classes = get_u64(in);
    dataset d;
    d.shape = image_shape{static_cast<std::size_t>(h), static_cast<std::size_t>(w),
                          static_cast<std::size_t>(c)};
    d.features = matrix2d(n, dim);
    d.labels = matrix2d(n, classes);
    in.read(reinterpret_cast<char*>(d.features.data().data()),
            static_cast<std::streamsize>(d.features.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(d.labels.data().data()),
            static_cast<std::streamsize>(d.labels.size() * sizeof(double)));
    if (!in) throw format_error("dataset file truncated: " + path);
    return d;
}

}  // namespace afl
