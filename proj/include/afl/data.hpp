#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "afl/matrix.hpp"
#include "afl/model.hpp"

namespace afl {

// Features (n x d, images flattened h*w*c) plus one-hot labels (n x classes).
struct dataset {
    matrix2d features;
    image_shape shape;  // flat() when features are plain vectors
    matrix2d labels;

    std::size_t size() const { return features.rows(); }
    std::size_t feature_dim() const { return features.cols(); }
    std::size_t class_count() const { return labels.cols(); }

    // Checks row counts agree, values are finite, and every label row is
    // exactly one-hot.
    void validate() const;

    std::size_t label_of(std::size_t i) const;
};

dataset take_rows(const dataset& d, const std::vector<std::size_t>& idx);
dataset concat_datasets(const std::vector<dataset>& parts);

// Per-feature mean over all rows of all parts (parts must agree on dims).
std::vector<double> feature_mean(const std::vector<dataset>& parts);
// Subtract a per-feature offset from every row in place.
void shift_features(dataset& d, const std::vector<double>& offset);

// IDX image + label file pair (gzip-compressed files are detected by their
// magic bytes and inflated transparently). Pixels are scaled to [0, 1].
dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Row indices per client; sets are disjoint and cover the parent exactly.
struct federated_split {
    std::vector<std::vector<std::size_t>> members;
};

// Label-skewed partition: for each class, proportions drawn from a symmetric
// Dirichlet(beta) decide how that class's samples spread over clients. Every
// client ends up with at least one sample.
federated_split partition_dirichlet(const dataset& d, std::size_t clients, double beta,
                                    std::uint64_t seed);

// Near-equal random partition (shuffle, then deal round-robin).
federated_split partition_random(const dataset& d, std::size_t clients, std::uint64_t seed);

// Seeded shuffle of [0, n), then split at round(n * fraction). Both sides are
// guaranteed non-empty.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_test(
    std::size_t n, double fraction, std::uint64_t seed);

struct synthetic_params {
    std::size_t total_samples = 50000;
    std::size_t dim = 60;
    std::size_t classes = 10;
    double count_exponent = 1.8;   // client sizes follow rank^(-count_exponent)
    std::size_t min_count = 20;
    double feature_decay = 1.2;    // feature j has variance j^(-feature_decay)
};

// Heterogeneous synthetic classification task. alpha_bar scales how much the
// per-client label models differ; beta_bar scales how much the per-client
// feature distributions differ. Each client draws its own softmax model
// (W_i, b_i) around a client mean u_i ~ N(0, alpha_bar) and its own feature
// center v_i around B_i ~ N(0, beta_bar); features add independent Gaussian
// noise whose variance decays per coordinate; labels are the argmax logit.
std::vector<dataset> generate_synthetic(double alpha_bar, double beta_bar, std::size_t clients,
                                        std::uint64_t seed, const synthetic_params& p = {});

void save_dataset(const dataset& d, const std::string& path);
dataset load_dataset(const std::string& path);

}  // namespace afl
