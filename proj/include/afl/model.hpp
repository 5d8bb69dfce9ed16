#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afl/matrix.hpp"

namespace afl {

enum class layer_kind { fully_connected, conv2d, avg_pool2d };
enum class activation { none, relu, leaky_relu, softmax };

// One architectural layer. Only the fields relevant to `kind` are meaningful.
struct layer_spec {
    layer_kind kind = layer_kind::fully_connected;
    activation act = activation::none;
    double leaky_slope = 0.01;

    // fully_connected
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;

    // conv2d
    std::size_t kernel_size = 0;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;

    // avg_pool2d
    std::size_t pool_size = 0;
    std::size_t pool_stride = 0;

    bool trainable() const { return kind != layer_kind::avg_pool2d; }
};

layer_spec fc_layer(std::size_t in_dim, std::size_t out_dim, activation act);
layer_spec conv_layer(std::size_t kernel_size, std::size_t in_channels, std::size_t out_channels,
                      std::size_t stride, std::size_t padding, activation act,
                      double leaky_slope = 0.01);
layer_spec pool_layer(std::size_t pool_size, std::size_t pool_stride);

// Spatial shape of image-valued data. height == 0 marks flat (vector) data.
struct image_shape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;

    bool flat() const { return height == 0; }
    std::size_t flat_dim() const { return height * width * channels; }
};

// Full architecture plus the label dimension. `validate()` walks the layer
// list once and proves every adjacent pair is shape-compatible, so any spec
// that constructs successfully is forward-able.
struct model_spec {
    std::vector<layer_spec> layers;
    image_shape input;          // flat() for vector inputs
    std::size_t input_dim = 0;  // used when input.flat()
    std::size_t label_dim = 0;

    std::size_t trainable_count() const;

    // Index into `layers` of the l-th trainable layer (l is 1-based).
    std::size_t trainable_index(std::size_t l) const;

    // Weight matrix shape for trainable layer l: (feature dim d, output dim).
    // For conv layers d = kernel^2 * in_channels.
    std::pair<std::size_t, std::size_t> weight_dims(std::size_t l) const;

    // Number of patch rows one input sample contributes at trainable layer l
    // (out_h * out_w for conv layers, 1 for fully-connected).
    std::size_t rows_per_sample(std::size_t l) const;

    void validate() const;
};

model_spec make_logistic_regression(std::size_t in_dim, std::size_t classes);
model_spec make_mlp(std::size_t in_dim, const std::vector<std::size_t>& hidden,
                    std::size_t classes);
// Five trainable layers: four 'same'-padded conv blocks with widths
// {w, 2w, 4w, 4w}, an average pool, and a final fully-connected classifier.
// base_width 512 gives the full-size network; smaller values shrink every
// conv width proportionally while keeping the topology identical.
model_spec make_dcnn(image_shape in, std::size_t classes, std::size_t base_width = 512);

// Per-trainable-layer weights; an empty matrix means "not trained yet".
struct weight_set {
    std::vector<matrix2d> layers;

    static weight_set untrained(const model_spec& spec);

    bool has(std::size_t l) const;        // l is 1-based
    matrix2d& at(std::size_t l);
    const matrix2d& at(std::size_t l) const;
    std::size_t trained_prefix() const;   // count of leading trained layers
};

// Seeded Gaussian init scaled by 1/sqrt(fan_in); used for reference suffixes
// and the gradient baseline.
weight_set random_init(const model_spec& spec, std::uint64_t seed);

void save_weights(const weight_set& w, const std::string& path);
weight_set load_weights(const std::string& path);

// Dense batch of images, layout (batch, height, width, channels), row-major.
struct tensor4d {
    std::size_t batch = 0, height = 0, width = 0, channels = 0;
    std::vector<double> data;

    tensor4d() = default;
    tensor4d(std::size_t b, std::size_t h, std::size_t w, std::size_t c)
        : batch(b), height(h), width(w), channels(c), data(b * h * w * c, 0.0) {}

    double& at(std::size_t b, std::size_t h, std::size_t w, std::size_t c) {
        return data[((b * height + h) * width + w) * channels + c];
    }
    const double& at(std::size_t b, std::size_t h, std::size_t w, std::size_t c) const {
        return data[((b * height + h) * width + w) * channels + c];
    }

    // Reinterprets each matrix row as one flattened (h, w, c) image.
    static tensor4d from_rows(const matrix2d& rows, image_shape shape);
    matrix2d to_rows() const;
};

// Extracts sliding kernel_size x kernel_size patches with zero padding into a
// (batch * out_h * out_w) x (kernel_size^2 * channels) matrix. Rows follow
// (batch, out_row, out_col) order; within a row, columns follow (kernel_row,
// kernel_col, channel) with channel fastest.
matrix2d im2col(const tensor4d& input, std::size_t kernel_size, std::size_t stride,
                std::size_t padding);

tensor4d avg_pool(const tensor4d& input, std::size_t pool_size, std::size_t pool_stride);

void apply_activation(matrix2d& z, activation act, double leaky_slope);

// Representation consumed by trainable layer l (1-based): flat inputs for
// fully-connected layers, im2col patch matrices for conv layers. Requires
// weights for all trainable layers before l.
matrix2d forward_to_layer(const matrix2d& x, const weight_set& w, const model_spec& spec,
                          std::size_t l);

// Full forward pass to class scores (n x label_dim), activations included.
matrix2d forward_scores(const matrix2d& x, const weight_set& w, const model_spec& spec);

// Argmax class per row; ties resolve to the lowest index.
std::vector<std::size_t> predict(const matrix2d& x, const weight_set& w, const model_spec& spec);

}  // namespace afl
