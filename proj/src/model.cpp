#include "afl/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

#include "afl/errors.hpp"
#include "afl/rng.hpp"

namespace afl {

layer_spec fc_layer(std::size_t in_dim, std::size_t out_dim, activation act) {
    layer_spec s;
    s.kind = layer_kind::fully_connected;
    s.in_dim = in_dim;
    s.out_dim = out_dim;
    s.act = act;
    return s;
}

layer_spec conv_layer(std::size_t kernel_size, std::size_t in_channels, std::size_t out_channels,
                      std::size_t stride, std::size_t padding, activation act,
                      double leaky_slope) {
    layer_spec s;
    s.kind = layer_kind::conv2d;
    s.kernel_size = kernel_size;
    s.in_channels = in_channels;
    s.out_channels = out_channels;
    s.stride = stride;
    s.padding = padding;
    s.act = act;
    s.leaky_slope = leaky_slope;
    return s;
}

layer_spec pool_layer(std::size_t pool_size, std::size_t pool_stride) {
    layer_spec s;
    s.kind = layer_kind::avg_pool2d;
    s.pool_size = pool_size;
    s.pool_stride = pool_stride;
    return s;
}

std::size_t model_spec::trainable_count() const {
    std::size_t n = 0;
    for (const auto& l : layers)
        if (l.trainable()) ++n;
    return n;
}

std::size_t model_spec::trainable_index(std::size_t l) const {
    if (l == 0) throw domain_error("trainable_index: layers are numbered from 1");
    std::size_t seen = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].trainable() && ++seen == l) return i;
    }
    throw domain_error("trainable_index: layer " + std::to_string(l) + " out of range");
}

std::pair<std::size_t, std::size_t> model_spec::weight_dims(std::size_t l) const {
    const layer_spec& s = layers[trainable_index(l)];
    if (s.kind == layer_kind::fully_connected) return {s.in_dim, s.out_dim};
    return {s.kernel_size * s.kernel_size * s.in_channels, s.out_channels};
}

namespace {

std::size_t conv_out(std::size_t in, std::size_t kernel, std::size_t stride,
                     std::size_t padding) {
    std::size_t padded = in + 2 * padding;
    if (padded < kernel) throw shape_error("conv window larger than padded input");
    return (padded - kernel) / stride + 1;
}

std::size_t pool_out(std::size_t in, std::size_t pool, std::size_t stride) {
    if (in < pool) throw shape_error("pool window larger than input");
    return (in - pool) / stride + 1;
}

}  // namespace

std::size_t model_spec::rows_per_sample(std::size_t l) const {
    std::size_t target = trainable_index(l);
    if (layers[target].kind == layer_kind::fully_connected) return 1;
    // Walk spatial dims up to the target conv layer.
    image_shape cur = input;
    for (std::size_t i = 0; i < target; ++i) {
        const layer_spec& s = layers[i];
        if (s.kind == layer_kind::conv2d) {
            cur.height = conv_out(cur.height, s.kernel_size, s.stride, s.padding);
            cur.width = conv_out(cur.width, s.kernel_size, s.stride, s.padding);
            cur.channels = s.out_channels;
        } else if (s.kind == layer_kind::avg_pool2d) {
            cur.height = pool_out(cur.height, s.pool_size, s.pool_stride);
            cur.width = pool_out(cur.width, s.pool_size, s.pool_stride);
        } else {
            throw shape_error("conv layer after flat data");
        }
    }
    const layer_spec& s = layers[target];
    return conv_out(cur.height, s.kernel_size, s.stride, s.padding) *
           conv_out(cur.width, s.kernel_size, s.stride, s.padding);
}

void model_spec::validate() const {
    if (layers.empty()) throw domain_error("model_spec: no layers");
    if (label_dim == 0) throw domain_error("model_spec: label_dim must be positive");
    if (trainable_count() == 0) throw domain_error("model_spec: no trainable layers");

    bool is_image = !input.flat();
    image_shape img = input;
    std::size_t flat = input_dim;
    if (is_image) {
        if (img.height == 0 || img.width == 0 || img.channels == 0)
            throw domain_error("model_spec: image input dims must be positive");
    } else if (flat == 0) {
        throw domain_error("model_spec: input_dim must be positive for flat input");
    }

    for (std::size_t i = 0; i < layers.size(); ++i) {
        const layer_spec& s = layers[i];
        bool last = i + 1 == layers.size();
        if (s.act == activation::softmax && !last)
            throw domain_error("model_spec: softmax only allowed on the output layer");
        switch (s.kind) {
            case layer_kind::fully_connected: {
                std::size_t have = is_image ? img.flat_dim() : flat;
                if (s.in_dim != have)
                    throw shape_error("layer " + std::to_string(i) + ": in_dim " +
                                      std::to_string(s.in_dim) + " != incoming " +
                                      std::to_string(have));
                if (s.out_dim == 0) throw domain_error("fc out_dim must be positive");
                is_image = false;
                flat = s.out_dim;
                break;
            }
            case layer_kind::conv2d: {
                if (!is_image) throw shape_error("conv layer requires image input");
                if (s.kernel_size == 0 || s.stride == 0 || s.out_channels == 0)
                    throw domain_error("conv dims must be positive");
                if (s.in_channels != img.channels)
                    throw shape_error("layer " + std::to_string(i) + ": in_channels " +
                                      std::to_string(s.in_channels) + " != incoming " +
                                      std::to_string(img.channels));
                img.height = conv_out(img.height, s.kernel_size, s.stride, s.padding);
                img.width = conv_out(img.width, s.kernel_size, s.stride, s.padding);
                img.channels = s.out_channels;
                break;
            }
            case layer_kind::avg_pool2d: {
                if (!is_image) throw shape_error("pool layer requires image input");
                if (s.pool_size == 0 || s.pool_stride == 0)
                    throw domain_error("pool dims must be positive");
                img.height = pool_out(img.height, s.pool_size, s.pool_stride);
                img.width = pool_out(img.width, s.pool_size, s.pool_stride);
                break;
            }
        }
    }
    const layer_spec& out = layers.back();
    if (out.kind != layer_kind::fully_connected)
        throw shape_error("model_spec: output layer must be fully connected");
    if (out.out_dim != label_dim)
        throw shape_error("model_spec: output dim " + std::to_string(out.out_dim) +
                          " != label_dim " + std::to_string(label_dim));
}

model_spec make_logistic_regression(std::size_t in_dim, std::size_t classes) {
    model_spec m;
    m.input_dim = in_dim;
    m.label_dim = classes;
    m.layers.push_back(fc_layer(in_dim, classes, activation::softmax));
    m.validate();
    return m;
}

model_spec make_mlp(std::size_t in_dim, const std::vector<std::size_t>& hidden,
                    std::size_t classes) {
    model_spec m;
    m.input_dim = in_dim;
    m.label_dim = classes;
    std::size_t prev = in_dim;
    for (std::size_t h : hidden) {
        m.layers.push_back(fc_layer(prev, h, activation::relu));
        prev = h;
    }
    m.layers.push_back(fc_layer(prev, classes, activation::softmax));
    m.validate();
    return m;
}

model_spec make_dcnn(image_shape in, std::size_t classes, std::size_t base_width) {
    if (base_width == 0) throw domain_error("make_dcnn: base_width must be positive");
    model_spec m;
    m.input = in;
    m.label_dim = classes;
    std::size_t w = base_width;
    m.layers.push_back(conv_layer(5, in.channels, w, 1, 2, activation::leaky_relu));
    m.layers.push_back(conv_layer(3, w, 2 * w, 1, 1, activation::leaky_relu));
    m.layers.push_back(conv_layer(3, 2 * w, 4 * w, 1, 1, activation::leaky_relu));
    m.layers.push_back(conv_layer(3, 4 * w, 4 * w, 1, 1, activation::leaky_relu));
    m.layers.push_back(pool_layer(2, 2));
    std::size_t fc_in = (in.height / 2) * (in.width / 2) * 4 * w;
    m.layers.push_back(fc_layer(fc_in, classes, activation::softmax));
    m.validate();
    return m;
}

weight_set weight_set::untrained(const model_spec& spec) {
    weight_set w;
    w.layers.resize(spec.trainable_count());
    return w;
}

bool weight_set::has(std::size_t l) const {
    return l >= 1 && l <= layers.size() && !layers[l - 1].empty();
}

matrix2d& weight_set::at(std::size_t l) {
    if (l < 1 || l > layers.size())
        throw domain_error("weight_set::at: layer " + std::to_string(l) + " out of range");
    return layers[l - 1];
}

const matrix2d& weight_set::at(std::size_t l) const {
    if (l < 1 || l > layers.size())
        throw domain_error("weight_set::at: layer " + std::to_string(l) + " out of range");
    return layers[l - 1];
}

std::size_t weight_set::trained_prefix() const {
    std::size_t n = 0;
    while (n < layers.size() && !layers[n].empty()) ++n;
    return n;
}

weight_set random_init(const model_spec& spec, std::uint64_t seed) {
    weight_set w = weight_set::untrained(spec);
    rng base(seed);
    for (std::size_t l = 1; l <= spec.trainable_count(); ++l) {
        auto [d, m] = spec.weight_dims(l);
        rng r = base.derive(l);
        double scale = 1.0 / std::sqrt(static_cast<double>(d));
        matrix2d mat(d, m);
        for (double& v : mat.data()) v = r.next_normal() * scale;
        w.layers[l - 1] = std::move(mat);
    }
    return w;
}

namespace {

constexpr char WEIGHT_MAGIC[8] = {'A', 'F', 'L', 'W', 'G', 'T', '0', '1'};

void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw format_error("weight file truncated");
    return v;
}

}  // namespace

void save_weights(const weight_set& w, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out.write(WEIGHT_MAGIC, sizeof WEIGHT_MAGIC);
    write_u64(out, w.layers.size());
    for (const matrix2d& m : w.layers) {
        write_u64(out, m.rows());
        write_u64(out, m.cols());
        out.write(reinterpret_cast<const char*>(m.data().data()),
                  static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
    if (!out) throw io_error("write failed: " + path);
}

weight_set load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, WEIGHT_MAGIC, sizeof magic) != 0)
        throw format_error("bad weight file magic in " + path);
    std::uint64_t count = read_u64(in);
    if (count > 1u << 20) throw format_error("implausible layer count");
    weight_set w;
    w.layers.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint64_t r = read_u64(in), c = read_u64(in);
        matrix2d m(r, c);
        in.read(reinterpret_cast<char*>(m.data().data()),
                static_cast<std::streamsize>(m.size() * sizeof(double)));
        if (!in) throw format_error("weight file truncated in layer " + std::to_string(i));
        w.layers[i] = std::move(m);
    }
    return w;
}

tensor4d tensor4d::from_rows(const matrix2d& rows, image_shape shape) {
    if (rows.cols() != shape.flat_dim())
        throw shape_error("from_rows: row length " + std::to_string(rows.cols()) +
                          " != image dim " + std::to_string(shape.flat_dim()));
    tensor4d t;
    t.batch = rows.rows();
    t.height = shape.height;
    t.width = shape.width;
    t.channels = shape.channels;
    t.data = rows.data();
    return t;
}

matrix2d tensor4d::to_rows() const {
    return matrix2d(batch, height * width * channels, data);
}

matrix2d im2col(const tensor4d& input, std::size_t kernel_size, std::size_t stride,
                std::size_t padding) {
    if (kernel_size == 0 || stride == 0) throw domain_error("im2col: zero kernel or stride");
    const std::size_t out_h = conv_out(input.height, kernel_size, stride, padding);
    const std::size_t out_w = conv_out(input.width, kernel_size, stride, padding);
    const std::size_t c = input.channels;
    matrix2d patches(input.batch * out_h * out_w, kernel_size * kernel_size * c);

    std::size_t row = 0;
    for (std::size_t b = 0; b < input.batch; ++b) {
        for (std::size_t oh = 0; oh < out_h; ++oh) {
            for (std::size_t ow = 0; ow < out_w; ++ow, ++row) {
                double* dst = patches.row_ptr(row);
                for (std::size_t kh = 0; kh < kernel_size; ++kh) {
                    // Signed arithmetic: padding can push the window off the
                    // input, those taps stay zero.
                    long ih = static_cast<long>(oh * stride + kh) - static_cast<long>(padding);
                    for (std::size_t kw = 0; kw < kernel_size; ++kw) {
                        long iw = static_cast<long>(ow * stride + kw) - static_cast<long>(padding);
                        double* cell = dst + (kh * kernel_size + kw) * c;
                        if (ih < 0 || ih >= static_cast<long>(input.height) || iw < 0 ||
                            iw >= static_cast<long>(input.width))
                            continue;  // already zero
                        const double* src =
                            input.data.data() +
                            ((b * input.height + static_cast<std::size_t>(ih)) * input.width +
                             static_cast<std::size_t>(iw)) * c;
                        for (std::size_t ch = 0; ch < c; ++ch) cell[ch] = src[ch];
                    }
                }
            }
        }
    }
    return patches;
}

tensor4d avg_pool(const tensor4d& input, std::size_t pool_size, std::size_t pool_stride) {
    if (pool_size == 0 || pool_stride == 0) throw domain_error("avg_pool: zero pool or stride");
    const std::size_t out_h = pool_out(input.height, pool_size, pool_stride);
    const std::size_t out_w = pool_out(input.width, pool_size, pool_stride);
    tensor4d out(input.batch, out_h, out_w, input.channels);
    const double inv = 1.0 / static_cast<double>(pool_size * pool_size);
    for (std::size_t b = 0; b < input.batch; ++b)
        for (std::size_t oh = 0; oh < out_h; ++oh)
            for (std::size_t ow = 0; ow < out_w; ++ow) {
                double* dst = &out.at(b, oh, ow, 0);
                for (std::size_t ph = 0; ph < pool_size; ++ph)
                    for (std::size_t pw = 0; pw < pool_size; ++pw) {
                        const double* src =
                            &input.at(b, oh * pool_stride + ph, ow * pool_stride + pw, 0);
                        for (std::size_t ch = 0; ch < input.channels; ++ch) dst[ch] += src[ch];
                    }
                for (std::size_t ch = 0; ch < input.channels; ++ch) dst[ch] *= inv;
            }
    return out;
}

void apply_activation(matrix2d& z, activation act, double leaky_slope) {
    switch (act) {
        case activation::none:
            return;
        case activation::relu:
            for (double& v : z.data())
                if (v < 0.0) v = 0.0;
            return;
        case activation::leaky_relu:
            for (double& v : z.data())
                if (v < 0.0) v *= leaky_slope;
            return;
        case activation::softmax:
            for (std::size_t i = 0; i < z.rows(); ++i) {
                double* r = z.row_ptr(i);
                double m = r[0];
                for (std::size_t j = 1; j < z.cols(); ++j)
                    if (r[j] > m) m = r[j];
                double s = 0.0;
                for (std::size_t j = 0; j < z.cols(); ++j) {
                    r[j] = std::exp(r[j] - m);
                    s += r[j];
                }
                double inv = 1.0 / s;
                for (std::size_t j = 0; j < z.cols(); ++j) r[j] *= inv;
            }
            return;
    }
}

namespace {

// Shared walker: runs the network until `stop_trainable` (1-based trainable
// index) and returns the representation that layer consumes, or runs to the
// end when stop_trainable == 0.
matrix2d run_network(const matrix2d& x, const weight_set& w, const model_spec& spec,
                     std::size_t stop_trainable) {
    bool is_image = !spec.input.flat();
    std::size_t expect = is_image ? spec.input.flat_dim() : spec.input_dim;
    if (x.cols() != expect)
        throw shape_error("forward: input dim " + std::to_string(x.cols()) + " != expected " +
                          std::to_string(expect));

    tensor4d img;
    matrix2d flat;
    if (is_image)
        img = tensor4d::from_rows(x, spec.input);
    else
        flat = x;

    std::size_t trainable_seen = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const layer_spec& s = spec.layers[i];
        if (s.trainable()) {
            ++trainable_seen;
            if (s.kind == layer_kind::conv2d) {
                matrix2d patches = im2col(img, s.kernel_size, s.stride, s.padding);
                if (trainable_seen == stop_trainable) return patches;
                if (!w.has(trainable_seen))
                    throw missing_weights("forward: layer " + std::to_string(trainable_seen) +
                                          " has no weights");
                std::size_t oh = conv_out(img.height, s.kernel_size, s.stride, s.padding);
                std::size_t ow = conv_out(img.width, s.kernel_size, s.stride, s.padding);
                matrix2d z = matmul(patches, w.at(trainable_seen));
                apply_activation(z, s.act, s.leaky_slope);
                // Patch rows are (batch, oh, ow)-ordered with channels in
                // columns, which is exactly the (b, h, w, c) tensor layout.
                tensor4d next(0, 0, 0, 0);
                next.batch = img.batch;
                next.height = oh;
                next.width = ow;
                next.channels = s.out_channels;
                next.data = std::move(z.data());
                img = std::move(next);
            } else {
                matrix2d cur = is_image ? img.to_rows() : std::move(flat);
                is_image = false;
                if (trainable_seen == stop_trainable) return cur;
                if (!w.has(trainable_seen))
                    throw missing_weights("forward: layer " + std::to_string(trainable_seen) +
                                          " has no weights");
                flat = matmul(cur, w.at(trainable_seen));
                apply_activation(flat, s.act, s.leaky_slope);
            }
        } else {
            img = avg_pool(img, s.pool_size, s.pool_stride);
        }
    }
    if (stop_trainable != 0)
        throw domain_error("forward: trainable layer " + std::to_string(stop_trainable) +
                           " out of range");
    return is_image ? img.to_rows() : flat;
}

}  // namespace

matrix2d forward_to_layer(const matrix2d& x, const weight_set& w, const model_spec& spec,
                          std::size_t l) {
    if (l < 1 || l > spec.trainable_count())
        throw domain_error("forward_to_layer: layer " + std::to_string(l) + " out of range");
    return run_network(x, w, spec, l);
}

matrix2d forward_scores(const matrix2d& x, const weight_set& w, const model_spec& spec) {
    return run_network(x, w, spec, 0);
}

std::vector<std::size_t> predict(const matrix2d& x, const weight_set& w, const model_spec& spec) {
    matrix2d scores = forward_scores(x, w, spec);
    std::vector<std::size_t> out(scores.rows());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        const double* r = scores.row_ptr(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < scores.cols(); ++j)
            if (r[j] > r[best]) best = j;
        out[i] = best;
    }
    return out;
}

}  // namespace afl
