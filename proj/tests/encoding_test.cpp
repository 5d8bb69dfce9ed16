#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "afl/encoding.hpp"
#include "afl/errors.hpp"
#include "afl/model.hpp"
#include "oracle_helpers.hpp"

using namespace afl;

namespace {

matrix2d one_hot_rows(const std::vector<std::size_t>& labels, std::size_t classes) {
    matrix2d y(labels.size(), classes);
    for (std::size_t i = 0; i < labels.size(); ++i) y(i, labels[i]) = 1.0;
    return y;
}

}  // namespace

TEST_SUITE("encoding matrices") {
    TEST_CASE("one matrix per hidden trainable layer with the layer's output width") {
        model_spec m = make_mlp(784, {128, 64}, 10);
        encoding_set enc = make_encoding_set(42, m);
        CHECK(enc.total_layers() == 3);
        REQUIRE(enc.mats.size() == 2);
        CHECK(enc.mats[0].rows() == 10);
        CHECK(enc.mats[0].cols() == 128);
        CHECK(enc.mats[1].rows() == 10);
        CHECK(enc.mats[1].cols() == 64);
    }

    TEST_CASE("single-layer models need no matrices") {
        model_spec m = make_logistic_regression(784, 10);
        encoding_set enc = make_encoding_set(42, m);
        CHECK(enc.mats.empty());
        CHECK(enc.total_layers() == 1);
    }

    TEST_CASE("same seed gives identical matrices, different seeds diverge") {
        model_spec m = make_mlp(20, {8, 4}, 5);
        encoding_set a = make_encoding_set(7, m);
        encoding_set b = make_encoding_set(7, m);
        encoding_set c = make_encoding_set(8, m);
        CHECK(a.mats[0] == b.mats[0]);
        CHECK(a.mats[1] == b.mats[1]);
        CHECK(!(a.mats[0] == c.mats[0]));
    }

    TEST_CASE("per-layer matrices are independent draws") {
        model_spec m = make_mlp(20, {8, 8}, 5);
        encoding_set enc = make_encoding_set(7, m);
        CHECK(!(enc.mats[0] == enc.mats[1]));
    }

    TEST_CASE("entries look standard normal") {
        model_spec m = make_mlp(20, {400}, 50);
        encoding_set enc = make_encoding_set(99, m);
        const matrix2d& g = enc.mats[0];
        double sum = 0.0, sq = 0.0;
        for (double v : g.data()) {
            sum += v;
            sq += v * v;
        }
        double n = static_cast<double>(g.size());
        CHECK(std::fabs(sum / n) < 0.03);
        CHECK(sq / n == doctest::Approx(1.0).epsilon(0.05));
    }
}

TEST_SUITE("label encoding") {
    TEST_CASE("output layer passes labels through untouched") {
        model_spec m = make_mlp(6, {4}, 3);
        encoding_set enc = make_encoding_set(1, m);
        matrix2d y = one_hot_rows({0, 2, 1}, 3);
        matrix2d z = encode_labels(y, enc, 2);
        CHECK(z == y);
    }

    TEST_CASE("hidden layers project labels through the layer matrix") {
        model_spec m = make_mlp(6, {4}, 3);
        encoding_set enc = make_encoding_set(1, m);
        matrix2d y = one_hot_rows({0, 2, 1, 2}, 3);
        matrix2d z = encode_labels(y, enc, 1);
        matrix2d ref = oracle::naive_matmul(y, enc.mats[0]);
        CHECK(oracle::rel_frob(z, ref) == 0.0);
        // One-hot labels select rows of the encoding matrix.
        for (std::size_t j = 0; j < 4; ++j) CHECK(z(0, j) == enc.mats[0](0, j));
        for (std::size_t j = 0; j < 4; ++j) CHECK(z(1, j) == enc.mats[0](2, j));
    }

    TEST_CASE("bad layer index or label width throws") {
        model_spec m = make_mlp(6, {4}, 3);
        encoding_set enc = make_encoding_set(1, m);
        matrix2d y = one_hot_rows({0}, 3);
        CHECK_THROWS_AS(encode_labels(y, enc, 0), shape_error);
        CHECK_THROWS_AS(encode_labels(y, enc, 3), shape_error);
        matrix2d bad = one_hot_rows({0}, 4);
        CHECK_THROWS_AS(encode_labels(bad, enc, 1), shape_error);
    }
}

TEST_SUITE("encoder selection") {
    TEST_CASE("narrowest hidden layer wins") {
        model_spec m = make_mlp(30, {16, 4, 8}, 10);
        encoding_set enc = make_encoding_set(3, m);
        const matrix2d& q = select_encoder(enc);
        CHECK(q.cols() == 4);
        CHECK(&q == &enc.mats[1]);
    }

    TEST_CASE("ties go to the earliest layer") {
        model_spec m = make_mlp(30, {8, 16, 8}, 10);
        encoding_set enc = make_encoding_set(3, m);
        CHECK(&select_encoder(enc) == &enc.mats[0]);
    }

    TEST_CASE("single-layer model has no encoder") {
        model_spec m = make_logistic_regression(30, 10);
        encoding_set enc = make_encoding_set(3, m);
        CHECK_THROWS_AS(select_encoder(enc), empty_set);
    }
}

TEST_SUITE("distribution encoding") {
    TEST_CASE("identity encoder exposes the raw class frequencies") {
        matrix2d q = matrix2d::identity(3);
        std::vector<double> h = encode_distribution(one_hot_rows({1, 1, 0, 2, 1}, 3), q);
        REQUIRE(h.size() == 3);
        CHECK(h[0] == doctest::Approx(0.2));
        CHECK(h[1] == doctest::Approx(0.6));
        CHECK(h[2] == doctest::Approx(0.2));
    }

    TEST_CASE("projection is a frequency-weighted sum of encoder rows") {
        matrix2d q = matrix2d::from_rows({{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}});
        // freq = (0.5, 0.25, 0.25)
        std::vector<double> h = encode_distribution(one_hot_rows({0, 0, 1, 2}, 3), q);
        REQUIRE(h.size() == 2);
        CHECK(h[0] == doctest::Approx(0.5 * 1.0 + 0.25 * 3.0 + 0.25 * 5.0));
        CHECK(h[1] == doctest::Approx(0.5 * 2.0 + 0.25 * 4.0 + 0.25 * 6.0));
    }

    TEST_CASE("row order does not change the embedding") {
        model_spec m = make_mlp(6, {4}, 3);
        encoding_set enc = make_encoding_set(11, m);
        const matrix2d& q = select_encoder(enc);
        std::vector<double> a = encode_distribution(one_hot_rows({0, 0, 1, 2, 2, 2}, 3), q);
        std::vector<double> b = encode_distribution(one_hot_rows({2, 0, 2, 1, 0, 2}, 3), q);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }

    TEST_CASE("soft labels embed by per-row argmax") {
        matrix2d soft = matrix2d::from_rows({{0.6, 0.4}, {0.1, 0.9}, {0.8, 0.2}});
        matrix2d q = matrix2d::identity(2);
        std::vector<double> h = encode_distribution(soft, q);
        CHECK(h[0] == doctest::Approx(2.0 / 3.0));
        CHECK(h[1] == doctest::Approx(1.0 / 3.0));
    }

    TEST_CASE("empty label set or width mismatch throws") {
        matrix2d q = matrix2d::identity(3);
        matrix2d empty(0, 3);
        CHECK_THROWS_AS(encode_distribution(empty, q), empty_dataset);
        CHECK_THROWS_AS(encode_distribution(one_hot_rows({0}, 4), q), shape_error);
    }
}
