#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace afl {

// Dense row-major matrix of doubles. This is deliberately a thin container:
// all numerics live in free functions so kernels stay easy to audit.
class matrix2d {
public:
    matrix2d() = default;

    matrix2d(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    matrix2d(std::size_t rows, std::size_t cols, std::vector<double> data);

    static matrix2d identity(std::size_t n);
    static matrix2d from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;

    // Elementwise sum; shapes must match.
    matrix2d& operator+=(const matrix2d& other);
    matrix2d& operator*=(double s);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

bool operator==(const matrix2d& a, const matrix2d& b);

// c = a * b. Inner loop runs over contiguous rows of b so the kernel streams
// cache lines; exact zeros in a are skipped (adding 0*row is a no-op), which
// makes one-hot label products cheap.
matrix2d matmul(const matrix2d& a, const matrix2d& b);

// dst += a * b with dst preallocated to (a.rows x b.cols).
void matmul_acc(matrix2d& dst, const matrix2d& a, const matrix2d& b);

matrix2d transpose(const matrix2d& a);

// Each row of a repeated `times` consecutive times (used to spread one label
// row across all patch rows of the same image).
matrix2d replicate_rows(const matrix2d& a, std::size_t times);

double frobenius_norm(const matrix2d& a);
double max_abs_diff(const matrix2d& a, const matrix2d& b);

// ||a - b||_F / ||b||_F, with an absolute fallback when ||b||_F == 0.
double relative_frobenius_distance(const matrix2d& a, const matrix2d& b);

// Sufficient statistics of a regularized least-squares problem: gram = X^T X
// (d x d) and cross = X^T Z (d x m). Additive across sample batches, which is
// what makes single-round aggregation possible.
struct layer_stats {
    matrix2d gram;
    matrix2d cross;

    layer_stats() = default;
    layer_stats(std::size_t d, std::size_t m) : gram(d, d), cross(d, m) {}

    std::size_t feature_dim() const { return gram.rows(); }
    std::size_t target_dim() const { return cross.cols(); }

    void add(const layer_stats& other);
};

// stats.gram += x^T x, stats.cross += x^T z for one batch (x: n x d, z: n x m).
void accumulate_stats(layer_stats& stats, const matrix2d& x_batch, const matrix2d& z_batch);

// Solves (gram + reg * I) W = cross by Cholesky factorization. gram must be
// symmetric positive semi-definite and reg > 0 so the shifted system is SPD.
matrix2d solve_regularized_ls(const matrix2d& gram, const matrix2d& cross, double reg);

}  // namespace afl
