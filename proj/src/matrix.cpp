#include "afl/matrix.hpp"

#include <cmath>
#include <string>

#include "afl/errors.hpp"

namespace afl {

matrix2d::matrix2d(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols)
        throw shape_error("matrix2d: data size " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
}

matrix2d matrix2d::identity(std::size_t n) {
    matrix2d m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

matrix2d matrix2d::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r == 0 ? 0 : rows.begin()->size();
    matrix2d m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw shape_error("from_rows: ragged initializer");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

bool matrix2d::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

matrix2d& matrix2d::operator+=(const matrix2d& other) {
    if (rows_ != other.rows_ || cols_ != other.cols_)
        throw shape_error("operator+=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

matrix2d& matrix2d::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

bool operator==(const matrix2d& a, const matrix2d& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a.data() == b.data();
}

void matmul_acc(matrix2d& dst, const matrix2d& a, const matrix2d& b) {
    if (a.cols() != b.rows())
        throw shape_error("matmul: inner dims " + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.rows()));
    if (dst.rows() != a.rows() || dst.cols() != b.cols())
        throw shape_error("matmul: destination shape mismatch");
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* d = dst.row_ptr(i);
        const double* ar = a.row_ptr(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double aik = ar[p];
            if (aik == 0.0) continue;
            const double* br = b.row_ptr(p);
            for (std::size_t j = 0; j < m; ++j) d[j] += aik * br[j];
        }
    }
}

matrix2d matmul(const matrix2d& a, const matrix2d& b) {
    matrix2d c(a.rows(), b.cols());
    matmul_acc(c, a, b);
    return c;
}

matrix2d transpose(const matrix2d& a) {
    matrix2d t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* r = a.row_ptr(i);
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = r[j];
    }
    return t;
}

matrix2d replicate_rows(const matrix2d& a, std::size_t times) {
    if (times == 0) throw domain_error("replicate_rows: times must be positive");
    matrix2d out(a.rows() * times, a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* src = a.row_ptr(i);
        for (std::size_t t = 0; t < times; ++t) {
            double* dst = out.row_ptr(i * times + t);
            for (std::size_t j = 0; j < a.cols(); ++j) dst[j] = src[j];
        }
    }
    return out;
}

double frobenius_norm(const matrix2d& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return std::sqrt(s);
}

double max_abs_diff(const matrix2d& a, const matrix2d& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw shape_error("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = std::fabs(a.data()[i] - b.data()[i]);
        if (d > m) m = d;
    }
    return m;
}

double relative_frobenius_distance(const matrix2d& a, const matrix2d& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw shape_error("relative_frobenius_distance: shape mismatch");
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a.data()[i] - b.data()[i];
        diff += d * d;
        ref += b.data()[i] * b.data()[i];
    }
    if (ref == 0.0) return std::sqrt(diff);
    return std::sqrt(diff / ref);
}

void layer_stats::add(const layer_stats& other) {
    if (gram.rows() != other.gram.rows() || cross.cols() != other.cross.cols())
        throw shape_error("layer_stats::add: shape mismatch");
    gram += other.gram;
    cross += other.cross;
}

void accumulate_stats(layer_stats& stats, const matrix2d& x_batch, const matrix2d& z_batch) {
    if (x_batch.rows() != z_batch.rows())
        throw shape_error("accumulate_stats: batch row counts differ (" +
                          std::to_string(x_batch.rows()) + " vs " +
                          std::to_string(z_batch.rows()) + ")");
    if (x_batch.cols() != stats.feature_dim() || z_batch.cols() != stats.target_dim())
        throw shape_error("accumulate_stats: stat dims do not match batch dims");
    matrix2d xt = transpose(x_batch);
    matmul_acc(stats.gram, xt, x_batch);
    matmul_acc(stats.cross, xt, z_batch);
}

namespace {

// In-place lower Cholesky factorization (Cholesky-Banachiewicz ordering).
// Row-major prefix dot products keep the inner loops on contiguous memory.
void cholesky_lower(matrix2d& a) {
    const std::size_t n = a.rows();
    for (std::size_t i = 0; i < n; ++i) {
        double* ri = a.row_ptr(i);
        for (std::size_t j = 0; j <= i; ++j) {
            const double* rj = a.row_ptr(j);
            double s = ri[j];
            for (std::size_t p = 0; p < j; ++p) s -= ri[p] * rj[p];
            if (i == j) {
                if (!(s > 0.0) || !std::isfinite(s))
                    throw numeric_error("cholesky: non-positive pivot at index " +
                                        std::to_string(i));
                ri[j] = std::sqrt(s);
            } else {
                ri[j] = s / rj[j];
            }
        }
        for (std::size_t j = i + 1; j < n; ++j) ri[j] = 0.0;
    }
}

}  // namespace

matrix2d solve_regularized_ls(const matrix2d& gram, const matrix2d& cross, double reg) {
    const std::size_t n = gram.rows();
    if (gram.cols() != n) throw shape_error("solve_regularized_ls: gram must be square");
    if (cross.rows() != n)
        throw shape_error("solve_regularized_ls: cross rows " + std::to_string(cross.rows()) +
                          " != gram dim " + std::to_string(n));
    if (!(reg > 0.0)) throw domain_error("solve_regularized_ls: reg must be positive");
    if (!gram.all_finite() || !cross.all_finite())
        throw numeric_error("solve_regularized_ls: non-finite input");

    matrix2d l = gram;
    for (std::size_t i = 0; i < n; ++i) l(i, i) += reg;
    cholesky_lower(l);

    // Forward solve L y = cross, then backward solve L^T w = y. Both passes
    // update whole rows at a time so every inner loop is a contiguous axpy.
    matrix2d w = cross;
    const std::size_t m = w.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* wi = w.row_ptr(i);
        const double* li = l.row_ptr(i);
        for (std::size_t p = 0; p < i; ++p) {
            const double f = li[p];
            if (f == 0.0) continue;
            const double* wp = w.row_ptr(p);
            for (std::size_t j = 0; j < m; ++j) wi[j] -= f * wp[j];
        }
        const double inv = 1.0 / li[i];
        for (std::size_t j = 0; j < m; ++j) wi[j] *= inv;
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double* wi = w.row_ptr(ii);
        for (std::size_t p = ii + 1; p < n; ++p) {
            const double f = l(p, ii);
            if (f == 0.0) continue;
            const double* wp = w.row_ptr(p);
            for (std::size_t j = 0; j < m; ++j) wi[j] -= f * wp[j];
        }
        const double inv = 1.0 / l(ii, ii);
        for (std::size_t j = 0; j < m; ++j) wi[j] *= inv;
    }
    if (!w.all_finite()) throw numeric_error("solve_regularized_ls: non-finite solution");
    return w;
}

}  // namespace afl
