#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "smlc/errors.hpp"

namespace smlc {

// Number of threads used by the parallel loops below. Every loop assigns each
// output row to exactly one thread with a fixed reduction order inside, so
// results are bit-identical for any worker count.
void set_workers(int n);
int worker_count();

// Dense row-major matrix. Vectors are 1 x n or n x 1 matrices.
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(size_t rows, size_t cols, T fill = T(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* row(size_t i) { return data_.data() + i * cols_; }
    const T* row(size_t i) const { return data_.data() + i * cols_; }

    T& operator()(size_t i, size_t j) { return data_[i * cols_ + j]; }
    const T& operator()(size_t i, size_t j) const { return data_[i * cols_ + j]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    std::vector<T>& buffer() { return data_; }
    const std::vector<T>& buffer() const { return data_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<T> data_;
};

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;

// C = A * B. ikj order; parallel over rows of A.
template <typename T>
void matmul(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
    assert(a.cols() == b.rows());
    c = Matrix<T>(a.rows(), b.cols());
    const size_t m = a.rows(), k = a.cols(), n = b.cols();
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
        const size_t i = static_cast<size_t>(ii);
        T* crow = c.row(i);
        const T* arow = a.row(i);
        for (size_t kk = 0; kk < k; ++kk) {
            const T av = arow[kk];
            const T* brow = b.row(kk);
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C = A^T * B where A is k x m, B is k x n. Parallel over rows of C.
template <typename T>
void matmul_at_b(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
    assert(a.rows() == b.rows());
    c = Matrix<T>(a.cols(), b.cols());
    const size_t k = a.rows(), m = a.cols(), n = b.cols();
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
        const size_t i = static_cast<size_t>(ii);
        T* crow = c.row(i);
        for (size_t kk = 0; kk < k; ++kk) {
            const T av = a(kk, i);
            const T* brow = b.row(kk);
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C = A * B^T where A is m x k, B is n x k. Row dot products; parallel over rows.
template <typename T>
void matmul_a_bt(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
    assert(a.cols() == b.cols());
    c = Matrix<T>(a.rows(), b.rows());
    const size_t m = a.rows(), k = a.cols(), n = b.rows();
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
        const size_t i = static_cast<size_t>(ii);
        const T* arow = a.row(i);
        T* crow = c.row(i);
        for (size_t j = 0; j < n; ++j) {
            const T* brow = b.row(j);
            T acc = T(0);
            for (size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            crow[j] = acc;
        }
    }
}

// y = x * W + b applied row-wise; W is in x out, b is 1 x out.
template <typename T>
void affine(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& b, Matrix<T>& y) {
    matmul(x, w, y);
    const size_t n = y.cols();
    assert(b.rows() == 1 && b.cols() == n);
    const T* brow = b.row(0);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(y.rows()); ++i) {
        T* yrow = y.row(static_cast<size_t>(i));
        for (size_t j = 0; j < n; ++j) yrow[j] += brow[j];
    }
}

template <typename T>
void add_inplace(Matrix<T>& a, const Matrix<T>& b) {
    assert(a.same_shape(b));
    T* pa = a.data();
    const T* pb = b.data();
    const size_t n = a.size();
    for (size_t i = 0; i < n; ++i) pa[i] += pb[i];
}

// a += scale * b
template <typename T>
void axpy(Matrix<T>& a, const Matrix<T>& b, T scale) {
    assert(a.same_shape(b));
    T* pa = a.data();
    const T* pb = b.data();
    const size_t n = a.size();
    for (size_t i = 0; i < n; ++i) pa[i] += scale * pb[i];
}

// Column sums into a 1 x n row vector (bias gradients).
template <typename T>
void colsum(const Matrix<T>& a, Matrix<T>& out) {
    out = Matrix<T>(1, a.cols());
    T* o = out.row(0);
    for (size_t i = 0; i < a.rows(); ++i) {
        const T* arow = a.row(i);
        for (size_t j = 0; j < a.cols(); ++j) o[j] += arow[j];
    }
}

// In-place row-wise softmax. Exponentials and the normalizer are accumulated
// in double regardless of T so each stored row sums to 1 up to one rounding.
template <typename T>
void softmax_rows(Matrix<T>& m) {
    const size_t n = m.cols();
    for (size_t i = 0; i < m.rows(); ++i) {
        T* row = m.row(i);
        T mx = row[0];
        for (size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (size_t j = 0; j < n; ++j) sum += std::exp(static_cast<double>(row[j] - mx));
        for (size_t j = 0; j < n; ++j)
            row[j] = static_cast<T>(std::exp(static_cast<double>(row[j] - mx)) / sum);
    }
}

// Numerically stable logistic sigmoid; branch form avoids overflow at extremes.
template <typename T>
T sigmoid(T z) {
    if (z >= T(0)) {
        T e = std::exp(-z);
        return T(1) / (T(1) + e);
    }
    T e = std::exp(z);
    return e / (T(1) + e);
}

} // namespace smlc
