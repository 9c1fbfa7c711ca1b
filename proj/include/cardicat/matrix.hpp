// Dense row-major matrix with the handful of kernels the network needs.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cardicat {

template <typename T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T{0}) {}
    Matrix(std::size_t r, std::size_t c, T fill) : rows(r), cols(c), data(r * c, fill) {}

    T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return rows * cols; }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

inline void require_shape(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("shape mismatch: " + what);
}

// C += A * B, A: n x k, B: k x m.
template <typename T>
void add_matmul(Matrix<T>& c, const Matrix<T>& a, const Matrix<T>& b) {
    require_shape(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols, "matmul");
    const std::size_t n = a.rows, k = a.cols, m = b.cols;
    for (std::size_t i = 0; i < n; ++i) {
        T* crow = &c.data[i * m];
        const T* arow = &a.data[i * k];
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T{0}) continue;
            const T* brow = &b.data[p * m];
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

// C += A * B^T, A: n x m, B: k x m. Used for dX = dY * W^T.
template <typename T>
void add_matmul_nt(Matrix<T>& c, const Matrix<T>& a, const Matrix<T>& b) {
    require_shape(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows, "matmul_nt");
    const std::size_t n = a.rows, m = a.cols, k = b.rows;
    for (std::size_t i = 0; i < n; ++i) {
        const T* arow = &a.data[i * m];
        T* crow = &c.data[i * k];
        for (std::size_t p = 0; p < k; ++p) {
            const T* brow = &b.data[p * m];
            T s{0};
            for (std::size_t j = 0; j < m; ++j) s += arow[j] * brow[j];
            crow[p] += s;
        }
    }
}

// C += A^T * B, A: n x k, B: n x m. Used for dW = X^T * dY.
template <typename T>
void add_matmul_tn(Matrix<T>& c, const Matrix<T>& a, const Matrix<T>& b) {
    require_shape(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols, "matmul_tn");
    const std::size_t n = a.rows, k = a.cols, m = b.cols;
    for (std::size_t i = 0; i < n; ++i) {
        const T* arow = &a.data[i * k];
        const T* brow = &b.data[i * m];
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T{0}) continue;
            T* crow = &c.data[p * m];
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
    Matrix<T> c(a.rows, b.cols);
    add_matmul(c, a, b);
    return c;
}

template <typename T>
Matrix<T> hconcat(const Matrix<T>& a, const Matrix<T>& b) {
    require_shape(a.rows == b.rows, "hconcat");
    Matrix<T> c(a.rows, a.cols + b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < a.cols; ++j) c(i, j) = a(i, j);
        for (std::size_t j = 0; j < b.cols; ++j) c(i, a.cols + j) = b(i, j);
    }
    return c;
}

template <typename T>
bool all_finite(const Matrix<T>& m) {
    for (T v : m.data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

// Mean over columns of the per-column population variance (divide by rows).
// Shared by the autodiff op and by model init so the two agree bit for bit.
template <typename T>
T column_variance_mean(const Matrix<T>& a, std::vector<T>* means_out = nullptr) {
    require_shape(a.rows >= 1 && a.cols >= 1, "column_variance_mean");
    std::vector<T> means(a.cols, T{0});
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) means[j] += a(i, j);
    const T inv_r = T{1} / static_cast<T>(a.rows);
    for (T& m : means) m *= inv_r;
    T total{0};
    for (std::size_t j = 0; j < a.cols; ++j) {
        T ss{0};
        for (std::size_t i = 0; i < a.rows; ++i) {
            const T d = a(i, j) - means[j];
            ss += d * d;
        }
        total += ss * inv_r;
    }
    if (means_out) *means_out = std::move(means);
    return total / static_cast<T>(a.cols);
}

}  // namespace cardicat
