// Dense layers plus the small set of eval-path helpers (no tape) used by
// sampling and by tests that need forward values without gradients.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cardicat/autodiff.hpp"
#include "cardicat/matrix.hpp"
#include "cardicat/params.hpp"
#include "cardicat/rng.hpp"

namespace cardicat {

template <typename T>
Matrix<T> glorot_uniform(Rng& rng, std::size_t din, std::size_t dout) {
    const double bound = std::sqrt(6.0 / static_cast<double>(din + dout));
    Matrix<T> w(din, dout);
    for (T& v : w.data) v = static_cast<T>(rng.uniform(-bound, bound));
    return w;
}

// Embedding rows are drawn over the full tanh range. The scale matters:
// the variance regularizer can only resist collapse with a force
// proportional to the initial variance, and the KL term prices encoding
// a category's identity at roughly its entropy in nats. With rows spread
// over (-1,1) the embedding-space reconstruction stakes comfortably beat
// that price for every cardinality; a narrower init makes discarding the
// categoricals (and collapsing the tables) the cheaper option.
template <typename T>
Matrix<T> embedding_uniform(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix<T> e(rows, cols);
    for (T& v : e.data) v = static_cast<T>(rng.uniform(-1.0, 1.0));
    return e;
}

template <typename T>
struct DenseLayer {
    Parameter<T>* W = nullptr;  // din x dout
    Parameter<T>* b = nullptr;  // 1 x dout

    static DenseLayer create(ParamStore<T>& store, const std::string& name, std::size_t din,
                             std::size_t dout, Rng& rng) {
        DenseLayer layer;
        layer.W = &store.add(name + ".W", glorot_uniform<T>(rng, din, dout));
        layer.b = &store.add(name + ".b", Matrix<T>(1, dout));
        return layer;
    }

    std::size_t out_dim() const { return W->value.cols; }

    Matrix<T> eval(const Matrix<T>& x) const {
        Matrix<T> y(x.rows, W->value.cols);
        for (std::size_t i = 0; i < y.rows; ++i)
            for (std::size_t j = 0; j < y.cols; ++j) y(i, j) = b->value(0, j);
        add_matmul(y, x, W->value);
        return y;
    }

    typename Tape<T>::Var apply(Tape<T>& tape, typename Tape<T>::Var x) const {
        return tape.add_bias(tape.matmul(x, tape.param(*W)), tape.param(*b));
    }
};

template <typename T>
void relu_inplace(Matrix<T>& x) {
    for (T& v : x.data) v = v > T{0} ? v : T{0};
}

template <typename T>
void tanh_inplace(Matrix<T>& x) {
    for (T& v : x.data) v = std::tanh(v);
}

// Row-wise max-subtracted softmax.
template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits) {
    Matrix<T> p(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        T mx = logits(i, 0);
        for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, logits(i, j));
        T sum{0};
        for (std::size_t j = 0; j < logits.cols; ++j) {
            p(i, j) = std::exp(logits(i, j) - mx);
            sum += p(i, j);
        }
        for (std::size_t j = 0; j < logits.cols; ++j) p(i, j) /= sum;
    }
    return p;
}

// Standard normal draws in row-major order, so a given seed yields the same
// matrix regardless of how the caller slices it afterwards.
template <typename T>
Matrix<T> gauss_sample(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix<T> m(rows, cols);
    for (T& v : m.data) v = static_cast<T>(rng.gaussian());
    return m;
}

// z = mu + exp(0.5 * logvar) .* eps
template <typename T>
Matrix<T> reparameterize_eval(const Matrix<T>& mu, const Matrix<T>& logvar, const Matrix<T>& eps) {
    require_shape(mu.same_shape(logvar) && mu.same_shape(eps), "reparameterize");
    Matrix<T> z(mu.rows, mu.cols);
    for (std::size_t i = 0; i < z.size(); ++i)
        z.data[i] = mu.data[i] + std::exp(T{0.5} * logvar.data[i]) * eps.data[i];
    return z;
}

}  // namespace cardicat
