// Named parameter tensors with per-parameter Adam state.
#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cardicat/errors.hpp"
#include "cardicat/matrix.hpp"

namespace cardicat {

template <typename T>
struct Parameter {
    std::string name;
    Matrix<T> value;
    Matrix<T> grad;
    Matrix<T> adam_m;
    Matrix<T> adam_v;

    Parameter(std::string n, Matrix<T> v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(value.rows, value.cols),
          adam_m(value.rows, value.cols),
          adam_v(value.rows, value.cols) {}
};

struct AdamConfig {
    double lr = 0.0005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
class ParamStore {
public:
    Parameter<T>& add(std::string name, Matrix<T> value) {
        params_.push_back(std::make_unique<Parameter<T>>(std::move(name), std::move(value)));
        return *params_.back();
    }

    std::size_t count() const { return params_.size(); }
    Parameter<T>& at(std::size_t i) { return *params_[i]; }
    const Parameter<T>& at(std::size_t i) const { return *params_[i]; }
    std::int64_t step() const { return step_; }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p->value.size();
        return n;
    }

    void zero_grads() {
        for (auto& p : params_) p->grad.fill(T{0});
    }

    // Bias-corrected Adam update over every parameter. Rejects non-finite
    // gradients before touching any value so a failed step has no effect.
    void adam_step(const AdamConfig& cfg) {
        for (const auto& p : params_)
            if (!all_finite(p->grad))
                throw NumericalError("adam_step: non-finite gradient in parameter '" + p->name + "'");
        ++step_;
        const T b1 = static_cast<T>(cfg.beta1);
        const T b2 = static_cast<T>(cfg.beta2);
        const T lr = static_cast<T>(cfg.lr);
        const T eps = static_cast<T>(cfg.eps);
        const T c1 = T{1} - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(step_)));
        const T c2 = T{1} - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(step_)));
        for (auto& p : params_) {
            for (std::size_t i = 0; i < p->value.size(); ++i) {
                const T g = p->grad.data[i];
                T& m = p->adam_m.data[i];
                T& v = p->adam_v.data[i];
                m = b1 * m + (T{1} - b1) * g;
                v = b2 * v + (T{1} - b2) * g * g;
                const T m_hat = m / c1;
                const T v_hat = v / c2;
                p->value.data[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
            }
        }
    }

private:
    std::vector<std::unique_ptr<Parameter<T>>> params_;
    std::int64_t step_ = 0;
};

}  // namespace cardicat
