#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedus/nn/tensor.hpp"

namespace fedus::nn {

template <class T>
struct AdamState {
    std::vector<std::vector<T>> m, v;
    std::int64_t t = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update using each parameter's grad buffer.
/// Moments are allocated on the first call.
template <class T>
void adam_step(std::span<Tensor<T>* const> params, AdamState<T>& st) {
    if (st.m.empty()) {
        for (const auto* p : params) {
            st.m.emplace_back(p->size(), T(0));
            st.v.emplace_back(p->size(), T(0));
        }
    }
    if (st.m.size() != params.size() || st.v.size() != params.size())
        throw std::invalid_argument("adam_step: state does not match parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (st.m[i].size() != params[i]->size() || st.v[i].size() != params[i]->size())
            throw std::invalid_argument("adam_step: moment shape mismatch for parameter " + std::to_string(i));
        if (params[i]->grad.size() != params[i]->size())
            throw std::invalid_argument("adam_step: missing gradient for parameter " + std::to_string(i));
    }

    ++st.t;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    const T b1 = static_cast<T>(st.beta1), b2 = static_cast<T>(st.beta2);
    const T step = static_cast<T>(st.lr / c1);
    const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
    const T eps = static_cast<T>(st.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i]->data;
        const auto& g = params[i]->grad;
        auto& m = st.m[i];
        auto& v = st.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (T(1) - b1) * g[j];
            v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
            p[j] -= step * m[j] / (std::sqrt(v[j]) * inv_sqrt_c2 + eps);
        }
    }
}

template <class T>
void adam_step(std::vector<Tensor<T>*>& params, AdamState<T>& st) {
    adam_step(std::span<Tensor<T>* const>(params.data(), params.size()), st);
}

} // namespace fedus::nn
