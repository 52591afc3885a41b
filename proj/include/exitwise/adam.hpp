#pragma once

#include <cmath>
#include <cstdint>

#include "exitwise/errors.hpp"
#include "exitwise/tensor.hpp"

namespace exitwise {

// Per-parameter-tensor Adam moments. Moment shapes mirror the parameter
// shape; step counts completed updates.
template <typename T>
struct AdamState {
    Tensor<T> first_moment;
    Tensor<T> second_moment;
    std::int64_t step = 0;

    static AdamState zero_like(const Tensor<T>& params) {
        return AdamState{Tensor<T>(params.shape()), Tensor<T>(params.shape()), 0};
    }
};

struct AdamHyperParams {
    double lr = 1e-3;
    double beta_m = 0.9;
    double beta_v = 0.999;
    double eps = 1e-8;
};

// Standard bias-corrected Adam update, applied in place.
template <typename T>
void adam_step(Tensor<T>& params, const Tensor<T>& grads, AdamState<T>& state,
               const AdamHyperParams& hp) {
    if (!params.same_shape(grads) || !params.same_shape(state.first_moment)) {
        throw DimensionError("adam_step: parameter/gradient/state shape mismatch");
    }
    state.step += 1;
    const double bm_corr = 1.0 - std::pow(hp.beta_m, static_cast<double>(state.step));
    const double bv_corr = 1.0 - std::pow(hp.beta_v, static_cast<double>(state.step));
    const T beta_m = static_cast<T>(hp.beta_m);
    const T beta_v = static_cast<T>(hp.beta_v);
    const T one_minus_bm = static_cast<T>(1.0 - hp.beta_m);
    const T one_minus_bv = static_cast<T>(1.0 - hp.beta_v);
    T* p = params.data();
    const T* g = grads.data();
    T* m = state.first_moment.data();
    T* v = state.second_moment.data();
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta_m * m[i] + one_minus_bm * g[i];
        v[i] = beta_v * v[i] + one_minus_bv * g[i] * g[i];
        const double m_hat = static_cast<double>(m[i]) / bm_corr;
        const double v_hat = static_cast<double>(v[i]) / bv_corr;
        p[i] -= static_cast<T>(hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps));
    }
}

}  // namespace exitwise
