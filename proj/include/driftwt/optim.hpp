#pragma once

#include <cmath>

#include "driftwt/numerics.hpp"

namespace driftwt {

enum class OptimizerKind { sgd, adam };

struct AdamState {
    Vec m, v;
    long long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(AdamState& st, Vec& params, const Vec& grad, double lr) {
    require(st.m.size() == params.size() && grad.size() == params.size(),
            "adam_step: dimension mismatch");
    st.t += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

inline void sgd_step(Vec& params, const Vec& grad, double lr) {
    require(grad.size() == params.size(), "sgd_step: dimension mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
}

}  // namespace driftwt
