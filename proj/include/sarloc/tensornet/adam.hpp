#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sarloc/errors.hpp"

namespace sarloc {

/// Bias-corrected Adam. Moments are kept in f64 regardless of the parameter
/// scalar type.
struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m, v;
};

template <typename T>
void adam_step(AdamState& st, const std::vector<std::vector<T>*>& params,
               const std::vector<const std::vector<T>*>& grads) {
    if (params.size() != grads.size())
        throw StructuralError("adam: parameter and gradient group counts differ");
    if (st.m.empty()) {
        st.m.resize(params.size());
        st.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            st.m[i].assign(params[i]->size(), 0.0);
            st.v[i].assign(params[i]->size(), 0.0);
        }
    }
    if (st.m.size() != params.size())
        throw StructuralError("adam: state was initialized for a different parameter set");
    ++st.step;
    const double bc1 = 1.0 - std::pow(st.beta1, double(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, double(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::vector<T>& p = *params[i];
        const std::vector<T>& g = *grads[i];
        if (p.size() != g.size() || p.size() != st.m[i].size())
            throw StructuralError("adam: moment shape does not match parameter shape");
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = double(g[j]);
            st.m[i][j] = st.beta1 * st.m[i][j] + (1.0 - st.beta1) * gj;
            st.v[i][j] = st.beta2 * st.v[i][j] + (1.0 - st.beta2) * gj * gj;
            const double mhat = st.m[i][j] / bc1;
            const double vhat = st.v[i][j] / bc2;
            p[j] = T(double(p[j]) - st.lr * mhat / (std::sqrt(vhat) + st.eps));
        }
    }
}

} // namespace sarloc
