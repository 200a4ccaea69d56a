#ifndef OVC_ADAM_HPP
#define OVC_ADAM_HPP

#include <cmath>
#include <vector>

#include "ovc/common.hpp"

namespace ovc {

struct AdamState {
    int64_t step = 0;
    std::vector<float> m, v;
    float lr = 1e-2f;
    float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;

    void reset() {
        step = 0;
        m.clear();
        v.clear();
    }
};

// Standard Adam update; deterministic given identical inputs.
inline void adam_step(std::vector<float>& params, const std::vector<float>& grads, AdamState& st) {
    if (params.size() != grads.size()) throw dimension_error("adam_step: shape mismatch");
    if (st.m.empty()) {
        st.m.assign(params.size(), 0.f);
        st.v.assign(params.size(), 0.f);
    }
    if (st.m.size() != params.size()) throw dimension_error("adam_step: state shape mismatch");
    for (const float g : grads)
        if (!std::isfinite(g)) throw training_error("adam_step: non-finite gradient");
    ++st.step;
    const double bc1 = 1.0 - std::pow(static_cast<double>(st.beta1), static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(static_cast<double>(st.beta2), static_cast<double>(st.step));
    const float lr_t = static_cast<float>(st.lr * std::sqrt(bc2) / bc1);
    for (size_t i = 0; i < params.size(); ++i) {
        st.m[i] = st.beta1 * st.m[i] + (1.f - st.beta1) * grads[i];
        st.v[i] = st.beta2 * st.v[i] + (1.f - st.beta2) * grads[i] * grads[i];
        params[i] -= lr_t * st.m[i] / (std::sqrt(st.v[i]) + st.eps);
    }
}

// A trainable tensor: persistent value plus its optimizer state.
struct Param {
    std::vector<float> v;
    AdamState opt;

    size_t size() const { return v.size(); }
};

}  // namespace ovc

#endif
