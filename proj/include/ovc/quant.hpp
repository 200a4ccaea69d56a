#ifndef OVC_QUANT_HPP
#define OVC_QUANT_HPP

#include <cmath>

#include "ovc/ops.hpp"

namespace ovc {

// Training surrogates for the rounding that turns latents into integers.
struct QuantizerMode {
    enum class Kind { AdditiveNoise, SoftRound, HardRoundSTE };
    Kind kind = Kind::HardRoundSTE;
    float amplitude = 1.f;    // AdditiveNoise, in [0, 1]
    float temperature = 0.3f; // SoftRound, > 0

    static QuantizerMode noise(float amplitude) {
        if (amplitude < 0.f || amplitude > 1.f) throw config_error("noise amplitude outside [0,1]");
        return {Kind::AdditiveNoise, amplitude, 0.f};
    }
    static QuantizerMode softround(float temperature) {
        if (temperature <= 0.f) throw config_error("softround temperature must be positive");
        return {Kind::SoftRound, 0.f, temperature};
    }
    static QuantizerMode hard() { return {Kind::HardRoundSTE, 0.f, 0.f}; }
};

inline float softround_value(float x, float temperature) {
    const float f = std::floor(x);
    const float r = x - f;
    const float inv_t = 1.f / temperature;
    return f + 0.5f + 0.5f * std::tanh(inv_t * (r - 0.5f)) / std::tanh(0.5f * inv_t);
}

// x + u with u ~ U(-amplitude/2, amplitude/2); gradient is the identity.
inline Var quant_noise(Tape& t, Var x, float amplitude, Rng& rng) {
    const size_t n = x->val.size();
    Var y = t.alloc(x->shape, x->needs_grad);
    for (size_t i = 0; i < n; ++i)
        y->val[i] = x->val[i] + rng.uniform(-0.5f * amplitude, 0.5f * amplitude);
    if (y->needs_grad)
        y->back = [y, x, n] {
            for (size_t i = 0; i < n; ++i) x->grad[i] += y->grad[i];
        };
    return y;
}

inline Var quant_softround(Tape& t, Var x, float temperature) {
    const size_t n = x->val.size();
    const float inv_t = 1.f / temperature;
    const float norm = 0.5f / std::tanh(0.5f * inv_t);
    Var y = t.alloc(x->shape, x->needs_grad);
    for (size_t i = 0; i < n; ++i) {
        const float r = x->val[i] - std::floor(x->val[i]);
        y->val[i] = std::floor(x->val[i]) + 0.5f + norm * std::tanh(inv_t * (r - 0.5f));
    }
    if (y->needs_grad)
        y->back = [y, x, n, inv_t, norm] {
            for (size_t i = 0; i < n; ++i) {
                const float r = x->val[i] - std::floor(x->val[i]);
                const float th = std::tanh(inv_t * (r - 0.5f));
                x->grad[i] += y->grad[i] * norm * inv_t * (1.f - th * th);
            }
        };
    return y;
}

// Round to nearest on the forward pass, identity gradient on the backward.
inline Var quant_ste_round(Tape& t, Var x) {
    const size_t n = x->val.size();
    Var y = t.alloc(x->shape, x->needs_grad);
    for (size_t i = 0; i < n; ++i) y->val[i] = std::round(x->val[i]);
    if (y->needs_grad)
        y->back = [y, x, n] {
            for (size_t i = 0; i < n; ++i) x->grad[i] += y->grad[i];
        };
    return y;
}

inline Var quantize(Tape& t, Var x, const QuantizerMode& mode, Rng& rng) {
    switch (mode.kind) {
        case QuantizerMode::Kind::AdditiveNoise: return quant_noise(t, x, mode.amplitude, rng);
        case QuantizerMode::Kind::SoftRound: return quant_softround(t, x, mode.temperature);
        case QuantizerMode::Kind::HardRoundSTE: return quant_ste_round(t, x);
    }
    throw config_error("unknown quantizer mode");
}

}  // namespace ovc

#endif
