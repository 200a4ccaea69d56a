#ifndef OVC_PARAM_CODEC_HPP
#define OVC_PARAM_CODEC_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "ovc/decoder.hpp"

namespace ovc {

// Step grids, powers of two. Biases need finer steps than weights: their
// error is not averaged over a fan-in.
inline const std::vector<int>& step_exponents(bool weight_like) {
    static const std::vector<int> w = {-12, -11, -10, -9, -8, -7, -6, -5, -4, -3, -2};
    static const std::vector<int> b = {-16, -15, -14, -13, -12, -11, -10, -9, -8, -7, -6, -5, -4, -3, -2};
    return weight_like ? w : b;
}

constexpr float kParamScaleFloor = 0.05f;

struct QuantizedTensor {
    int8_t step_exp = -8;
    float scale = kParamScaleFloor;  // integer-domain Laplace scale
    std::vector<int32_t> q;

    float step() const { return std::ldexp(1.f, step_exp); }
};

inline bool integerize_tensor(const std::vector<float>& v, int exp, std::vector<int32_t>& q) {
    const double step = std::ldexp(1.0, exp);
    q.resize(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        const long k = std::lround(v[i] / step);
        if (k < kAlphabetMin || k > kAlphabetMax) return false;  // step too fine for range
        q[i] = static_cast<int32_t>(k);
    }
    return true;
}

inline float tensor_scale(const std::vector<int32_t>& q) {
    double acc = 0.0;
    for (int32_t k : q) acc += std::abs(k);
    return std::max<float>(kParamScaleFloor, static_cast<float>(acc / std::max<size_t>(1, q.size())));
}

inline double tensor_rate_bits(const std::vector<int32_t>& q, float scale) {
    const double ls = std::log(static_cast<double>(scale));
    double bits = 0.0;
    for (int32_t k : q) bits += rate_of_latent(k, 0.0, ls);
    return bits;
}

struct ParamCodecResult {
    std::vector<QuantizedTensor> tensors;  // net_params() order
    std::vector<uint8_t> payload;
    double param_bits_estimate = 0.0;
};

namespace detail {

// Rate of the hard-rounded latents through the current (possibly partially
// quantized) ARM, via the same sequential path the entropy coder uses.
inline double latent_rate_bits_hard(const CoolChicDecoder& dec) {
    const ArmWeightsView aw = ArmWeightsView::of(dec.arm);
    double bits = 0.0;
    std::vector<int32_t> grid;
    for (int l = 0; l < kLevels; ++l) {
        auto [eh, ew] = dec.level_extent(l);
        grid.resize(dec.latents[l].v.size());
        for (size_t i = 0; i < grid.size(); ++i)
            grid[i] = static_cast<int32_t>(std::lround(dec.latents[l].v[i]));
        arm_scan_level(aw, grid.data(), eh, ew, [&](int32_t& cell, float mu, float ls) {
            bits += rate_of_latent(cell, mu, ls);
        });
    }
    return bits;
}

inline std::vector<float> output_values_hard(CoolChicDecoder& dec, Rng& rng) {
    Tape tape;
    Binder bind{tape, false};
    DecoderForward f = decoder_forward(tape, bind, dec, QuantizerMode::hard(), rng, false);
    return f.output->val;
}

inline double output_mse(const std::vector<float>& a, const std::vector<float>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

}  // namespace detail

// Per-tensor grid search minimizing D + lambda * R, greedy in serialization
// order with earlier choices committed. ARM tensors only move the latent
// rate; upsampler/synthesis tensors only move the output, so each phase
// evaluates just the affected term. Commits the dequantized values.
inline ParamCodecResult quantize_decoder_params(CoolChicDecoder& dec, double lambda) {
    Rng rng(0);  // hard path is deterministic; never consulted
    std::vector<bool> weight_like;
    std::vector<Param*> tensors = dec.net_params(&weight_like);
    ParamCodecResult res;
    res.tensors.resize(tensors.size());
    const double px = static_cast<double>(dec.h) * dec.w;
    const std::vector<float> ref_out = detail::output_values_hard(dec, rng);

    for (size_t ti = 0; ti < tensors.size(); ++ti) {
        Param& p = *tensors[ti];
        const std::vector<float> orig = p.v;
        const bool arm_tensor = ti < dec.arm.W.size() + dec.arm.b.size();
        double best_j = 0.0;
        bool have_best = false;
        QuantizedTensor best;
        std::vector<int32_t> q;
        for (int exp : step_exponents(weight_like[ti])) {
            if (!integerize_tensor(orig, exp, q)) continue;
            const double step = std::ldexp(1.0, exp);
            for (size_t i = 0; i < orig.size(); ++i) p.v[i] = static_cast<float>(q[i] * step);
            const float scale = tensor_scale(q);
            const double r_tensor = tensor_rate_bits(q, scale);
            double j;
            if (arm_tensor) {
                j = lambda * (detail::latent_rate_bits_hard(dec) + r_tensor) / px;
            } else {
                j = detail::output_mse(detail::output_values_hard(dec, rng), ref_out) +
                    lambda * r_tensor / px;
            }
            if (!have_best || j < best_j) {
                have_best = true;
                best_j = j;
                best.step_exp = static_cast<int8_t>(exp);
                best.scale = scale;
                best.q = q;
            }
        }
        if (!have_best) throw training_error("no quantization step fits parameter range");
        const double step = std::ldexp(1.0, best.step_exp);
        for (size_t i = 0; i < orig.size(); ++i) p.v[i] = static_cast<float>(best.q[i] * step);
        res.param_bits_estimate += tensor_rate_bits(best.q, best.scale);
        res.tensors[ti] = std::move(best);
    }

    RangeEncoder enc(res.payload);
    for (const auto& qt : res.tensors) {
        const double ls = std::log(static_cast<double>(qt.scale));
        const LaplaceCodingDist dist(0.0, ls);
        for (int32_t k : qt.q) dist.encode(enc, k);
    }
    enc.finish();
    return res;
}

// Rebuilds the dequantized tensors from headers + shared payload.
inline void decode_decoder_params(CoolChicDecoder& dec, const std::vector<QuantizedTensor>& headers,
                                  const uint8_t* payload, size_t payload_len) {
    std::vector<Param*> tensors = dec.net_params();
    if (headers.size() != tensors.size()) throw format_error("parameter tensor count mismatch");
    RangeDecoder rd(payload, payload_len);
    for (size_t ti = 0; ti < tensors.size(); ++ti) {
        if (!(headers[ti].scale > 0.f) || !std::isfinite(headers[ti].scale) ||
            headers[ti].step_exp < -24 || headers[ti].step_exp > 8)
            throw format_error("corrupt parameter tensor header");
        const double ls = std::log(static_cast<double>(headers[ti].scale));
        const LaplaceCodingDist dist(0.0, ls);
        const double step = std::ldexp(1.0, headers[ti].step_exp);
        for (float& v : tensors[ti]->v) v = static_cast<float>(dist.decode(rd) * step);
    }
    if (rd.bytes_consumed() != payload_len) throw stream_error("parameter payload length mismatch");
}

}  // namespace ovc

#endif
