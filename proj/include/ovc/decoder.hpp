#ifndef OVC_DECODER_HPP
#define OVC_DECODER_HPP

#include <memory>
#include <optional>
#include <vector>

#include "ovc/arm.hpp"
#include "ovc/quant.hpp"
#include "ovc/range_coder.hpp"

namespace ovc {

constexpr int kLevels = 7;

enum class DecoderKind : uint8_t { Intra = 0, Residue = 1, MotionP = 2, MotionB = 3 };

struct SynLayer {
    int k, c_in, c_out;
    bool skip() const { return k == 3 && c_in == c_out; }
};

// Kind fully determines the three sub-network shapes. Motion latents sit two
// dyadic scales below full resolution (motion fields are smooth; the shallow
// pyramid is what keeps the motion decoder an order of magnitude cheaper
// than the intra one), and are upsampled all the way back to H x W.
struct DecoderArch {
    int arm_width, arm_hidden;
    std::vector<SynLayer> syn;
    int out_channels;
    int root_shift;
};

inline DecoderArch decoder_arch(DecoderKind kind) {
    switch (kind) {
        case DecoderKind::Intra:
            return {24, 2, {{1, 7, 40}, {1, 40, 3}, {3, 3, 3}, {3, 3, 3}}, 3, 0};
        case DecoderKind::Residue:
            return {8, 2, {{1, 7, 28}, {1, 28, 4}, {3, 4, 4}}, 4, 0};
        case DecoderKind::MotionP:
            return {8, 1, {{1, 7, 9}, {1, 9, 2}, {3, 2, 2}}, 2, 2};
        case DecoderKind::MotionB:
            return {8, 1, {{1, 7, 9}, {1, 9, 5}, {3, 5, 5}}, 5, 2};
    }
    throw config_error("unknown decoder kind");
}

// Single shared TConv 8-1-1 kernel raising every level to full resolution.
struct UpsamplerNet {
    Param kernel;  // 8x8
    Param bias;    // scalar

    void init() {
        // Separable bilinear x2 filter; preserves constants on both phases.
        static const float taps[8] = {0.f, 0.f, 0.25f, 0.75f, 0.75f, 0.25f, 0.f, 0.f};
        kernel.v.resize(64);
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) kernel.v[i * 8 + j] = taps[i] * taps[j];
        bias.v.assign(1, 0.f);
    }
};

struct SynthesisNet {
    std::vector<SynLayer> layers;
    std::vector<Param> W, b;

    void init(const std::vector<SynLayer>& ls, Rng& rng) {
        layers = ls;
        W.assign(layers.size(), {});
        b.assign(layers.size(), {});
        for (size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            const int fan_in = l.k * l.k * l.c_in;
            const float bound = std::sqrt(6.f / fan_in);
            W[i].v.resize(static_cast<size_t>(l.c_out) * fan_in);
            for (float& v : W[i].v) v = rng.uniform(-bound, bound);
            b[i].v.assign(l.c_out, 0.f);
        }
    }
};

inline int ceil_shift(int v, int s) { return (v + (1 << s) - 1) >> s; }

struct CoolChicDecoder {
    DecoderKind kind;
    int h = 0, w = 0;  // full-resolution extents
    ArmNet arm;
    UpsamplerNet ups;
    SynthesisNet syn;
    std::vector<Param> latents;  // kLevels grids, float during training

    mutable std::vector<std::shared_ptr<std::vector<int32_t>>> ctx_cache;

    static CoolChicDecoder make(DecoderKind kind, int h, int w, Rng& rng) {
        CoolChicDecoder d;
        d.kind = kind;
        d.h = h;
        d.w = w;
        const DecoderArch a = decoder_arch(kind);
        d.arm.width = a.arm_width;
        d.arm.hidden = a.arm_hidden;
        d.arm.init(rng);
        d.ups.init();
        d.syn.init(a.syn, rng);
        d.latents.assign(kLevels, {});
        for (int l = 0; l < kLevels; ++l) {
            auto [eh, ew] = d.level_extent(l);
            d.latents[l].v.assign(static_cast<size_t>(eh) * ew, 0.f);
        }
        d.ctx_cache.assign(kLevels, nullptr);
        return d;
    }

    std::pair<int, int> level_extent(int l) const {
        const int s = decoder_arch(kind).root_shift + l;
        return {ceil_shift(h, s), ceil_shift(w, s)};
    }

    const std::shared_ptr<std::vector<int32_t>>& ctx_indices(int l) const {
        if (!ctx_cache[l]) {
            auto [eh, ew] = level_extent(l);
            ctx_cache[l] = arm_context_indices(eh, ew, arm.width);
        }
        return ctx_cache[l];
    }

    std::vector<Param*> latent_params() {
        std::vector<Param*> ps;
        for (auto& p : latents) ps.push_back(&p);
        return ps;
    }

    // Network tensors in serialization order; `weight_like[i]` selects the
    // quantization step grid role.
    std::vector<Param*> net_params(std::vector<bool>* weight_like = nullptr) {
        std::vector<Param*> ps;
        auto push = [&](Param& p, bool wl) {
            ps.push_back(&p);
            if (weight_like) weight_like->push_back(wl);
        };
        for (size_t l = 0; l < arm.W.size(); ++l) {
            push(arm.W[l], true);
            push(arm.b[l], false);
        }
        push(ups.kernel, true);
        push(ups.bias, false);
        for (size_t i = 0; i < syn.W.size(); ++i) {
            push(syn.W[i], true);
            push(syn.b[i], false);
        }
        return ps;
    }

    std::vector<Param*> all_params() {
        auto ps = latent_params();
        for (Param* p : net_params()) ps.push_back(p);
        return ps;
    }
};

struct DecoderForward {
    Var output = nullptr;     // out_channels x H x W
    Var rate_bits = nullptr;  // scalar, empty when rate evaluation is off
    std::vector<Var> latents_q;
};

// Quantize latents, estimate their rate through the ARM (teacher-forced),
// upsample, synthesize. One tape pass used by training and by the actual
// decode (with constants and hard rounding).
inline DecoderForward decoder_forward(Tape& t, Binder& bind, CoolChicDecoder& dec,
                                      const QuantizerMode& mode, Rng& rng, bool with_rate = true) {
    const DecoderArch arch = decoder_arch(dec.kind);
    DecoderForward out;
    ArmVars av;
    if (with_rate) av = bind_arm(bind, dec.arm);
    Var upsK = bind(dec.ups.kernel, Shape{1, 8, 8});
    Var upsB = bind(dec.ups.bias, flat(1));
    std::vector<Var> planes;
    std::vector<std::pair<Var, float>> rates;
    for (int l = 0; l < kLevels; ++l) {
        auto [eh, ew] = dec.level_extent(l);
        Var lat = bind(dec.latents[l], Shape{1, eh, ew});
        Var q = quantize(t, lat, mode, rng);
        out.latents_q.push_back(q);
        if (with_rate) {
            Var ctx = gather_rows(t, q, dec.ctx_indices(l), dec.arm.width);
            Var pred = arm_forward(t, av, ctx, dec.arm.hidden);
            rates.emplace_back(laplace_rate_sum(t, q, pred), 1.f);
        }
        Var cur = q;
        for (int k = arch.root_shift + l; k >= 1; --k)
            cur = tconv2d_stride2(t, cur, upsK, upsB, ceil_shift(dec.h, k - 1), ceil_shift(dec.w, k - 1));
        planes.push_back(cur);
    }
    Var dense = stack_channels(t, planes);
    Var x = dense;
    for (size_t i = 0; i < dec.syn.layers.size(); ++i) {
        const auto& l = dec.syn.layers[i];
        Var Wv = bind(dec.syn.W[i], flat(static_cast<int64_t>(l.c_out) * l.c_in * l.k * l.k));
        Var bv = bind(dec.syn.b[i], flat(l.c_out));
        Var y = conv2d(t, x, Wv, bv, l.c_out, l.k);
        if (l.skip()) y = add(t, y, x);
        if (i + 1 < dec.syn.layers.size()) y = relu(t, y);
        x = y;
    }
    out.output = x;
    out.rate_bits = with_rate ? wsum(t, rates) : t.scalar(0.f);
    return out;
}

// ---- Actual entropy coding of the latent pyramid (per-level payloads) ----

inline std::vector<std::vector<int32_t>> integerize_latents(const CoolChicDecoder& dec) {
    std::vector<std::vector<int32_t>> grids(kLevels);
    for (int l = 0; l < kLevels; ++l) {
        grids[l].resize(dec.latents[l].v.size());
        for (size_t i = 0; i < grids[l].size(); ++i) {
            const float r = std::round(dec.latents[l].v[i]);
            if (r < kAlphabetMin || r > kAlphabetMax)
                throw stream_error("latent value outside coder alphabet");
            grids[l][i] = static_cast<int32_t>(r);
        }
    }
    return grids;
}

inline std::vector<std::vector<uint8_t>> encode_latent_payloads(
    const CoolChicDecoder& dec, std::vector<std::vector<int32_t>>& grids) {
    const ArmWeightsView aw = ArmWeightsView::of(dec.arm);
    std::vector<std::vector<uint8_t>> payloads(kLevels);
    for (int l = 0; l < kLevels; ++l) {
        auto [eh, ew] = dec.level_extent(l);
        RangeEncoder enc(payloads[l]);
        arm_scan_level(aw, grids[l].data(), eh, ew, [&](int32_t& cell, float mu, float ls) {
            encode_symbol(enc, cell, mu, ls);
        });
        enc.finish();
    }
    return payloads;
}

inline std::vector<std::vector<int32_t>> decode_latent_payloads(
    const CoolChicDecoder& dec, const std::vector<std::pair<const uint8_t*, size_t>>& payloads) {
    const ArmWeightsView aw = ArmWeightsView::of(dec.arm);
    std::vector<std::vector<int32_t>> grids(kLevels);
    for (int l = 0; l < kLevels; ++l) {
        auto [eh, ew] = dec.level_extent(l);
        grids[l].assign(static_cast<size_t>(eh) * ew, 0);
        RangeDecoder rd(payloads[l].first, payloads[l].second);
        arm_scan_level(aw, grids[l].data(), eh, ew, [&](int32_t& cell, float mu, float ls) {
            cell = decode_symbol(rd, mu, ls);
        });
        if (rd.bytes_consumed() != payloads[l].second)
            throw stream_error("latent payload length mismatch");
    }
    return grids;
}

inline void commit_latents(CoolChicDecoder& dec, const std::vector<std::vector<int32_t>>& grids) {
    for (int l = 0; l < kLevels; ++l)
        for (size_t i = 0; i < grids[l].size(); ++i)
            dec.latents[l].v[i] = static_cast<float>(grids[l][i]);
}

}  // namespace ovc

#endif
