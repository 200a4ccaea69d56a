#ifndef OVC_ARM_HPP
#define OVC_ARM_HPP

#include <array>
#include <memory>
#include <vector>

#include "ovc/bind.hpp"
#include "ovc/laplace.hpp"
#include "ovc/ops.hpp"

namespace ovc {

// Causal neighborhoods in raster order (rows above first, then the same
// row left of the current position). Width selects the published template.
inline const std::vector<std::array<int, 2>>& arm_context_offsets(int width) {
    static const std::vector<std::array<int, 2>> ctx8 = {
        {-3, 0},
        {-2, 0},
        {-1, -1}, {-1, 0}, {-1, 1},
        {0, -3}, {0, -2}, {0, -1},
    };
    static const std::vector<std::array<int, 2>> ctx24 = {
        {-4, 0},
        {-3, -2}, {-3, -1}, {-3, 0}, {-3, 1}, {-3, 2},
        {-2, -3}, {-2, -2}, {-2, -1}, {-2, 0}, {-2, 1}, {-2, 2}, {-2, 3},
        {-1, -3}, {-1, -2}, {-1, -1}, {-1, 0}, {-1, 1}, {-1, 2}, {-1, 3},
        {0, -4}, {0, -3}, {0, -2}, {0, -1},
    };
    if (width == 8) return ctx8;
    if (width == 24) return ctx24;
    throw config_error("unsupported ARM context width");
}

// Context of one grid position: causal neighbor values, zero outside.
template <typename T>
inline void arm_context(const T* grid, int gh, int gw, int y, int x, int width, float* out) {
    const auto& offs = arm_context_offsets(width);
    for (int k = 0; k < width; ++k) {
        const int yy = y + offs[k][0], xx = x + offs[k][1];
        out[k] = (yy >= 0 && yy < gh && xx >= 0 && xx < gw)
                     ? static_cast<float>(grid[static_cast<size_t>(yy) * gw + xx])
                     : 0.f;
    }
}

// Flat gather indices for a whole grid (-1 where the context leaves it).
inline std::shared_ptr<std::vector<int32_t>> arm_context_indices(int gh, int gw, int width) {
    const auto& offs = arm_context_offsets(width);
    auto idx = std::make_shared<std::vector<int32_t>>();
    idx->reserve(static_cast<size_t>(gh) * gw * width);
    for (int y = 0; y < gh; ++y)
        for (int x = 0; x < gw; ++x)
            for (int k = 0; k < width; ++k) {
                const int yy = y + offs[k][0], xx = x + offs[k][1];
                idx->push_back(yy >= 0 && yy < gh && xx >= 0 && xx < gw ? yy * gw + xx : -1);
            }
    return idx;
}

// Autoregressive probability model: `hidden` width-to-width layers with
// ReLU, then a final layer emitting (mu, log_scale) per latent.
struct ArmNet {
    int width = 8;
    int hidden = 2;
    std::vector<Param> W, b;  // hidden + 1 layers

    void init(Rng& rng) {
        W.assign(hidden + 1, {});
        b.assign(hidden + 1, {});
        for (int l = 0; l <= hidden; ++l) {
            const int out = l == hidden ? 2 : width;
            const float bound = std::sqrt(6.f / width);
            W[l].v.resize(static_cast<size_t>(out) * width);
            for (float& v : W[l].v) v = rng.uniform(-bound, bound);
            b[l].v.assign(out, 0.f);
        }
    }

    int64_t macs_per_latent() const {
        return static_cast<int64_t>(hidden) * width * width + 2LL * width;
    }
};

struct ArmVars {
    std::vector<Var> W, b;
};

inline ArmVars bind_arm(Binder& bind, ArmNet& arm) {
    ArmVars v;
    for (int l = 0; l <= arm.hidden; ++l) {
        const int out = l == arm.hidden ? 2 : arm.width;
        v.W.push_back(bind(arm.W[l], mat(out, arm.width)));
        v.b.push_back(bind(arm.b[l], flat(out)));
    }
    return v;
}

// Teacher-forced batched evaluation over a whole quantized level.
inline Var arm_forward(Tape& t, const ArmVars& av, Var contexts, int hidden) {
    Var h = contexts;
    for (int l = 0; l < hidden; ++l) h = relu(t, linear(t, h, av.W[l], av.b[l]));
    return linear(t, h, av.W[hidden], av.b[hidden]);
}

// Sequential per-position evaluation used by the actual entropy coding; the
// identical arithmetic runs while encoding and decoding.
struct ArmWeightsView {
    int width, hidden;
    std::vector<const float*> W, b;

    static ArmWeightsView of(const ArmNet& arm) {
        ArmWeightsView v;
        v.width = arm.width;
        v.hidden = arm.hidden;
        for (size_t l = 0; l < arm.W.size(); ++l) {
            v.W.push_back(arm.W[l].v.data());
            v.b.push_back(arm.b[l].v.data());
        }
        return v;
    }

    void eval(const float* ctx, float& mu, float& log_scale) const {
        float buf_a[24], buf_b[24];
        const float* in = ctx;
        float* out = buf_a;
        for (int l = 0; l < hidden; ++l) {
            for (int o = 0; o < width; ++o) {
                float acc = b[l][o];
                const float* wr = W[l] + static_cast<size_t>(o) * width;
                for (int i = 0; i < width; ++i) acc += wr[i] * in[i];
                out[o] = acc > 0.f ? acc : 0.f;
            }
            in = out;
            out = out == buf_a ? buf_b : buf_a;
        }
        float res[2];
        for (int o = 0; o < 2; ++o) {
            float acc = b[hidden][o];
            const float* wr = W[hidden] + static_cast<size_t>(o) * width;
            for (int i = 0; i < width; ++i) acc += wr[i] * in[i];
            res[o] = acc;
        }
        mu = res[0];
        log_scale = res[1];
    }
};

// Raster scan of one integer level; fn(cell, mu, log_scale) either codes the
// cell (encode) or fills it (decode). Later contexts see decoded values.
template <typename Fn>
inline void arm_scan_level(const ArmWeightsView& aw, int32_t* grid, int gh, int gw, Fn&& fn) {
    std::vector<float> ctx(aw.width);
    for (int y = 0; y < gh; ++y)
        for (int x = 0; x < gw; ++x) {
            arm_context(grid, gh, gw, y, x, aw.width, ctx.data());
            float mu, ls;
            aw.eval(ctx.data(), mu, ls);
            fn(grid[static_cast<size_t>(y) * gw + x], mu, ls);
        }
}

}  // namespace ovc

#endif
