#ifndef OVC_TEST_UTIL_HPP
#define OVC_TEST_UTIL_HPP

#include <functional>
#include <vector>

#include "ovc/frame.hpp"
#include "ovc/rng.hpp"
#include "ovc/tensor.hpp"

namespace ovc::test {

inline std::vector<float> random_vec(size_t n, Rng& rng, float lo = -1.f, float hi = 1.f) {
    std::vector<float> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Central finite differences against the analytic gradients of a
// graph-building function. `build` must place one leaf per input buffer (in
// order) and return a scalar loss.
using GraphBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Central differences along random +-1 directions (several per input
// tensor). Directional probes keep the float32 rounding noise of the summed
// loss small relative to the probed derivative while still exercising every
// element of the analytic gradient.
inline double max_fd_rel_err(const GraphBuilder& build, std::vector<std::vector<float>> inputs,
                             const std::vector<Shape>& shapes, float step = 1e-3f,
                             int probes = 8, uint64_t dir_seed = 99) {
    Tape tape;
    std::vector<Var> leaves;
    for (size_t i = 0; i < inputs.size(); ++i) leaves.push_back(tape.leaf(inputs[i], shapes[i], true));
    Var loss = build(tape, leaves);
    tape.backward(loss);
    std::vector<std::vector<float>> analytic;
    for (Var l : leaves) analytic.push_back(l->grad);

    auto eval = [&](const std::vector<std::vector<float>>& in) {
        Tape t2;
        std::vector<Var> ls;
        for (size_t i = 0; i < in.size(); ++i) ls.push_back(t2.leaf(in[i], shapes[i], false));
        return static_cast<double>(build(t2, ls)->val[0]);
    };

    Rng rng(dir_seed);
    double max_err = 0.0;
    for (size_t i = 0; i < inputs.size(); ++i) {
        std::vector<double> nums, anas;
        for (int p = 0; p < probes; ++p) {
            std::vector<float> dir(inputs[i].size());
            double ana = 0.0;
            for (size_t j = 0; j < dir.size(); ++j) {
                dir[j] = rng.next_u64() & 1 ? 1.f : -1.f;
                ana += static_cast<double>(analytic[i][j]) * dir[j];
            }
            const std::vector<float> saved = inputs[i];
            for (size_t j = 0; j < dir.size(); ++j) inputs[i][j] = saved[j] + step * dir[j];
            const double fp = eval(inputs);
            for (size_t j = 0; j < dir.size(); ++j) inputs[i][j] = saved[j] - step * dir[j];
            const double fm = eval(inputs);
            inputs[i] = saved;
            nums.push_back((fp - fm) / (2.0 * step));
            anas.push_back(ana);
        }
        // A probe whose directional derivative nearly cancels cannot be
        // resolved in float32; errors are judged against the gradient scale
        // of the tensor (rtol with an atol floor), as gradient checkers do.
        double scale = 1e-2;
        for (double a : anas) scale = std::max(scale, std::abs(a));
        for (int p = 0; p < probes; ++p) {
            const double err = std::abs(nums[p] - anas[p]) /
                               std::max({std::abs(nums[p]), std::abs(anas[p]), 0.25 * scale});
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

// Aperiodic-looking texture on a torus: a seeded sum of sinusoids with
// random integer frequencies and phases. Wraps seamlessly under translation
// and has no small repeat period for block matching to alias onto.
struct TorusTexture {
    struct Wave {
        float fx, fy, phase, amp;
    };
    std::vector<Wave> waves;
    int w, h;

    TorusTexture(int w_, int h_, uint64_t seed = 1) : w(w_), h(h_) {
        Rng rng(seed);
        float amp = 0.22f;
        for (int k = 0; k < 14; ++k) {
            const float fx = static_cast<float>(1 + rng.next_u64() % 13);
            const float fy = static_cast<float>(1 + rng.next_u64() % 13);
            const float sx = rng.next_u64() & 1 ? 1.f : -1.f;
            waves.push_back({sx * fx, fy, rng.uniform(0.f, 6.28318f), amp});
            amp *= 0.82f;
        }
    }

    float at(float x, float y) const {
        float s = 0.5f;
        for (const auto& wv : waves)
            s += wv.amp * std::sin(6.28318f * (wv.fx * x / w + wv.fy * y / h) + wv.phase);
        return std::min(1.f, std::max(0.f, 0.5f + 0.45f * (s - 0.5f)));
    }
};

// Frame sampled from the texture displaced by (dx, dy): content(p) = tex(p + (dx, dy)).
inline Planes420 synthetic_frame(int w, int h, float dx, float dy, int depth = 8, uint64_t seed = 1) {
    Planes420 p = Planes420::make(w, h, depth);
    const TorusTexture tex(w, h, seed);
    const TorusTexture texc(w, h, seed + 7);
    const float maxv = static_cast<float>(p.maxval());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            p.y[static_cast<size_t>(y) * w + x] =
                static_cast<uint16_t>(std::round(tex.at(x + dx, y + dy) * maxv));
    for (int y = 0; y < h / 2; ++y)
        for (int x = 0; x < w / 2; ++x) {
            const float c = texc.at(2 * x + dx, 2 * y + dy);
            p.u[static_cast<size_t>(y) * (w / 2) + x] =
                static_cast<uint16_t>(std::round((0.35f + 0.3f * c) * maxv));
            p.v[static_cast<size_t>(y) * (w / 2) + x] =
                static_cast<uint16_t>(std::round((0.65f - 0.3f * c) * maxv));
        }
    return p;
}

// n frames translating at (vx, vy) pixels per frame.
inline std::vector<Planes420> synthetic_video(int w, int h, int n, float vx, float vy, int depth = 8,
                                              uint64_t seed = 1) {
    std::vector<Planes420> v;
    for (int t = 0; t < n; ++t) v.push_back(synthetic_frame(w, h, vx * t, vy * t, depth, seed));
    return v;
}

}  // namespace ovc::test

#endif
