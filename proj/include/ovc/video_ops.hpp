#ifndef OVC_VIDEO_OPS_HPP
#define OVC_VIDEO_OPS_HPP

#include <algorithm>
#include <cmath>

#include "ovc/ops.hpp"

namespace ovc {

// Bilinear warp: out(p) = ref sampled at p + flow(p), edge-clamped.
// flow channel 0 is the horizontal displacement, channel 1 the vertical.
// Differentiable in both ref and flow; zero flow reproduces ref bit-exactly.
inline Var warp(Tape& t, Var ref, Var flow) {
    const int c = ref->shape.c, h = ref->shape.h, w = ref->shape.w;
    if (flow->shape.c != 2 || flow->shape.h != h || flow->shape.w != w)
        throw dimension_error("warp: flow must be 2 x H x W matching ref");
    Var y = t.alloc(ref->shape, ref->needs_grad || flow->needs_grad);
    const size_t plane = static_cast<size_t>(h) * w;
    const float* fx = flow->val.data();
    const float* fy = flow->val.data() + plane;
    for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) {
            const size_t p = static_cast<size_t>(yy) * w + xx;
            const float sx = std::min(static_cast<float>(w - 1), std::max(0.f, xx + fx[p]));
            const float sy = std::min(static_cast<float>(h - 1), std::max(0.f, yy + fy[p]));
            const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
            const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
            const float wx = sx - x0, wy = sy - y0;
            for (int ch = 0; ch < c; ++ch) {
                const float* r = ref->val.data() + ch * plane;
                const float top = (1.f - wx) * r[static_cast<size_t>(y0) * w + x0] +
                                  wx * r[static_cast<size_t>(y0) * w + x1];
                const float bot = (1.f - wx) * r[static_cast<size_t>(y1) * w + x0] +
                                  wx * r[static_cast<size_t>(y1) * w + x1];
                y->val[ch * plane + p] = (1.f - wy) * top + wy * bot;
            }
        }
    if (y->needs_grad)
        y->back = [y, ref, flow, c, h, w, plane] {
            const float* fx = flow->val.data();
            const float* fy = flow->val.data() + plane;
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) {
                    const size_t p = static_cast<size_t>(yy) * w + xx;
                    const float rx = xx + fx[p], ry = yy + fy[p];
                    const bool in_x = rx > 0.f && rx < w - 1;
                    const bool in_y = ry > 0.f && ry < h - 1;
                    const float sx = std::min(static_cast<float>(w - 1), std::max(0.f, rx));
                    const float sy = std::min(static_cast<float>(h - 1), std::max(0.f, ry));
                    const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
                    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
                    const float wx = sx - x0, wy = sy - y0;
                    float gfx = 0.f, gfy = 0.f;
                    for (int ch = 0; ch < c; ++ch) {
                        const float g = y->grad[ch * plane + p];
                        if (g == 0.f) continue;
                        const float* r = ref->val.data() + ch * plane;
                        const float v00 = r[static_cast<size_t>(y0) * w + x0];
                        const float v01 = r[static_cast<size_t>(y0) * w + x1];
                        const float v10 = r[static_cast<size_t>(y1) * w + x0];
                        const float v11 = r[static_cast<size_t>(y1) * w + x1];
                        if (ref->needs_grad) {
                            float* gr = ref->grad.data() + ch * plane;
                            gr[static_cast<size_t>(y0) * w + x0] += g * (1.f - wx) * (1.f - wy);
                            gr[static_cast<size_t>(y0) * w + x1] += g * wx * (1.f - wy);
                            gr[static_cast<size_t>(y1) * w + x0] += g * (1.f - wx) * wy;
                            gr[static_cast<size_t>(y1) * w + x1] += g * wx * wy;
                        }
                        gfx += g * ((1.f - wy) * (v01 - v00) + wy * (v11 - v10));
                        gfy += g * ((1.f - wx) * (v10 - v00) + wx * (v11 - v01));
                    }
                    if (flow->needs_grad) {
                        if (in_x) flow->grad[p] += gfx;
                        if (in_y) flow->grad[plane + p] += gfy;
                    }
                }
        };
    return y;
}

// x_pred = beta * w1 + (1 - beta) * w2, beta broadcast over channels.
inline Var blend(Tape& t, Var w1, Var w2, Var beta) {
    const int c = w1->shape.c, h = w1->shape.h, w = w1->shape.w;
    if (w2->shape != w1->shape) throw dimension_error("blend: warp shapes differ");
    if (beta->shape.c != 1 || beta->shape.h != h || beta->shape.w != w)
        throw dimension_error("blend: beta must be 1 x H x W");
    const size_t plane = static_cast<size_t>(h) * w;
    Var y = t.alloc(w1->shape, w1->needs_grad || w2->needs_grad || beta->needs_grad);
    for (int ch = 0; ch < c; ++ch)
        for (size_t p = 0; p < plane; ++p) {
            const float b = beta->val[p];
            y->val[ch * plane + p] = b * w1->val[ch * plane + p] + (1.f - b) * w2->val[ch * plane + p];
        }
    if (y->needs_grad)
        y->back = [y, w1, w2, beta, c, plane] {
            for (int ch = 0; ch < c; ++ch)
                for (size_t p = 0; p < plane; ++p) {
                    const float g = y->grad[ch * plane + p];
                    const float b = beta->val[p];
                    if (w1->needs_grad) w1->grad[ch * plane + p] += g * b;
                    if (w2->needs_grad) w2->grad[ch * plane + p] += g * (1.f - b);
                    if (beta->needs_grad)
                        beta->grad[p] += g * (w1->val[ch * plane + p] - w2->val[ch * plane + p]);
                }
        };
    return y;
}

// x_hat = alpha * pred + residue, alpha broadcast over channels.
inline Var reconstruct(Tape& t, Var pred, Var alpha, Var residue) {
    const int c = pred->shape.c, h = pred->shape.h, w = pred->shape.w;
    if (residue->shape != pred->shape) throw dimension_error("reconstruct: residue shape differs");
    if (alpha->shape.c != 1 || alpha->shape.h != h || alpha->shape.w != w)
        throw dimension_error("reconstruct: alpha must be 1 x H x W");
    const size_t plane = static_cast<size_t>(h) * w;
    Var y = t.alloc(pred->shape, pred->needs_grad || alpha->needs_grad || residue->needs_grad);
    for (int ch = 0; ch < c; ++ch)
        for (size_t p = 0; p < plane; ++p)
            y->val[ch * plane + p] = alpha->val[p] * pred->val[ch * plane + p] + residue->val[ch * plane + p];
    if (y->needs_grad)
        y->back = [y, pred, alpha, residue, c, plane] {
            for (int ch = 0; ch < c; ++ch)
                for (size_t p = 0; p < plane; ++p) {
                    const float g = y->grad[ch * plane + p];
                    if (pred->needs_grad) pred->grad[ch * plane + p] += g * alpha->val[p];
                    if (alpha->needs_grad) alpha->grad[p] += g * pred->val[ch * plane + p];
                    if (residue->needs_grad) residue->grad[ch * plane + p] += g;
                }
        };
    return y;
}

// Fixed 2x2 average; the chroma downsampling of the 444 -> 420 conversion.
inline Var avg2x2(Tape& t, Var x) {
    const int h = x->shape.h, w = x->shape.w;
    if (x->shape.c != 1) throw dimension_error("avg2x2: single channel expected");
    if (h % 2 || w % 2) throw config_error("avg2x2: odd dimensions");
    const int oh = h / 2, ow = w / 2;
    Var y = t.alloc(Shape{1, oh, ow}, x->needs_grad);
    for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx) {
            const size_t p = static_cast<size_t>(2 * yy) * w + 2 * xx;
            y->val[static_cast<size_t>(yy) * ow + xx] =
                0.25f * (x->val[p] + x->val[p + 1] + x->val[p + w] + x->val[p + w + 1]);
        }
    if (y->needs_grad)
        y->back = [y, x, oh, ow, w] {
            for (int yy = 0; yy < oh; ++yy)
                for (int xx = 0; xx < ow; ++xx) {
                    const float g = 0.25f * y->grad[static_cast<size_t>(yy) * ow + xx];
                    const size_t p = static_cast<size_t>(2 * yy) * w + 2 * xx;
                    x->grad[p] += g;
                    x->grad[p + 1] += g;
                    x->grad[p + w] += g;
                    x->grad[p + w + 1] += g;
                }
        };
    return y;
}

// Sum of squared differences against a constant target buffer.
inline Var sse_vs(Tape& t, Var x, const float* target) {
    const size_t n = x->val.size();
    Var y = t.alloc(Shape{1, 1, 1}, x->needs_grad);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(x->val[i]) - target[i];
        acc += d * d;
    }
    y->val[0] = static_cast<float>(acc);
    if (y->needs_grad)
        y->back = [y, x, target, n] {
            const float g = y->grad[0];
            for (size_t i = 0; i < n; ++i) x->grad[i] += g * 2.f * (x->val[i] - target[i]);
        };
    return y;
}

}  // namespace ovc

#endif
