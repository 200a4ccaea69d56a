#ifndef OVC_OPS_HPP
#define OVC_OPS_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "ovc/rng.hpp"
#include "ovc/tensor.hpp"

namespace ovc {

inline Var add(Tape& t, Var a, Var b) {
    if (a->shape != b->shape) throw dimension_error("add: shape mismatch");
    const size_t n = a->val.size();
    Var y = t.alloc(a->shape, a->needs_grad || b->needs_grad);
    for (size_t i = 0; i < n; ++i) y->val[i] = a->val[i] + b->val[i];
    if (y->needs_grad)
        y->back = [y, a, b, n] {
            if (a->needs_grad)
                for (size_t i = 0; i < n; ++i) a->grad[i] += y->grad[i];
            if (b->needs_grad)
                for (size_t i = 0; i < n; ++i) b->grad[i] += y->grad[i];
        };
    return y;
}

inline Var sub(Tape& t, Var a, Var b) {
    if (a->shape != b->shape) throw dimension_error("sub: shape mismatch");
    const size_t n = a->val.size();
    Var y = t.alloc(a->shape, a->needs_grad || b->needs_grad);
    for (size_t i = 0; i < n; ++i) y->val[i] = a->val[i] - b->val[i];
    if (y->needs_grad)
        y->back = [y, a, b, n] {
            if (a->needs_grad)
                for (size_t i = 0; i < n; ++i) a->grad[i] += y->grad[i];
            if (b->needs_grad)
                for (size_t i = 0; i < n; ++i) b->grad[i] -= y->grad[i];
        };
    return y;
}

inline Var mul(Tape& t, Var a, Var b) {
    if (a->shape != b->shape) throw dimension_error("mul: shape mismatch");
    const size_t n = a->val.size();
    Var y = t.alloc(a->shape, a->needs_grad || b->needs_grad);
    for (size_t i = 0; i < n; ++i) y->val[i] = a->val[i] * b->val[i];
    if (y->needs_grad)
        y->back = [y, a, b, n] {
            if (a->needs_grad)
                for (size_t i = 0; i < n; ++i) a->grad[i] += y->grad[i] * b->val[i];
            if (b->needs_grad)
                for (size_t i = 0; i < n; ++i) b->grad[i] += y->grad[i] * a->val[i];
        };
    return y;
}

inline Var scale(Tape& t, Var a, float s) {
    const size_t n = a->val.size();
    Var y = t.alloc(a->shape, a->needs_grad);
    for (size_t i = 0; i < n; ++i) y->val[i] = a->val[i] * s;
    if (y->needs_grad)
        y->back = [y, a, s, n] {
            for (size_t i = 0; i < n; ++i) a->grad[i] += y->grad[i] * s;
        };
    return y;
}

inline Var relu(Tape& t, Var a) {
    const size_t n = a->val.size();
    Var y = t.alloc(a->shape, a->needs_grad);
    for (size_t i = 0; i < n; ++i) y->val[i] = a->val[i] > 0.f ? a->val[i] : 0.f;
    if (y->needs_grad)
        y->back = [y, a, n] {
            for (size_t i = 0; i < n; ++i)
                if (a->val[i] > 0.f) a->grad[i] += y->grad[i];
        };
    return y;
}

// Clamp to [0,1]; the gradient passes through unchanged outside the interval
// so out-of-range activations keep receiving a training signal.
inline Var clamp01_ste(Tape& t, Var a) {
    const size_t n = a->val.size();
    Var y = t.alloc(a->shape, a->needs_grad);
    for (size_t i = 0; i < n; ++i) y->val[i] = std::min(1.f, std::max(0.f, a->val[i]));
    if (y->needs_grad)
        y->back = [y, a, n] {
            for (size_t i = 0; i < n; ++i) a->grad[i] += y->grad[i];
        };
    return y;
}

// Weighted sum of scalar nodes; the loss combiner.
inline Var wsum(Tape& t, const std::vector<std::pair<Var, float>>& terms) {
    bool ng = false;
    double acc = 0.0;
    for (const auto& [v, w] : terms) {
        if (v->shape.numel() != 1) throw dimension_error("wsum: non-scalar term");
        acc += static_cast<double>(v->val[0]) * w;
        ng = ng || v->needs_grad;
    }
    Var y = t.alloc(Shape{1, 1, 1}, ng);
    y->val[0] = static_cast<float>(acc);
    if (ng) {
        auto ts = terms;
        y->back = [y, ts = std::move(ts)] {
            for (const auto& [v, w] : ts)
                if (v->needs_grad) v->grad[0] += y->grad[0] * w;
        };
    }
    return y;
}

// y[r, o] = sum_i W[o, i] x[r, i] + b[o], rows batched.
inline Var linear(Tape& t, Var x, Var W, Var b) {
    const int rows = x->shape.h, in = x->shape.w;
    const int out = W->shape.h;
    if (x->shape.c != 1 || W->shape.c != 1) throw dimension_error("linear: expects matrices");
    if (W->shape.w != in) throw dimension_error("linear: inner dimensions disagree");
    if (b->shape.numel() != out) throw dimension_error("linear: bias size mismatch");
    Var y = t.alloc(mat(rows, out), x->needs_grad || W->needs_grad || b->needs_grad);
    const float* xv = x->val.data();
    const float* wv = W->val.data();
    const float* bv = b->val.data();
    float* yv = y->val.data();
    for (int r = 0; r < rows; ++r) {
        const float* xr = xv + static_cast<size_t>(r) * in;
        float* yr = yv + static_cast<size_t>(r) * out;
        for (int o = 0; o < out; ++o) {
            const float* wr = wv + static_cast<size_t>(o) * in;
            float acc = bv[o];
            for (int i = 0; i < in; ++i) acc += wr[i] * xr[i];
            yr[o] = acc;
        }
    }
    if (y->needs_grad)
        y->back = [y, x, W, b, rows, in, out] {
            const float* gy = y->grad.data();
            if (x->needs_grad) {
                float* gx = x->grad.data();
                const float* wv = W->val.data();
                for (int r = 0; r < rows; ++r) {
                    const float* gyr = gy + static_cast<size_t>(r) * out;
                    float* gxr = gx + static_cast<size_t>(r) * in;
                    for (int o = 0; o < out; ++o) {
                        const float g = gyr[o];
                        const float* wr = wv + static_cast<size_t>(o) * in;
                        for (int i = 0; i < in; ++i) gxr[i] += g * wr[i];
                    }
                }
            }
            if (W->needs_grad) {
                float* gw = W->grad.data();
                const float* xv = x->val.data();
                for (int r = 0; r < rows; ++r) {
                    const float* gyr = gy + static_cast<size_t>(r) * out;
                    const float* xr = xv + static_cast<size_t>(r) * in;
                    for (int o = 0; o < out; ++o) {
                        const float g = gyr[o];
                        float* gwr = gw + static_cast<size_t>(o) * in;
                        for (int i = 0; i < in; ++i) gwr[i] += g * xr[i];
                    }
                }
            }
            if (b->needs_grad) {
                float* gb = b->grad.data();
                for (int r = 0; r < rows; ++r) {
                    const float* gyr = gy + static_cast<size_t>(r) * out;
                    for (int o = 0; o < out; ++o) gb[o] += gyr[o];
                }
            }
        };
    return y;
}

// Cross-correlation with zero padding, stride 1, odd kernel, spatial dims
// preserved. W is [c_out, c_in, k, k] flattened, b is [c_out].
inline Var conv2d(Tape& t, Var x, Var W, Var b, int c_out, int k) {
    const int c_in = x->shape.c, h = x->shape.h, w = x->shape.w;
    if (k % 2 == 0) throw dimension_error("conv2d: kernel size must be odd");
    if (W->shape.numel() != static_cast<int64_t>(c_out) * c_in * k * k)
        throw dimension_error("conv2d: weight size does not match channels");
    if (b->shape.numel() != c_out) throw dimension_error("conv2d: bias size mismatch");
    const int pad = k / 2;
    Var y = t.alloc(Shape{c_out, h, w}, x->needs_grad || W->needs_grad || b->needs_grad);
    const size_t plane = static_cast<size_t>(h) * w;
    for (int co = 0; co < c_out; ++co) {
        float* yp = y->val.data() + co * plane;
        const float bias = b->val[co];
        for (size_t i = 0; i < plane; ++i) yp[i] = bias;
        for (int ci = 0; ci < c_in; ++ci) {
            const float* xp = x->val.data() + ci * plane;
            const float* wk = W->val.data() + (static_cast<size_t>(co) * c_in + ci) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                const int dy = ky - pad;
                for (int kx = 0; kx < k; ++kx) {
                    const int dx = kx - pad;
                    const float wv = wk[ky * k + kx];
                    const int y0 = std::max(0, -dy), y1 = h - std::max(0, dy);
                    const int x0 = std::max(0, -dx), x1 = w - std::max(0, dx);
                    for (int yy = y0; yy < y1; ++yy) {
                        float* yr = yp + static_cast<size_t>(yy) * w;
                        const float* xr = xp + static_cast<size_t>(yy + dy) * w + dx;
                        for (int xx = x0; xx < x1; ++xx) yr[xx] += wv * xr[xx];
                    }
                }
            }
        }
    }
    if (y->needs_grad)
        y->back = [y, x, W, b, c_out, c_in, h, w, k, pad, plane] {
            for (int co = 0; co < c_out; ++co) {
                const float* gyp = y->grad.data() + co * plane;
                if (b->needs_grad) {
                    float acc = 0.f;
                    for (size_t i = 0; i < plane; ++i) acc += gyp[i];
                    b->grad[co] += acc;
                }
                for (int ci = 0; ci < c_in; ++ci) {
                    const size_t wbase = (static_cast<size_t>(co) * c_in + ci) * k * k;
                    for (int ky = 0; ky < k; ++ky) {
                        const int dy = ky - pad;
                        for (int kx = 0; kx < k; ++kx) {
                            const int dx = kx - pad;
                            const int y0 = std::max(0, -dy), y1 = h - std::max(0, dy);
                            const int x0 = std::max(0, -dx), x1 = w - std::max(0, dx);
                            if (x->needs_grad) {
                                const float wv = W->val[wbase + ky * k + kx];
                                float* gxp = x->grad.data() + ci * plane;
                                for (int yy = y0; yy < y1; ++yy) {
                                    const float* gyr = gyp + static_cast<size_t>(yy) * w;
                                    float* gxr = gxp + static_cast<size_t>(yy + dy) * w + dx;
                                    for (int xx = x0; xx < x1; ++xx) gxr[xx] += wv * gyr[xx];
                                }
                            }
                            if (W->needs_grad) {
                                const float* xp = x->val.data() + ci * plane;
                                float acc = 0.f;
                                for (int yy = y0; yy < y1; ++yy) {
                                    const float* gyr = gyp + static_cast<size_t>(yy) * w;
                                    const float* xr = xp + static_cast<size_t>(yy + dy) * w + dx;
                                    for (int xx = x0; xx < x1; ++xx) acc += gyr[xx] * xr[xx];
                                }
                                W->grad[wbase + ky * k + kx] += acc;
                            }
                        }
                    }
                }
            }
        };
    return y;
}

// Transposed convolution, stride 2, single channel, 8x8 kernel. The raw
// (2h+6)x(2w+6) result is center-cropped: first to 2h x 2w, then to the
// requested target extents (which keeps ceil-sized pyramid chains aligned).
inline Var tconv2d_stride2(Tape& t, Var x, Var K, Var b, int target_h, int target_w) {
    const int h = x->shape.h, w = x->shape.w;
    if (x->shape.c != 1) throw dimension_error("tconv2d_stride2: single input channel only");
    if (K->shape.numel() != 64) throw dimension_error("tconv2d_stride2: kernel must be 8x8");
    if (b->shape.numel() != 1) throw dimension_error("tconv2d_stride2: scalar bias");
    if (target_h > 2 * h || target_w > 2 * w || target_h < 1 || target_w < 1)
        throw dimension_error("tconv2d_stride2: bad target extents");
    const int rh = 2 * h + 6, rw = 2 * w + 6;
    const int oy = 3 + (2 * h - target_h) / 2, ox = 3 + (2 * w - target_w) / 2;
    Var y = t.alloc(Shape{1, target_h, target_w}, x->needs_grad || K->needs_grad || b->needs_grad);
    std::vector<float> raw(static_cast<size_t>(rh) * rw, 0.f);
    const float* xv = x->val.data();
    const float* kv = K->val.data();
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const float xvij = xv[static_cast<size_t>(i) * w + j];
            if (xvij == 0.f) continue;
            float* rp = raw.data() + static_cast<size_t>(2 * i) * rw + 2 * j;
            for (int ky = 0; ky < 8; ++ky) {
                float* rr = rp + static_cast<size_t>(ky) * rw;
                const float* kr = kv + ky * 8;
                for (int kx = 0; kx < 8; ++kx) rr[kx] += xvij * kr[kx];
            }
        }
    const float bias = b->val[0];
    for (int yy = 0; yy < target_h; ++yy) {
        const float* rr = raw.data() + static_cast<size_t>(yy + oy) * rw + ox;
        float* yr = y->val.data() + static_cast<size_t>(yy) * target_w;
        for (int xx = 0; xx < target_w; ++xx) yr[xx] = rr[xx] + bias;
    }
    if (y->needs_grad)
        y->back = [y, x, K, b, h, w, rh, rw, oy, ox, target_h, target_w] {
            std::vector<float> graw(static_cast<size_t>(rh) * rw, 0.f);
            for (int yy = 0; yy < target_h; ++yy) {
                float* gr = graw.data() + static_cast<size_t>(yy + oy) * rw + ox;
                const float* gy = y->grad.data() + static_cast<size_t>(yy) * target_w;
                for (int xx = 0; xx < target_w; ++xx) gr[xx] += gy[xx];
            }
            if (b->needs_grad) {
                float acc = 0.f;
                for (const float g : y->grad) acc += g;
                b->grad[0] += acc;
            }
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    const float* gp = graw.data() + static_cast<size_t>(2 * i) * rw + 2 * j;
                    const float xvij = x->val[static_cast<size_t>(i) * w + j];
                    float gx = 0.f;
                    for (int ky = 0; ky < 8; ++ky) {
                        const float* gr = gp + static_cast<size_t>(ky) * rw;
                        const float* kr = K->val.data() + ky * 8;
                        float* gkr = K->needs_grad ? K->grad.data() + ky * 8 : nullptr;
                        for (int kx = 0; kx < 8; ++kx) {
                            gx += gr[kx] * kr[kx];
                            if (gkr) gkr[kx] += gr[kx] * xvij;
                        }
                    }
                    if (x->needs_grad) x->grad[static_cast<size_t>(i) * w + j] += gx;
                }
        };
    return y;
}

// Rows of causal context values gathered from a single grid. idx holds, for
// each of N positions, ctx flat indices into the grid (-1 reads as zero).
inline Var gather_rows(Tape& t, Var grid, std::shared_ptr<const std::vector<int32_t>> idx, int ctx) {
    const int n = static_cast<int>(idx->size()) / ctx;
    Var y = t.alloc(mat(n, ctx), grid->needs_grad);
    const float* gv = grid->val.data();
    for (size_t i = 0; i < idx->size(); ++i) y->val[i] = (*idx)[i] >= 0 ? gv[(*idx)[i]] : 0.f;
    if (y->needs_grad)
        y->back = [y, grid, idx] {
            float* gg = grid->grad.data();
            const float* gy = y->grad.data();
            for (size_t i = 0; i < idx->size(); ++i)
                if ((*idx)[i] >= 0) gg[(*idx)[i]] += gy[i];
        };
    return y;
}

inline Var stack_channels(Tape& t, const std::vector<Var>& planes) {
    if (planes.empty()) throw dimension_error("stack_channels: empty");
    const int h = planes[0]->shape.h, w = planes[0]->shape.w;
    bool ng = false;
    for (Var p : planes) {
        if (p->shape.c != 1 || p->shape.h != h || p->shape.w != w)
            throw dimension_error("stack_channels: plane shape mismatch");
        ng = ng || p->needs_grad;
    }
    Var y = t.alloc(Shape{static_cast<int>(planes.size()), h, w}, ng);
    const size_t plane = static_cast<size_t>(h) * w;
    for (size_t c = 0; c < planes.size(); ++c)
        std::copy(planes[c]->val.begin(), planes[c]->val.end(), y->val.begin() + c * plane);
    if (ng) {
        auto ps = planes;
        y->back = [y, ps = std::move(ps), plane] {
            for (size_t c = 0; c < ps.size(); ++c)
                if (ps[c]->needs_grad)
                    for (size_t i = 0; i < plane; ++i) ps[c]->grad[i] += y->grad[c * plane + i];
        };
    }
    return y;
}

inline Var slice_channel(Tape& t, Var x, int c) {
    if (c < 0 || c >= x->shape.c) throw dimension_error("slice_channel: out of range");
    const size_t plane = static_cast<size_t>(x->shape.h) * x->shape.w;
    Var y = t.alloc(Shape{1, x->shape.h, x->shape.w}, x->needs_grad);
    std::copy(x->val.begin() + c * plane, x->val.begin() + (c + 1) * plane, y->val.begin());
    if (y->needs_grad)
        y->back = [y, x, c, plane] {
            for (size_t i = 0; i < plane; ++i) x->grad[c * plane + i] += y->grad[i];
        };
    return y;
}

inline Var slice_channels(Tape& t, Var x, int c0, int count) {
    if (c0 < 0 || c0 + count > x->shape.c) throw dimension_error("slice_channels: out of range");
    const size_t plane = static_cast<size_t>(x->shape.h) * x->shape.w;
    Var y = t.alloc(Shape{count, x->shape.h, x->shape.w}, x->needs_grad);
    std::copy(x->val.begin() + c0 * plane, x->val.begin() + (c0 + count) * plane, y->val.begin());
    if (y->needs_grad)
        y->back = [y, x, c0, count, plane] {
            for (size_t i = 0; i < plane * count; ++i) x->grad[c0 * plane + i] += y->grad[i];
        };
    return y;
}

}  // namespace ovc

#endif
