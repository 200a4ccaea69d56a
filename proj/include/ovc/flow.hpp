#ifndef OVC_FLOW_HPP
#define OVC_FLOW_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "ovc/frame.hpp"

namespace ovc {

// Dense per-pixel flow, (dx, dy) in pixels. Convention: the current frame's
// pixel p matches the reference at p + flow(p) (backward warping).
struct FlowField {
    int w = 0, h = 0;
    std::vector<float> dx, dy;

    static FlowField make(int w, int h) {
        FlowField f;
        f.w = w;
        f.h = h;
        f.dx.assign(static_cast<size_t>(w) * h, 0.f);
        f.dy.assign(static_cast<size_t>(w) * h, 0.f);
        return f;
    }

    void validate() const {
        if (w <= 0 || h <= 0) throw format_error("degenerate flow field");
        const float lim = static_cast<float>(std::max(w, h));
        for (size_t i = 0; i < dx.size(); ++i) {
            if (!std::isfinite(dx[i]) || !std::isfinite(dy[i]))
                throw format_error("non-finite flow value");
            if (std::abs(dx[i]) >= lim || std::abs(dy[i]) >= lim)
                throw format_error("flow magnitude exceeds frame extent");
        }
    }

    // Interleaved 2 x H x W buffer for the warp op (channel 0 = dx).
    std::vector<float> packed() const {
        std::vector<float> out(dx.size() * 2);
        std::copy(dx.begin(), dx.end(), out.begin());
        std::copy(dy.begin(), dy.end(), out.begin() + dx.size());
        return out;
    }
};

constexpr float kFloMagic = 202021.25f;

// Middlebury .flo layout: magic float, int32 width/height, interleaved
// float32 (u, v) row-major.
inline FlowField read_flo(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    float magic = 0.f;
    int32_t w = 0, h = 0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    if (!in || magic != kFloMagic) throw format_error("bad .flo magic in " + path);
    if (w <= 0 || h <= 0) throw format_error("degenerate .flo dimensions");
    FlowField f = FlowField::make(w, h);
    std::vector<float> row(static_cast<size_t>(w) * 2);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
        if (!in) throw format_error("truncated .flo file " + path);
        for (int x = 0; x < w; ++x) {
            f.dx[static_cast<size_t>(y) * w + x] = row[2 * x];
            f.dy[static_cast<size_t>(y) * w + x] = row[2 * x + 1];
        }
    }
    return f;
}

inline void write_flo(const std::string& path, const FlowField& f) {
    if (f.w <= 0 || f.h <= 0) throw format_error("degenerate flow field");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    const float magic = kFloMagic;
    const int32_t w = f.w, h = f.h;
    out.write(reinterpret_cast<const char*>(&magic), 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    std::vector<float> row(static_cast<size_t>(f.w) * 2);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            row[2 * x] = f.dx[static_cast<size_t>(y) * w + x];
            row[2 * x + 1] = f.dy[static_cast<size_t>(y) * w + x];
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    }
}

inline double flow_epe(const FlowField& est, const FlowField& gt) {
    if (est.w != gt.w || est.h != gt.h) throw metric_error("flow shapes differ");
    double acc = 0.0;
    for (size_t i = 0; i < est.dx.size(); ++i) {
        const double ddx = static_cast<double>(est.dx[i]) - gt.dx[i];
        const double ddy = static_cast<double>(est.dy[i]) - gt.dy[i];
        acc += std::sqrt(ddx * ddx + ddy * ddy);
    }
    return acc / static_cast<double>(est.dx.size());
}

namespace blockmatch {

struct Image {
    int w = 0, h = 0;
    std::vector<float> v;

    float at_clamped(int y, int x) const {
        y = std::min(h - 1, std::max(0, y));
        x = std::min(w - 1, std::max(0, x));
        return v[static_cast<size_t>(y) * w + x];
    }

    float sample(float y, float x) const {
        y = std::min(static_cast<float>(h - 1), std::max(0.f, y));
        x = std::min(static_cast<float>(w - 1), std::max(0.f, x));
        const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
        const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
        const float wy = y - y0, wx = x - x0;
        return (1 - wy) * ((1 - wx) * v[static_cast<size_t>(y0) * w + x0] + wx * v[static_cast<size_t>(y0) * w + x1]) +
               wy * ((1 - wx) * v[static_cast<size_t>(y1) * w + x0] + wx * v[static_cast<size_t>(y1) * w + x1]);
    }
};

inline Image luma_of(const Planes420& p) {
    Image im;
    im.w = p.w;
    im.h = p.h;
    im.v.resize(p.y.size());
    const float inv = 1.f / p.maxval();
    for (size_t i = 0; i < p.y.size(); ++i) im.v[i] = p.y[i] * inv;
    return im;
}

// 5-tap binomial blur then 2x decimation.
inline Image downsample(const Image& in) {
    static const float k[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
    Image blur;
    blur.w = in.w;
    blur.h = in.h;
    blur.v.assign(in.v.size(), 0.f);
    std::vector<float> tmp(in.v.size(), 0.f);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            float acc = 0.f;
            for (int t = -2; t <= 2; ++t) acc += k[t + 2] * in.at_clamped(y, x + t);
            tmp[static_cast<size_t>(y) * in.w + x] = acc;
        }
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            float acc = 0.f;
            for (int t = -2; t <= 2; ++t)
                acc += k[t + 2] * tmp[static_cast<size_t>(std::min(in.h - 1, std::max(0, y + t))) * in.w + x];
            blur.v[static_cast<size_t>(y) * in.w + x] = acc;
        }
    Image out;
    out.w = in.w / 2;
    out.h = in.h / 2;
    out.v.resize(static_cast<size_t>(out.w) * out.h);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            out.v[static_cast<size_t>(y) * out.w + x] = blur.v[static_cast<size_t>(2 * y) * in.w + 2 * x];
    return out;
}

inline double block_sad(const Image& cur, const Image& ref, int by, int bx, int bh, int bw,
                        float mvy, float mvx) {
    double acc = 0.0;
    for (int y = by; y < by + bh; ++y)
        for (int x = bx; x < bx + bw; ++x)
            acc += std::abs(cur.v[static_cast<size_t>(y) * cur.w + x] - ref.sample(y + mvy, x + mvx));
    return acc;
}

inline void median3x3(std::vector<float>& f, int h, int w) {
    std::vector<float> src = f;
    std::array<float, 9> win;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int n = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = std::min(h - 1, std::max(0, y + dy));
                    const int xx = std::min(w - 1, std::max(0, x + dx));
                    win[n++] = src[static_cast<size_t>(yy) * w + xx];
                }
            std::nth_element(win.begin(), win.begin() + 4, win.begin() + 9);
            f[static_cast<size_t>(y) * w + x] = win[4];
        }
}

}  // namespace blockmatch

// Hierarchical block matching: 4-level Gaussian pyramid, 16x16 blocks, +-8
// integer SAD search per level on luma, half-pel bilinear refinement, 3x3
// median filtering, bilinear upscaling of the field between levels.
// Returns the flow from `cur` to `ref` (cur(p) ~ ref(p + flow(p))).
inline FlowField estimate_flow(const Planes420& cur, const Planes420& ref) {
    if (cur.w != ref.w || cur.h != ref.h || cur.depth != ref.depth)
        throw dimension_error("estimate_flow: frame dimensions differ");
    constexpr int kLevelsBM = 4, kBlock = 16, kSearch = 8;
    if (std::min(cur.w, cur.h) < (1 << (kLevelsBM - 1)) * 4)
        throw config_error("estimate_flow: frames too small for the 4-level pyramid");
    using blockmatch::Image;
    std::vector<Image> pc{blockmatch::luma_of(cur)}, pr{blockmatch::luma_of(ref)};
    for (int l = 1; l < kLevelsBM; ++l) {
        pc.push_back(blockmatch::downsample(pc.back()));
        pr.push_back(blockmatch::downsample(pr.back()));
    }
    std::vector<float> fx, fy;  // current level field, per pixel
    int fw = 0, fh = 0;
    for (int l = kLevelsBM - 1; l >= 0; --l) {
        const Image& c = pc[l];
        const Image& r = pr[l];
        std::vector<float> nfx(static_cast<size_t>(c.w) * c.h, 0.f);
        std::vector<float> nfy(static_cast<size_t>(c.w) * c.h, 0.f);
        if (!fx.empty()) {
            // Bilinear upscale of the coarser field, vectors doubled.
            for (int y = 0; y < c.h; ++y)
                for (int x = 0; x < c.w; ++x) {
                    const float sy = std::min(static_cast<float>(fh - 1), std::max(0.f, (y - 0.5f) * 0.5f));
                    const float sx = std::min(static_cast<float>(fw - 1), std::max(0.f, (x - 0.5f) * 0.5f));
                    const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
                    const int y1 = std::min(y0 + 1, fh - 1), x1 = std::min(x0 + 1, fw - 1);
                    const float wy = sy - y0, wx = sx - x0;
                    auto lerp = [&](const std::vector<float>& f) {
                        return (1 - wy) * ((1 - wx) * f[static_cast<size_t>(y0) * fw + x0] + wx * f[static_cast<size_t>(y0) * fw + x1]) +
                               wy * ((1 - wx) * f[static_cast<size_t>(y1) * fw + x0] + wx * f[static_cast<size_t>(y1) * fw + x1]);
                    };
                    nfx[static_cast<size_t>(y) * c.w + x] = 2.f * lerp(fx);
                    nfy[static_cast<size_t>(y) * c.w + x] = 2.f * lerp(fy);
                }
        }
        for (int by = 0; by < c.h; by += kBlock)
            for (int bx = 0; bx < c.w; bx += kBlock) {
                const int bh = std::min(kBlock, c.h - by);
                const int bw = std::min(kBlock, c.w - bx);
                const size_t center = static_cast<size_t>(by) * c.w + bx;
                const float py = std::round(nfy[center]);
                const float px = std::round(nfx[center]);
                double best = 1e30;
                float bmy = py, bmx = px;
                for (int dy = -kSearch; dy <= kSearch; ++dy)
                    for (int dx = -kSearch; dx <= kSearch; ++dx) {
                        const double s = blockmatch::block_sad(c, r, by, bx, bh, bw, py + dy, px + dx);
                        if (s < best - 1e-12) {
                            best = s;
                            bmy = py + dy;
                            bmx = px + dx;
                        }
                    }
                // Half-pel refinement around the integer winner.
                float rmy = bmy, rmx = bmx;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (!dy && !dx) continue;
                        const double s = blockmatch::block_sad(c, r, by, bx, bh, bw,
                                                               bmy + 0.5f * dy, bmx + 0.5f * dx);
                        if (s < best - 1e-12) {
                            best = s;
                            rmy = bmy + 0.5f * dy;
                            rmx = bmx + 0.5f * dx;
                        }
                    }
                for (int y = by; y < by + bh; ++y)
                    for (int x = bx; x < bx + bw; ++x) {
                        nfy[static_cast<size_t>(y) * c.w + x] = rmy;
                        nfx[static_cast<size_t>(y) * c.w + x] = rmx;
                    }
            }
        blockmatch::median3x3(nfx, c.h, c.w);
        blockmatch::median3x3(nfy, c.h, c.w);
        fx = std::move(nfx);
        fy = std::move(nfy);
        fw = c.w;
        fh = c.h;
    }
    FlowField f = FlowField::make(cur.w, cur.h);
    f.dx = std::move(fx);
    f.dy = std::move(fy);
    f.validate();
    return f;
}

}  // namespace ovc

#endif
