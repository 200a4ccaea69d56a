#ifndef OVC_FRAME_HPP
#define OVC_FRAME_HPP

#include <cmath>
#include <string>
#include <vector>

#include "ovc/common.hpp"

namespace ovc {

// One picture in 4:2:0 integer form. Luma is h x w, chroma planes h/2 x w/2,
// samples hold `depth`-bit values (8 or 10).
struct Planes420 {
    int w = 0, h = 0, depth = 8;
    std::vector<uint16_t> y, u, v;

    static Planes420 make(int w, int h, int depth) {
        if (w % 2 || h % 2) throw config_error("frame dimensions must be even");
        Planes420 p;
        p.w = w;
        p.h = h;
        p.depth = depth;
        p.y.assign(static_cast<size_t>(w) * h, 0);
        p.u.assign(static_cast<size_t>(w / 2) * (h / 2), 0);
        p.v.assign(static_cast<size_t>(w / 2) * (h / 2), 0);
        return p;
    }

    int maxval() const { return (1 << depth) - 1; }
};

enum class FrameKind : uint8_t { I = 0, P = 1, B = 2 };

inline char frame_kind_letter(FrameKind k) {
    return k == FrameKind::I ? 'I' : k == FrameKind::P ? 'P' : 'B';
}

struct FrameDesc {
    int display_idx = 0;
    FrameKind kind = FrameKind::I;
    std::vector<int> refs;  // display indices, already decoded
};

constexpr uint8_t kGopAllIntra = 0;
constexpr uint8_t kGopRandomAccess = 1;
constexpr uint8_t kGopLowDelayP = 2;

// Hierarchical structures in decode order. The random access builder places
// the I-frame, a trailing P anchored on it, then bisects each span
// breadth-first, so 9 frames give 0,8,4,2,6,1,3,5,7 with frames 0 and 4 each
// referenced four times.
struct GopStructure {
    uint8_t id = kGopAllIntra;
    int n_frames = 0;
    std::vector<FrameDesc> decode_order;

    static GopStructure all_intra(int n) {
        GopStructure g;
        g.id = kGopAllIntra;
        g.n_frames = n;
        for (int i = 0; i < n; ++i) g.decode_order.push_back({i, FrameKind::I, {}});
        return g;
    }

    static GopStructure low_delay_p(int n) {
        GopStructure g;
        g.id = kGopLowDelayP;
        g.n_frames = n;
        for (int i = 0; i < n; ++i) {
            if (i == 0) g.decode_order.push_back({0, FrameKind::I, {}});
            else g.decode_order.push_back({i, FrameKind::P, {i - 1}});
        }
        return g;
    }

    static GopStructure random_access(int n) {
        if (n < 1 || n > 9) throw config_error("random access GOP supports 1..9 frames");
        GopStructure g;
        g.id = kGopRandomAccess;
        g.n_frames = n;
        g.decode_order.push_back({0, FrameKind::I, {}});
        if (n == 1) return g;
        const int last = n - 1;
        g.decode_order.push_back({last, FrameKind::P, {0}});
        std::vector<std::pair<int, int>> spans = {{0, last}};
        while (!spans.empty()) {
            std::vector<std::pair<int, int>> next;
            for (auto [a, b] : spans) {
                if (b - a < 2) continue;
                const int m = (a + b) / 2;
                g.decode_order.push_back({m, FrameKind::B, {a, b}});
                next.push_back({a, m});
                next.push_back({m, b});
            }
            spans = std::move(next);
        }
        return g;
    }

    static GopStructure make(uint8_t id, int n) {
        switch (id) {
            case kGopAllIntra: return all_intra(n);
            case kGopRandomAccess: return random_access(n);
            case kGopLowDelayP: return low_delay_p(n);
        }
        throw config_error("unknown GOP structure id " + std::to_string(id));
    }

    // How often each display index serves as a reference.
    std::vector<int> reference_counts() const {
        std::vector<int> c(n_frames, 0);
        for (const auto& f : decode_order)
            for (int r : f.refs) ++c[r];
        return c;
    }
};

// Reflect padding (edge-inclusive) to the bottom/right, used to raise
// arbitrary even frame sizes to the next multiple of 64 before coding.
inline Planes420 reflect_pad_420(const Planes420& p, int tw, int th) {
    if (tw < p.w || th < p.h || tw % 2 || th % 2) throw config_error("bad padding target");
    if (tw - p.w > p.w || th - p.h > p.h)
        throw config_error("frame too small to reflect-pad to the coded size");
    Planes420 out = Planes420::make(tw, th, p.depth);
    auto pad_plane = [](const std::vector<uint16_t>& src, int sw, int sh,
                        std::vector<uint16_t>& dst, int dw, int dh) {
        auto ry = [&](int y) { return y < sh ? y : 2 * sh - 1 - y; };
        auto rx = [&](int x) { return x < sw ? x : 2 * sw - 1 - x; };
        for (int y = 0; y < dh; ++y)
            for (int x = 0; x < dw; ++x)
                dst[static_cast<size_t>(y) * dw + x] = src[static_cast<size_t>(ry(y)) * sw + rx(x)];
    };
    pad_plane(p.y, p.w, p.h, out.y, tw, th);
    pad_plane(p.u, p.w / 2, p.h / 2, out.u, tw / 2, th / 2);
    pad_plane(p.v, p.w / 2, p.h / 2, out.v, tw / 2, th / 2);
    return out;
}

inline Planes420 crop_420(const Planes420& p, int tw, int th) {
    if (tw > p.w || th > p.h || tw % 2 || th % 2) throw config_error("bad crop target");
    Planes420 out = Planes420::make(tw, th, p.depth);
    for (int y = 0; y < th; ++y)
        for (int x = 0; x < tw; ++x)
            out.y[static_cast<size_t>(y) * tw + x] = p.y[static_cast<size_t>(y) * p.w + x];
    for (int y = 0; y < th / 2; ++y)
        for (int x = 0; x < tw / 2; ++x) {
            out.u[static_cast<size_t>(y) * (tw / 2) + x] = p.u[static_cast<size_t>(y) * (p.w / 2) + x];
            out.v[static_cast<size_t>(y) * (tw / 2) + x] = p.v[static_cast<size_t>(y) * (p.w / 2) + x];
        }
    return out;
}

inline int next_multiple_64(int v) { return (v + 63) / 64 * 64; }

// Float targets in [0,1] for the training loss and metrics.
struct Targets420 {
    int w = 0, h = 0;
    std::vector<float> y, u, v;

    static Targets420 of(const Planes420& p) {
        Targets420 t;
        t.w = p.w;
        t.h = p.h;
        const float inv = 1.f / p.maxval();
        t.y.resize(p.y.size());
        t.u.resize(p.u.size());
        t.v.resize(p.v.size());
        for (size_t i = 0; i < p.y.size(); ++i) t.y[i] = p.y[i] * inv;
        for (size_t i = 0; i < p.u.size(); ++i) t.u[i] = p.u[i] * inv;
        for (size_t i = 0; i < p.v.size(); ++i) t.v[i] = p.v[i] * inv;
        return t;
    }

    size_t samples() const { return y.size() + u.size() + v.size(); }
};

}  // namespace ovc

#endif
