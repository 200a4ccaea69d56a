#ifndef OVC_METRICS_HPP
#define OVC_METRICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "ovc/frame.hpp"

namespace ovc {

constexpr double kPsnrCap = 99.99;  // sentinel for lossless matches

struct RdPoint {
    double bpp = 0.0;
    double psnr_db = 0.0;
};

inline double psnr_from_mse(double mse, double maxval) {
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(maxval * maxval / mse));
}

// PSNR with the MSE pooled over all samples of all planes and frames.
inline double psnr_yuv420(const std::vector<Planes420>& ref, const std::vector<Planes420>& dec) {
    if (ref.size() != dec.size() || ref.empty()) throw metric_error("psnr: frame counts differ");
    double sse = 0.0;
    int64_t n = 0;
    const int maxv = ref[0].maxval();
    for (size_t f = 0; f < ref.size(); ++f) {
        if (ref[f].w != dec[f].w || ref[f].h != dec[f].h || ref[f].depth != dec[f].depth)
            throw metric_error("psnr: geometry mismatch");
        auto acc = [&](const std::vector<uint16_t>& a, const std::vector<uint16_t>& b) {
            for (size_t i = 0; i < a.size(); ++i) {
                const double d = static_cast<double>(a[i]) - b[i];
                sse += d * d;
            }
            n += static_cast<int64_t>(a.size());
        };
        acc(ref[f].y, dec[f].y);
        acc(ref[f].u, dec[f].u);
        acc(ref[f].v, dec[f].v);
    }
    return psnr_from_mse(sse / static_cast<double>(n), maxv);
}

// BT.709 full-range conversion; chroma upsampled by sample duplication.
// R, G, B returned in [0,1].
inline std::vector<float> to_rgb(const Planes420& p) {
    const float inv = 1.f / p.maxval();
    const size_t plane = static_cast<size_t>(p.w) * p.h;
    std::vector<float> rgb(plane * 3);
    const int cw = p.w / 2;
    for (int y = 0; y < p.h; ++y)
        for (int x = 0; x < p.w; ++x) {
            const size_t i = static_cast<size_t>(y) * p.w + x;
            const float Y = p.y[i] * inv;
            const float U = p.u[static_cast<size_t>(y / 2) * cw + x / 2] * inv - 0.5f;
            const float V = p.v[static_cast<size_t>(y / 2) * cw + x / 2] * inv - 0.5f;
            auto clamp01 = [](float v) { return std::min(1.f, std::max(0.f, v)); };
            rgb[i] = clamp01(Y + 1.5748f * V);
            rgb[plane + i] = clamp01(Y - 0.18732f * U - 0.46812f * V);
            rgb[2 * plane + i] = clamp01(Y + 1.8556f * U);
        }
    return rgb;
}

inline double psnr_rgb(const std::vector<Planes420>& ref, const std::vector<Planes420>& dec) {
    if (ref.size() != dec.size() || ref.empty()) throw metric_error("psnr: frame counts differ");
    double sse = 0.0;
    int64_t n = 0;
    for (size_t f = 0; f < ref.size(); ++f) {
        if (ref[f].w != dec[f].w || ref[f].h != dec[f].h)
            throw metric_error("psnr: geometry mismatch");
        const auto a = to_rgb(ref[f]);
        const auto b = to_rgb(dec[f]);
        for (size_t i = 0; i < a.size(); ++i) {
            const double d = static_cast<double>(a[i]) - b[i];
            sse += d * d;
        }
        n += static_cast<int64_t>(a.size());
    }
    return psnr_from_mse(sse / static_cast<double>(n), 1.0);
}

namespace bd_detail {

// Least-squares cubic fit of log10(rate) as a function of PSNR, centered
// for conditioning. Solved by Gaussian elimination with partial pivoting.
struct Cubic {
    std::array<double, 4> c{};  // c0 + c1 x + c2 x^2 + c3 x^3
    double center = 0.0;

    double integral(double lo, double hi) const {
        auto anti = [&](double xr) {
            const double x = xr - center;
            return c[0] * x + c[1] * x * x / 2 + c[2] * x * x * x / 3 + c[3] * x * x * x * x / 4;
        };
        return anti(hi) - anti(lo);
    }
};

inline Cubic fit_log_rate(const std::vector<RdPoint>& pts, double center) {
    std::array<std::array<double, 5>, 4> m{};
    for (const auto& p : pts) {
        if (!(p.bpp > 0.0)) throw metric_error("bd_rate: non-positive rate");
        const double x = p.psnr_db - center;
        const double y = std::log10(p.bpp);
        std::array<double, 4> phi{1.0, x, x * x, x * x * x};
        for (int r = 0; r < 4; ++r) {
            for (int cc = 0; cc < 4; ++cc) m[r][cc] += phi[r] * phi[cc];
            m[r][4] += phi[r] * y;
        }
    }
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        std::swap(m[col], m[piv]);
        if (std::abs(m[col][col]) < 1e-12) throw metric_error("bd_rate: degenerate fit");
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (int cc = col; cc < 5; ++cc) m[r][cc] -= f * m[col][cc];
        }
    }
    Cubic q;
    q.center = center;
    for (int r = 0; r < 4; ++r) q.c[r] = m[r][4] / m[r][r];
    return q;
}

}  // namespace bd_detail

// Bjontegaard delta rate: average rate difference (percent) at equal
// quality over the overlapping PSNR interval. Negative means rate savings
// of `test` over `anchor`.
inline double bd_rate(const std::vector<RdPoint>& anchor, const std::vector<RdPoint>& test) {
    if (anchor.size() < 4 || test.size() < 4)
        throw metric_error("bd_rate: at least 4 rate points per curve required");
    auto minmax = [](const std::vector<RdPoint>& v) {
        double lo = v[0].psnr_db, hi = v[0].psnr_db;
        for (const auto& p : v) {
            lo = std::min(lo, p.psnr_db);
            hi = std::max(hi, p.psnr_db);
        }
        return std::pair<double, double>{lo, hi};
    };
    const auto [alo, ahi] = minmax(anchor);
    const auto [tlo, thi] = minmax(test);
    const double lo = std::max(alo, tlo), hi = std::min(ahi, thi);
    if (!(hi > lo))
        throw metric_error("bd_rate: PSNR ranges do not overlap (anchor " + std::to_string(alo) + ".." +
                           std::to_string(ahi) + ", test " + std::to_string(tlo) + ".." +
                           std::to_string(thi) + ")");
    const double center = 0.5 * (lo + hi);
    const auto fa = bd_detail::fit_log_rate(anchor, center);
    const auto ft = bd_detail::fit_log_rate(test, center);
    const double avg = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
    return (std::pow(10.0, avg) - 1.0) * 100.0;
}

}  // namespace ovc

#endif
