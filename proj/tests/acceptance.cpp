// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Budgets are sized for a small-core CPU box; every check is a
// property or directional comparison, not an absolute-quality bar.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "ovc/ovc.hpp"
#include "support/test_util.hpp"

using namespace ovc;
using ovc::test::max_fd_rel_err;
using ovc::test::random_vec;

namespace {

int g_failures = 0;

void report(int idx, const char* name, bool pass, const std::string& detail, double secs) {
    std::printf("[%s] criterion %2d: %-28s %s (%.1fs)\n", pass ? "PASS" : "FAIL", idx, name,
                detail.c_str(), secs);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

template <typename F>
void run(int idx, const char* name, F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
        detail = fn(pass);
    } catch (const std::exception& e) {
        pass = false;
        detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(idx, name, pass, detail, secs);
}

Var loss_sq(Tape& t, Var v) {
    static std::vector<float> zeros(1 << 16, 0.f);
    return sse_vs(t, v, zeros.data());
}

// ---- criterion 1: gradient suite --------------------------------------

double fd_linear(Rng& rng) {
    auto build = [](Tape& t, const std::vector<Var>& in) {
        return loss_sq(t, linear(t, in[0], in[1], in[2]));
    };
    return max_fd_rel_err(build,
                          {random_vec(3 * 8, rng), random_vec(64, rng, -0.5f, 0.5f), random_vec(8, rng)},
                          {mat(3, 8), mat(8, 8), flat(8)}, 8e-3f, 4);
}

double fd_conv(Rng& rng) {
    auto build = [](Tape& t, const std::vector<Var>& in) {
        return loss_sq(t, conv2d(t, in[0], in[1], in[2], 4, 3));
    };
    return max_fd_rel_err(build,
                          {random_vec(4 * 6 * 6, rng), random_vec(4 * 4 * 9, rng, -0.3f, 0.3f),
                           random_vec(4, rng, -0.2f, 0.2f)},
                          {Shape{4, 6, 6}, flat(144), flat(4)}, 8e-3f, 4);
}

double fd_tconv(Rng& rng) {
    auto build = [](Tape& t, const std::vector<Var>& in) {
        return loss_sq(t, tconv2d_stride2(t, in[0], in[1], in[2], 8, 8));
    };
    return max_fd_rel_err(build,
                          {random_vec(16, rng), random_vec(64, rng, -0.4f, 0.4f), random_vec(1, rng)},
                          {Shape{1, 4, 4}, Shape{1, 8, 8}, flat(1)}, 8e-3f, 4);
}

double fd_warp(Rng& rng) {
    std::vector<float> flv(2 * 8 * 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            const float sx = static_cast<float>(rng.next_u64() % 7) + 0.2f + 0.6f * static_cast<float>(rng.uniform());
            const float sy = static_cast<float>(rng.next_u64() % 7) + 0.2f + 0.6f * static_cast<float>(rng.uniform());
            flv[y * 8 + x] = sx - x;
            flv[64 + y * 8 + x] = sy - y;
        }
    auto build = [](Tape& t, const std::vector<Var>& in) {
        return loss_sq(t, warp(t, in[0], in[1]));
    };
    return max_fd_rel_err(build, {random_vec(3 * 8 * 8, rng, 0.f, 1.f), flv},
                          {Shape{3, 8, 8}, Shape{2, 8, 8}}, 2e-3f, 4);
}

double fd_blend_reconstruct(Rng& rng) {
    auto build = [](Tape& t, const std::vector<Var>& in) {
        Var pred = blend(t, in[0], in[1], in[2]);
        return loss_sq(t, reconstruct(t, pred, in[3], in[4]));
    };
    return max_fd_rel_err(build,
                          {random_vec(3 * 64, rng, 0.f, 1.f), random_vec(3 * 64, rng, 0.f, 1.f),
                           random_vec(64, rng, 0.1f, 0.9f), random_vec(64, rng, 0.1f, 0.9f),
                           random_vec(3 * 64, rng, -0.3f, 0.3f)},
                          {Shape{3, 8, 8}, Shape{3, 8, 8}, Shape{1, 8, 8}, Shape{1, 8, 8}, Shape{3, 8, 8}},
                          2e-3f, 4);
}

double fd_yuv(Rng& rng) {
    auto build = [](Tape& t, const std::vector<Var>& in) {
        Yuv420Vars p = to_yuv420(t, in[0]);
        Var s = wsum(t, {{loss_sq(t, p.y), 1.f}, {loss_sq(t, p.u), 1.f}, {loss_sq(t, p.v), 1.f}});
        return s;
    };
    return max_fd_rel_err(build, {random_vec(3 * 8 * 8, rng, 0.f, 1.f)}, {Shape{3, 8, 8}}, 4e-3f, 4);
}

double fd_softround(Rng& rng) {
    auto build = [](Tape& t, const std::vector<Var>& in) {
        return loss_sq(t, quant_softround(t, in[0], 0.3f));
    };
    return max_fd_rel_err(build, {random_vec(32, rng, -3.f, 3.f)}, {flat(32)}, 1e-3f, 4);
}

double fd_rate(Rng& rng) {
    auto build = [](Tape& t, const std::vector<Var>& in) {
        return laplace_rate_sum(t, in[0], in[1]);
    };
    return max_fd_rel_err(build, {random_vec(24, rng, -2.f, 2.f), random_vec(48, rng, -1.2f, 1.2f)},
                          {flat(24), mat(24, 2)}, 2e-3f, 4);
}

// Full synthesis stack of one decoder kind, biases calibrated clear of the
// ReLU kinks (finite differences are invalid across them).
double fd_stack(DecoderKind kind, Rng& rng) {
    const DecoderArch arch = decoder_arch(kind);
    std::vector<std::vector<float>> inputs{random_vec(7 * 8 * 8, rng, -0.5f, 0.5f)};
    std::vector<Shape> shapes{Shape{7, 8, 8}};
    for (const auto& l : arch.syn) {
        inputs.push_back(random_vec(static_cast<size_t>(l.c_out) * l.c_in * l.k * l.k, rng, -0.3f, 0.3f));
        shapes.push_back(flat(inputs.back().size()));
        inputs.push_back(random_vec(l.c_out, rng, -0.1f, 0.1f));
        shapes.push_back(flat(l.c_out));
    }
    auto calibrate = [&] {
        Tape t;
        Var x = t.constant(inputs[0], shapes[0]);
        int vi = 1;
        for (size_t i = 0; i < arch.syn.size(); ++i) {
            const auto& l = arch.syn[i];
            Var y = conv2d(t, x, t.constant(inputs[vi], shapes[vi]),
                           t.constant(inputs[vi + 1], shapes[vi + 1]), l.c_out, l.k);
            if (l.skip()) y = add(t, y, x);
            if (i + 1 < arch.syn.size()) {
                const size_t plane = static_cast<size_t>(y->shape.h) * y->shape.w;
                for (int c = 0; c < y->shape.c; ++c) {
                    float mn = 1e9f;
                    for (size_t p = 0; p < plane; ++p) mn = std::min(mn, y->val[c * plane + p]);
                    if (mn < 0.25f) inputs[vi + 1][c] += 0.25f - mn;
                }
                y = relu(t, y);
            }
            x = y;
            vi += 2;
        }
    };
    calibrate();
    calibrate();
    auto build = [&](Tape& t, const std::vector<Var>& in) {
        Var x = in[0];
        int vi = 1;
        for (size_t i = 0; i < arch.syn.size(); ++i) {
            const auto& l = arch.syn[i];
            Var y = conv2d(t, x, in[vi], in[vi + 1], l.c_out, l.k);
            if (l.skip()) y = add(t, y, x);
            if (i + 1 < arch.syn.size()) y = relu(t, y);
            x = y;
            vi += 2;
        }
        return loss_sq(t, x);
    };
    return max_fd_rel_err(build, inputs, shapes, 6e-3f, 4);
}

// ---- shared helpers ----------------------------------------------------

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");

    run(1, "gradient suite", [](bool& pass) {
        Rng rng(101);
        double worst = 0.0;
        for (double e : {fd_linear(rng), fd_conv(rng), fd_tconv(rng), fd_warp(rng),
                         fd_blend_reconstruct(rng), fd_yuv(rng), fd_softround(rng), fd_rate(rng),
                         fd_stack(DecoderKind::Intra, rng), fd_stack(DecoderKind::Residue, rng),
                         fd_stack(DecoderKind::MotionB, rng)})
            worst = std::max(worst, e);
        pass = worst < 1e-3;
        return fmt("max rel err %.2e (< 1e-3)", worst);
    });

    run(2, "entropy exactness", [](bool& pass) {
        Rng rng(202);
        std::vector<int32_t> values;
        std::vector<float> mus, lss;
        for (int i = 0; i < 10000; ++i) {
            const float mu = rng.uniform(-40.f, 40.f);
            const float ls = rng.uniform(-6.f, 4.f);
            const double b = std::exp(ls);
            const double u = rng.uniform() - 0.5;
            double v = mu - b * (u < 0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::abs(u));
            values.push_back(static_cast<int32_t>(
                std::min<double>(kAlphabetMax, std::max<double>(kAlphabetMin, std::round(v)))));
            mus.push_back(mu);
            lss.push_back(ls);
        }
        double est = 0.0;
        std::vector<uint8_t> buf;
        RangeEncoder enc(buf);
        for (size_t i = 0; i < values.size(); ++i) {
            est += rate_of_latent(values[i], mus[i], lss[i]);
            encode_symbol(enc, values[i], mus[i], lss[i]);
        }
        enc.finish();
        RangeDecoder dec(buf.data(), buf.size());
        bool exact = true;
        for (size_t i = 0; i < values.size(); ++i)
            if (decode_symbol(dec, mus[i], lss[i]) != values[i]) exact = false;
        const double actual = static_cast<double>(buf.size()) * 8.0;
        const bool tight = std::abs(actual - est) <= 0.001 * est + 64.0;
        pass = exact && tight;
        return fmt("10^4 symbols round-trip %s; |coded-est| %.0f <= %.0f bits", exact ? "exactly" : "WRONG",
                   std::abs(actual - est), 0.001 * est + 64.0);
    });

    run(3, "codec round trip", [](bool& pass) {
        auto video = ovc::test::synthetic_video(64, 64, 9, 1.5f, -1.f);
        EncoderConfig cfg;
        cfg.lambda = 0.0025;
        cfg.gop_id = kGopRandomAccess;
        cfg.iters_pretrain = 150;
        cfg.iters_frame = 300;
        cfg.iters_joint = 600;
        cfg.seed = 11;
        const EncodeResult res = encode_video(video, cfg);
        const DecodeResult dec = decode_gop(res.bitstream.data(), res.bitstream.size());
        bool exact = dec.frames.size() == res.recon.size();
        for (size_t i = 0; exact && i < dec.frames.size(); ++i)
            exact = dec.frames[i].y == res.recon[i].y && dec.frames[i].u == res.recon[i].u &&
                    dec.frames[i].v == res.recon[i].v;
        const double file_bpp =
            static_cast<double>(res.bitstream.size()) * 8.0 / (64.0 * 64.0 * 9.0);
        const bool bpp_exact = res.report.bpp == file_bpp &&
                               res.report.total_bits == static_cast<int64_t>(res.bitstream.size()) * 8;
        pass = exact && bpp_exact;
        return fmt("decode==recon %s; bpp %.4f reported==file %s; psnr %.2f dB", exact ? "exact" : "MISMATCH",
                   file_bpp, bpp_exact ? "exact" : "MISMATCH", res.report.psnr_db);
    });

    run(4, "pipeline reductions", [](bool& pass) {
        Rng rng(404);
        Tape t;
        auto refv = random_vec(3 * 16 * 16, rng, 0.f, 1.f);
        auto ref2v = random_vec(3 * 16 * 16, rng, 0.f, 1.f);
        Var ref = t.constant(refv, Shape{3, 16, 16});
        Var ref2 = t.constant(ref2v, Shape{3, 16, 16});
        // Zero-flow warp is the identity, bit-exactly.
        Var zf = t.constant(std::vector<float>(2 * 256, 0.f), Shape{2, 16, 16});
        Var w0 = warp(t, ref, zf);
        bool ok = w0->val == refv;
        // beta == 1 reduces the blend to the first warp.
        Var ones = t.constant(std::vector<float>(256, 1.f), Shape{1, 16, 16});
        Var b1 = blend(t, w0, warp(t, ref2, zf), ones);
        ok = ok && b1->val == refv;
        // alpha == 0 reduces the reconstruction to the residue.
        auto resv = random_vec(3 * 256, rng, -0.4f, 0.4f);
        Var zeros = t.constant(std::vector<float>(256, 0.f), Shape{1, 16, 16});
        Var rr = reconstruct(t, b1, zeros, t.constant(resv, Shape{3, 16, 16}));
        ok = ok && rr->val == resv;
        pass = ok;
        return std::string(ok ? "warp/blend/reconstruct reductions exact" : "reduction MISMATCH");
    });

    run(5, "MAC audit", [](bool& pass) {
        const MacAudit a = mac_audit(256, 256, GopStructure::random_access(9));
        auto within = [](double v, double ref) { return std::abs(v - ref) <= 0.15 * ref; };
        const bool kinds = within(a.intra, 2292) && within(a.residue, 774) &&
                           within(a.motion_p, 257) && within(a.motion_b, 473);
        const double delta = a.motion_b - a.motion_p;
        const bool delta_exact = delta == 216.0;
        const double paper_avg = (2292.0 + 774.0 + 257.0 + 7.0 * (774.0 + 473.0)) / 9.0;
        const bool avg_ok = std::abs(paper_avg - 12052.0 / 9.0) < 1e-9 && std::abs(paper_avg - 1339.0) < 1.0 &&
                            std::abs(paper_avg - 1300.0) < 55.0;
        pass = kinds && delta_exact && avg_ok;
        return fmt("kinds %.0f/%.0f/%.0f/%.0f vs 2292/774/257/473 (+-15%%: %s); B-P delta %.0f; avg %.0f",
                   a.intra, a.residue, a.motion_p, a.motion_b, kinds ? "yes" : "NO", delta, paper_avg);
    });

    run(6, "motion pre-training efficacy", [](bool& pass) {
        auto video = ovc::test::synthetic_video(128, 128, 5, 4.f, 0.f);
        int wins = 0;
        std::string detail;
        for (double lambda : {0.05, 0.01, 0.0025}) {
            EncoderConfig with;
            with.lambda = lambda;
            with.gop_id = kGopRandomAccess;
            with.iters_pretrain = 200;
            with.iters_frame = 200;
            with.iters_joint = 400;
            with.seed = 21;
            EncoderConfig without = with;
            without.pretrain = false;
            without.iters_frame = with.iters_frame + with.iters_pretrain;  // matched per-frame budget
            const EncodeResult a = encode_video(video, with);
            const EncodeResult b = encode_video(video, without);
            const bool win = a.report.final_rd_cost < b.report.final_rd_cost;
            wins += win;
            detail += fmt("l=%.4f: %.5f vs %.5f %s  ", lambda, a.report.final_rd_cost,
                          b.report.final_rd_cost, win ? "win" : "loss");
        }
        pass = wins >= 2;
        return detail + fmt("(%d/3 wins)", wins);
    });

    run(7, "joint optimization efficacy", [](bool& pass) {
        auto video = ovc::test::synthetic_video(64, 64, 9, 0.f, 0.f);  // static content
        EncoderConfig base;
        base.lambda = 0.0025;
        base.gop_id = kGopRandomAccess;
        base.iters_pretrain = 100;
        base.iters_frame = 300;
        base.iters_joint = 0;
        base.joint = false;
        base.seed = 33;
        EncoderConfig joint = base;
        joint.joint = true;
        joint.iters_joint = 600;
        const EncodeResult a = encode_video(video, base);
        const EncodeResult b = encode_video(video, joint);
        auto ref_share = [](const EncodeReport& r) {
            double refs = 0, total = 0;
            for (const auto& f : r.frames) {
                total += f.estimated_latent_bits;
                if (f.display_idx == 0 || f.display_idx == 4 || f.display_idx == 8)
                    refs += f.estimated_latent_bits;
            }
            return refs / std::max(total, 1e-9);
        };
        const double sa = ref_share(a.report), sb = ref_share(b.report);
        const bool share_up = sb > sa;
        const bool cost_down = b.report.final_rd_cost < a.report.final_rd_cost;
        pass = share_up && cost_down;
        return fmt("ref share %.3f -> %.3f (%s); cost %.5f -> %.5f (%s)", sa, sb,
                   share_up ? "up" : "NOT up", a.report.final_rd_cost, b.report.final_rd_cost,
                   cost_down ? "down" : "NOT down");
    });

    run(8, "lambda monotonicity", [](bool& pass) {
        auto video = ovc::test::synthetic_video(64, 64, 3, 1.f, 0.5f);
        std::vector<double> bpps, psnrs;
        std::string detail;
        for (double lambda : canonical_lambdas()) {  // 0.05 .. 0.0005, descending
            EncoderConfig cfg;
            cfg.lambda = lambda;
            cfg.gop_id = kGopRandomAccess;
            cfg.iters_pretrain = 100;
            cfg.iters_frame = 400;
            cfg.iters_joint = 400;
            cfg.seed = 5;
            const EncodeResult r = encode_video(video, cfg);
            bpps.push_back(r.report.bpp);
            psnrs.push_back(r.report.psnr_db);
            detail += fmt("(%.4f: %.3fbpp %.1fdB) ", lambda, r.report.bpp, r.report.psnr_db);
        }
        // Descending lambda: bpp and psnr must both be non-decreasing down
        // the list (equivalently non-increasing in lambda), with one small
        // inversion tolerated.
        int bpp_inv = 0, psnr_inv = 0;
        double worst_bpp_inv = 0, worst_psnr_inv = 0;
        for (size_t i = 1; i < bpps.size(); ++i) {
            if (bpps[i] < bpps[i - 1]) {
                ++bpp_inv;
                worst_bpp_inv = std::max(worst_bpp_inv, bpps[i - 1] - bpps[i]);
            }
            if (psnrs[i] < psnrs[i - 1]) {
                ++psnr_inv;
                worst_psnr_inv = std::max(worst_psnr_inv, psnrs[i - 1] - psnrs[i]);
            }
        }
        pass = (bpp_inv == 0 || (bpp_inv == 1 && worst_bpp_inv <= 0.002)) &&
               (psnr_inv == 0 || (psnr_inv == 1 && worst_psnr_inv <= 0.1));
        return detail + fmt("inversions bpp=%d(%.4f) psnr=%d(%.2f)", bpp_inv, worst_bpp_inv, psnr_inv,
                            worst_psnr_inv);
    });

    run(9, "BD-rate tool", [](bool& pass) {
        const std::vector<RdPoint> anchor = {{0.02, 30.0}, {0.05, 33.5}, {0.11, 36.8}, {0.24, 40.0}, {0.50, 43.1}};
        const double ident = bd_rate(anchor, anchor);
        auto doubled = anchor;
        for (auto& p : doubled) p.bpp *= 2;
        const double dbl = bd_rate(anchor, doubled);
        // Independent trapezoidal integration oracle.
        auto test = anchor;
        for (auto& p : test) {
            p.bpp *= 0.85;
            p.psnr_db += 0.2;
        }
        const double lo = std::max(anchor.front().psnr_db, test.front().psnr_db);
        const double hi = std::min(anchor.back().psnr_db, test.back().psnr_db);
        const double center = 0.5 * (lo + hi);
        const auto fa = bd_detail::fit_log_rate(anchor, center);
        const auto ft = bd_detail::fit_log_rate(test, center);
        auto poly = [](const bd_detail::Cubic& q, double x) {
            const double z = x - q.center;
            return q.c[0] + q.c[1] * z + q.c[2] * z * z + q.c[3] * z * z * z;
        };
        double ia = 0, it = 0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            const double x0 = lo + (hi - lo) * i / n, x1 = lo + (hi - lo) * (i + 1) / n;
            ia += 0.5 * (poly(fa, x0) + poly(fa, x1)) * (x1 - x0);
            it += 0.5 * (poly(ft, x0) + poly(ft, x1)) * (x1 - x0);
        }
        const double oracle = (std::pow(10.0, (it - ia) / (hi - lo)) - 1.0) * 100.0;
        const double direct = bd_rate(anchor, test);
        pass = std::abs(ident) < 1e-9 && std::abs(dbl - 100.0) <= 0.01 &&
               std::abs(direct - oracle) <= 0.001 * std::abs(oracle) + 1e-3;
        return fmt("identity %.2e%%; doubling %.4f%%; oracle gap %.2e", ident, dbl,
                   std::abs(direct - oracle));
    });

    run(10, "determinism", [](bool& pass) {
        auto video = ovc::test::synthetic_video(64, 64, 9, 1.f, -0.5f);
        EncoderConfig cfg;
        cfg.lambda = 0.01;
        cfg.gop_id = kGopRandomAccess;
        cfg.iters_pretrain = 60;
        cfg.iters_frame = 120;
        cfg.iters_joint = 200;
        cfg.seed = 77;
        const EncodeResult a = encode_video(video, cfg);
        const EncodeResult b = encode_video(video, cfg);
        pass = a.bitstream == b.bitstream;
        return fmt("two encodes: %zu bytes, byte-identical: %s", a.bitstream.size(),
                   pass ? "yes" : "NO");
    });

    std::printf("%d criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
