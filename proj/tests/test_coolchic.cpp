#include <catch2/catch_amalgamated.hpp>

#include "ovc/decoder.hpp"
#include "ovc/param_codec.hpp"
#include "ovc/video_ops.hpp"
#include "support/test_util.hpp"

using namespace ovc;
using ovc::test::random_vec;

namespace {

// Independent double-precision transposed-convolution oracle (stride 2,
// center crop to 2h x 2w), used to cross-check the upsampling chain.
std::vector<double> tconv_oracle(const std::vector<double>& x, int h, int w,
                                 const std::vector<float>& K) {
    const int rh = 2 * h + 6, rw = 2 * w + 6;
    std::vector<double> raw(static_cast<size_t>(rh) * rw, 0.0);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int ky = 0; ky < 8; ++ky)
                for (int kx = 0; kx < 8; ++kx)
                    raw[static_cast<size_t>(2 * i + ky) * rw + 2 * j + kx] +=
                        x[static_cast<size_t>(i) * w + j] * K[ky * 8 + kx];
    std::vector<double> out(static_cast<size_t>(2 * h) * 2 * w);
    for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx)
            out[static_cast<size_t>(y) * 2 * w + xx] = raw[static_cast<size_t>(y + 3) * rw + xx + 3];
    return out;
}

}  // namespace

TEST_CASE("arm context: no causal neighbors at the origin") {
    std::vector<float> grid(16, 7.f);
    float ctx[24];
    arm_context(grid.data(), 4, 4, 0, 0, 8, ctx);
    for (int k = 0; k < 8; ++k) CHECK(ctx[k] == 0.f);
    arm_context(grid.data(), 4, 4, 0, 0, 24, ctx);
    for (int k = 0; k < 24; ++k) CHECK(ctx[k] == 0.f);
}

TEST_CASE("arm context: constant grid interior") {
    std::vector<float> grid(144, 3.5f);
    float ctx[24];
    arm_context(grid.data(), 12, 12, 6, 6, 24, ctx);
    for (int k = 0; k < 24; ++k) CHECK(ctx[k] == 3.5f);
}

TEST_CASE("arm context: documented neighbor order on a 4x4 grid") {
    // Grid values are v(y,x) = 10*y + x.
    std::vector<float> grid(16);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) grid[y * 4 + x] = static_cast<float>(10 * y + x);
    float ctx[8];
    arm_context(grid.data(), 4, 4, 1, 1, 8, ctx);
    // Offsets (dy,dx): (-3,0) (-2,0) (-1,-1) (-1,0) (-1,1) (0,-3) (0,-2) (0,-1)
    const float expect[8] = {0.f, 0.f, 0.f, 1.f, 2.f, 0.f, 0.f, 10.f};
    for (int k = 0; k < 8; ++k) CHECK(ctx[k] == expect[k]);
}

TEST_CASE("arm prediction is strictly causal") {
    Rng rng(5);
    CoolChicDecoder dec = CoolChicDecoder::make(DecoderKind::Residue, 64, 64, rng);
    // Operate on level 3 (8x8 grid), exhaustively.
    const int l = 3;
    auto [eh, ew] = dec.level_extent(l);
    REQUIRE(eh == 8);
    auto arm_out = [&](const std::vector<float>& grid) {
        Tape t;
        Binder bind{t, false};
        ArmVars av = bind_arm(bind, dec.arm);
        Var g = t.constant(grid, Shape{1, eh, ew});
        Var ctx = gather_rows(t, g, dec.ctx_indices(l), dec.arm.width);
        return arm_forward(t, av, ctx, dec.arm.hidden)->val;
    };
    std::vector<float> base(static_cast<size_t>(eh) * ew);
    for (auto& v : base) v = std::round(rng.uniform(-4.f, 4.f));
    const auto out0 = arm_out(base);
    for (int p = 0; p < eh * ew; ++p) {
        auto flipped = base;
        flipped[p] += 2.f;
        const auto out1 = arm_out(flipped);
        for (int q = 0; q < eh * ew; ++q) {
            const bool same = out0[2 * q] == out1[2 * q] && out0[2 * q + 1] == out1[2 * q + 1];
            if (q <= p) CHECK(same);  // strictly later positions only may change
        }
    }
}

TEST_CASE("upsample chain: constant pyramid with the bilinear kernel stays constant") {
    Rng rng(2);
    CoolChicDecoder dec = CoolChicDecoder::make(DecoderKind::Intra, 64, 64, rng);
    for (int l = 0; l < kLevels; ++l)
        for (auto& v : dec.latents[l].v) v = 2.f;
    Tape t;
    Binder bind{t, false};
    DecoderForward f = decoder_forward(t, bind, dec, QuantizerMode::hard(), rng, false);
    REQUIRE(f.output->shape.c == 3);
    // Check the stacked dense channels through the synthesis input is not
    // directly visible; instead re-run the chain on one level by hand.
    Var lat = t.constant(std::vector<float>(16 * 16, 2.f), Shape{1, 16, 16});
    Var K = t.constant(dec.ups.kernel.v, Shape{1, 8, 8});
    Var b = t.constant(dec.ups.bias.v, flat(1));
    Var up1 = tconv2d_stride2(t, lat, K, b, 32, 32);
    Var up2 = tconv2d_stride2(t, up1, K, b, 64, 64);
    for (int y = 8; y < 56; ++y)
        for (int x = 8; x < 56; ++x) CHECK(up2->val[y * 64 + x] == Catch::Approx(2.f).epsilon(1e-5));
}

TEST_CASE("upsample chain shape contract and impulse response") {
    Rng rng(4);
    for (int hw : {64, 128}) {
        CoolChicDecoder dec = CoolChicDecoder::make(DecoderKind::Intra, hw, hw, rng);
        Tape t;
        Binder bind{t, false};
        DecoderForward f = decoder_forward(t, bind, dec, QuantizerMode::hard(), rng, false);
        CHECK(f.output->shape.h == hw);
        CHECK(f.output->shape.w == hw);
        CHECK(f.latents_q.size() == 7);
    }

    // Level-2 impulse, upsampled twice, equals the composed double-precision
    // oracle response.
    Rng rng2(7);
    auto K = random_vec(64, rng2, -0.5f, 0.5f);
    std::vector<double> x0(16 * 16, 0.0);
    x0[5 * 16 + 6] = 1.0;
    auto o1 = tconv_oracle(x0, 16, 16, K);
    auto o2 = tconv_oracle(o1, 32, 32, K);

    Tape t;
    std::vector<float> x0f(x0.begin(), x0.end());
    Var lat = t.constant(x0f, Shape{1, 16, 16});
    Var Kv = t.constant(K, Shape{1, 8, 8});
    Var zb = t.constant({0.f}, flat(1));
    Var u1 = tconv2d_stride2(t, lat, Kv, zb, 32, 32);
    Var u2 = tconv2d_stride2(t, u1, Kv, zb, 64, 64);
    double max_err = 0;
    for (size_t i = 0; i < u2->val.size(); ++i)
        max_err = std::max(max_err, std::abs(u2->val[i] - o2[i]));
    CHECK(max_err < 1e-4);
}

TEST_CASE("synthesis output channels per decoder kind") {
    Rng rng(11);
    CHECK(decoder_arch(DecoderKind::Intra).out_channels == 3);
    CHECK(decoder_arch(DecoderKind::Residue).out_channels == 4);
    CHECK(decoder_arch(DecoderKind::MotionP).out_channels == 2);
    CHECK(decoder_arch(DecoderKind::MotionB).out_channels == 5);
    for (DecoderKind k : {DecoderKind::Intra, DecoderKind::Residue, DecoderKind::MotionP, DecoderKind::MotionB}) {
        CoolChicDecoder dec = CoolChicDecoder::make(k, 64, 64, rng);
        Tape t;
        Binder bind{t, false};
        DecoderForward f = decoder_forward(t, bind, dec, QuantizerMode::hard(), rng, false);
        CHECK(f.output->shape.c == decoder_arch(k).out_channels);
        CHECK(f.output->shape.h == 64);
    }
}

TEST_CASE("zero weights give zero synthesis output") {
    Rng rng(13);
    CoolChicDecoder dec = CoolChicDecoder::make(DecoderKind::Intra, 64, 64, rng);
    for (auto& W : dec.syn.W) std::fill(W.v.begin(), W.v.end(), 0.f);
    for (auto& b : dec.syn.b) std::fill(b.v.begin(), b.v.end(), 0.f);
    for (int l = 0; l < kLevels; ++l)
        for (auto& v : dec.latents[l].v) v = rng.uniform(-3.f, 3.f);
    Tape t;
    Binder bind{t, false};
    DecoderForward f = decoder_forward(t, bind, dec, QuantizerMode::hard(), rng, false);
    for (float v : f.output->val) CHECK(v == 0.f);
}

TEST_CASE("full intra synthesis stack passes the gradient check") {
    // Finite differences are only valid on a smooth region, so the biases
    // are calibrated to keep every pre-activation clear of the ReLU kink;
    // the probes below shift pre-activations by well under the margin.
    Rng rng(17);
    const DecoderArch arch = decoder_arch(DecoderKind::Intra);
    std::vector<std::vector<float>> inputs{random_vec(7 * 8 * 8, rng, -0.5f, 0.5f)};
    std::vector<Shape> shapes{Shape{7, 8, 8}};
    for (const auto& l : arch.syn) {
        inputs.push_back(random_vec(static_cast<size_t>(l.c_out) * l.c_in * l.k * l.k, rng, -0.3f, 0.3f));
        shapes.push_back(flat(inputs.back().size()));
        inputs.push_back(random_vec(l.c_out, rng, -0.1f, 0.1f));
        shapes.push_back(flat(l.c_out));
    }
    auto forward = [&](bool calibrate) {
        Tape t;
        Var x = t.constant(inputs[0], shapes[0]);
        int vi = 1;
        for (size_t i = 0; i < arch.syn.size(); ++i) {
            const auto& l = arch.syn[i];
            Var W = t.constant(inputs[vi], shapes[vi]);
            Var b = t.constant(inputs[vi + 1], shapes[vi + 1]);
            Var y = conv2d(t, x, W, b, l.c_out, l.k);
            if (l.skip()) y = add(t, y, x);
            if (i + 1 < arch.syn.size()) {
                if (calibrate) {
                    // Per-channel shift pushing the minimum pre-activation to 0.25.
                    const size_t plane = static_cast<size_t>(y->shape.h) * y->shape.w;
                    for (int c = 0; c < y->shape.c; ++c) {
                        float mn = 1e9f;
                        for (size_t p = 0; p < plane; ++p) mn = std::min(mn, y->val[c * plane + p]);
                        if (mn < 0.25f) inputs[vi + 1][c] += 0.25f - mn;
                    }
                }
                y = relu(t, y);
            }
            x = y;
            vi += 2;
        }
        return x->val;
    };
    forward(true);
    forward(true);  // second pass handles shifts feeding later layers
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
        static std::vector<float> zeros(8 * 8 * 8, 0.f);
        return sse_vs(t, x, zeros.data());
    };
    const double err = ovc::test::max_fd_rel_err(build, inputs, shapes, 6e-3f, 4);
    CHECK(err < 1e-3);
}

TEST_CASE("decoder_forward: zero latents, rate near the unit-scale baseline") {
    Rng rng(23);
    CoolChicDecoder dec = CoolChicDecoder::make(DecoderKind::Residue, 64, 64, rng);
    Tape t;
    Binder bind{t, false};
    DecoderForward f = decoder_forward(t, bind, dec, QuantizerMode::hard(), rng, true);
    // Zero context -> (mu, log_scale) = biases = 0 -> b = 1; every latent is
    // 0, so each costs -log2(1 - e^-0.5).
    double n_latents = 0;
    for (int l = 0; l < kLevels; ++l) n_latents += static_cast<double>(dec.latents[l].v.size());
    const double per = -std::log2(1.0 - std::exp(-0.5));
    CHECK(f.rate_bits->val[0] == Catch::Approx(n_latents * per).epsilon(1e-4));
    for (float v : f.output->val) CHECK(v == 0.f);  // zero biases, zero dense
}

TEST_CASE("decoder_forward is deterministic") {
    Rng rng(29);
    CoolChicDecoder dec = CoolChicDecoder::make(DecoderKind::Intra, 64, 64, rng);
    for (int l = 0; l < kLevels; ++l)
        for (auto& v : dec.latents[l].v) v = rng.uniform(-2.f, 2.f);
    auto run = [&](uint64_t seed) {
        Rng r(seed);
        Tape t;
        Binder bind{t, false};
        DecoderForward f = decoder_forward(t, bind, dec, QuantizerMode::noise(0.7f), r, true);
        auto v = f.output->val;
        v.push_back(f.rate_bits->val[0]);
        return v;
    };
    CHECK(run(99) == run(99));
    CHECK(run(99) != run(100));
}

TEST_CASE("estimated rate matches the real coded length per pyramid") {
    // An ARM whose predictions actually cover the latents (as a trained one
    // does): zero weights, bias (mu, log_scale) = (0, 0.4). A random
    // untrained ARM mismatches its own latents so badly that most symbols
    // hit the probability floor, which is not the operating regime the
    // estimate-vs-coder tie is about.
    Rng rng(31);
    for (DecoderKind kind : {DecoderKind::Intra, DecoderKind::Residue, DecoderKind::MotionB}) {
        CoolChicDecoder dec = CoolChicDecoder::make(kind, 128, 128, rng);
        for (auto& W : dec.arm.W) std::fill(W.v.begin(), W.v.end(), 0.f);
        for (auto& b : dec.arm.b) std::fill(b.v.begin(), b.v.end(), 0.f);
        dec.arm.b.back().v[1] = 0.4f;
        // Structured latents: smooth ramp + noise, rounded.
        for (int l = 0; l < kLevels; ++l) {
            auto [eh, ew] = dec.level_extent(l);
            for (int y = 0; y < eh; ++y)
                for (int x = 0; x < ew; ++x)
                    dec.latents[l].v[static_cast<size_t>(y) * ew + x] =
                        std::round(2.f * std::sin(0.3f * x + 0.2f * y) + rng.uniform(-1.f, 1.f));
        }
        Tape t;
        Binder bind{t, false};
        DecoderForward f = decoder_forward(t, bind, dec, QuantizerMode::hard(), rng, true);
        const double est = f.rate_bits->val[0];
        auto grids = integerize_latents(dec);
        auto payloads = encode_latent_payloads(dec, grids);
        double actual = 0;
        for (const auto& p : payloads) actual += static_cast<double>(p.size()) * 8.0;
        // Slack: 0.1% plus one coder flush per level payload.
        CHECK(std::abs(actual - est) <= 0.001 * est + 64.0 * kLevels);
        // And the payloads decode back bit-exactly.
        std::vector<std::pair<const uint8_t*, size_t>> spans;
        for (const auto& p : payloads) spans.emplace_back(p.data(), p.size());
        const auto back = decode_latent_payloads(dec, spans);
        CHECK(back == grids);
    }
}

TEST_CASE("parameter quantization: zero weights stay exactly zero") {
    Rng rng(37);
    CoolChicDecoder dec = CoolChicDecoder::make(DecoderKind::Residue, 64, 64, rng);
    for (Param* p : dec.net_params()) std::fill(p->v.begin(), p->v.end(), 0.f);
    dec.ups.init();  // keep a sane upsampler
    ParamCodecResult r = quantize_decoder_params(dec, 0.01);
    for (size_t ti = 0; ti < r.tensors.size(); ++ti) {
        bool ups_kernel = false;
        std::vector<Param*> ps = dec.net_params();
        // All tensors except the upsampler kernel were zeroed.
        if (ps[ti] == &dec.ups.kernel) ups_kernel = true;
        if (ups_kernel) continue;
        for (int32_t q : r.tensors[ti].q) CHECK(q == 0);
        for (float v : ps[ti]->v) CHECK(v == 0.f);
    }
    // Degenerate payload is tiny.
    CHECK(r.payload.size() < 64);
}

TEST_CASE("parameter quantization round trip and idempotence") {
    Rng rng(41);
    CoolChicDecoder dec = CoolChicDecoder::make(DecoderKind::MotionB, 64, 64, rng);
    for (int l = 0; l < kLevels; ++l)
        for (auto& v : dec.latents[l].v) v = std::round(rng.uniform(-2.f, 2.f));
    ParamCodecResult r = quantize_decoder_params(dec, 0.001);
    // Quantize -> dequantize -> quantize is a fixed point.
    std::vector<std::vector<float>> after1;
    for (Param* p : dec.net_params()) after1.push_back(p->v);
    ParamCodecResult r2 = quantize_decoder_params(dec, 0.001);
    std::vector<std::vector<float>> after2;
    for (Param* p : dec.net_params()) after2.push_back(p->v);
    CHECK(after1 == after2);

    // Serialize and decode into a fresh decoder: bitwise identical tensors.
    Rng rng2(0);
    CoolChicDecoder fresh = CoolChicDecoder::make(DecoderKind::MotionB, 64, 64, rng2);
    decode_decoder_params(fresh, r.tensors, r.payload.data(), r.payload.size());
    auto a = dec.net_params();
    auto b = fresh.net_params();
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i]->v == b[i]->v);
}

TEST_CASE("fine steps hold the dequantized output above 55 dB") {
    Rng rng(43);
    CoolChicDecoder dec = CoolChicDecoder::make(DecoderKind::Intra, 64, 64, rng);
    for (int l = 0; l < kLevels; ++l)
        for (auto& v : dec.latents[l].v) v = std::round(rng.uniform(-3.f, 3.f));
    Rng nil(0);
    const auto ref = ovc::detail::output_values_hard(dec, nil);
    // Quantize with a tiny lambda so the search favors fidelity.
    quantize_decoder_params(dec, 1e-7);
    const auto quant = ovc::detail::output_values_hard(dec, nil);
    const double mse = ovc::detail::output_mse(quant, ref);
    const double psnr = 10.0 * std::log10(1.0 / std::max(mse, 1e-12));
    CHECK(psnr > 55.0);
}
