#ifndef OVC_ENCODER_HPP
#define OVC_ENCODER_HPP

#include <functional>
#include <optional>
#include <set>
#include <string>

#include "ovc/bitstream.hpp"
#include "ovc/flow.hpp"
#include "ovc/video_io.hpp"

namespace ovc {

struct RateConstraint {
    double lambda = 0.01;  // video-level constraint
    double lambda_v() const { return 20.0 * lambda; }

    explicit RateConstraint(double l) : lambda(l) {
        if (!(l > 0.0)) throw config_error("lambda must be positive");
    }
};

// Quantizer and learning-rate schedule: additive noise with the amplitude
// annealed 1 -> 0.1, then softround with the temperature cosine-annealed
// 0.3 -> 0.01, then a short hard-round fine-tune. The learning rate runs a
// cosine 1e-2 -> 1e-4 within each phase and resets at phase boundaries.
struct Schedule {
    int total = 1000;
    int checkpoint_every = 100;
    float lr_start = 1e-2f, lr_end = 1e-4f;
    // Latent grids take Adam steps of ~lr per iteration regardless of
    // gradient scale, so they need a larger rate than the networks to reach
    // integer-valued magnitudes within the budget.
    float latent_lr_scale = 10.f;

    int n_noise() const { return std::max(1, static_cast<int>(total * 0.70)); }
    int n_soft() const { return std::max(1, static_cast<int>(total * 0.25)); }
    int n_hard() const { return std::max(1, total - n_noise() - n_soft()); }

    int phase_of(int it) const { return it < n_noise() ? 0 : it < n_noise() + n_soft() ? 1 : 2; }

    QuantizerMode mode_at(int it) const {
        if (it < n_noise()) {
            const int n = n_noise();
            const float f = n > 1 ? static_cast<float>(it) / (n - 1) : 0.f;
            return QuantizerMode::noise(1.f - 0.9f * f);
        }
        if (it < n_noise() + n_soft()) {
            const int i = it - n_noise(), n = n_soft();
            const float f = n > 1 ? static_cast<float>(i) / (n - 1) : 0.f;
            const float T = 0.01f + (0.3f - 0.01f) * 0.5f * (1.f + std::cos(f * static_cast<float>(M_PI)));
            return QuantizerMode::softround(T);
        }
        return QuantizerMode::hard();
    }

    float lr_at(int it) const {
        int i = it, n = n_noise();
        if (it >= n_noise() + n_soft()) {
            i = it - n_noise() - n_soft();
            n = n_hard();
        } else if (it >= n_noise()) {
            i = it - n_noise();
            n = n_soft();
        }
        const float f = n > 1 ? static_cast<float>(i) / (n - 1) : 0.f;
        return lr_end + (lr_start - lr_end) * 0.5f * (1.f + std::cos(f * static_cast<float>(M_PI)));
    }
};

enum class FlowSource { Builtin, FloDir };

struct EncoderConfig {
    double lambda = 0.01;
    int iters_pretrain = 2000;
    int iters_frame = 2000;
    int iters_joint = 10000;
    int checkpoint_every = 100;
    uint64_t seed = 0;
    uint8_t gop_id = kGopRandomAccess;
    bool pretrain = true;
    bool joint = true;
    FlowSource flow_source = FlowSource::Builtin;
    std::string flow_dir;
    std::map<int, double> lambda_t;  // optional per-frame overrides, frame-wise stage
    bool verbose = false;
};

struct FrameReport {
    int display_idx = 0;
    char kind = 'I';
    int64_t motion_latent_bits = 0;
    int64_t residue_latent_bits = 0;
    int64_t param_bits = 0;
    int64_t header_bits = 0;
    double estimated_latent_bits = 0.0;  // sum of rate_of_latent at hard round
    double psnr_db = 0.0;

    int64_t total_bits() const {
        return motion_latent_bits + residue_latent_bits + param_bits + header_bits;
    }
};

struct StageCurve {
    std::string stage;
    std::vector<std::pair<int, double>> cost;  // (iteration, true RD cost)
};

struct EncodeReport {
    int w = 0, h = 0, depth = 8, frame_count = 0;
    double lambda = 0.0, lambda_v = 0.0;
    std::vector<FrameReport> frames;  // display order
    std::vector<StageCurve> curves;
    int64_t global_header_bits = 0;
    int64_t total_bits = 0;
    double bpp = 0.0;
    double psnr_db = 0.0;       // pooled over all frames/planes
    double final_rd_cost = 0.0; // sum of per-frame MSE + lambda * latent bpp, committed state

    double frame_bpp(const FrameReport& f) const {
        return static_cast<double>(f.total_bits()) / (static_cast<double>(w) * h);
    }
};

struct EncodeResult {
    std::vector<uint8_t> bitstream;
    EncodeReport report;
    std::vector<Planes420> recon;  // display order, equals decoder output exactly
};

namespace enc_detail {

// Generic RD training loop with best-iterate checkpointing on the true
// (hard-round) cost. `build` assembles the loss for one iteration; `params`
// are the tensors the loop owns (their Adam state resets per phase).
struct LoopResult {
    double best_cost = 0.0;
    std::vector<std::pair<int, double>> curve;
};

inline LoopResult train_loop(
    const std::function<Var(Tape&, Binder&, const QuantizerMode&, Rng&)>& build,
    const std::vector<Param*>& params, const std::set<const Param*>& latents,
    const Schedule& sched, Rng& rng, const char* stage) {
    LoopResult res;
    auto snapshot = [&] {
        std::vector<std::vector<float>> s;
        s.reserve(params.size());
        for (Param* p : params) s.push_back(p->v);
        return s;
    };
    auto true_cost = [&] {
        Tape tape;
        Binder bind{tape, false};
        Rng nil(0);
        Var loss = build(tape, bind, QuantizerMode::hard(), nil);
        const double c = loss->val[0];
        if (!std::isfinite(c)) throw training_error(std::string(stage) + ": non-finite cost");
        return c;
    };
    double best = true_cost();
    res.curve.emplace_back(0, best);
    std::vector<std::vector<float>> best_params = snapshot();
    int last_phase = 0;
    for (int it = 0; it < sched.total; ++it) {
        const int phase = sched.phase_of(it);
        if (phase != last_phase) {
            for (Param* p : params) p->opt.reset();
            last_phase = phase;
        }
        Tape tape;
        Binder bind{tape, true};
        Var loss = build(tape, bind, sched.mode_at(it), rng);
        if (!std::isfinite(loss->val[0]))
            throw training_error(std::string(stage) + ": loss diverged at iteration " + std::to_string(it));
        tape.backward(loss);
        try {
            const float lr = sched.lr_at(it);
            for (auto& [p, v] : bind.bound) {
                p->opt.lr = latents.count(p) ? lr * sched.latent_lr_scale : lr;
                adam_step(p->v, v->grad, p->opt);
            }
        } catch (const training_error& e) {
            throw training_error(std::string(stage) + ": " + e.what());
        }
        if ((it + 1) % sched.checkpoint_every == 0 || it + 1 == sched.total) {
            const double c = true_cost();
            res.curve.emplace_back(it + 1, c);
            if (c < best) {
                best = c;
                best_params = snapshot();
            }
        }
    }
    for (size_t i = 0; i < params.size(); ++i) params[i]->v = best_params[i];
    res.best_cost = best;
    return res;
}

inline std::vector<Param*> trainable_of(FrameCodecs& fc, bool motion_only) {
    std::vector<Param*> ps;
    for (CoolChicDecoder* d : fc.decoders()) {
        const bool is_motion = d->kind == DecoderKind::MotionP || d->kind == DecoderKind::MotionB;
        if (motion_only && !is_motion) continue;
        for (Param* p : d->all_params()) ps.push_back(p);
    }
    return ps;
}

inline std::set<const Param*> latent_set_of(FrameCodecs& fc, bool motion_only) {
    std::set<const Param*> s;
    for (CoolChicDecoder* d : fc.decoders()) {
        const bool is_motion = d->kind == DecoderKind::MotionP || d->kind == DecoderKind::MotionB;
        if (motion_only && !is_motion) continue;
        for (Param* p : d->latent_params()) s.insert(p);
    }
    return s;
}

}  // namespace enc_detail

// Motion pre-training (frame-wise): fit the motion decoder's flows to the
// guidance flows under the motion latent rate, leaving residue/intra
// parameters untouched (they are not even part of the graph).
inline enc_detail::LoopResult pretrain_motion(FrameCodecs& fc,
                                              const std::vector<std::vector<float>>& guide_flows,
                                              double lambda_v, const Schedule& sched, Rng& rng) {
    if (!fc.motion) throw config_error("pretrain_motion: frame has no motion decoder");
    if (guide_flows.size() != fc.desc.refs.size())
        throw config_error("pretrain_motion: one guidance flow per reference required");
    CoolChicDecoder& mot = *fc.motion;
    const float inv_flow = 1.f / static_cast<float>(2 * mot.h * mot.w);
    const float inv_px = 1.f / static_cast<float>(mot.h * mot.w);
    auto build = [&](Tape& tape, Binder& bind, const QuantizerMode& mode, Rng& r) -> Var {
        DecoderForward f = decoder_forward(tape, bind, mot, mode, r, true);
        MotionFieldVars m = split_motion(tape, f.output, fc.desc.kind);
        Var d1 = sse_vs(tape, m.flow1, guide_flows[0].data());
        std::vector<std::pair<Var, float>> terms{{d1, inv_flow},
                                                 {f.rate_bits, static_cast<float>(lambda_v) * inv_px}};
        if (fc.desc.kind == FrameKind::B)
            terms.emplace_back(sse_vs(tape, m.flow2, guide_flows[1].data()), inv_flow);
        return wsum(tape, terms);
    };
    return enc_detail::train_loop(build, enc_detail::trainable_of(fc, true),
                                  enc_detail::latent_set_of(fc, true), sched, rng, "pretrain");
}

// Frame-wise RD optimization against fixed (already reconstructed)
// references: D(x_t, x_hat_t) + lambda_t * (R(motion) + R(residue)).
inline enc_detail::LoopResult encode_frame(FrameCodecs& fc, const std::vector<const std::vector<float>*>& ref_dense,
                                           const Targets420& target, double lambda_t,
                                           const Schedule& sched, Rng& rng) {
    CoolChicDecoder* any = fc.intra ? fc.intra.get() : fc.motion.get();
    const int h = any->h, w = any->w;
    const float inv_px = 1.f / static_cast<float>(h) / static_cast<float>(w);
    auto build = [&](Tape& tape, Binder& bind, const QuantizerMode& mode, Rng& r) -> Var {
        std::vector<Var> refs;
        for (const auto* d : ref_dense) refs.push_back(tape.constant(*d, Shape{3, h, w}));
        FramePipelineOut fo = run_frame_pipeline(tape, bind, fc, refs, mode, r, true);
        Var dist = frame_distortion(tape, fo.recon, target);
        return wsum(tape, {{dist, 1.f},
                           {fo.rate_motion, static_cast<float>(lambda_t) * inv_px},
                           {fo.rate_residue, static_cast<float>(lambda_t) * inv_px}});
    };
    return enc_detail::train_loop(build, enc_detail::trainable_of(fc, false),
                                  enc_detail::latent_set_of(fc, false), sched, rng, "frame");
}

// Joint refinement of all frames against the single video-level cost;
// gradients flow through the reference chain.
inline enc_detail::LoopResult joint_optimize(std::vector<FrameCodecs>& frames,
                                             const std::vector<Targets420>& targets, double lambda,
                                             const Schedule& sched, Rng& rng) {
    CoolChicDecoder* any = frames[0].intra ? frames[0].intra.get() : frames[0].motion.get();
    const int h = any->h, w = any->w;
    const float inv_px = 1.f / static_cast<float>(h) / static_cast<float>(w);
    std::vector<Param*> params;
    std::set<const Param*> latents;
    for (FrameCodecs& fc : frames) {
        for (Param* p : enc_detail::trainable_of(fc, false)) params.push_back(p);
        for (const Param* p : enc_detail::latent_set_of(fc, false)) latents.insert(p);
    }
    auto build = [&](Tape& tape, Binder& bind, const QuantizerMode& mode, Rng& r) -> Var {
        std::map<int, Var> recon;
        std::vector<std::pair<Var, float>> terms;
        for (FrameCodecs& fc : frames) {
            std::vector<Var> refs;
            for (int ridx : fc.desc.refs) refs.push_back(recon.at(ridx));
            FramePipelineOut fo = run_frame_pipeline(tape, bind, fc, refs, mode, r, true);
            recon[fc.desc.display_idx] = fo.recon;
            terms.emplace_back(frame_distortion(tape, fo.recon, targets[fc.desc.display_idx]), 1.f);
            terms.emplace_back(fo.rate_motion, static_cast<float>(lambda) * inv_px);
            terms.emplace_back(fo.rate_residue, static_cast<float>(lambda) * inv_px);
        }
        return wsum(tape, terms);
    };
    return enc_detail::train_loop(build, params, latents, sched, rng, "joint");
}

// The video-level RD cost (Eq. style: sum of per-frame MSE plus lambda times
// per-frame latent bpp) of the current state at hard rounding.
inline double video_rd_cost(std::vector<FrameCodecs>& frames, const std::vector<Targets420>& targets,
                            double lambda) {
    CoolChicDecoder* any = frames[0].intra ? frames[0].intra.get() : frames[0].motion.get();
    const int h = any->h, w = any->w;
    const float inv_px = 1.f / static_cast<float>(h) / static_cast<float>(w);
    Tape tape;
    Binder bind{tape, false};
    Rng nil(0);
    std::map<int, Var> recon;
    std::vector<std::pair<Var, float>> terms;
    for (FrameCodecs& fc : frames) {
        std::vector<Var> refs;
        for (int ridx : fc.desc.refs) refs.push_back(recon.at(ridx));
        FramePipelineOut fo = run_frame_pipeline(tape, bind, fc, refs, QuantizerMode::hard(), nil, true);
        recon[fc.desc.display_idx] = fo.recon;
        terms.emplace_back(frame_distortion(tape, fo.recon, targets[fc.desc.display_idx]), 1.f);
        terms.emplace_back(fo.rate_motion, static_cast<float>(lambda) * inv_px);
        terms.emplace_back(fo.rate_residue, static_cast<float>(lambda) * inv_px);
    }
    return wsum(tape, terms)->val[0];
}

namespace enc_detail {

inline std::vector<float> hard_recon(FrameCodecs& fc, const std::vector<const std::vector<float>*>& refs_dense,
                                     int h, int w) {
    Tape tape;
    Binder bind{tape, false};
    Rng nil(0);
    std::vector<Var> refs;
    for (const auto* d : refs_dense) refs.push_back(tape.constant(*d, Shape{3, h, w}));
    FramePipelineOut fo = run_frame_pipeline(tape, bind, fc, refs, QuantizerMode::hard(), nil, false);
    return fo.recon->val;
}

inline double pooled_psnr(const std::vector<Planes420>& ref, const std::vector<Planes420>& dec);

}  // namespace enc_detail

inline EncodeResult encode_video(const std::vector<Planes420>& display_video, const EncoderConfig& cfg) {
    if (display_video.empty()) throw config_error("empty video");
    const int dw = display_video[0].w, dh = display_video[0].h, depth = display_video[0].depth;
    if (dw % 2 || dh % 2 || dw < 32 || dh < 32)
        throw config_error("frame dimensions must be even and at least 32x32");
    for (const auto& f : display_video)
        if (f.w != dw || f.h != dh || f.depth != depth) throw config_error("frames disagree in geometry");
    // The 7-level pyramids need multiples of 64; smaller inputs are
    // reflect-padded for coding and cropped again on output.
    const int w = next_multiple_64(dw), h = next_multiple_64(dh);
    std::vector<Planes420> padded;
    const bool pad = w != dw || h != dh;
    if (pad)
        for (const auto& f : display_video) padded.push_back(reflect_pad_420(f, w, h));
    const std::vector<Planes420>& video = pad ? padded : display_video;
    const RateConstraint rc(cfg.lambda);
    const GopStructure gop = GopStructure::make(cfg.gop_id, static_cast<int>(video.size()));

    std::vector<Targets420> targets;
    for (const auto& f : video) targets.push_back(Targets420::of(f));

    Rng master(cfg.seed);
    EncodeReport rep;
    rep.w = dw;
    rep.h = dh;
    rep.depth = depth;
    rep.frame_count = gop.n_frames;
    rep.lambda = rc.lambda;
    rep.lambda_v = rc.lambda_v();
    rep.frames.resize(gop.n_frames);

    // Frame codecs in decode order, deterministically seeded.
    std::vector<FrameCodecs> frames;
    for (const FrameDesc& fd : gop.decode_order) {
        Rng init = master.fork(1000 + fd.display_idx);
        frames.push_back(FrameCodecs::make(fd, h, w, init));
    }

    // Guidance flows (encoder side only): builtin block matching on the
    // original frames, or externally computed .flo files.
    std::vector<std::vector<std::vector<float>>> guides(frames.size());
    for (size_t fi = 0; fi < frames.size(); ++fi) {
        const FrameDesc& fd = frames[fi].desc;
        if (fd.kind == FrameKind::I) continue;
        for (size_t ri = 0; ri < fd.refs.size(); ++ri) {
            FlowField ff;
            if (cfg.flow_source == FlowSource::Builtin) {
                ff = estimate_flow(video[fd.display_idx], video[fd.refs[ri]]);
            } else {
                const std::string path = cfg.flow_dir + "/flow_t" + std::to_string(fd.display_idx) +
                                         "_ref" + std::to_string(ri) + ".flo";
                ff = read_flo(path);
                if (ff.w != w || ff.h != h) throw config_error("guidance flow dimensions mismatch: " + path);
                ff.validate();
            }
            guides[fi].push_back(ff.packed());
        }
    }

    // Stage 1: motion pre-training, frame-wise, motion decoder only.
    if (cfg.pretrain) {
        Schedule sched{cfg.iters_pretrain, cfg.checkpoint_every};
        for (size_t fi = 0; fi < frames.size(); ++fi) {
            if (frames[fi].desc.kind == FrameKind::I) continue;
            Rng rng = master.fork(2000 + frames[fi].desc.display_idx);
            auto lr = pretrain_motion(frames[fi], guides[fi], rc.lambda_v(), sched, rng);
            StageCurve c{"pretrain_f" + std::to_string(frames[fi].desc.display_idx), lr.curve};
            rep.curves.push_back(std::move(c));
        }
    }

    // Stage 2: frame-wise RD optimization in decode order; each frame then
    // reconstructs (hard) to serve as reference for its dependents.
    std::map<int, std::vector<float>> recon;
    {
        Schedule sched{cfg.iters_frame, cfg.checkpoint_every};
        for (size_t fi = 0; fi < frames.size(); ++fi) {
            FrameCodecs& fc = frames[fi];
            std::vector<const std::vector<float>*> refs;
            for (int r : fc.desc.refs) refs.push_back(&recon.at(r));
            Rng rng = master.fork(3000 + fc.desc.display_idx);
            const auto lt = cfg.lambda_t.find(fc.desc.display_idx);
            const double lambda_t = lt == cfg.lambda_t.end() ? rc.lambda : lt->second;
            auto lr = encode_frame(fc, refs, targets[fc.desc.display_idx], lambda_t, sched, rng);
            rep.curves.push_back({"frame_f" + std::to_string(fc.desc.display_idx), lr.curve});
            recon[fc.desc.display_idx] = enc_detail::hard_recon(fc, refs, h, w);
        }
    }

    // Stage 3: joint RD optimization over the whole GOP.
    if (cfg.joint && gop.n_frames >= 1) {
        Schedule sched{cfg.iters_joint, cfg.checkpoint_every};
        Rng rng = master.fork(4000);
        auto lr = joint_optimize(frames, targets, rc.lambda, sched, rng);
        rep.curves.push_back({"joint", lr.curve});
    }

    // Quantize / entropy-code network parameters, then freeze latents.
    std::vector<std::vector<ParamCodecResult>> params(frames.size());
    for (size_t fi = 0; fi < frames.size(); ++fi) {
        for (CoolChicDecoder* dec : frames[fi].decoders())
            params[fi].push_back(quantize_decoder_params(*dec, rc.lambda));
        for (CoolChicDecoder* dec : frames[fi].decoders())
            commit_latents(*dec, integerize_latents(*dec));
    }

    // Estimated latent rate of the frozen state (what rate_of_latent says).
    for (size_t fi = 0; fi < frames.size(); ++fi) {
        double est = 0.0;
        for (CoolChicDecoder* dec : frames[fi].decoders())
            est += detail::latent_rate_bits_hard(*dec);
        rep.frames[frames[fi].desc.display_idx].estimated_latent_bits = est;
    }

    // Final reconstruction: exactly the decoder's computation.
    const auto dense = reconstruct_gop(frames);
    EncodeResult res;
    res.recon.resize(gop.n_frames);
    for (size_t fi = 0; fi < frames.size(); ++fi) {
        Planes420 rp = dense_to_planes420(dense[fi], h, w, depth);
        res.recon[frames[fi].desc.display_idx] = pad ? crop_420(rp, dw, dh) : std::move(rp);
    }

    GopHeader hdr;
    hdr.w = dw;
    hdr.h = dh;
    hdr.depth = depth;
    hdr.frame_count = gop.n_frames;
    hdr.gop_id = cfg.gop_id;
    hdr.lambda = rc.lambda;
    GopBits bits;
    res.bitstream = write_gop(gop, frames, params, hdr, &bits);

    rep.global_header_bits = bits.global_header_bits;
    for (size_t fi = 0; fi < frames.size(); ++fi) {
        FrameReport& fr = rep.frames[frames[fi].desc.display_idx];
        fr.display_idx = frames[fi].desc.display_idx;
        fr.kind = frame_kind_letter(frames[fi].desc.kind);
        fr.motion_latent_bits = bits.frames[fi].motion_latent_bits;
        fr.residue_latent_bits = bits.frames[fi].residue_latent_bits;
        fr.param_bits = bits.frames[fi].param_bits;
        fr.header_bits = bits.frames[fi].header_bits;
    }
    rep.total_bits = bits.total();
    rep.bpp = static_cast<double>(rep.total_bits) /
              (static_cast<double>(dw) * dh * gop.n_frames);
    rep.psnr_db = enc_detail::pooled_psnr(display_video, res.recon);
    for (int i = 0; i < gop.n_frames; ++i)
        rep.frames[i].psnr_db = enc_detail::pooled_psnr({display_video[i]}, {res.recon[i]});

    // Video-level RD cost of the committed state: per-frame MSE of the
    // decoded samples plus lambda times the latent rate in bits per pixel.
    {
        double cost = 0.0;
        const double maxv = static_cast<double>(display_video[0].maxval());
        for (int i = 0; i < gop.n_frames; ++i) {
            double sse = 0.0;
            int64_t n = 0;
            auto acc = [&](const std::vector<uint16_t>& a, const std::vector<uint16_t>& b) {
                for (size_t k = 0; k < a.size(); ++k) {
                    const double d = (static_cast<double>(a[k]) - b[k]) / maxv;
                    sse += d * d;
                }
                n += static_cast<int64_t>(a.size());
            };
            acc(display_video[i].y, res.recon[i].y);
            acc(display_video[i].u, res.recon[i].u);
            acc(display_video[i].v, res.recon[i].v);
            cost += sse / static_cast<double>(n);
            cost += rc.lambda * rep.frames[i].estimated_latent_bits /
                    (static_cast<double>(w) * h);
        }
        rep.final_rd_cost = cost;
    }
    res.report = std::move(rep);
    return res;
}

namespace enc_detail {

inline double pooled_psnr(const std::vector<Planes420>& ref, const std::vector<Planes420>& dec) {
    double sse = 0.0;
    int64_t n = 0;
    int maxv = 255;
    for (size_t f = 0; f < ref.size(); ++f) {
        maxv = ref[f].maxval();
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
    const double mse = sse / static_cast<double>(n);
    if (mse <= 0.0) return 99.99;
    return std::min(99.99, 10.0 * std::log10(static_cast<double>(maxv) * maxv / mse));
}

}  // namespace enc_detail

}  // namespace ovc

#endif
