#ifndef OVC_PIPELINE_HPP
#define OVC_PIPELINE_HPP

#include <map>
#include <memory>

#include "ovc/decoder.hpp"
#include "ovc/frame.hpp"
#include "ovc/video_ops.hpp"

namespace ovc {

struct Yuv420Vars {
    Var y, u, v;
};

// Fixed 444 -> 420: luma passes through, chroma is 2x2 averaged.
inline Yuv420Vars to_yuv420(Tape& t, Var dense) {
    if (dense->shape.c != 3) throw dimension_error("to_yuv420: expects 3 x H x W");
    if (dense->shape.h % 2 || dense->shape.w % 2) throw config_error("to_yuv420: odd dimensions");
    Yuv420Vars out;
    out.y = slice_channel(t, dense, 0);
    out.u = avg2x2(t, slice_channel(t, dense, 1));
    out.v = avg2x2(t, slice_channel(t, dense, 2));
    return out;
}

// MSE over all YUV420 samples of the frame (natural 4:2:0 weighting).
inline Var frame_distortion(Tape& t, Var dense, const Targets420& tgt) {
    Yuv420Vars p = to_yuv420(t, dense);
    Var sy = sse_vs(t, p.y, tgt.y.data());
    Var su = sse_vs(t, p.u, tgt.u.data());
    Var sv = sse_vs(t, p.v, tgt.v.data());
    const float inv = 1.f / static_cast<float>(tgt.samples());
    return wsum(t, {{sy, inv}, {su, inv}, {sv, inv}});
}

// The two Cool-chic decoders of one inter frame (or the single intra one).
struct FrameCodecs {
    FrameDesc desc;
    std::unique_ptr<CoolChicDecoder> intra;
    std::unique_ptr<CoolChicDecoder> motion;
    std::unique_ptr<CoolChicDecoder> residue;

    static FrameCodecs make(const FrameDesc& fd, int h, int w, Rng& rng) {
        FrameCodecs fc;
        fc.desc = fd;
        if (fd.kind == FrameKind::I) {
            fc.intra = std::make_unique<CoolChicDecoder>(
                CoolChicDecoder::make(DecoderKind::Intra, h, w, rng));
        } else {
            fc.motion = std::make_unique<CoolChicDecoder>(CoolChicDecoder::make(
                fd.kind == FrameKind::P ? DecoderKind::MotionP : DecoderKind::MotionB, h, w, rng));
            fc.residue = std::make_unique<CoolChicDecoder>(
                CoolChicDecoder::make(DecoderKind::Residue, h, w, rng));
        }
        return fc;
    }

    std::vector<CoolChicDecoder*> decoders() {
        std::vector<CoolChicDecoder*> ds;
        if (intra) ds.push_back(intra.get());
        if (motion) ds.push_back(motion.get());
        if (residue) ds.push_back(residue.get());
        return ds;
    }
};

struct MotionFieldVars {
    Var flow1 = nullptr;  // 2 x H x W
    Var flow2 = nullptr;  // B-frames only
    Var beta = nullptr;   // 1 x H x W, in [0,1]; fixed 1 for P
};

// Raw motion synthesis output -> flows (in pixels) and blending weight.
inline MotionFieldVars split_motion(Tape& t, Var syn_out, FrameKind kind) {
    MotionFieldVars m;
    if (kind == FrameKind::P) {
        if (syn_out->shape.c != 2) throw dimension_error("P-frame motion must have 2 channels");
        m.flow1 = syn_out;
    } else {
        if (syn_out->shape.c != 5) throw dimension_error("B-frame motion must have 5 channels");
        m.flow1 = slice_channels(t, syn_out, 0, 2);
        m.flow2 = slice_channels(t, syn_out, 2, 2);
        m.beta = clamp01_ste(t, slice_channel(t, syn_out, 4));
    }
    return m;
}

struct FramePipelineOut {
    Var recon = nullptr;        // 3 x H x W dense
    Var rate_motion = nullptr;  // scalar bits
    Var rate_residue = nullptr;
    MotionFieldVars motion;
    DecoderForward motion_fwd, residue_fwd, intra_fwd;
};

// Full decoding math of one frame given already-reconstructed references.
// I-frames run only the intra decoder; P-frames use one warp with beta = 1;
// B-frames blend two warps. The residue decoder contributes (alpha, r) and
// the frame is alpha * prediction + r.
inline FramePipelineOut run_frame_pipeline(Tape& t, Binder& bind, FrameCodecs& fc,
                                           const std::vector<Var>& ref_recons,
                                           const QuantizerMode& mode, Rng& rng,
                                           bool with_rate = true) {
    FramePipelineOut out;
    if (fc.desc.kind == FrameKind::I) {
        out.intra_fwd = decoder_forward(t, bind, *fc.intra, mode, rng, with_rate);
        out.recon = out.intra_fwd.output;
        out.rate_motion = t.scalar(0.f);
        out.rate_residue = out.intra_fwd.rate_bits;
        return out;
    }
    if (ref_recons.size() != fc.desc.refs.size())
        throw pipeline_error("missing reference reconstructions");
    out.motion_fwd = decoder_forward(t, bind, *fc.motion, mode, rng, with_rate);
    out.motion = split_motion(t, out.motion_fwd.output, fc.desc.kind);
    Var pred;
    if (fc.desc.kind == FrameKind::P) {
        pred = warp(t, ref_recons[0], out.motion.flow1);
    } else {
        Var w1 = warp(t, ref_recons[0], out.motion.flow1);
        Var w2 = warp(t, ref_recons[1], out.motion.flow2);
        pred = blend(t, w1, w2, out.motion.beta);
    }
    out.residue_fwd = decoder_forward(t, bind, *fc.residue, mode, rng, with_rate);
    Var alpha = clamp01_ste(t, slice_channel(t, out.residue_fwd.output, 0));
    Var residue = slice_channels(t, out.residue_fwd.output, 1, 3);
    out.recon = reconstruct(t, pred, alpha, residue);
    out.rate_motion = out.motion_fwd.rate_bits;
    out.rate_residue = out.residue_fwd.rate_bits;
    return out;
}

// Output conversion: clamp to the valid sample range and integerize. This is
// the only place decoded values are clamped.
inline Planes420 dense_to_planes420(const std::vector<float>& dense, int h, int w, int depth) {
    Planes420 p = Planes420::make(w, h, depth);
    const size_t plane = static_cast<size_t>(h) * w;
    const float maxv = static_cast<float>(p.maxval());
    auto to_int = [maxv](float v) {
        const float r = std::round(v * maxv);
        return static_cast<uint16_t>(std::min(maxv, std::max(0.f, r)));
    };
    for (size_t i = 0; i < plane; ++i) p.y[i] = to_int(dense[i]);
    const int ch = h / 2, cw = w / 2;
    for (int yy = 0; yy < ch; ++yy)
        for (int xx = 0; xx < cw; ++xx) {
            const size_t p00 = plane + static_cast<size_t>(2 * yy) * w + 2 * xx;
            const float u = 0.25f * (dense[p00] + dense[p00 + 1] + dense[p00 + w] + dense[p00 + w + 1]);
            const float v = 0.25f * (dense[p00 + plane] + dense[p00 + plane + 1] +
                                     dense[p00 + plane + w] + dense[p00 + plane + w + 1]);
            p.u[static_cast<size_t>(yy) * cw + xx] = to_int(u);
            p.v[static_cast<size_t>(yy) * cw + xx] = to_int(v);
        }
    return p;
}

}  // namespace ovc

#endif
