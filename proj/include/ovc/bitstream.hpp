#ifndef OVC_BITSTREAM_HPP
#define OVC_BITSTREAM_HPP

#include <cstring>
#include <map>
#include <optional>

#include "ovc/param_codec.hpp"
#include "ovc/pipeline.hpp"

namespace ovc {

constexpr char kMagic[4] = {'O', 'V', 'C', '1'};
constexpr uint16_t kVersion = 1;

inline const std::vector<double>& canonical_lambdas() {
    static const std::vector<double> l = {0.05, 0.01, 0.0025, 0.001, 0.0005};
    return l;
}

inline uint8_t lambda_index_of(double lambda) {
    const auto& ls = canonical_lambdas();
    for (size_t i = 0; i < ls.size(); ++i)
        if (std::abs(lambda - ls[i]) <= 1e-12 * ls[i]) return static_cast<uint8_t>(i);
    return 255;
}

namespace wire {

struct Writer {
    std::vector<uint8_t> bytes;

    void u8(uint8_t v) { bytes.push_back(v); }
    void i8(int8_t v) { bytes.push_back(static_cast<uint8_t>(v)); }
    void u16(uint16_t v) {
        bytes.push_back(v & 0xff);
        bytes.push_back(v >> 8);
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back((v >> (8 * i)) & 0xff);
    }
    void f32(float v) {
        uint32_t u;
        std::memcpy(&u, &v, 4);
        u32(u);
    }
    void blob(const std::vector<uint8_t>& b) {
        u32(static_cast<uint32_t>(b.size()));
        bytes.insert(bytes.end(), b.begin(), b.end());
    }
};

struct Reader {
    const uint8_t* data;
    size_t size;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > size) throw format_error("bitstream truncated");
    }
    uint8_t u8() {
        need(1);
        return data[pos++];
    }
    int8_t i8() { return static_cast<int8_t>(u8()); }
    uint16_t u16() {
        need(2);
        const uint16_t v = static_cast<uint16_t>(data[pos] | (data[pos + 1] << 8));
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    float f32() {
        const uint32_t u = u32();
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
    std::pair<const uint8_t*, size_t> blob() {
        const uint32_t n = u32();
        need(n);
        const uint8_t* p = data + pos;
        pos += n;
        return {p, n};
    }
};

}  // namespace wire

struct FrameBits {
    int64_t header_bits = 0;
    int64_t param_bits = 0;          // tensor headers + payload, both decoders
    int64_t motion_latent_bits = 0;  // level length fields + payloads
    int64_t residue_latent_bits = 0;

    int64_t total() const { return header_bits + param_bits + motion_latent_bits + residue_latent_bits; }
};

struct GopBits {
    int64_t global_header_bits = 0;
    std::vector<FrameBits> frames;

    int64_t total() const {
        int64_t t = global_header_bits;
        for (const auto& f : frames) t += f.total();
        return t;
    }
};

struct GopHeader {
    int w = 0, h = 0, depth = 8;
    int frame_count = 0;
    uint8_t gop_id = kGopAllIntra;
    uint8_t lambda_index = 255;
    double lambda = 0.0;
};

// Serialized GOP: header, then per decoded frame its quantized decoder
// parameters and the range-coded latent payload of every pyramid level.
inline std::vector<uint8_t> write_gop(const GopStructure& gop, std::vector<FrameCodecs>& frames,
                                      const std::vector<std::vector<ParamCodecResult>>& params,
                                      const GopHeader& hdr, GopBits* bits_out = nullptr) {
    if (frames.size() != gop.decode_order.size() || params.size() != frames.size())
        throw pipeline_error("write_gop: inconsistent GOP inputs");
    wire::Writer w;
    for (char c : kMagic) w.u8(static_cast<uint8_t>(c));
    w.u16(kVersion);
    w.u32(static_cast<uint32_t>(hdr.w));
    w.u32(static_cast<uint32_t>(hdr.h));
    w.u8(static_cast<uint8_t>(hdr.depth));
    w.u16(static_cast<uint16_t>(hdr.frame_count));
    w.u8(hdr.gop_id);
    w.u8(lambda_index_of(hdr.lambda));
    w.f32(static_cast<float>(hdr.lambda));
    GopBits bits;
    bits.global_header_bits = static_cast<int64_t>(w.bytes.size()) * 8;
    for (size_t fi = 0; fi < frames.size(); ++fi) {
        FrameCodecs& fc = frames[fi];
        FrameBits fb;
        size_t mark = w.bytes.size();
        w.u16(static_cast<uint16_t>(fc.desc.display_idx));
        w.u8(static_cast<uint8_t>(fc.desc.kind));
        w.u8(static_cast<uint8_t>(fc.desc.refs.size()));
        for (int r : fc.desc.refs) w.u16(static_cast<uint16_t>(r));
        fb.header_bits = static_cast<int64_t>(w.bytes.size() - mark) * 8;
        auto decs = fc.decoders();
        if (decs.size() != params[fi].size()) throw pipeline_error("write_gop: decoder/param mismatch");
        for (size_t di = 0; di < decs.size(); ++di) {
            CoolChicDecoder& dec = *decs[di];
            const ParamCodecResult& pr = params[fi][di];
            mark = w.bytes.size();
            w.u8(static_cast<uint8_t>(dec.kind));
            for (const auto& qt : pr.tensors) {
                w.i8(qt.step_exp);
                w.f32(qt.scale);
            }
            w.blob(pr.payload);
            fb.param_bits += static_cast<int64_t>(w.bytes.size() - mark) * 8;
            mark = w.bytes.size();
            auto grids = integerize_latents(dec);
            auto payloads = encode_latent_payloads(dec, grids);
            w.u8(kLevels);
            for (const auto& p : payloads) w.blob(p);
            const int64_t latent_bits = static_cast<int64_t>(w.bytes.size() - mark) * 8;
            if (dec.kind == DecoderKind::MotionP || dec.kind == DecoderKind::MotionB)
                fb.motion_latent_bits += latent_bits;
            else
                fb.residue_latent_bits += latent_bits;
        }
        bits.frames.push_back(fb);
    }
    if (bits_out) *bits_out = bits;
    return std::move(w.bytes);
}

struct DecodedGop {
    GopHeader header;
    GopStructure gop;
    std::vector<FrameCodecs> frames;  // decode order, params + latents committed
};

inline DecodedGop read_gop(const uint8_t* data, size_t size) {
    wire::Reader r{data, size};
    for (char c : kMagic)
        if (r.u8() != static_cast<uint8_t>(c)) throw format_error("bad magic");
    if (r.u16() != kVersion) throw format_error("unsupported bitstream version");
    DecodedGop out;
    out.header.w = static_cast<int>(r.u32());
    out.header.h = static_cast<int>(r.u32());
    out.header.depth = r.u8();
    out.header.frame_count = r.u16();
    out.header.gop_id = r.u8();
    out.header.lambda_index = r.u8();
    out.header.lambda = r.f32();
    if (out.header.w <= 0 || out.header.h <= 0 || out.header.w > 16384 || out.header.h > 16384)
        throw format_error("bad frame dimensions");
    if (out.header.depth != 8 && out.header.depth != 10) throw format_error("bad bit depth");
    out.gop = GopStructure::make(out.header.gop_id, out.header.frame_count);
    // Frames are coded at the next multiple of 64 and cropped on output.
    const int cw = next_multiple_64(out.header.w), ch = next_multiple_64(out.header.h);
    Rng init_rng(0);  // placeholder weights, overwritten below
    for (const FrameDesc& fd : out.gop.decode_order) {
        if (r.u16() != static_cast<uint16_t>(fd.display_idx)) throw format_error("frame order mismatch");
        if (r.u8() != static_cast<uint8_t>(fd.kind)) throw format_error("frame kind mismatch");
        const int n_refs = r.u8();
        if (n_refs != static_cast<int>(fd.refs.size())) throw format_error("reference count mismatch");
        for (int i = 0; i < n_refs; ++i)
            if (r.u16() != static_cast<uint16_t>(fd.refs[i])) throw format_error("reference slot mismatch");
        FrameCodecs fc = FrameCodecs::make(fd, ch, cw, init_rng);
        for (CoolChicDecoder* dec : fc.decoders()) {
            const uint8_t kind = r.u8();
            if (kind != static_cast<uint8_t>(dec->kind)) throw format_error("decoder kind mismatch");
            std::vector<QuantizedTensor> headers(dec->net_params().size());
            for (auto& qt : headers) {
                qt.step_exp = r.i8();
                qt.scale = r.f32();
            }
            auto [pp, plen] = r.blob();
            decode_decoder_params(*dec, headers, pp, plen);
            if (r.u8() != kLevels) throw format_error("level count mismatch");
            std::vector<std::pair<const uint8_t*, size_t>> lat(kLevels);
            for (int l = 0; l < kLevels; ++l) lat[l] = r.blob();
            commit_latents(*dec, decode_latent_payloads(*dec, lat));
        }
        out.frames.push_back(std::move(fc));
    }
    if (r.pos != size) throw format_error("trailing bytes after GOP");
    return out;
}

// Deterministic reconstruction of every frame from committed (integerized)
// decoders, in decode order. The encoder runs this very function after
// quantization, so decoded frames match the encoder reconstruction exactly.
inline std::vector<std::vector<float>> reconstruct_gop(std::vector<FrameCodecs>& frames) {
    std::map<int, std::vector<float>> dense_by_idx;
    std::vector<std::vector<float>> out;
    Rng rng(0);  // hard-round path, never consulted
    for (FrameCodecs& fc : frames) {
        Tape tape;
        Binder bind{tape, false};
        const CoolChicDecoder* any = fc.intra ? fc.intra.get() : fc.motion.get();
        std::vector<Var> refs;
        for (int ridx : fc.desc.refs) {
            auto it = dense_by_idx.find(ridx);
            if (it == dense_by_idx.end()) throw pipeline_error("reference not yet reconstructed");
            refs.push_back(tape.constant(it->second, Shape{3, any->h, any->w}));
        }
        FramePipelineOut fo = run_frame_pipeline(tape, bind, fc, refs, QuantizerMode::hard(), rng, false);
        check_finite(fo.recon->val, "reconstruction");
        dense_by_idx[fc.desc.display_idx] = fo.recon->val;
        out.push_back(fo.recon->val);
    }
    return out;
}

// Full decode: bitstream bytes -> frames in display order.
struct DecodeResult {
    GopHeader header;
    std::vector<Planes420> frames;  // display order
};

inline DecodeResult decode_gop(const uint8_t* data, size_t size) {
    DecodedGop g = read_gop(data, size);
    const auto dense = reconstruct_gop(g.frames);
    const int cw = next_multiple_64(g.header.w), ch = next_multiple_64(g.header.h);
    DecodeResult res;
    res.header = g.header;
    res.frames.resize(g.gop.n_frames);
    for (size_t i = 0; i < g.frames.size(); ++i) {
        Planes420 p = dense_to_planes420(dense[i], ch, cw, g.header.depth);
        res.frames[g.frames[i].desc.display_idx] =
            (cw != g.header.w || ch != g.header.h) ? crop_420(p, g.header.w, g.header.h)
                                                   : std::move(p);
    }
    return res;
}

}  // namespace ovc

#endif
