#ifndef OVC_MAC_AUDIT_HPP
#define OVC_MAC_AUDIT_HPP

#include <map>

#include "ovc/decoder.hpp"
#include "ovc/frame.hpp"

namespace ovc {

// Multiply-accumulate census. Conventions: one multiply-accumulate = 1 MAC;
// normalization by the H*W of the decoded frame; ARM cost is per latent
// (so scaled by the pyramid density); the transposed-convolution chain is
// charged 16 MACs per retained output pixel of every application; biases,
// activations and warping are not counted. Pure function of the
// architecture and frame geometry.
struct MacAudit {
    double intra = 0.0, residue = 0.0, motion_p = 0.0, motion_b = 0.0;
    std::vector<double> per_frame;  // decode order
    double gop_average = 0.0;       // frame-count-weighted mean
};

inline double decoder_mac_per_pixel(DecoderKind kind, int h, int w) {
    const DecoderArch arch = decoder_arch(kind);
    const double px = static_cast<double>(h) * w;
    // ARM over every latent of the pyramid.
    const int64_t arm_per_latent =
        static_cast<int64_t>(arch.arm_hidden) * arch.arm_width * arch.arm_width + 2LL * arch.arm_width;
    double latents = 0.0;
    for (int l = 0; l < kLevels; ++l) {
        const int s = arch.root_shift + l;
        latents += static_cast<double>(ceil_shift(h, s)) * ceil_shift(w, s);
    }
    double macs = arm_per_latent * latents;
    // Upsampling chains: 4x4 kernel taps per output pixel at stride 2.
    for (int l = 0; l < kLevels; ++l) {
        for (int k = arch.root_shift + l; k >= 1; --k)
            macs += 16.0 * ceil_shift(h, k - 1) * ceil_shift(w, k - 1);
    }
    // Synthesis stack at full resolution.
    double syn = 0.0;
    for (const auto& layer : arch.syn)
        syn += static_cast<double>(layer.k) * layer.k * layer.c_in * layer.c_out;
    macs += syn * px;
    return macs / px;
}

inline double frame_mac_per_pixel(FrameKind kind, int h, int w) {
    switch (kind) {
        case FrameKind::I: return decoder_mac_per_pixel(DecoderKind::Intra, h, w);
        case FrameKind::P:
            return decoder_mac_per_pixel(DecoderKind::Residue, h, w) +
                   decoder_mac_per_pixel(DecoderKind::MotionP, h, w);
        case FrameKind::B:
            return decoder_mac_per_pixel(DecoderKind::Residue, h, w) +
                   decoder_mac_per_pixel(DecoderKind::MotionB, h, w);
    }
    throw config_error("unknown frame kind");
}

inline MacAudit mac_audit(int h, int w, const GopStructure& gop) {
    MacAudit a;
    a.intra = decoder_mac_per_pixel(DecoderKind::Intra, h, w);
    a.residue = decoder_mac_per_pixel(DecoderKind::Residue, h, w);
    a.motion_p = decoder_mac_per_pixel(DecoderKind::MotionP, h, w);
    a.motion_b = decoder_mac_per_pixel(DecoderKind::MotionB, h, w);
    double sum = 0.0;
    for (const auto& fd : gop.decode_order) {
        const double m = frame_mac_per_pixel(fd.kind, h, w);
        a.per_frame.push_back(m);
        sum += m;
    }
    a.gop_average = sum / static_cast<double>(gop.decode_order.size());
    return a;
}

}  // namespace ovc

#endif
