#ifndef OVC_RANGE_CODER_HPP
#define OVC_RANGE_CODER_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "ovc/laplace.hpp"

namespace ovc {

// Carry-less range coder (Subbotin variant) on 64-bit registers with
// byte-wise renormalization. Underflow is handled by clamping the range to
// the next BOT boundary instead of propagating carries, so encoder and
// decoder states stay in lockstep by construction.
namespace rc {
constexpr uint64_t kTop = 1ULL << 56;
constexpr uint64_t kBot = 1ULL << 48;
constexpr uint32_t kTotalBits = 20;
constexpr uint32_t kTotal = 1u << kTotalBits;  // cumulative-frequency scale
constexpr uint32_t kRawFreq = kTotal >> 16;    // uniform 16-bit escape payload
}  // namespace rc

class RangeEncoder {
public:
    explicit RangeEncoder(std::vector<uint8_t>& out) : out_(out) {}

    void encode(uint32_t cum, uint32_t freq, uint32_t total) {
        if (freq == 0 || cum + freq > total) throw stream_error("invalid coding interval");
        const uint64_t r = range_ / total;
        low_ += r * cum;
        range_ = r * freq;
        renorm();
    }

    // Must be called exactly once; emits the final 8 low bytes.
    void finish() {
        for (int i = 0; i < 8; ++i) {
            out_.push_back(static_cast<uint8_t>(low_ >> 56));
            low_ <<= 8;
        }
    }

private:
    void renorm() {
        for (;;) {
            if ((low_ ^ (low_ + range_)) < rc::kTop) {
                // top byte settled
            } else if (range_ < rc::kBot) {
                range_ = (0 - low_) & (rc::kBot - 1);
            } else {
                break;
            }
            out_.push_back(static_cast<uint8_t>(low_ >> 56));
            low_ <<= 8;
            range_ <<= 8;
        }
    }

    std::vector<uint8_t>& out_;
    uint64_t low_ = 0;
    uint64_t range_ = ~0ULL;
};

class RangeDecoder {
public:
    RangeDecoder(const uint8_t* data, size_t size) : data_(data), size_(size) {
        for (int i = 0; i < 8; ++i) code_ = (code_ << 8) | next_byte();
    }

    // Returns the scaled cumulative frequency of the next symbol.
    uint32_t decode_freq(uint32_t total) {
        r_ = range_ / total;
        uint64_t f = (code_ - low_) / r_;
        if (f >= total) f = total - 1;
        return static_cast<uint32_t>(f);
    }

    void decode_update(uint32_t cum, uint32_t freq) {
        low_ += r_ * cum;
        range_ = r_ * freq;
        renorm();
    }

    size_t bytes_consumed() const { return pos_; }

private:
    uint8_t next_byte() {
        if (pos_ >= size_) throw stream_error("payload truncated");
        return data_[pos_++];
    }

    void renorm() {
        for (;;) {
            if ((low_ ^ (low_ + range_)) < rc::kTop) {
            } else if (range_ < rc::kBot) {
                range_ = (0 - low_) & (rc::kBot - 1);
            } else {
                break;
            }
            code_ = (code_ << 8) | next_byte();
            low_ <<= 8;
            range_ <<= 8;
        }
    }

    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
    uint64_t low_ = 0;
    uint64_t range_ = ~0ULL;
    uint64_t code_ = 0;
    uint64_t r_ = 0;
};

// Quantized-Laplace coding distribution over a window around round(mu).
// Inside the window every symbol keeps at least one count of the scaled
// cumulative frequency; in-alphabet values outside the window are coded
// through an escape followed by a raw uniform 16-bit symbol. The integer
// cumulative is a closed-form function evaluated identically while encoding
// and decoding.
class LaplaceCodingDist {
public:
    static constexpr uint32_t kEscFreq = 256;

    LaplaceCodingDist(double mu, double log_scale) {
        mu_ = clamp_mu(mu);
        b_ = scale_from_log(log_scale);
        const long center = std::lround(mu_);
        const long half = std::min<long>(12288, std::max<long>(16, static_cast<long>(std::ceil(16.0 * b_)) + 1));
        lo_ = static_cast<int>(std::max<long>(kAlphabetMin, center - half));
        hi_ = static_cast<int>(std::min<long>(kAlphabetMax, center + half));
        n_ = hi_ - lo_ + 1;
        f_lo_ = laplace_cdf(lo_ - 0.5, mu_, b_);
        denom_ = laplace_cdf(hi_ + 0.5, mu_, b_) - f_lo_;
        m_free_ = rc::kTotal - kEscFreq - static_cast<uint32_t>(n_);
    }

    int window_lo() const { return lo_; }
    int window_hi() const { return hi_; }

    // Cumulative count at window boundary i, i in [0, n].
    uint32_t cum(int i) const {
        if (i <= 0) return 0;
        if (i >= n_) return static_cast<uint32_t>(n_) + m_free_;
        const double g = (laplace_cdf(lo_ - 0.5 + i, mu_, b_) - f_lo_) / denom_;
        return static_cast<uint32_t>(i) + static_cast<uint32_t>(std::floor(m_free_ * g));
    }

    uint32_t window_total() const { return static_cast<uint32_t>(n_) + m_free_; }

    void encode(RangeEncoder& enc, int32_t value) const {
        if (value < kAlphabetMin || value > kAlphabetMax)
            throw stream_error("latent value outside coder alphabet");
        if (value >= lo_ && value <= hi_) {
            const int i = value - lo_;
            const uint32_t c0 = cum(i), c1 = cum(i + 1);
            enc.encode(c0, c1 - c0, rc::kTotal);
        } else {
            enc.encode(window_total(), kEscFreq, rc::kTotal);
            enc.encode(static_cast<uint32_t>(value - kAlphabetMin) * rc::kRawFreq, rc::kRawFreq,
                       rc::kTotal);
        }
    }

    int32_t decode(RangeDecoder& dec) const {
        const uint32_t f = dec.decode_freq(rc::kTotal);
        if (f >= window_total()) {
            dec.decode_update(window_total(), kEscFreq);
            const uint32_t raw = dec.decode_freq(rc::kTotal) / rc::kRawFreq;
            dec.decode_update(raw * rc::kRawFreq, rc::kRawFreq);
            return static_cast<int32_t>(raw) + kAlphabetMin;
        }
        int a = 0, b = n_;  // invariant: cum(a) <= f < cum(b)
        while (b - a > 1) {
            const int mid = (a + b) / 2;
            if (cum(mid) <= f) a = mid;
            else b = mid;
        }
        dec.decode_update(cum(a), cum(a + 1) - cum(a));
        return lo_ + a;
    }

private:
    double mu_, b_, f_lo_, denom_;
    int lo_, hi_, n_;
    uint32_t m_free_;
};

inline void encode_symbol(RangeEncoder& enc, int32_t value, double mu, double log_scale) {
    LaplaceCodingDist(mu, log_scale).encode(enc, value);
}

inline int32_t decode_symbol(RangeDecoder& dec, double mu, double log_scale) {
    return LaplaceCodingDist(mu, log_scale).decode(dec);
}

}  // namespace ovc

#endif
