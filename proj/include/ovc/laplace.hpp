#ifndef OVC_LAPLACE_HPP
#define OVC_LAPLACE_HPP

#include <algorithm>
#include <cmath>

#include "ovc/ops.hpp"

namespace ovc {

constexpr float kLogScaleMin = -10.f;
constexpr float kLogScaleMax = 10.f;
constexpr double kProbFloor = 1.0 / 1048576.0;  // 2^-20, one count of the coder scale
constexpr int kAlphabetMin = -32768;
constexpr int kAlphabetMax = 32767;

inline double laplace_cdf(double x, double mu, double b) {
    const double d = x - mu;
    return d < 0.0 ? 0.5 * std::exp(d / b) : 1.0 - 0.5 * std::exp(-d / b);
}

// Mass of the length-1 bin centered on `value` under Laplace(mu, b),
// evaluated in a cancellation-free form per region.
inline double laplace_integer_mass(double value, double mu, double b) {
    const double d = value - mu;
    const double s = std::abs(d);
    if (s <= 0.5) {
        return 1.0 - 0.5 * std::exp(-(0.5 - s) / b) - 0.5 * std::exp(-(0.5 + s) / b);
    }
    return 0.5 * std::exp(-(s - 0.5) / b) * (1.0 - std::exp(-1.0 / b));
}

inline double clamp_mu(double mu) {
    return std::min<double>(kAlphabetMax, std::max<double>(kAlphabetMin, mu));
}

inline double scale_from_log(double log_scale) {
    return std::exp(std::min<double>(kLogScaleMax, std::max<double>(kLogScaleMin, log_scale)));
}

// Bits to code `value` under the quantized Laplace predicted by the ARM,
// floored to match the coder's in-window probability floor exactly.
inline double rate_of_latent(double value, double mu, double log_scale) {
    const double b = scale_from_log(log_scale);
    const double p = laplace_integer_mass(value, clamp_mu(mu), b);
    return -std::log2(std::max(p, kProbFloor));
}

// Graph op: summed rate of all latents in `q` under per-latent (mu,
// log_scale) rows of `arm_out`. Gradients reach q, mu and log_scale.
inline Var laplace_rate_sum(Tape& t, Var q, Var arm_out) {
    const int n = static_cast<int>(q->shape.numel());
    if (arm_out->shape.h != n || arm_out->shape.w != 2)
        throw dimension_error("laplace_rate_sum: arm output must be n x 2");
    Var y = t.alloc(Shape{1, 1, 1}, q->needs_grad || arm_out->needs_grad);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double mu = clamp_mu(arm_out->val[2 * i]);
        const double b = scale_from_log(arm_out->val[2 * i + 1]);
        acc += -std::log2(std::max(laplace_integer_mass(q->val[i], mu, b), kProbFloor));
    }
    y->val[0] = static_cast<float>(acc);
    if (y->needs_grad)
        y->back = [y, q, arm_out, n] {
            const float gy = y->grad[0];
            constexpr double inv_ln2 = 1.4426950408889634;
            for (int i = 0; i < n; ++i) {
                const double mu_raw = arm_out->val[2 * i];
                const double lb_raw = arm_out->val[2 * i + 1];
                const double mu = clamp_mu(mu_raw);
                const double b = scale_from_log(lb_raw);
                const double d = q->val[i] - mu;
                const double s = std::abs(d);
                double p, dp_dd, dp_db;
                if (s <= 0.5) {
                    const double u = std::exp(-(0.5 - d) / b);
                    const double v = std::exp(-(0.5 + d) / b);
                    p = 1.0 - 0.5 * (u + v);
                    dp_dd = (v - u) / (2.0 * b);
                    dp_db = -0.5 * (u * (0.5 - d) + v * (0.5 + d)) / (b * b);
                } else {
                    const double a = std::exp(-(s - 0.5) / b);
                    const double c = std::exp(-(s + 0.5) / b);
                    p = 0.5 * (a - c);
                    const double mag = (a - c) / (2.0 * b);  // -dp/ds
                    dp_dd = d > 0.0 ? -mag : mag;
                    dp_db = 0.5 * (a * (s - 0.5) - c * (s + 0.5)) / (b * b);
                }
                if (p <= kProbFloor) continue;  // floored region: flat cost
                const double dbits_dp = -inv_ln2 / p;
                const double gd = gy * dbits_dp * dp_dd;
                if (q->needs_grad) q->grad[i] += static_cast<float>(gd);
                if (arm_out->needs_grad) {
                    if (mu_raw > kAlphabetMin && mu_raw < kAlphabetMax)
                        arm_out->grad[2 * i] += static_cast<float>(-gd);
                    if (lb_raw > kLogScaleMin && lb_raw < kLogScaleMax)
                        arm_out->grad[2 * i + 1] += static_cast<float>(gy * dbits_dp * dp_db * b);
                }
            }
        };
    return y;
}

}  // namespace ovc

#endif
