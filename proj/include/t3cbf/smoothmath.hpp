#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>

#include <Eigen/Dense>

namespace t3cbf::smooth {

enum class MaxVariant { LSE, Boltzmann };
enum class AbsVariant { XTanh, Sqrt };

struct SmoothingParams {
    double alpha_max = 100.0;
    double alpha_abs = 100.0;
    double eps_sqrt = 0.01;
    double switch_threshold = 0.5;
    MaxVariant max_variant = MaxVariant::LSE;
    AbsVariant abs_variant = AbsVariant::XTanh;

    /// Upper bound of h_SSAT - h_SAT for cuboid pairs (15 axes, 6 extent terms).
    double upper_band() const { return 6.0 / alpha_abs + std::log(15.0) / alpha_max; }
    /// Magnitude of the lower bound of h_SSAT - h_SAT.
    double lower_band() const { return 1.0 / alpha_abs; }

    /// Throws std::invalid_argument when a sharpness is non-positive or the
    /// switch threshold sits inside the smoothing error band.
    void validate() const;

    static SmoothingParams no_switching();
};

struct SmoothMax {
    double value = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hessian;
};

struct SmoothAbs {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

SmoothMax smooth_max(std::span<const double> values, MaxVariant variant, double alpha);

SmoothAbs smooth_abs(double x, AbsVariant variant, double param);

namespace detail {

// exp(-40) is below the rounding unit of any sum that contains exp(0) = 1,
// so smooth-max terms further below the maximum can be dropped.
inline constexpr double kExpCutoff = -40.0;

struct Exp2Table {
    std::array<double, 32> v{};
    Exp2Table() {
        for (int j = 0; j < 32; ++j) v[static_cast<std::size_t>(j)] = std::exp2(j / 32.0);
    }
};
inline const Exp2Table kExp2Table;

/// exp(x) for x <= 0, clamped below at -708. Table-driven with 32 entries,
/// within 2 ulp of std::exp and inlined into the hot loops.
inline double exp_nonpositive(double x) {
    constexpr double kInvLn2N = 46.166241308446828384;  // 32 / ln 2
    constexpr double kLn2HiN = 6.93147180369123816490e-01 / 32.0;
    constexpr double kLn2LoN = 1.90821492927058770002e-10 / 32.0;
    constexpr double kShifter = 0x1.8p52;
    x = std::max(x, -708.0);
    const double kd = x * kInvLn2N + kShifter;
    const std::uint64_t ki = std::bit_cast<std::uint64_t>(kd);
    const double k = kd - kShifter;
    const double r = (x - k * kLn2HiN) - k * kLn2LoN;
    const double p =
        1.0 + r * (1.0 + r * (0.5 + r * (1.0 / 6.0 + r * (1.0 / 24.0 + r * (1.0 / 120.0 + r * (1.0 / 720.0))))));
    const double scale = std::bit_cast<double>(((ki >> 5) + 1023) << 52);
    return kExp2Table.v[ki & 31] * p * scale;
}

/// Past this alpha |x| the value and slope of x tanh(alpha x) round to |x|
/// and sign(x) exactly; the curvature left is below 1e-16 alpha.
inline constexpr double kTanhSaturation = 22.0;

// x tanh(alpha x) through e = exp(-2 alpha |x|), which is markedly cheaper
// than std::tanh. expm1 keeps full relative accuracy near zero.
inline SmoothAbs xtanh(double x, double alpha) {
    const double ax = std::abs(x);
    const double a = alpha * ax;
    const double sgn = std::copysign(1.0, x);
    if (a >= kTanhSaturation) return {ax, sgn, 0.0};
    double t, sech2;
    if (a < 0.5) [[unlikely]] {
        const double em1 = std::expm1(-2.0 * a);
        const double inv = 1.0 / (2.0 + em1);
        t = -em1 * inv;
        sech2 = 4.0 * (1.0 + em1) * inv * inv;
    } else {
        const double e = exp_nonpositive(-2.0 * a);
        const double inv = 1.0 / (1.0 + e);
        t = (1.0 - e) * inv;
        sech2 = 4.0 * e * inv * inv;
    }
    return {ax * t, sgn * (t + a * sech2), 2.0 * alpha * sech2 * (1.0 - a * t)};
}

inline double xtanh_value(double x, double alpha) {
    const double ax = std::abs(x);
    const double a = alpha * ax;
    if (a >= kTanhSaturation) return ax;
    if (a < 0.5) [[unlikely]] {
        const double em1 = std::expm1(-2.0 * a);
        return ax * (-em1 / (2.0 + em1));
    }
    const double e = exp_nonpositive(-2.0 * a);
    return ax * (1.0 - e) / (1.0 + e);
}

inline SmoothAbs sqrt_abs(double x, double eps) {
    const double s = std::sqrt(x * x + eps * eps);
    const double inv = 1.0 / s;
    return {s, x * inv, eps * eps * inv * inv * inv};
}

inline double sqrt_abs_value(double x, double eps) { return std::sqrt(x * x + eps * eps); }

inline SmoothAbs sabs(double x, AbsVariant v, const SmoothingParams& p) {
    return v == AbsVariant::XTanh ? xtanh(x, p.alpha_abs) : sqrt_abs(x, p.eps_sqrt);
}

inline double sabs_value(double x, AbsVariant v, const SmoothingParams& p) {
    return v == AbsVariant::XTanh ? xtanh_value(x, p.alpha_abs) : sqrt_abs_value(x, p.eps_sqrt);
}

// Kernels used by the collision hot path over n <= 15 values. `weights`
// receives the gradient of the smooth max; the Hessian is
// alpha * (diag(w) - w w^T) for LSE and is assembled by the caller.
inline double max_of(const double* x, int n) {
    double m = x[0];
    for (int i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}

inline double shifted_exp(double x, double m, double alpha) { return exp_nonpositive(alpha * (x - m)); }

inline double lse(const double* x, int n, double alpha, double* weights) {
    const double m = max_of(x, n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        weights[i] = shifted_exp(x[i], m, alpha);
        sum += weights[i];
    }
    const double inv = 1.0 / sum;
    for (int i = 0; i < n; ++i) weights[i] *= inv;
    return m + std::log(sum) / alpha;
}

inline double lse_value(const double* x, int n, double alpha) {
    const double m = max_of(x, n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += shifted_exp(x[i], m, alpha);
    return m + std::log(sum) / alpha;
}

// Boltzmann operator. `probs` receives the softmax weights p_i; the gradient is
// p_i (1 + alpha (x_i - value)).
inline double boltzmann(const double* x, int n, double alpha, double* probs) {
    const double m = max_of(x, n);
    double sum = 0.0, wsum = 0.0;
    for (int i = 0; i < n; ++i) {
        probs[i] = shifted_exp(x[i], m, alpha);
        sum += probs[i];
    }
    const double inv = 1.0 / sum;
    for (int i = 0; i < n; ++i) {
        probs[i] *= inv;
        wsum += probs[i] * x[i];
    }
    return wsum;
}

inline double boltzmann_value(const double* x, int n, double alpha) {
    const double m = max_of(x, n);
    double sum = 0.0, wsum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = shifted_exp(x[i], m, alpha);
        sum += w;
        wsum += w * x[i];
    }
    return wsum / sum;
}

}  // namespace detail

}  // namespace t3cbf::smooth
