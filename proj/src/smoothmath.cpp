#include "t3cbf/smoothmath.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace t3cbf::smooth {

void SmoothingParams::validate() const {
    if (!(alpha_max > 0.0) || !(alpha_abs > 0.0) || !(eps_sqrt > 0.0))
        throw std::invalid_argument("smoothing sharpness parameters must be positive");
    const double floor = (6.0 + std::log(15.0)) / alpha_max;
    if (!(switch_threshold > floor))
        throw std::invalid_argument("switch_threshold must exceed (6 + ln 15)/alpha_max = " +
                                    std::to_string(floor));
}

SmoothingParams SmoothingParams::no_switching() {
    SmoothingParams p;
    p.switch_threshold = std::numeric_limits<double>::infinity();
    return p;
}

SmoothMax smooth_max(std::span<const double> values, MaxVariant variant, double alpha) {
    const auto n = static_cast<Eigen::Index>(values.size());
    if (n == 0) throw std::invalid_argument("smooth_max: empty input");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("smooth_max: alpha must be positive");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("smooth_max: non-finite input");

    SmoothMax out;
    out.grad.resize(n);
    out.hessian.resize(n, n);

    double m = values[0];
    for (double v : values) m = std::max(m, v);

    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p[i] = std::exp(alpha * (values[i] - m));
    const double sum = p.sum();
    p /= sum;

    if (variant == MaxVariant::LSE) {
        out.value = m + std::log(sum) / alpha;
        out.grad = p;
        out.hessian = alpha * (Eigen::MatrixXd(p.asDiagonal()) - p * p.transpose());
        return out;
    }

    Eigen::Map<const Eigen::VectorXd> x(values.data(), n);
    const double b = p.dot(x);
    out.value = std::clamp(b, x.minCoeff(), x.maxCoeff());
    // g_i = p_i (1 + alpha (x_i - b))
    out.grad = p.array() * (1.0 + alpha * (x.array() - b));
    // H_ij = alpha p_i (delta_ij - p_j)(1 + alpha (x_i - b)) + alpha p_i (delta_ij - g_j)
    for (Eigen::Index i = 0; i < n; ++i) {
        const double fi = 1.0 + alpha * (x[i] - b);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double dij = i == j ? 1.0 : 0.0;
            out.hessian(i, j) = alpha * p[i] * ((dij - p[j]) * fi + dij - out.grad[j]);
        }
    }
    out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
    return out;
}

SmoothAbs smooth_abs(double x, AbsVariant variant, double param) {
    if (!std::isfinite(x)) throw std::invalid_argument("smooth_abs: non-finite input");
    if (!(param > 0.0)) throw std::invalid_argument("smooth_abs: parameter must be positive");
    return variant == AbsVariant::XTanh ? detail::xtanh(x, param) : detail::sqrt_abs(x, param);
}

}  // namespace t3cbf::smooth
