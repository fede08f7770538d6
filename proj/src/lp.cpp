#include "t3cbf/geometry.hpp"

#include <cmath>

namespace t3cbf::geom {

namespace {

// min c^T w  s.t.  G w <= h, w split into positive/negative parts, h > 0 so
// the slack basis is feasible. Dense tableau, Bland's rule.
constexpr int kRows = 12;
constexpr int kFree = 4;
constexpr int kCols = 2 * kFree + kRows;

}  // namespace

LpResult lp_min_scaling(const Cuboid& a, const Cuboid& b) {
    LpResult res;
    const Vector3d e = b.center - a.center;

    double s0 = 0.0;
    for (int k = 0; k < 3; ++k) s0 = std::max(s0, std::abs(b.rotation.col(k).dot(e)) / b.half_extents[k]);
    s0 += 1.0;

    // Variables z = (y, s) with y = x - cA. Rows: +-A_k^T y - a_k s <= 0,
    // +-B_k^T y - b_k s <= +-B_k^T e.
    Eigen::Matrix<double, kRows, kFree> g;
    Eigen::Matrix<double, kRows, 1> h;
    for (int k = 0; k < 3; ++k) {
        const Vector3d ak = a.rotation.col(k), bk = b.rotation.col(k);
        g.row(2 * k) << ak.transpose(), -a.half_extents[k];
        g.row(2 * k + 1) << -ak.transpose(), -a.half_extents[k];
        h[2 * k] = 0.0;
        h[2 * k + 1] = 0.0;
        g.row(6 + 2 * k) << bk.transpose(), -b.half_extents[k];
        g.row(6 + 2 * k + 1) << -bk.transpose(), -b.half_extents[k];
        h[6 + 2 * k] = bk.dot(e);
        h[6 + 2 * k + 1] = -bk.dot(e);
    }
    Eigen::Matrix<double, kFree, 1> z0;
    z0 << 0.0, 0.0, 0.0, s0;
    const Eigen::Matrix<double, kRows, 1> rhs = h - g * z0;

    Eigen::Matrix<double, kRows + 1, kCols + 1> t;
    t.setZero();
    t.block<kRows, kFree>(0, 0) = g;
    t.block<kRows, kFree>(0, kFree) = -g;
    t.block<kRows, kRows>(0, 2 * kFree).setIdentity();
    t.block<kRows, 1>(0, kCols) = rhs;
    // Objective row holds reduced costs of minimizing w_s = w_s+ - w_s-.
    t(kRows, kFree - 1) = 1.0;
    t(kRows, 2 * kFree - 1) = -1.0;

    std::array<int, kRows> basis{};
    for (int r = 0; r < kRows; ++r) basis[static_cast<std::size_t>(r)] = 2 * kFree + r;

    constexpr double kTol = 1e-12;
    for (int iter = 0; iter < 200; ++iter) {
        int enter = -1;
        for (int c = 0; c < kCols; ++c)
            if (t(kRows, c) < -kTol) {
                enter = c;
                break;
            }
        if (enter < 0) {
            Eigen::Matrix<double, 2 * kFree, 1> w = Eigen::Matrix<double, 2 * kFree, 1>::Zero();
            for (int r = 0; r < kRows; ++r) {
                const int bc = basis[static_cast<std::size_t>(r)];
                if (bc < 2 * kFree) w[bc] = t(r, kCols);
            }
            res.scaling = s0 + w[kFree - 1] - w[2 * kFree - 1];
            if (!std::isfinite(res.scaling)) res.status = LpStatus::NumericalFailure;
            return res;
        }
        int leave = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < kRows; ++r) {
            if (t(r, enter) > kTol) {
                const double ratio = t(r, kCols) / t(r, enter);
                if (ratio < best - kTol ||
                    (ratio <= best + kTol && leave >= 0 &&
                     basis[static_cast<std::size_t>(r)] < basis[static_cast<std::size_t>(leave)])) {
                    best = std::min(best, ratio);
                    leave = r;
                }
            }
        }
        if (leave < 0) {
            res.status = LpStatus::NumericalFailure;
            return res;
        }
        t.row(leave) /= t(leave, enter);
        for (int r = 0; r <= kRows; ++r)
            if (r != leave && t(r, enter) != 0.0) t.row(r) -= t(r, enter) * t.row(leave);
        basis[static_cast<std::size_t>(leave)] = enter;
        ++res.pivots;
    }
    res.status = LpStatus::NumericalFailure;
    return res;
}

}  // namespace t3cbf::geom
