#include "t3cbf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace t3cbf::geom {

using smooth::AbsVariant;
using smooth::MaxVariant;
using smooth::SmoothingParams;

Matrix3d rot_x(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Matrix3d r;
    r << 1, 0, 0, 0, c, -s, 0, s, c;
    return r;
}

Matrix3d rot_y(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Matrix3d r;
    r << c, 0, s, 0, 1, 0, -s, 0, c;
    return r;
}

Matrix3d rot_z(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Matrix3d r;
    r << c, -s, 0, s, c, 0, 0, 0, 1;
    return r;
}

Matrix3d rot_zyx(double yaw, double pitch, double roll) { return rot_z(yaw) * rot_y(pitch) * rot_x(roll); }

void Cuboid::validate() const {
    if (!center.allFinite() || !rotation.allFinite() || !half_extents.allFinite())
        throw std::invalid_argument("cuboid: non-finite field");
    if ((rotation.transpose() * rotation - Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
        throw std::invalid_argument("cuboid: rotation is not orthonormal");
    if (rotation.determinant() < 0.0) throw std::invalid_argument("cuboid: rotation has det -1");
    if ((half_extents.array() <= 0.0).any()) throw std::invalid_argument("cuboid: half extents must be positive");
}

bool Cuboid::contains(const Vector3d& p, double tol) const {
    const Vector3d local = rotation.transpose() * (p - center);
    return (local.cwiseAbs().array() <= half_extents.array() + tol).all();
}

int AxisSet::degenerate_count() const {
    return static_cast<int>(std::count(degenerate.begin(), degenerate.end(), true));
}

AxisSet candidate_axes(const Cuboid& a, const Cuboid& b) {
    AxisSet out;
    for (int k = 0; k < 3; ++k) {
        out.axes[static_cast<std::size_t>(k)] = a.rotation.col(k);
        out.axes[static_cast<std::size_t>(3 + k)] = b.rotation.col(k);
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const auto idx = static_cast<std::size_t>(6 + 3 * i + j);
            const Vector3d c = a.rotation.col(i).cross(b.rotation.col(j));
            const double norm = c.norm();
            if (norm < kParallelEdgeTol) {
                out.axes[idx] = a.rotation.col(i);
                out.degenerate[idx] = true;
            } else {
                out.axes[idx] = c / norm;
            }
        }
    }
    return out;
}

double sat_margin(const Cuboid& a, const Cuboid& b) {
    // Work in A's frame: R = A^T B, t = A^T (cB - cA).
    const Matrix3d r = a.rotation.transpose() * b.rotation;
    const Vector3d t = a.rotation.transpose() * (b.center - a.center);
    const Matrix3d absr = r.cwiseAbs();
    const Vector3d& ea = a.half_extents;
    const Vector3d& eb = b.half_extents;

    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        const double y = std::abs(t[i]) - ea[i] - absr.row(i).dot(eb);
        best = std::max(best, y);
    }
    for (int j = 0; j < 3; ++j) {
        const double y = std::abs(r.col(j).dot(t)) - absr.col(j).dot(ea) - eb[j];
        best = std::max(best, y);
    }
    for (int i = 0; i < 3; ++i) {
        const int i1 = (i + 1) % 3, i2 = (i + 2) % 3;
        for (int j = 0; j < 3; ++j) {
            // |A_i x B_j|^2 written without cancellation.
            const double s2 = r(i1, j) * r(i1, j) + r(i2, j) * r(i2, j);
            // Degenerate axes fall back to A's face normal, already covered above.
            if (s2 < kParallelEdgeTol * kParallelEdgeTol) continue;
            const int j1 = (j + 1) % 3, j2 = (j + 2) % 3;
            const double proj = std::abs(t[i2] * r(i1, j) - t[i1] * r(i2, j));
            const double ra = ea[i1] * absr(i2, j) + ea[i2] * absr(i1, j);
            const double rb = eb[j1] * absr(i, j2) + eb[j2] * absr(i, j1);
            const double num = proj - ra - rb;
            // num / |c| can only beat `best` in these cases; skip the sqrt otherwise.
            if (num <= 0.0 ? num <= best : (best >= 0.0 && num * num <= best * best * s2)) continue;
            best = std::max(best, num / std::sqrt(s2));
        }
    }
    return best;
}

bool sat_intersect(const Cuboid& a, const Cuboid& b) {
    const Matrix3d r = a.rotation.transpose() * b.rotation;
    const Vector3d t = a.rotation.transpose() * (b.center - a.center);
    const Matrix3d absr = r.cwiseAbs();
    const Vector3d& ea = a.half_extents;
    const Vector3d& eb = b.half_extents;
    for (int i = 0; i < 3; ++i)
        if (std::abs(t[i]) > ea[i] + absr.row(i).dot(eb)) return false;
    for (int j = 0; j < 3; ++j)
        if (std::abs(r.col(j).dot(t)) > absr.col(j).dot(ea) + eb[j]) return false;
    for (int i = 0; i < 3; ++i) {
        const int i1 = (i + 1) % 3, i2 = (i + 2) % 3;
        for (int j = 0; j < 3; ++j) {
            if (r(i1, j) * r(i1, j) + r(i2, j) * r(i2, j) < kParallelEdgeTol * kParallelEdgeTol) continue;
            const int j1 = (j + 1) % 3, j2 = (j + 2) % 3;
            const double proj = std::abs(t[i2] * r(i1, j) - t[i1] * r(i2, j));
            const double ra = ea[i1] * absr(i2, j) + ea[i2] * absr(i1, j);
            const double rb = eb[j1] * absr(i, j2) + eb[j2] * absr(i, j1);
            if (proj > ra + rb) return false;
        }
    }
    return true;
}

PoseParameterization::PoseParameterization(Body body, std::initializer_list<PoseParam> params) : body_(body) {
    if (params.size() == 0 || params.size() > 5) throw std::invalid_argument("pose parameterization: 1..5 parameters");
    for (PoseParam p : params) {
        for (int i = 0; i < count_; ++i)
            if (params_[static_cast<std::size_t>(i)] == p)
                throw std::invalid_argument("pose parameterization: duplicate parameter");
        params_[static_cast<std::size_t>(count_++)] = p;
    }
}

bool PoseParameterization::has_rotation() const {
    for (int i = 0; i < count_; ++i) {
        const PoseParam p = params_[static_cast<std::size_t>(i)];
        if (p == PoseParam::Yaw || p == PoseParam::Pitch) return true;
    }
    return false;
}

Cuboid PoseParameterization::perturb(const Cuboid& c, const Eigen::Ref<const Eigen::VectorXd>& delta) const {
    Cuboid out = c;
    double dyaw = 0.0, dpitch = 0.0;
    for (int i = 0; i < count_; ++i) {
        switch (params_[static_cast<std::size_t>(i)]) {
            case PoseParam::X: out.center.x() += delta[i]; break;
            case PoseParam::Y: out.center.y() += delta[i]; break;
            case PoseParam::Z: out.center.z() += delta[i]; break;
            case PoseParam::Yaw: dyaw = delta[i]; break;
            case PoseParam::Pitch: dpitch = delta[i]; break;
        }
    }
    out.rotation = rot_z(dyaw) * c.rotation * rot_y(dpitch);
    return out;
}

namespace {

constexpr int kAxes = 15;
// Each axis keeps four extent terms; the other two project an edge direction
// onto an axis orthogonal to it and vanish identically.
constexpr int kExt = 4;

struct PairFrame {
    Matrix3d r;  // A^T B
    Vector3d d;  // A^T (cB - cA)
    Vector3d ea, eb;

    Vector3d col(int c) const { return c < 3 ? Vector3d(Vector3d::Unit(c)) : Vector3d(r.col(c - 3)); }
    double extent(int c) const { return c < 3 ? ea[c] : eb[c - 3]; }
};

PairFrame express_in_a(const Cuboid& a, const Cuboid& b) {
    return {a.rotation.transpose() * b.rotation, a.rotation.transpose() * (b.center - a.center), a.half_extents,
            b.half_extents};
}

struct AxisTable {
    std::array<double, kAxes> center{};  // n . d
    std::array<std::array<double, kExt>, kAxes> ext{};  // extent_c (n . col_c)
    std::array<double, kAxes> exact{};   // per-axis SAT value
    // Axes whose smooth-max weight can be nonzero, in ascending order.
    std::array<std::uint8_t, kAxes> order{};
    int count = 0;
};

// Bounds on (smooth axis value - exact axis value): [-lo, hi].
void smooth_axis_band(const SmoothingParams& p, double* lo, double* hi) {
    if (p.abs_variant == AbsVariant::XTanh) {
        *lo = 1.0 / p.alpha_abs;
        *hi = kExt / p.alpha_abs;
    } else {
        *lo = (kExt + 2) * p.eps_sqrt;
        *hi = p.eps_sqrt;
    }
}

AxisTable build_axes(const PairFrame& f, const SmoothingParams& p) {
    AxisTable t;
    const Matrix3d& r = f.r;
    const Vector3d& d = f.d;
    auto face_a = [&](std::size_t s, int i) {
        t.center[s] = d[i];
        t.ext[s] = {f.ea[i], f.eb[0] * r(i, 0), f.eb[1] * r(i, 1), f.eb[2] * r(i, 2)};
    };
    for (int i = 0; i < 3; ++i) face_a(static_cast<std::size_t>(i), i);
    for (int j = 0; j < 3; ++j) {
        const auto s = static_cast<std::size_t>(3 + j);
        t.center[s] = r(0, j) * d[0] + r(1, j) * d[1] + r(2, j) * d[2];
        t.ext[s] = {f.ea[0] * r(0, j), f.ea[1] * r(1, j), f.ea[2] * r(2, j), f.eb[j]};
    }
    for (int i = 0; i < 3; ++i) {
        const int i1 = (i + 1) % 3, i2 = (i + 2) % 3;
        for (int j = 0; j < 3; ++j) {
            const auto s = static_cast<std::size_t>(6 + 3 * i + j);
            // A_i x B_j has components 0, -r(i2, j), r(i1, j) at i, i1, i2.
            const double len = std::sqrt(r(i1, j) * r(i1, j) + r(i2, j) * r(i2, j));
            if (len < kParallelEdgeTol) {
                face_a(s, i);
                continue;
            }
            const int j1 = (j + 1) % 3, j2 = (j + 2) % 3;
            const double inv = 1.0 / len;
            const double n1 = -r(i2, j) * inv, n2 = r(i1, j) * inv;
            t.center[s] = n1 * d[i1] + n2 * d[i2];
            // n . B_j1 = r(i, j2) / len and n . B_j2 = -r(i, j1) / len.
            t.ext[s] = {f.ea[i1] * n1, f.ea[i2] * n2, f.eb[j1] * r(i, j2) * inv, -f.eb[j2] * r(i, j1) * inv};
        }
    }
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < kAxes; ++i) {
        const auto s = static_cast<std::size_t>(i);
        const auto& e = t.ext[s];
        const double y = std::abs(t.center[s]) - std::abs(e[0]) - std::abs(e[1]) - std::abs(e[2]) - std::abs(e[3]);
        t.exact[s] = y;
        best = std::max(best, y);
    }
    // Axes this far below the maximum get an exactly zero smooth-max weight.
    double lo = 0.0, hi = 0.0;
    smooth_axis_band(p, &lo, &hi);
    const double cut = best - lo - hi - (-smooth::detail::kExpCutoff) / p.alpha_max - 1e-9;
    for (int i = 0; i < kAxes; ++i) {
        t.order[static_cast<std::size_t>(t.count)] = static_cast<std::uint8_t>(i);
        t.count += t.exact[static_cast<std::size_t>(i)] >= cut ? 1 : 0;
    }
    return t;
}

struct AxisGeometry {
    Vector3d n;
    double len = 1.0;    // cross-product length before normalization
    bool cross = false;  // non-degenerate edge-edge axis
    std::array<std::uint8_t, kExt> col{};  // 0..2 columns of A, 3..5 of B; matches AxisTable::ext
};

AxisGeometry axis_geometry(const PairFrame& f, int idx) {
    AxisGeometry g;
    auto face_a = [&](int i) {
        g.n = Vector3d::Unit(i);
        g.col = {static_cast<std::uint8_t>(i), 3, 4, 5};
    };
    if (idx < 3) {
        face_a(idx);
    } else if (idx < 6) {
        g.n = f.r.col(idx - 3);
        g.col = {0, 1, 2, static_cast<std::uint8_t>(idx)};
    } else {
        const int i = (idx - 6) / 3, j = (idx - 6) % 3;
        const int i1 = (i + 1) % 3, i2 = (i + 2) % 3;
        const double len = std::sqrt(f.r(i1, j) * f.r(i1, j) + f.r(i2, j) * f.r(i2, j));
        if (len < kParallelEdgeTol) {
            face_a(i);
            return g;
        }
        const double inv = 1.0 / len;
        g.n[i] = 0.0;
        g.n[i1] = -f.r(i2, j) * inv;
        g.n[i2] = f.r(i1, j) * inv;
        g.len = len;
        g.cross = true;
        g.col = {static_cast<std::uint8_t>(i1), static_cast<std::uint8_t>(i2), static_cast<std::uint8_t>(3 + (j + 1) % 3),
                 static_cast<std::uint8_t>(3 + (j + 2) % 3)};
    }
    return g;
}

inline double sabs_offset(const SmoothingParams& p) {
    // The two dropped extent terms contribute -2 eps under the sqrt surrogate.
    return p.abs_variant == AbsVariant::Sqrt ? -2.0 * p.eps_sqrt : 0.0;
}

template <AbsVariant V>
inline double sabs_value_v(double x, const SmoothingParams& p) {
    if constexpr (V == AbsVariant::XTanh) return smooth::detail::xtanh_value(x, p.alpha_abs);
    else return smooth::detail::sqrt_abs_value(x, p.eps_sqrt);
}

// Everything in an axis value except the center term.
template <AbsVariant V>
inline double extent_part(const AxisTable& t, std::size_t s, const SmoothingParams& p) {
    const auto& e = t.ext[s];
    return sabs_offset(p) - sabs_value_v<V>(e[0], p) - sabs_value_v<V>(e[1], p) - sabs_value_v<V>(e[2], p) -
           sabs_value_v<V>(e[3], p);
}

inline double extent_part(const AxisTable& t, std::size_t s, const SmoothingParams& p) {
    return p.abs_variant == AbsVariant::XTanh ? extent_part<AbsVariant::XTanh>(t, s, p)
                                              : extent_part<AbsVariant::Sqrt>(t, s, p);
}

template <AbsVariant V>
inline double axis_value(const AxisTable& t, std::size_t s, const SmoothingParams& p) {
    return sabs_value_v<V>(t.center[s], p) + extent_part<V>(t, s, p);
}

template <AbsVariant V>
void axis_values(const AxisTable& t, const SmoothingParams& p, double* y) {
    for (int c = 0; c < t.count; ++c) y[c] = axis_value<V>(t, t.order[static_cast<std::size_t>(c)], p);
}

inline double smax_value(const double* y, int n, const SmoothingParams& p) {
    return p.max_variant == MaxVariant::LSE ? smooth::detail::lse_value(y, n, p.alpha_max)
                                            : smooth::detail::boltzmann_value(y, n, p.alpha_max);
}

double ssat_raw_value(const PairFrame& f, const SmoothingParams& p) {
    const AxisTable t = build_axes(f, p);
    std::array<double, kAxes> y{};
    if (p.abs_variant == AbsVariant::XTanh) axis_values<AbsVariant::XTanh>(t, p, y.data());
    else axis_values<AbsVariant::Sqrt>(t, p, y.data());
    return smax_value(y.data(), t.count, p);
}

template <int K>
using Vec = Eigen::Matrix<double, K, 1>;
template <int K>
using Mat = Eigen::Matrix<double, K, K>;

// Smooth-max chain: given per-axis values/gradients/Hessians, produce h, h_p, h_pq.
template <int K>
double smax_chain(const SmoothingParams& p, int n, const double* y, const Vec<K>* yp, const Mat<K>* ypq, Vec<K>& grad,
                  Mat<K>& hess) {
    std::array<double, kAxes> w{};
    grad.setZero();
    hess.setZero();
    const double alpha = p.alpha_max;
    if (p.max_variant == MaxVariant::LSE) {
        const double h = smooth::detail::lse(y, n, alpha, w.data());
        for (int i = 0; i < n; ++i) {
            const double wi = w[static_cast<std::size_t>(i)];
            if (wi == 0.0) continue;
            grad += wi * yp[i];
            hess += wi * (ypq[i] + alpha * yp[i] * yp[i].transpose());
        }
        hess -= alpha * grad * grad.transpose();
        return h;
    }
    std::array<double, kAxes> pr{};
    const double b = smooth::detail::boltzmann(y, n, alpha, pr.data());
    Vec<K> sum_pa = Vec<K>::Zero(), sum_pfa = Vec<K>::Zero();
    for (int i = 0; i < n; ++i) {
        const auto s = static_cast<std::size_t>(i);
        if (pr[s] == 0.0) continue;
        const double fi = 1.0 + alpha * (y[i] - b);
        const double gi = pr[s] * fi;
        grad += gi * yp[i];
        sum_pa += pr[s] * yp[i];
        sum_pfa += pr[s] * fi * yp[i];
        hess += gi * ypq[i] + alpha * pr[s] * (fi + 1.0) * yp[i] * yp[i].transpose();
    }
    hess -= alpha * (sum_pfa * sum_pa.transpose() + sum_pa * grad.transpose());
    hess = (0.5 * (hess + hess.transpose())).eval();
    return b;
}

// Second-order kinematics of a unit vector rotating with the designated body
// under (yaw, pitch).
struct MovingVector {
    Vector3d v;
    std::array<Vector3d, 2> dv;
    std::array<std::array<Vector3d, 2>, 2> ddv;
};

MovingVector make_moving(const Vector3d& v, const Vector3d& w_yaw, const Vector3d& w_pitch) {
    MovingVector m;
    m.v = v;
    m.dv[0] = w_yaw.cross(v);
    m.dv[1] = w_pitch.cross(v);
    m.ddv[0][0] = w_yaw.cross(m.dv[0]);
    m.ddv[1][1] = w_pitch.cross(m.dv[1]);
    // yaw is the outer rotation
    m.ddv[0][1] = m.ddv[1][0] = w_yaw.cross(m.dv[1]);
    return m;
}

int param_slot(PoseParam p) { return static_cast<int>(p); }

template <int K>
void gather(const PoseParameterization& wrt, const Vec<K>& g, const Mat<K>& h, CollisionMargin& out) {
    const int k = wrt.size();
    out.grad.resize(k);
    out.hessian.resize(k, k);
    for (int p = 0; p < k; ++p) {
        const int sp = param_slot(wrt[p]);
        out.grad[p] = g[sp];
        for (int q = 0; q < k; ++q) out.hessian(p, q) = h(sp, param_slot(wrt[q]));
    }
}

void translation_margin(const PairFrame& f, const Cuboid& a, const SmoothingParams& sp, double d_sign,
                        const PoseParameterization& wrt, CollisionMargin& out) {
    const AxisTable t = build_axes(f, sp);
    std::array<Vec<3>, 3> dt;
    for (int m = 0; m < 3; ++m) dt[static_cast<std::size_t>(m)] = d_sign * a.rotation.row(m).transpose();
    std::array<double, kAxes> y{};
    std::array<Vec<3>, kAxes> yp;
    std::array<Mat<3>, kAxes> ypq;
    for (int ci = 0; ci < t.count; ++ci) {
        const auto s = static_cast<std::size_t>(t.order[static_cast<std::size_t>(ci)]);
        const smooth::SmoothAbs c = smooth::detail::sabs(t.center[s], sp.abs_variant, sp);
        y[static_cast<std::size_t>(ci)] = c.value + extent_part(t, s, sp);
        const Vector3d n = axis_geometry(f, static_cast<int>(s)).n;
        const Vec<3> proj(n.dot(dt[0]), n.dot(dt[1]), n.dot(dt[2]));
        yp[static_cast<std::size_t>(ci)] = c.d1 * proj;
        ypq[static_cast<std::size_t>(ci)] = c.d2 * proj * proj.transpose();
    }
    Vec<3> g;
    Mat<3> h;
    out.h = smax_chain<3>(sp, t.count, y.data(), yp.data(), ypq.data(), g, h);
    gather<3>(wrt, g, h, out);
}

void pose_margin(const PairFrame& f, const Cuboid& a, const SmoothingParams& sp, bool mover_is_a,
                 const PoseParameterization& wrt, CollisionMargin& out) {
    const AxisTable t = build_axes(f, sp);
    const double d_sign = mover_is_a ? -1.0 : 1.0;
    std::array<Vector3d, 3> dt;
    for (int m = 0; m < 3; ++m) dt[static_cast<std::size_t>(m)] = d_sign * a.rotation.row(m).transpose();

    // Rotation generators in A's frame: world z, and the mover's own y axis.
    const Vector3d w_yaw = a.rotation.row(2).transpose();
    const Vector3d w_pitch = f.col(mover_is_a ? 1 : 4);
    const int mover_base = mover_is_a ? 0 : 3;
    std::array<MovingVector, 3> mcols;
    for (int m = 0; m < 3; ++m) mcols[static_cast<std::size_t>(m)] = make_moving(f.col(mover_base + m), w_yaw, w_pitch);
    auto moving_col = [&](int c) -> const MovingVector* {
        return c >= mover_base && c < mover_base + 3 ? &mcols[static_cast<std::size_t>(c - mover_base)] : nullptr;
    };

    std::array<double, kAxes> y{};
    std::array<Vec<5>, kAxes> yp;
    std::array<Mat<5>, kAxes> ypq;
    for (int ci = 0; ci < t.count; ++ci) {
        const int i = t.order[static_cast<std::size_t>(ci)];
        const auto si = static_cast<std::size_t>(i);
        // Axis derivatives under (yaw, pitch); translations leave it fixed.
        const AxisGeometry geo = axis_geometry(f, i);
        const Vector3d& n = geo.n;
        std::array<Vector3d, 2> np;
        std::array<std::array<Vector3d, 2>, 2> npq;
        for (auto& v : np) v.setZero();
        for (auto& row : npq)
            for (auto& v : row) v.setZero();
        if (geo.cross) {
            const int ia = (i - 6) / 3, jb = 3 + (i - 6) % 3;
            const MovingVector* ma = moving_col(ia);
            const MovingVector* mb = moving_col(jb);
            const Vector3d va = f.col(ia), vb = f.col(jb);
            const double len = geo.len;
            std::array<Vector3d, 2> cp;
            std::array<double, 2> lp{};
            for (int r = 0; r < 2; ++r) {
                const auto s = static_cast<std::size_t>(r);
                cp[s] = ma ? Vector3d(ma->dv[s].cross(vb)) : Vector3d(va.cross(mb->dv[s]));
                lp[s] = n.dot(cp[s]);
                np[s] = (cp[s] - n * lp[s]) / len;
            }
            for (int r = 0; r < 2; ++r)
                for (int q = r; q < 2; ++q) {
                    const auto s = static_cast<std::size_t>(r), u = static_cast<std::size_t>(q);
                    const Vector3d cpq = ma ? Vector3d(ma->ddv[s][u].cross(vb)) : Vector3d(va.cross(mb->ddv[s][u]));
                    const double lpq = np[u].dot(cp[s]) + n.dot(cpq);
                    npq[s][u] = npq[u][s] = (cpq - lpq * n - lp[u] * np[s] - lp[s] * np[u]) / len;
                }
        } else {
            // Face axis (or the A-face fallback of a parallel edge pair).
            const int c = i < 3 ? i : (i < 6 ? i : (i - 6) / 3);
            if (const MovingVector* mv = moving_col(c)) {
                np = mv->dv;
                npq = mv->ddv;
            }
        }

        Vec<5> g;
        Mat<5> hm;
        double yv = sabs_offset(sp);
        {
            // Center term: u = d, translated by dt, not rotated.
            Vec<5> wp;
            Mat<5> wpq = Mat<5>::Zero();
            for (int m = 0; m < 3; ++m) wp[m] = n.dot(dt[static_cast<std::size_t>(m)]);
            for (int r = 0; r < 2; ++r) {
                wp[3 + r] = np[static_cast<std::size_t>(r)].dot(f.d);
                for (int m = 0; m < 3; ++m)
                    wpq(m, 3 + r) = wpq(3 + r, m) = np[static_cast<std::size_t>(r)].dot(dt[static_cast<std::size_t>(m)]);
                for (int q = 0; q < 2; ++q) wpq(3 + r, 3 + q) = npq[static_cast<std::size_t>(r)][static_cast<std::size_t>(q)].dot(f.d);
            }
            const smooth::SmoothAbs sa = smooth::detail::sabs(t.center[si], sp.abs_variant, sp);
            yv += sa.value;
            g = sa.d1 * wp;
            hm = sa.d2 * wp * wp.transpose() + sa.d1 * wpq;
        }
        // Extent terms only move with the rotation, so they touch the
        // (yaw, pitch) block alone.
        Vec<2> ge = Vec<2>::Zero();
        Mat<2> he = Mat<2>::Zero();
        for (int k = 0; k < kExt; ++k) {
            const int c = geo.col[static_cast<std::size_t>(k)];
            const double e = f.extent(c);
            const MovingVector* mv = moving_col(c);
            const Vector3d u = e * f.col(c);
            Vec<2> wp;
            Mat<2> wpq;
            for (int r = 0; r < 2; ++r) {
                const auto s = static_cast<std::size_t>(r);
                wp[r] = np[s].dot(u) + (mv ? e * n.dot(mv->dv[s]) : 0.0);
                for (int q = r; q < 2; ++q) {
                    const auto v = static_cast<std::size_t>(q);
                    double w = npq[s][v].dot(u);
                    if (mv) w += e * (np[s].dot(mv->dv[v]) + np[v].dot(mv->dv[s]) + n.dot(mv->ddv[s][v]));
                    wpq(r, q) = wpq(q, r) = w;
                }
            }
            const smooth::SmoothAbs sa = smooth::detail::sabs(t.ext[si][static_cast<std::size_t>(k)], sp.abs_variant, sp);
            yv -= sa.value;
            ge += sa.d1 * wp;
            he += sa.d2 * wp * wp.transpose() + sa.d1 * wpq;
        }
        g.tail<2>() -= ge;
        hm.bottomRightCorner<2, 2>() -= he;
        const auto cs = static_cast<std::size_t>(ci);
        y[cs] = yv;
        yp[cs] = g;
        ypq[cs] = hm;
    }
    Vec<5> g;
    Mat<5> h;
    out.h = smax_chain<5>(sp, t.count, y.data(), yp.data(), ypq.data(), g, h);
    gather<5>(wrt, g, h, out);
}

}  // namespace

double ssat_value(const Cuboid& a, const Cuboid& b, const SmoothingParams& params) {
    if (std::isfinite(params.switch_threshold)) {
        const double exact = sat_margin(a, b);
        if (exact > params.switch_threshold) return exact;
    }
    return ssat_raw_value(express_in_a(a, b), params);
}

CollisionMargin ssat_margin(const Cuboid& a, const Cuboid& b, const SmoothingParams& params,
                            const PoseParameterization& wrt) {
    const PairFrame f = express_in_a(a, b);
    const bool mover_is_a = wrt.body() == Body::A;
    CollisionMargin out;
    if (wrt.has_rotation()) pose_margin(f, a, params, mover_is_a, wrt, out);
    else translation_margin(f, a, params, mover_is_a ? -1.0 : 1.0, wrt, out);
    if (std::isfinite(params.switch_threshold)) {
        const double exact = sat_margin(a, b);
        if (exact > params.switch_threshold) out.h = exact;
    }
    return out;
}

CollisionMargin superellipsoid_margin(const Vector3d& point, const Cuboid& box, int exponent_n, double inflation) {
    if (exponent_n < 1) throw std::invalid_argument("superellipsoid: N must be >= 1");
    if (inflation < 0.0) throw std::invalid_argument("superellipsoid: inflation must be non-negative");
    const Vector3d semi = box.half_extents.array() + inflation;
    if ((semi.array() <= 0.0).any()) throw std::invalid_argument("superellipsoid: semi-axes must be positive");

    const Vector3d local = box.rotation.transpose() * (point - box.center);
    const int e = 2 * exponent_n;
    Vector3d g_local, h_local;
    double h = -1.0;
    for (int k = 0; k < 3; ++k) {
        const double r = local[k] / semi[k];
        double pw = 1.0;  // r^(e-2)
        for (int i = 0; i < e - 2; ++i) pw *= r;
        h += pw * r * r;
        g_local[k] = e * pw * r / semi[k];
        h_local[k] = e * (e - 1) * pw / (semi[k] * semi[k]);
    }
    CollisionMargin out;
    out.h = h;
    out.grad = box.rotation * g_local;
    out.hessian = box.rotation * h_local.asDiagonal() * box.rotation.transpose();
    return out;
}

}  // namespace t3cbf::geom
