#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

#include <Eigen/Dense>

#include "t3cbf/smoothmath.hpp"

namespace t3cbf::geom {

using Eigen::Matrix3d;
using Eigen::Vector3d;

Matrix3d rot_x(double angle);
Matrix3d rot_y(double angle);
Matrix3d rot_z(double angle);
/// R_z(yaw) * R_y(pitch) * R_x(roll)
Matrix3d rot_zyx(double yaw, double pitch, double roll);

struct Cuboid {
    Vector3d center = Vector3d::Zero();
    Matrix3d rotation = Matrix3d::Identity();
    Vector3d half_extents = Vector3d::Constant(0.5);

    Cuboid() = default;
    Cuboid(const Vector3d& c, const Matrix3d& r, const Vector3d& h) : center(c), rotation(r), half_extents(h) {}

    /// Throws std::invalid_argument if the rotation is not proper orthonormal
    /// (to 1e-9) or an extent is not positive.
    void validate() const;

    Cuboid inflated(double margin) const {
        return {center, rotation, half_extents.array() + margin};
    }
    bool contains(const Vector3d& p, double tol = 0.0) const;
};

/// The 15 SAT candidate axes: A's face normals, B's face normals, then
/// cross(A_i, B_j) for i, j in row-major order.
struct AxisSet {
    std::array<Vector3d, 15> axes;
    std::array<bool, 15> degenerate{};
    int degenerate_count() const;
};

inline constexpr double kParallelEdgeTol = 1e-8;

AxisSet candidate_axes(const Cuboid& a, const Cuboid& b);

/// Exact separating-axis margin. > 0 iff the boxes are disjoint.
double sat_margin(const Cuboid& a, const Cuboid& b);

/// Boolean separating-axis test that stops at the first separating axis.
/// Agrees with sat_margin(a, b) <= 0.
bool sat_intersect(const Cuboid& a, const Cuboid& b);

enum class Body : std::uint8_t { A, B };
enum class PoseParam : std::uint8_t { X, Y, Z, Yaw, Pitch };

/// Which body's pose the margin is differentiated against. Translations are
/// world-frame; yaw rotates about world z and pitch about the body's own y
/// axis, i.e. rotation(dyaw, dpitch) = R_z(dyaw) * R * R_y(dpitch).
class PoseParameterization {
public:
    PoseParameterization(Body body, std::initializer_list<PoseParam> params);

    static PoseParameterization translation(Body body) {
        return {body, {PoseParam::X, PoseParam::Y, PoseParam::Z}};
    }
    static PoseParameterization full(Body body) {
        return {body, {PoseParam::X, PoseParam::Y, PoseParam::Z, PoseParam::Yaw, PoseParam::Pitch}};
    }

    Body body() const { return body_; }
    int size() const { return count_; }
    PoseParam operator[](int i) const { return params_[static_cast<std::size_t>(i)]; }
    bool has_rotation() const;

    /// Applies a parameter perturbation to the designated cuboid.
    Cuboid perturb(const Cuboid& c, const Eigen::Ref<const Eigen::VectorXd>& delta) const;

private:
    Body body_;
    std::array<PoseParam, 5> params_{};
    int count_ = 0;
};

using ParamVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 5, 1>;
using ParamMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 5, 5>;

struct CollisionMargin {
    double h = 0.0;
    ParamVector grad;
    ParamMatrix hessian;
};

/// Smooth SAT value only (no derivatives, switching honored).
double ssat_value(const Cuboid& a, const Cuboid& b, const smooth::SmoothingParams& params);

/// Smooth SAT margin with analytic gradient and Hessian with respect to `wrt`.
/// When the exact margin exceeds params.switch_threshold, h is the exact SAT
/// value while the derivatives still come from the smooth composite.
CollisionMargin ssat_margin(const Cuboid& a, const Cuboid& b, const smooth::SmoothingParams& params,
                            const PoseParameterization& wrt);

/// Superellipsoid level-set margin of a point against a box inflated by
/// `inflation`; derivatives are with respect to the world point.
CollisionMargin superellipsoid_margin(const Vector3d& point, const Cuboid& box, int exponent_n,
                                      double inflation);

/// Boolean GJK on the Minkowski difference with box support maps. Falls back
/// to the SAT sign on degenerate contact or after 64 iterations.
bool gjk_intersect(const Cuboid& a, const Cuboid& b);

struct GjkDiagnostics {
    bool intersect = false;
    int iterations = 0;
    bool used_fallback = false;
};
GjkDiagnostics gjk_intersect_diag(const Cuboid& a, const Cuboid& b);

enum class LpStatus : std::uint8_t { Optimal, NumericalFailure };

struct LpResult {
    double scaling = 0.0;
    LpStatus status = LpStatus::Optimal;
    int pivots = 0;
};

/// Minimum uniform scaling s such that both boxes, scaled by s about their
/// centers, share a point. s <= 1 iff the boxes intersect.
LpResult lp_min_scaling(const Cuboid& a, const Cuboid& b);

}  // namespace t3cbf::geom
