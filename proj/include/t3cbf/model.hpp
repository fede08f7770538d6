#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

#include "t3cbf/geometry.hpp"

namespace t3cbf::model {

using Eigen::Vector2d;
using Eigen::Vector3d;

inline constexpr int kStateDim = 36;
inline constexpr int kInputDim = 17;
inline constexpr int kLegCount = 6;

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using InputVector = Eigen::Matrix<double, kInputDim, 1>;
using InputMatrix = Eigen::Matrix<double, kStateDim, kInputDim>;

enum class Leg : std::uint8_t { LF, MF, RF, LR, MR, RR };

inline constexpr std::array<Leg, kLegCount> kAllLegs{Leg::LF, Leg::MF, Leg::RF, Leg::LR, Leg::MR, Leg::RR};

inline int leg_index(Leg leg) { return static_cast<int>(leg); }
std::string_view leg_name(Leg leg);

/// Flat vector layout: origin [p(3), yaw, speed, yaw_rate], body [x, z, pitch,
/// vx, vz, pitch_rate], then per foot [x, z, vx, vz].
namespace idx {
inline constexpr int kPx = 0;
inline constexpr int kPy = 1;
inline constexpr int kPz = 2;
inline constexpr int kYaw = 3;
inline constexpr int kSpeed = 4;
inline constexpr int kYawRate = 5;
inline constexpr int kBodyX = 6;
inline constexpr int kBodyZ = 7;
inline constexpr int kPitch = 8;
inline constexpr int kBodyVx = 9;
inline constexpr int kBodyVz = 10;
inline constexpr int kPitchRate = 11;
inline constexpr int foot_x(int leg) { return 12 + 4 * leg; }
inline constexpr int foot_z(int leg) { return 13 + 4 * leg; }
inline constexpr int foot_vx(int leg) { return 14 + 4 * leg; }
inline constexpr int foot_vz(int leg) { return 15 + 4 * leg; }

inline constexpr int kAccel = 0;
inline constexpr int kYawAccel = 1;
inline constexpr int kBodyAx = 2;
inline constexpr int kBodyAz = 3;
inline constexpr int kPitchAccel = 4;
inline constexpr int foot_ax(int leg) { return 5 + 2 * leg; }
inline constexpr int foot_az(int leg) { return 6 + 2 * leg; }
}  // namespace idx

struct RobotState {
    StateVector vec = StateVector::Zero();

    Vector3d p() const { return vec.segment<3>(idx::kPx); }
    double yaw() const { return vec[idx::kYaw]; }
    double speed() const { return vec[idx::kSpeed]; }
    double yaw_rate() const { return vec[idx::kYawRate]; }
    double body_x() const { return vec[idx::kBodyX]; }
    double body_z() const { return vec[idx::kBodyZ]; }
    double pitch() const { return vec[idx::kPitch]; }
    double& operator[](int i) { return vec[i]; }
    double operator[](int i) const { return vec[i]; }

    bool finite() const { return vec.allFinite(); }
};

struct RobotInput {
    InputVector vec = InputVector::Zero();
    double& operator[](int i) { return vec[i]; }
    double operator[](int i) const { return vec[i]; }
};

struct LegGeometry {
    Leg id = Leg::LF;
    /// Hip joint position in the body frame.
    Vector3d anchor = Vector3d::Zero();
    double hip_min = 0.0;
    double hip_max = 0.0;
    double knee_min = 0.0;
    double knee_max = 0.0;
    double wheel_radius = 0.08;

    void validate() const;
};

struct RobotGeometry {
    std::array<LegGeometry, kLegCount> legs;
    Vector3d body_half_extents{0.4, 0.2, 0.1};

    const LegGeometry& leg(Leg l) const { return legs[static_cast<std::size_t>(leg_index(l))]; }
    void validate() const;

    /// Body 0.8 x 0.4 x 0.2 m, corner hips at (+-0.35, +-0.2, -0.1), middle
    /// hips on the centreline, knee stroke 0.15..0.65 m.
    static RobotGeometry defaults();
};

using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;

StateVector drift(const RobotState& x);
/// d drift / d x; only the unicycle rows depend on the state.
StateMatrix drift_jacobian(const RobotState& x);

/// Constant for this model; the state argument is accepted for interface
/// symmetry with state-dependent models.
const InputMatrix& input_matrix();
inline const InputMatrix& input_matrix(const RobotState&) { return input_matrix(); }

inline StateVector dynamics(const RobotState& x, const RobotInput& u) { return drift(x) + input_matrix() * u.vec; }

/// One RK4 step with input held constant. Throws std::invalid_argument unless
/// 0 < dt <= 0.01; returns nullopt if the result is not finite.
std::optional<RobotState> integrate(const RobotState& x, const RobotInput& u, double dt);

struct JointState {
    double knee = 0.0;
    double hip = 0.0;
    bool feasible = false;
};

/// Leg-frame toe offset: x forward, y downward, both measured from the hip.
/// Throws std::invalid_argument for the zero offset.
JointState leg_ik(const Vector2d& offset, const LegGeometry& leg);
Vector2d leg_fk(double knee, double hip);

/// Toe offset seen from the hip, in the pitched body frame.
Vector2d leg_frame_offset(const RobotState& x, const RobotGeometry& g, Leg leg);

/// Foot position in the origin frame: anchor + (x, 0, z).
Vector3d local_foot_position(const RobotState& x, const RobotGeometry& g, Leg leg);
Vector3d world_foot_position(const RobotState& x, const RobotGeometry& g, Leg leg);
Vector3d world_foot_velocity(const RobotState& x, const RobotGeometry& g, Leg leg);

Vector3d world_body_position(const RobotState& x);
Vector3d world_body_velocity(const RobotState& x);
Eigen::Matrix3d body_rotation(const RobotState& x);
geom::Cuboid body_cuboid(const RobotState& x, const RobotGeometry& g);

struct OriginPose {
    Vector3d p = Vector3d::Zero();
    double yaw = 0.0;
};

struct OriginExchange {
    RobotState state;
    /// Largest lateral offset (m) that the new frame cannot represent: body
    /// and feet carry no lateral coordinate of their own.
    double lateral_residual = 0.0;
    /// Largest world-velocity change (m/s) of the body or a foot.
    double velocity_residual = 0.0;
};

/// Moves the ground origin to `pose` and re-expresses body and feet in it.
/// World positions are preserved exactly when the move stays on the old
/// heading line with unchanged yaw; otherwise the lateral part is dropped and
/// reported. The new yaw rate is chosen so the body's world velocity is kept.
OriginExchange origin_exchange(const RobotState& x, const RobotGeometry& g, const OriginPose& pose);

}  // namespace t3cbf::model
