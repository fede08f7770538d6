#include "t3cbf/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace t3cbf::model {

using geom::rot_y;
using geom::rot_z;

std::string_view leg_name(Leg leg) {
    switch (leg) {
        case Leg::LF: return "LF";
        case Leg::MF: return "MF";
        case Leg::RF: return "RF";
        case Leg::LR: return "LR";
        case Leg::MR: return "MR";
        case Leg::RR: return "RR";
    }
    return "?";
}

void LegGeometry::validate() const {
    if (!anchor.allFinite()) throw std::invalid_argument("leg anchor must be finite");
    if (!(hip_min < hip_max)) throw std::invalid_argument("hip range is empty");
    if (!(knee_min < knee_max) || knee_min < 0.0) throw std::invalid_argument("knee range is empty");
    if (!(wheel_radius > 0.0)) throw std::invalid_argument("wheel radius must be positive");
}

void RobotGeometry::validate() const {
    for (int i = 0; i < kLegCount; ++i) {
        if (leg_index(legs[static_cast<std::size_t>(i)].id) != i)
            throw std::invalid_argument("legs must be stored in LF, MF, RF, LR, MR, RR order");
        legs[static_cast<std::size_t>(i)].validate();
    }
    if (!(body_half_extents.array() > 0.0).all()) throw std::invalid_argument("body extents must be positive");
}

RobotGeometry RobotGeometry::defaults() {
    constexpr double deg = std::numbers::pi / 180.0;
    constexpr double vertical = std::numbers::pi / 2.0;
    RobotGeometry g;
    const auto make = [&](Leg id, double ax, double ay, double lo, double hi) {
        LegGeometry leg;
        leg.id = id;
        leg.anchor = Vector3d(ax, ay, -0.1);
        leg.hip_min = vertical + lo * deg;
        leg.hip_max = vertical + hi * deg;
        leg.knee_min = 0.15;
        leg.knee_max = 0.65;
        leg.wheel_radius = 0.08;
        return leg;
    };
    // Hip angle grows from forward towards backward; the middle legs swing
    // 45 degrees away from the body centre and 5 degrees towards it.
    g.legs = {make(Leg::LF, 0.35, 0.2, -22.5, 22.5), make(Leg::MF, 0.35, 0.0, -45.0, 5.0),
              make(Leg::RF, 0.35, -0.2, -22.5, 22.5), make(Leg::LR, -0.35, 0.2, -22.5, 22.5),
              make(Leg::MR, -0.35, 0.0, -5.0, 45.0), make(Leg::RR, -0.35, -0.2, -22.5, 22.5)};
    return g;
}

StateVector drift(const RobotState& x) {
    StateVector f = StateVector::Zero();
    const double v = x.speed();
    f[idx::kPx] = std::cos(x.yaw()) * v;
    f[idx::kPy] = std::sin(x.yaw()) * v;
    f[idx::kYaw] = x.yaw_rate();
    f[idx::kBodyX] = x[idx::kBodyVx];
    f[idx::kBodyZ] = x[idx::kBodyVz];
    f[idx::kPitch] = x[idx::kPitchRate];
    for (int i = 0; i < kLegCount; ++i) {
        f[idx::foot_x(i)] = x[idx::foot_vx(i)];
        f[idx::foot_z(i)] = x[idx::foot_vz(i)];
    }
    return f;
}

StateMatrix drift_jacobian(const RobotState& x) {
    StateMatrix j = StateMatrix::Zero();
    const double c = std::cos(x.yaw()), s = std::sin(x.yaw()), v = x.speed();
    j(idx::kPx, idx::kYaw) = -s * v;
    j(idx::kPx, idx::kSpeed) = c;
    j(idx::kPy, idx::kYaw) = c * v;
    j(idx::kPy, idx::kSpeed) = s;
    j(idx::kYaw, idx::kYawRate) = 1.0;
    j(idx::kBodyX, idx::kBodyVx) = 1.0;
    j(idx::kBodyZ, idx::kBodyVz) = 1.0;
    j(idx::kPitch, idx::kPitchRate) = 1.0;
    for (int i = 0; i < kLegCount; ++i) {
        j(idx::foot_x(i), idx::foot_vx(i)) = 1.0;
        j(idx::foot_z(i), idx::foot_vz(i)) = 1.0;
    }
    return j;
}

const InputMatrix& input_matrix() {
    static const InputMatrix g = [] {
        InputMatrix m = InputMatrix::Zero();
        m(idx::kSpeed, idx::kAccel) = 1.0;
        m(idx::kYawRate, idx::kYawAccel) = 1.0;
        m(idx::kBodyVx, idx::kBodyAx) = 1.0;
        m(idx::kBodyVz, idx::kBodyAz) = 1.0;
        m(idx::kPitchRate, idx::kPitchAccel) = 1.0;
        for (int i = 0; i < kLegCount; ++i) {
            m(idx::foot_vx(i), idx::foot_ax(i)) = 1.0;
            m(idx::foot_vz(i), idx::foot_az(i)) = 1.0;
        }
        return m;
    }();
    return g;
}

std::optional<RobotState> integrate(const RobotState& x, const RobotInput& u, double dt) {
    if (!(dt > 0.0 && dt <= 0.01)) throw std::invalid_argument("integration step must be in (0, 0.01]");
    const StateVector gu = input_matrix() * u.vec;
    const auto f = [&](const StateVector& s) {
        RobotState tmp;
        tmp.vec = s;
        return StateVector(drift(tmp) + gu);
    };
    const StateVector& s = x.vec;
    const StateVector k1 = f(s);
    const StateVector k2 = f(s + 0.5 * dt * k1);
    const StateVector k3 = f(s + 0.5 * dt * k2);
    const StateVector k4 = f(s + dt * k3);
    RobotState out;
    out.vec = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!out.finite()) return std::nullopt;
    return out;
}

JointState leg_ik(const Vector2d& offset, const LegGeometry& leg) {
    if (!offset.allFinite()) throw std::invalid_argument("toe offset must be finite");
    if (offset.x() == 0.0 && offset.y() == 0.0) throw std::invalid_argument("hip angle undefined at the hip");
    JointState j;
    j.knee = std::hypot(offset.x(), offset.y());
    j.hip = std::atan2(offset.y(), offset.x());
    j.feasible = j.knee >= leg.knee_min && j.knee <= leg.knee_max && j.hip >= leg.hip_min && j.hip <= leg.hip_max;
    return j;
}

Vector2d leg_fk(double knee, double hip) { return {knee * std::cos(hip), knee * std::sin(hip)}; }

Vector3d local_foot_position(const RobotState& x, const RobotGeometry& g, Leg leg) {
    const int i = leg_index(leg);
    return g.leg(leg).anchor + Vector3d(x[idx::foot_x(i)], 0.0, x[idx::foot_z(i)]);
}

Vector2d leg_frame_offset(const RobotState& x, const RobotGeometry& g, Leg leg) {
    const Vector3d body(x.body_x(), 0.0, x.body_z());
    const Vector3d d = rot_y(x.pitch()).transpose() * (local_foot_position(x, g, leg) - body) - g.leg(leg).anchor;
    return {d.x(), -d.z()};
}

namespace {

Vector3d origin_velocity(const RobotState& x) {
    return Vector3d(std::cos(x.yaw()), std::sin(x.yaw()), 0.0) * x.speed();
}

// World velocity of a point held at origin-frame coordinates `local` moving
// with origin-frame rates `rate`.
Vector3d carried_velocity(const RobotState& x, const Vector3d& local, const Vector3d& rate) {
    const Eigen::Matrix3d r = rot_z(x.yaw());
    return origin_velocity(x) + x.yaw_rate() * Vector3d::UnitZ().cross(r * local) + r * rate;
}

}  // namespace

Vector3d world_foot_position(const RobotState& x, const RobotGeometry& g, Leg leg) {
    return x.p() + rot_z(x.yaw()) * local_foot_position(x, g, leg);
}

Vector3d world_foot_velocity(const RobotState& x, const RobotGeometry& g, Leg leg) {
    const int i = leg_index(leg);
    return carried_velocity(x, local_foot_position(x, g, leg),
                            Vector3d(x[idx::foot_vx(i)], 0.0, x[idx::foot_vz(i)]));
}

Vector3d world_body_position(const RobotState& x) {
    return x.p() + rot_z(x.yaw()) * Vector3d(x.body_x(), 0.0, x.body_z());
}

Vector3d world_body_velocity(const RobotState& x) {
    return carried_velocity(x, Vector3d(x.body_x(), 0.0, x.body_z()),
                            Vector3d(x[idx::kBodyVx], 0.0, x[idx::kBodyVz]));
}

Eigen::Matrix3d body_rotation(const RobotState& x) { return rot_z(x.yaw()) * rot_y(x.pitch()); }

geom::Cuboid body_cuboid(const RobotState& x, const RobotGeometry& g) {
    return {world_body_position(x), body_rotation(x), g.body_half_extents};
}

OriginExchange origin_exchange(const RobotState& x, const RobotGeometry& g, const OriginPose& pose) {
    if (!pose.p.allFinite() || !std::isfinite(pose.yaw)) throw std::invalid_argument("origin pose must be finite");

    const Vector3d body_w = world_body_position(x);
    const Vector3d body_u = world_body_velocity(x);
    std::array<Vector3d, kLegCount> foot_w, foot_u;
    for (Leg leg : kAllLegs) {
        foot_w[static_cast<std::size_t>(leg_index(leg))] = world_foot_position(x, g, leg);
        foot_u[static_cast<std::size_t>(leg_index(leg))] = world_foot_velocity(x, g, leg);
    }

    const Eigen::Matrix3d r = rot_z(pose.yaw);
    const Vector3d heading = r.col(0);
    const Vector3d lateral = r.col(1);

    OriginExchange out;
    RobotState& y = out.state;
    y.vec = x.vec;
    y.vec.segment<3>(idx::kPx) = pose.p;
    y[idx::kYaw] = pose.yaw;

    const Vector3d body_l = r.transpose() * (body_w - pose.p);
    double yaw_rate = x.yaw_rate();
    if (std::abs(body_l.x()) > 1e-3) yaw_rate = body_u.dot(lateral) / body_l.x();
    const Vector3d field = origin_velocity(x) + x.yaw_rate() * Vector3d::UnitZ().cross(pose.p - x.p());
    const double speed = field.dot(heading);
    y[idx::kYawRate] = yaw_rate;
    y[idx::kSpeed] = speed;

    y[idx::kBodyX] = body_l.x();
    y[idx::kBodyZ] = body_l.z();
    y[idx::kBodyVx] = body_u.dot(heading) - speed;
    y[idx::kBodyVz] = body_u.z();
    out.lateral_residual = std::abs(body_l.y());

    for (Leg leg : kAllLegs) {
        const int i = leg_index(leg);
        const auto k = static_cast<std::size_t>(i);
        const Vector3d a = g.leg(leg).anchor;
        const Vector3d l = r.transpose() * (foot_w[k] - pose.p) - a;
        y[idx::foot_x(i)] = l.x();
        y[idx::foot_z(i)] = l.z();
        y[idx::foot_vx(i)] = foot_u[k].dot(heading) - speed + yaw_rate * a.y();
        y[idx::foot_vz(i)] = foot_u[k].z();
        out.lateral_residual = std::max(out.lateral_residual, std::abs(l.y()));
    }

    double dv = (world_body_velocity(y) - body_u).cwiseAbs().maxCoeff();
    for (Leg leg : kAllLegs)
        dv = std::max(dv, (world_foot_velocity(y, g, leg) - foot_u[static_cast<std::size_t>(leg_index(leg))])
                              .cwiseAbs()
                              .maxCoeff());
    out.velocity_residual = dv;
    return out;
}

}  // namespace t3cbf::model
