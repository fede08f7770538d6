#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "t3cbf/model.hpp"

using namespace t3cbf::model;
namespace idx = t3cbf::model::idx;

namespace {

constexpr double kPi = std::numbers::pi;

RobotState random_state(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RobotState x;
    for (int i = 0; i < kStateDim; ++i) x[i] = 0.3 * u(rng);
    x.vec.segment<3>(idx::kPx) = Eigen::Vector3d(3.0 * u(rng), 3.0 * u(rng), 0.2 * u(rng));
    x[idx::kYaw] = kPi * u(rng);
    x[idx::kSpeed] = u(rng);
    x[idx::kBodyZ] = 0.5 + 0.1 * u(rng);
    return x;
}

Eigen::Matrix3d rz(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix(); }
Eigen::Matrix3d ry(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY()).toRotationMatrix(); }

RobotState run(RobotState x, const RobotInput& u, double dt, int steps) {
    for (int k = 0; k < steps; ++k) {
        auto next = integrate(x, u, dt);
        REQUIRE(next.has_value());
        x = *next;
    }
    return x;
}

}  // namespace

TEST_CASE("drift examples") {
    RobotState x;
    CHECK(drift(x).isZero(0.0));

    x[idx::kSpeed] = 1.0;
    CHECK(drift(x).segment<3>(idx::kPx).isApprox(Eigen::Vector3d(1, 0, 0)));

    x[idx::kYaw] = kPi / 2.0;
    CHECK((drift(x).segment<3>(idx::kPx) - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);

    x[idx::kYawRate] = 0.7;
    x[idx::kPitchRate] = -0.2;
    x[idx::foot_vz(4)] = 0.3;
    const StateVector f = drift(x);
    CHECK(f[idx::kYaw] == 0.7);
    CHECK(f[idx::kSpeed] == 0.0);
    CHECK(f[idx::kYawRate] == 0.0);
    CHECK(f[idx::kPitch] == -0.2);
    CHECK(f[idx::foot_z(4)] == 0.3);
    CHECK(f[idx::foot_vz(4)] == 0.0);
}

TEST_CASE("input matrix structure") {
    const InputMatrix& g = input_matrix();
    CHECK(g.cols() == 17);
    CHECK(g.rows() == 36);
    CHECK(g.col(idx::kAccel).sum() == 1.0);
    CHECK(g(idx::kSpeed, idx::kAccel) == 1.0);
    CHECK(g(idx::kYawRate, idx::kYawAccel) == 1.0);
    CHECK(g.cwiseAbs().sum() == 17.0);
    CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(g).rank() == 17);
    for (int c = 0; c < kInputDim; ++c) {
        int row = -1;
        for (int r = 0; r < kStateDim; ++r)
            if (g(r, c) != 0.0) row = r;
        REQUIRE(row >= 0);
        // every input drives a rate, never a position
        CHECK(drift(RobotState{}).isZero(0.0));
        RobotState probe;
        probe[row] = 1.0;
        CHECK(drift(probe).norm() > 0.0);
    }
    std::mt19937_64 rng(3);
    CHECK(input_matrix(random_state(rng)) == g);
}

TEST_CASE("integrate: trivial cases and errors") {
    RobotState x;
    x.vec.segment<3>(idx::kPx) = Eigen::Vector3d(1, 2, 3);
    x[idx::kBodyZ] = 0.5;
    auto y = integrate(x, RobotInput{}, 0.01);
    REQUIRE(y.has_value());
    CHECK(y->vec == x.vec);

    CHECK_THROWS_AS(integrate(x, RobotInput{}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(integrate(x, RobotInput{}, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(integrate(x, RobotInput{}, -1e-3), std::invalid_argument);

    RobotState big;
    big[idx::kSpeed] = 1e308;
    RobotInput u;
    u[idx::kAccel] = 1e308;
    CHECK_FALSE(integrate(big, u, 0.01).has_value());
}

TEST_CASE("integrate: constant acceleration matches the closed form") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        RobotState x = random_state(rng);
        x[idx::kYawRate] = 0.0;
        RobotInput u;
        std::uniform_real_distribution<double> d(-2.0, 2.0);
        for (int i = 0; i < kInputDim; ++i) u[i] = d(rng);
        u[idx::kYawAccel] = 0.0;

        const double t = 1.0;
        const RobotState y = run(x, u, 0.01, 100);
        const double v0 = x.speed(), a = u[idx::kAccel];
        const Eigen::Vector3d h(std::cos(x.yaw()), std::sin(x.yaw()), 0.0);
        const Eigen::Vector3d p = x.p() + h * (v0 * t + 0.5 * a * t * t);
        CHECK((y.p() - p).norm() < 1e-10);
        CHECK(std::abs(y.speed() - (v0 + a * t)) < 1e-10);
        CHECK(std::abs(y.yaw() - x.yaw()) < 1e-12);

        const auto check_block = [&](int pos, int vel, int in) {
            CHECK(std::abs(y[pos] - (x[pos] + x[vel] * t + 0.5 * u[in] * t * t)) < 1e-10);
            CHECK(std::abs(y[vel] - (x[vel] + u[in] * t)) < 1e-10);
        };
        check_block(idx::kBodyX, idx::kBodyVx, idx::kBodyAx);
        check_block(idx::kBodyZ, idx::kBodyVz, idx::kBodyAz);
        check_block(idx::kPitch, idx::kPitchRate, idx::kPitchAccel);
        for (int i = 0; i < kLegCount; ++i) {
            check_block(idx::foot_x(i), idx::foot_vx(i), idx::foot_ax(i));
            check_block(idx::foot_z(i), idx::foot_vz(i), idx::foot_az(i));
        }
    }
}

TEST_CASE("integrate: constant speed and yaw rate trace a circular arc") {
    for (double w : {0.3, 1.0, -2.0}) {
        for (double v : {0.5, -1.2}) {
            RobotState x;
            x.vec.segment<3>(idx::kPx) = Eigen::Vector3d(0.4, -1.0, 0.1);
            x[idx::kYaw] = 0.8;
            x[idx::kSpeed] = v;
            x[idx::kYawRate] = w;
            const RobotState y = run(x, RobotInput{}, 0.01, 100);
            const double r = v / w, psi0 = x.yaw(), psi1 = psi0 + w;
            const Eigen::Vector3d c = x.p() + r * Eigen::Vector3d(-std::sin(psi0), std::cos(psi0), 0.0);
            const Eigen::Vector3d p = c + r * Eigen::Vector3d(std::sin(psi1), -std::cos(psi1), 0.0);
            CHECK((y.p() - p).norm() < 1e-8);
            CHECK(std::abs((y.p() - c).norm() - std::abs(r)) < 1e-8);
            CHECK(std::abs(y.yaw() - psi1) < 1e-12);
        }
    }
}

TEST_CASE("time derivative along trajectories matches grad h . (f + g u) to second order") {
    const RobotGeometry geo = RobotGeometry::defaults();
    const LegGeometry& lf = geo.leg(Leg::LF);
    // h = (world LF foot x) * sin(pitch)
    const auto h = [&](const RobotState& s) {
        const double fx = s[idx::kPx] + std::cos(s.yaw()) * (lf.anchor.x() + s[idx::foot_x(0)]) -
                          std::sin(s.yaw()) * lf.anchor.y();
        return fx * std::sin(s.pitch());
    };
    const auto grad = [&](const RobotState& s) {
        StateVector gr = StateVector::Zero();
        const double ax = lf.anchor.x() + s[idx::foot_x(0)];
        const double fx = s[idx::kPx] + std::cos(s.yaw()) * ax - std::sin(s.yaw()) * lf.anchor.y();
        const double sp = std::sin(s.pitch());
        gr[idx::kPx] = sp;
        gr[idx::kYaw] = (-std::sin(s.yaw()) * ax - std::cos(s.yaw()) * lf.anchor.y()) * sp;
        gr[idx::foot_x(0)] = std::cos(s.yaw()) * sp;
        gr[idx::kPitch] = fx * std::cos(s.pitch());
        return gr;
    };

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        RobotState x = random_state(rng);
        x[idx::kPitch] = 0.4;
        x[idx::kPitchRate] = 0.5;
        x[idx::kYawRate] = 0.8;
        RobotInput u;
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        for (int i = 0; i < kInputDim; ++i) u[i] = d(rng);
        const double exact = grad(x).dot(dynamics(x, u));

        double prev = 0.0;
        for (double dt : {1e-3, 1e-4}) {
            const RobotState x1 = run(x, u, dt, 1), x2 = run(x, u, dt, 2);
            const double est = (-3.0 * h(x) + 4.0 * h(x1) - h(x2)) / (2.0 * dt);
            const double err = std::abs(est - exact);
            if (prev > 0.0) {
                CHECK(err < 1e-7);
                CHECK(prev / err > 50.0);
            }
            prev = err;
        }
    }
}

TEST_CASE("drift jacobian matches finite differences") {
    std::mt19937_64 rng(6);
    for (int k = 0; k < 50; ++k) {
        const RobotState s = random_state(rng);
        const StateMatrix j = drift_jacobian(s);
        for (int c = 0; c < kStateDim; ++c) {
            RobotState a = s, b = s;
            a[c] += 1e-6;
            b[c] -= 1e-6;
            const StateVector fd = (drift(a) - drift(b)) / 2e-6;
            CHECK((fd - j.col(c)).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("leg_ik examples and errors") {
    const LegGeometry leg = RobotGeometry::defaults().leg(Leg::LF);
    JointState j = leg_ik(Vector2d(0.3, 0.0), leg);
    CHECK(j.knee == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(j.hip == 0.0);
    CHECK_FALSE(j.feasible);

    j = leg_ik(Vector2d(0.0, 0.4), leg);
    CHECK(j.knee == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(j.hip == doctest::Approx(kPi / 2.0).epsilon(1e-15));
    CHECK(j.feasible);

    CHECK_FALSE(leg_ik(Vector2d(0.0, 0.7), leg).feasible);
    CHECK_FALSE(leg_ik(Vector2d(0.0, 0.1), leg).feasible);
    CHECK_THROWS_AS(leg_ik(Vector2d(0.0, 0.0), leg), std::invalid_argument);
    CHECK_THROWS_AS(leg_ik(Vector2d(std::nan(""), 0.1), leg), std::invalid_argument);
}

TEST_CASE("leg_ik round trip through the forward map") {
    const RobotGeometry geo = RobotGeometry::defaults();
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int feasible = 0;
    for (int k = 0; k < 10000; ++k) {
        const LegGeometry& leg = geo.legs[static_cast<std::size_t>(k % kLegCount)];
        const double knee = leg.knee_min + (leg.knee_max - leg.knee_min) * u(rng);
        const double hip = leg.hip_min + (leg.hip_max - leg.hip_min) * u(rng);
        const Vector2d p = leg_fk(knee, hip);
        const JointState j = leg_ik(p, leg);
        CHECK((leg_fk(j.knee, j.hip) - p).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::abs(j.knee - knee) < 1e-12);
        CHECK(std::abs(j.hip - hip) < 1e-12);
        feasible += j.feasible ? 1 : 0;
    }
    CHECK(feasible > 9990);
}

TEST_CASE("default geometry ranges") {
    const RobotGeometry geo = RobotGeometry::defaults();
    geo.validate();
    for (const LegGeometry& leg : geo.legs) {
        CHECK(leg.knee_max - leg.knee_min == doctest::Approx(0.5));
        const bool middle = leg.id == Leg::MF || leg.id == Leg::MR;
        const double span = (middle ? 50.0 : 45.0) * kPi / 180.0;
        CHECK(leg.hip_max - leg.hip_min == doctest::Approx(span).epsilon(1e-12));
    }
    CHECK(geo.leg(Leg::MF).hip_min == doctest::Approx(kPi / 4.0));
    CHECK(geo.leg(Leg::MR).hip_max == doctest::Approx(3.0 * kPi / 4.0));
    CHECK((geo.body_half_extents * 2.0).isApprox(Eigen::Vector3d(0.8, 0.4, 0.2)));

    RobotGeometry bad = geo;
    bad.legs[2].wheel_radius = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = geo;
    std::swap(bad.legs[0], bad.legs[1]);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("leg frame offset rebuilds the world foot position") {
    const RobotGeometry geo = RobotGeometry::defaults();
    RobotState x;
    x[idx::kBodyZ] = 0.55;
    x[idx::foot_z(2)] = 0.05;
    const Vector2d stand = leg_frame_offset(x, geo, Leg::RF);
    CHECK(std::abs(stand.x()) < 1e-15);
    CHECK(stand.y() == doctest::Approx(0.5));

    std::mt19937_64 rng(8);
    for (int k = 0; k < 2000; ++k) {
        const RobotState s = random_state(rng);
        for (Leg leg : kAllLegs) {
            const Vector2d o = leg_frame_offset(s, geo, leg);
            const Eigen::Vector3d rebuilt = world_body_position(s) + rz(s.yaw()) * ry(s.pitch()) *
                                                                        (geo.leg(leg).anchor +
                                                                         Eigen::Vector3d(o.x(), 0.0, -o.y()));
            CHECK((rebuilt - world_foot_position(s, geo, leg)).norm() < 1e-12);
        }
    }
}

TEST_CASE("world foot position examples") {
    const RobotGeometry geo = RobotGeometry::defaults();
    RobotState x;
    x[idx::kYaw] = 0.6;
    for (Leg leg : kAllLegs)
        CHECK((world_foot_position(x, geo, leg) - rz(0.6) * geo.leg(leg).anchor).norm() < 1e-15);

    std::mt19937_64 rng(4);
    const RobotState s = random_state(rng);
    RobotState moved = s;
    const Eigen::Vector3d d(0.3, -1.1, 0.25);
    moved.vec.segment<3>(idx::kPx) += d;
    RobotState turned = s;
    turned[idx::kYaw] += kPi;
    for (Leg leg : kAllLegs) {
        const Eigen::Vector3d w = world_foot_position(s, geo, leg);
        CHECK((world_foot_position(moved, geo, leg) - (w + d)).norm() < 1e-14);
        const Eigen::Vector3d rel = w - s.p(), rel_t = world_foot_position(turned, geo, leg) - s.p();
        CHECK(std::abs(rel_t.x() + rel.x()) < 1e-14);
        CHECK(std::abs(rel_t.y() + rel.y()) < 1e-14);
        CHECK(std::abs(rel_t.z() - rel.z()) < 1e-15);
    }
}

TEST_CASE("body cuboid pose") {
    const RobotGeometry geo = RobotGeometry::defaults();
    std::mt19937_64 rng(9);
    const RobotState s = random_state(rng);
    const t3cbf::geom::Cuboid c = body_cuboid(s, geo);
    c.validate();
    const Eigen::Vector3d expect = s.p() + rz(s.yaw()) * Eigen::Vector3d(s.body_x(), 0.0, s.body_z());
    CHECK((c.center - expect).norm() < 1e-14);
    CHECK((c.rotation - rz(s.yaw()) * ry(s.pitch())).norm() < 1e-14);
    CHECK(c.half_extents == geo.body_half_extents);
}

TEST_CASE("world velocities match finite differences of world positions") {
    const RobotGeometry geo = RobotGeometry::defaults();
    std::mt19937_64 rng(12);
    for (int k = 0; k < 100; ++k) {
        const RobotState s = random_state(rng);
        const double dt = 1e-6;
        const StateVector f = drift(s);
        RobotState a = s, b = s;
        a.vec += dt * f;
        b.vec -= dt * f;
        const Eigen::Vector3d fd = (world_body_position(a) - world_body_position(b)) / (2.0 * dt);
        CHECK((fd - world_body_velocity(s)).norm() < 1e-8);
        for (Leg leg : kAllLegs) {
            const Eigen::Vector3d ff = (world_foot_position(a, geo, leg) - world_foot_position(b, geo, leg)) / (2.0 * dt);
            CHECK((ff - world_foot_velocity(s, geo, leg)).norm() < 1e-8);
        }
    }
}

TEST_CASE("origin exchange: identity") {
    const RobotGeometry geo = RobotGeometry::defaults();
    std::mt19937_64 rng(30);
    for (int k = 0; k < 100; ++k) {
        const RobotState s = random_state(rng);
        const OriginExchange e = origin_exchange(s, geo, {s.p(), s.yaw()});
        CHECK((e.state.vec - s.vec).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(e.lateral_residual < 1e-12);
        CHECK(e.velocity_residual < 1e-12);
    }
}

TEST_CASE("origin exchange along the heading preserves every world quantity") {
    const RobotGeometry geo = RobotGeometry::defaults();
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 10000; ++k) {
        RobotState s = random_state(rng);
        s[idx::kYawRate] = 0.0;
        const double along = 0.8 * u(rng), up = 0.2 * u(rng);
        const Eigen::Vector3d np = s.p() + rz(s.yaw()) * Eigen::Vector3d(along, 0.0, up);
        const OriginExchange e = origin_exchange(s, geo, {np, s.yaw()});
        const RobotState& t = e.state;

        CHECK(std::abs(t[idx::kBodyX] - (s[idx::kBodyX] - along)) < 1e-12);
        CHECK((world_body_position(t) - world_body_position(s)).norm() < 1e-10);
        CHECK((body_rotation(t) - body_rotation(s)).norm() < 1e-12);
        CHECK((world_body_velocity(t) - world_body_velocity(s)).norm() < 1e-10);
        CHECK(std::abs(t[idx::kPitchRate] - s[idx::kPitchRate]) == 0.0);
        for (Leg leg : kAllLegs) {
            CHECK((world_foot_position(t, geo, leg) - world_foot_position(s, geo, leg)).norm() < 1e-10);
            CHECK((world_foot_velocity(t, geo, leg) - world_foot_velocity(s, geo, leg)).norm() < 1e-10);
        }
        CHECK(e.lateral_residual < 1e-10);
        CHECK(e.velocity_residual < 1e-10);
    }
}

TEST_CASE("origin exchange with a yaw change keeps the body's world velocity") {
    const RobotGeometry geo = RobotGeometry::defaults();
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int tested = 0;
    for (int k = 0; k < 10000; ++k) {
        RobotState s = random_state(rng);
        s[idx::kSpeed] = 0.2 + 0.8 * std::abs(u(rng));
        const OriginPose pose{s.p() + Eigen::Vector3d(0.5 * u(rng), 0.5 * u(rng), 0.05 * u(rng)),
                              s.yaw() + 0.5 * u(rng)};
        const Eigen::Vector3d local = rz(pose.yaw).transpose() * (world_body_position(s) - pose.p);
        if (std::abs(local.x()) < 0.01) continue;
        ++tested;
        const OriginExchange e = origin_exchange(s, geo, pose);
        const RobotState& t = e.state;
        CHECK((world_body_velocity(t) - world_body_velocity(s)).norm() < 1e-10);
        CHECK(std::abs(world_body_position(t).z() - world_body_position(s).z()) < 1e-12);
        CHECK((t.p() - pose.p).norm() == 0.0);
        // Whatever is lost lies entirely in the lateral direction and is reported.
        const Eigen::Vector3d lat = rz(pose.yaw).col(1);
        for (Leg leg : kAllLegs) {
            const Eigen::Vector3d dw = world_foot_position(s, geo, leg) - world_foot_position(t, geo, leg);
            CHECK((dw - dw.dot(lat) * lat).norm() < 1e-10);
            CHECK(std::abs(dw.dot(lat)) <= e.lateral_residual + 1e-12);
        }
    }
    CHECK(tested > 9000);
}
