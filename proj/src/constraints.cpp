#include "t3cbf/constraints.hpp"

#include <cmath>
#include <stdexcept>

namespace t3cbf::safety {

namespace idx = model::idx;
using Eigen::Matrix2d;
using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

namespace {

// Intermediate quantity w(q) in R^D over the local coordinates q.
template <int D>
struct Inner {
    int count = 0;
    std::array<int, kMaxLocal> index{};
    Eigen::Matrix<double, D, kMaxLocal> jac = Eigen::Matrix<double, D, kMaxLocal>::Zero();
    std::array<LocalMatrix, D> hess;
    Eigen::Matrix<double, D, 1> value = Eigen::Matrix<double, D, 1>::Zero();

    Inner() {
        for (auto& m : hess) m.setZero();
    }
};

template <int D>
LocalDerivative compose(double h, const Eigen::Matrix<double, D, 1>& g, const Eigen::Matrix<double, D, D>& hphi,
                        const Inner<D>& w) {
    LocalDerivative d;
    d.h = h;
    d.count = w.count;
    d.index = w.index;
    d.grad = w.jac.transpose() * g;
    d.hess = w.jac.transpose() * hphi * w.jac;
    for (int k = 0; k < D; ++k) d.hess += g[k] * w.hess[static_cast<std::size_t>(k)];
    return d;
}

struct Coord {
    int state;
    int axis;  // 0 = x, 2 = z of the origin frame
};

// World position p + R_z(yaw) * local, where `coords` move `local` along the
// listed axes.
template <std::size_t N>
Inner<3> world_point(const RobotState& x, const Vector3d& local, const std::array<Coord, N>& coords) {
    Inner<3> w;
    const Matrix3d r = geom::rot_z(x.yaw());
    const Vector3d rl = r * local;
    w.value = x.p() + rl;
    w.count = 4 + static_cast<int>(N);
    w.index[0] = idx::kPx;
    w.index[1] = idx::kPy;
    w.index[2] = idx::kPz;
    w.index[3] = idx::kYaw;
    w.jac.block<3, 3>(0, 0).setIdentity();
    w.jac.col(3) << -rl.y(), rl.x(), 0.0;
    w.hess[0](3, 3) = -rl.x();
    w.hess[1](3, 3) = -rl.y();
    for (std::size_t j = 0; j < N; ++j) {
        const int c = 4 + static_cast<int>(j);
        w.index[static_cast<std::size_t>(c)] = coords[j].state;
        const Vector3d dir = r.col(coords[j].axis);
        w.jac.col(c) = dir;
        // d/dyaw of R e_axis = e_z x R e_axis
        const Vector3d turn(-dir.y(), dir.x(), 0.0);
        for (int k = 0; k < 3; ++k) {
            w.hess[static_cast<std::size_t>(k)](3, c) = turn[k];
            w.hess[static_cast<std::size_t>(k)](c, 3) = turn[k];
        }
    }
    return w;
}

Inner<3> foot_point(const RobotState& x, const RobotGeometry& g, Leg leg) {
    const int i = model::leg_index(leg);
    return world_point(x, model::local_foot_position(x, g, leg),
                       std::array<Coord, 2>{Coord{idx::foot_x(i), 0}, Coord{idx::foot_z(i), 2}});
}

// Leg-frame toe offset over (body x, body z, pitch, foot x, foot z).
Inner<2> leg_offset(const RobotState& x, const RobotGeometry& g, Leg leg) {
    const int i = model::leg_index(leg);
    const Vector3d a = g.leg(leg).anchor;
    const double dx = a.x() + x[idx::foot_x(i)] - x.body_x();
    const double dz = a.z() + x[idx::foot_z(i)] - x.body_z();
    const double c = std::cos(x.pitch()), s = std::sin(x.pitch());

    Inner<2> w;
    w.count = 5;
    w.index[0] = idx::kBodyX;
    w.index[1] = idx::kBodyZ;
    w.index[2] = idx::kPitch;
    w.index[3] = idx::foot_x(i);
    w.index[4] = idx::foot_z(i);
    w.value << c * dx - s * dz - a.x(), -(s * dx + c * dz) + a.z();

    // rows: d/d(dx), d/d(dz), d/dpitch for each component
    const double px_dx = c, px_dz = -s, px_t = -s * dx - c * dz;
    const double py_dx = -s, py_dz = -c, py_t = -c * dx + s * dz;
    w.jac.row(0) << -px_dx, -px_dz, px_t, px_dx, px_dz, 0, 0, 0;
    w.jac.row(1) << -py_dx, -py_dz, py_t, py_dx, py_dz, 0, 0, 0;

    const auto fill = [](LocalMatrix& m, double tt, double t_dx, double t_dz) {
        m(2, 2) = tt;
        const std::array<double, 5> mix{-t_dx, -t_dz, 0.0, t_dx, t_dz};
        for (int q = 0; q < 5; ++q) {
            if (q == 2) continue;
            m(2, q) = mix[static_cast<std::size_t>(q)];
            m(q, 2) = mix[static_cast<std::size_t>(q)];
        }
    };
    fill(w.hess[0], -c * dx + s * dz, -s, -c);
    fill(w.hess[1], s * dx + c * dz, -c, s);
    return w;
}

}  // namespace

Eigen::Vector2d ConstraintConfig::gains(ConstraintKind k) const {
    switch (k) {
        case ConstraintKind::JointLimit: return pole_placement_gains(lambda_joint);
        case ConstraintKind::BodySSAT: return pole_placement_gains(lambda_collision);
        case ConstraintKind::ToeSuperellipsoid: return pole_placement_gains(lambda_toe);
        default: return pole_placement_gains(lambda_default);
    }
}

std::array<LocalDerivative, 4> joint_limit_terms(const RobotState& x, const RobotGeometry& g, Leg leg) {
    const model::LegGeometry& lg = g.leg(leg);
    const Inner<2> w = leg_offset(x, g, leg);
    const double px = w.value[0], py = w.value[1];
    const double r2 = px * px + py * py;
    const double r = std::sqrt(r2);
    if (!(r > 0.0)) throw std::domain_error("joint limit: toe at the hip");

    const Vector2d n = w.value / r;
    const Matrix2d knee_h = (Matrix2d::Identity() - n * n.transpose()) / r;
    const Vector2d hip_g(-py / r2, px / r2);
    const double r4 = r2 * r2;
    Matrix2d hip_h;
    hip_h << 2.0 * px * py / r4, (py * py - px * px) / r4, (py * py - px * px) / r4, -2.0 * px * py / r4;
    const double knee = r, hip = std::atan2(py, px);

    return {compose<2>(knee - lg.knee_min, n, knee_h, w), compose<2>(lg.knee_max - knee, -n, -knee_h, w),
            compose<2>(hip - lg.hip_min, hip_g, hip_h, w), compose<2>(lg.hip_max - hip, -hip_g, -hip_h, w)};
}

LocalDerivative body_collision_term(const RobotState& x, const RobotGeometry& g, const geom::Cuboid& obstacle,
                                    const ConstraintConfig& cfg) {
    const Inner<3> c = world_point(x, Vector3d(x.body_x(), 0.0, x.body_z()),
                                   std::array<Coord, 2>{Coord{idx::kBodyX, 0}, Coord{idx::kBodyZ, 2}});
    Inner<5> w;
    w.count = 7;
    w.index = c.index;
    w.index[6] = idx::kPitch;
    w.jac.topRows<3>() = c.jac;
    w.jac(3, 3) = 1.0;
    w.jac(4, 6) = 1.0;
    for (int k = 0; k < 3; ++k) w.hess[static_cast<std::size_t>(k)] = c.hess[static_cast<std::size_t>(k)];

    const geom::Cuboid body = model::body_cuboid(x, g);
    const geom::Cuboid padded = obstacle.inflated(cfg.effective_body_margin());
    const geom::CollisionMargin m =
        geom::ssat_margin(body, padded, cfg.smoothing, geom::PoseParameterization::full(geom::Body::A));
    return compose<5>(m.h, m.grad, m.hessian, w);
}

LocalDerivative toe_collision_term(const RobotState& x, const RobotGeometry& g, Leg leg, const geom::Cuboid& obstacle,
                                   int exponent_n) {
    const Inner<3> w = foot_point(x, g, leg);
    const geom::CollisionMargin m =
        geom::superellipsoid_margin(w.value, obstacle, exponent_n, g.leg(leg).wheel_radius);
    return compose<3>(m.h, Vector3d(m.grad), Matrix3d(m.hessian), w);
}

LocalDerivative foothold_term(const RobotState& x, const RobotGeometry& g, Leg leg, const HalfSpace& edge) {
    const Inner<3> w = foot_point(x, g, leg);
    const Vector3d a(edge.a.x(), edge.a.y(), 0.0);
    return compose<3>(edge.eval(w.value.head<2>()), a, Matrix3d::Zero(), w);
}

LocalDerivative foot_height_term(const RobotState& x, const RobotGeometry& g, Leg leg, double floor) {
    const Inner<3> w = foot_point(x, g, leg);
    return compose<3>(w.value.z() - g.leg(leg).wheel_radius - floor, Vector3d::UnitZ(), Matrix3d::Zero(), w);
}

double stability_reach(const model::LegGeometry& leg) {
    const double vertical = std::acos(0.0);
    const double outward = std::max(std::abs(leg.hip_min - vertical), std::abs(leg.hip_max - vertical));
    return std::abs(leg.anchor.x()) + leg.knee_max * std::sin(outward);
}

std::array<LocalDerivative, 2> stability_terms(const RobotState& x, const RobotGeometry& g, Leg leg, double shrink) {
    const int i = model::leg_index(leg);
    const model::LegGeometry& lg = g.leg(leg);
    const double side = lg.anchor.x() >= 0.0 ? 1.0 : -1.0;
    const double rel = side * (lg.anchor.x() + x[idx::foot_x(i)] - x.body_x());

    std::array<LocalDerivative, 2> out;
    for (auto& d : out) {
        d.count = 2;
        d.index[0] = idx::kBodyX;
        d.index[1] = idx::foot_x(i);
    }
    out[0].h = rel - shrink;
    out[0].grad[0] = -side;
    out[0].grad[1] = side;
    out[1].h = stability_reach(lg) - rel;
    out[1].grad[0] = side;
    out[1].grad[1] = -side;
    return out;
}

std::vector<RowTask> plan_rows(const ConstraintContext& ctx, const ConstraintConfig& cfg) {
    std::vector<RowTask> tasks;
    const auto legs = static_cast<std::int16_t>(model::kLegCount);
    const auto obstacles = static_cast<std::int32_t>(ctx.obstacles.size());
    if (cfg.on(ConstraintKind::JointLimit))
        for (std::int16_t l = 0; l < legs; ++l)
            for (std::int32_t k = 0; k < 4; ++k) tasks.push_back({ConstraintKind::JointLimit, l, k});
    if (cfg.on(ConstraintKind::BodySSAT))
        for (std::int32_t o = 0; o < obstacles; ++o) tasks.push_back({ConstraintKind::BodySSAT, -1, o});
    for (std::int16_t l = 0; l < legs; ++l) {
        const LegContext& lc = ctx.legs[static_cast<std::size_t>(l)];
        if (cfg.on(ConstraintKind::ToeSuperellipsoid) && lc.toe_collision)
            for (std::int32_t o = 0; o < obstacles; ++o) tasks.push_back({ConstraintKind::ToeSuperellipsoid, l, o});
        if (cfg.on(ConstraintKind::Foothold) && lc.foothold)
            for (std::int32_t e = 0; e < static_cast<std::int32_t>(lc.region.size()); ++e)
                tasks.push_back({ConstraintKind::Foothold, l, e});
        if (cfg.on(ConstraintKind::FootHeight)) tasks.push_back({ConstraintKind::FootHeight, l, 0});
        if (cfg.on(ConstraintKind::Stability)) {
            if (lc.stance) tasks.push_back({ConstraintKind::Stability, l, 0});
            tasks.push_back({ConstraintKind::Stability, l, 1});
        }
    }
    return tasks;
}

LocalDerivative evaluate_task(const RowTask& task, const RobotState& x, const RobotGeometry& g,
                              const ConstraintContext& ctx, const ConstraintConfig& cfg) {
    const Leg leg = static_cast<Leg>(task.leg < 0 ? 0 : task.leg);
    const auto item = static_cast<std::size_t>(task.item);
    switch (task.kind) {
        case ConstraintKind::JointLimit: {
            LocalDerivative d = joint_limit_terms(x, g, leg)[item];
            d.h -= cfg.joint_margin;
            return d;
        }
        case ConstraintKind::BodySSAT: return body_collision_term(x, g, ctx.obstacles.at(item), cfg);
        case ConstraintKind::ToeSuperellipsoid:
            return toe_collision_term(x, g, leg, ctx.obstacles.at(item), cfg.superellipsoid_n);
        case ConstraintKind::Foothold:
            return foothold_term(x, g, leg, ctx.legs[static_cast<std::size_t>(task.leg)].region.at(item));
        case ConstraintKind::FootHeight:
            return foot_height_term(x, g, leg, ctx.legs[static_cast<std::size_t>(task.leg)].floor);
        case ConstraintKind::Stability: return stability_terms(x, g, leg, cfg.stability_shrink)[item];
    }
    throw std::invalid_argument("unknown constraint kind");
}

std::vector<EcbfRow> build_rows(const RobotState& x, const RobotGeometry& g, const ConstraintContext& ctx,
                                const ConstraintConfig& cfg, BuildStats* stats) {
    const std::vector<RowTask> tasks = plan_rows(ctx, cfg);
    const int n = static_cast<int>(tasks.size());
    std::vector<EcbfRow> rows(static_cast<std::size_t>(n));
    std::vector<char> ok(static_cast<std::size_t>(n), 0);

    const auto one = [&](int t) {
        const RowTask& task = tasks[static_cast<std::size_t>(t)];
        LocalDerivative d;
        try {
            d = evaluate_task(task, x, g, ctx, cfg);
        } catch (const std::domain_error&) {
            return;
        }
        if (!d.finite()) return;
        EcbfRow r = ecbf_row(d, x, cfg.gains(task.kind));
        r.kind = task.kind;
        r.leg = task.leg;
        r.item = task.item;
        rows[static_cast<std::size_t>(t)] = r;
        ok[static_cast<std::size_t>(t)] = 1;
    };
    if (cfg.parallel) {
#pragma omp parallel for schedule(static)
        for (int t = 0; t < n; ++t) one(t);
    } else {
        for (int t = 0; t < n; ++t) one(t);
    }

    std::vector<EcbfRow> out;
    out.reserve(rows.size());
    int dropped = 0;
    for (int t = 0; t < n; ++t) {
        if (ok[static_cast<std::size_t>(t)]) out.push_back(rows[static_cast<std::size_t>(t)]);
        else ++dropped;
    }
    if (stats) stats->dropped_non_finite = dropped;
    return out;
}

}  // namespace t3cbf::safety
