#include "t3cbf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace t3cbf::sim {

namespace idx = model::idx;
using Clock = std::chrono::steady_clock;

void EpisodeConfig::validate() const {
    if (!(dt > 0.0) || dt > 0.01) throw std::invalid_argument("dt must be in (0, 0.01]");
    if (!(duration > 0.0)) throw std::invalid_argument("duration must be positive");
    const double n = duration / dt;
    if (std::abs(n - std::round(n)) > 1e-6) throw std::invalid_argument("duration must be a whole number of ticks");
}

long EpisodeConfig::ticks() const { return std::lround(duration / dt); }

safety::FilterConfig EpisodeConfig::default_filter() {
    safety::FilterConfig f;
    f.w_u[idx::kAccel] = 100.0;
    f.w_u[idx::kYawAccel] = 100.0;
    f.w_u[idx::kBodyAx] = 100.0;
    f.w_u[idx::kPitchAccel] = 1.0;
    f.w_delta = 1e6;
    return f;
}

RobotState standing_state(const scene::Scene& scene, const RobotGeometry& g, const Eigen::Vector2d& xy, double yaw,
                          double body_height) {
    const scene::Plane* under = scene.plane_at(xy);
    if (!under) throw std::invalid_argument("standing_state: no plane under the body");
    RobotState x;
    x[idx::kPx] = xy.x();
    x[idx::kPy] = xy.y();
    x[idx::kPz] = under->z + body_height;
    x[idx::kYaw] = yaw;
    for (model::Leg leg : model::kAllLegs) {
        const int i = model::leg_index(leg);
        const model::LegGeometry& lg = g.leg(leg);
        const Eigen::Vector2d foot = xy + Eigen::Rotation2Dd(yaw) * lg.anchor.head<2>();
        const scene::Plane* p = scene.plane_at(foot);
        if (!p) throw std::invalid_argument("standing_state: no plane under a foot");
        x[idx::foot_z(i)] = p->z + lg.wheel_radius - x[idx::kPz] - lg.anchor.z();
    }
    return x;
}

EpisodeLog run_episode(const scene::Scene& scene, const planner::CommandScript& cmd, const EpisodeConfig& config) {
    config.validate();
    const RobotGeometry& g = config.geometry;
    planner::Planner plan(scene, g, cmd, config.planner, config.filter.limits);
    safety::SafetyFilter filter(config.filter);

    RobotState x = standing_state(scene, g, config.start_xy, config.start_yaw, config.planner.body_height);
    plan.start(x, config.duration);

    EpisodeLog log;
    log.geometry = g;
    log.dt = config.dt;
    const long n = config.ticks();
    log.ticks.reserve(static_cast<std::size_t>(n));

    for (long k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * config.dt;
        x = plan.update(t, x);
        TickRecord rec;
        rec.t = t;
        rec.x = x.vec;
        const model::RobotInput u_ref = plan.reference(t, x);
        rec.u_ref = u_ref.vec;

        const auto t0 = Clock::now();
        const safety::ConstraintContext ctx = plan.context(t, x);
        const std::vector<safety::EcbfRow> rows = safety::build_rows(x, g, ctx, config.constraints);
        const auto t1 = Clock::now();
        rec.h_min.fill(std::numeric_limits<double>::infinity());
        for (const safety::EcbfRow& r : rows) {
            double& h = rec.h_min[static_cast<std::size_t>(r.kind)];
            h = std::min(h, r.h);
        }
        rec.rows = static_cast<int>(rows.size());

        model::RobotInput u = u_ref;
        if (config.cbf) {
            const safety::FilterResult res = filter.solve(rows, u_ref);
            u = res.u;
            rec.soft_rows = res.soft_rows;
            rec.fallback = res.fallback;
            rec.relaxed = res.relaxed;
            rec.max_slack = res.delta.size() ? res.delta.cwiseAbs().maxCoeff() : 0.0;
            if (res.fallback) ++log.fallbacks;
        }
        const auto t2 = Clock::now();
        rec.assembly_us = std::chrono::duration<double, std::micro>(t1 - t0).count();
        rec.solve_us = std::chrono::duration<double, std::micro>(t2 - t1).count();
        rec.u = u.vec;
        log.ticks.push_back(rec);

        std::optional<RobotState> next = model::integrate(x, u, config.dt);
        if (!next) next = model::integrate(x, model::RobotInput{}, config.dt);
        if (!next) {
            log.aborted = true;
            break;
        }
        x = *next;
    }
    log.landings = plan.landings();
    return log;
}

SafetyReport verify_safety(const EpisodeLog& log, const scene::Scene& scene, Exec exec, double tol) {
    const RobotGeometry& g = log.geometry;
    const auto n = static_cast<long>(log.ticks.size());
    std::vector<double> body(static_cast<std::size_t>(n)), joint(static_cast<std::size_t>(n)),
        height(static_cast<std::size_t>(n));

    const auto one = [&](long k) {
        RobotState x;
        x.vec = log.ticks[static_cast<std::size_t>(k)].x;
        const geom::Cuboid b = model::body_cuboid(x, g);
        double m = std::numeric_limits<double>::infinity();
        for (const geom::Cuboid& o : scene.obstacles) m = std::min(m, geom::sat_margin(b, o));
        double e = 0.0;
        for (model::Leg leg : model::kAllLegs) {
            const model::LegGeometry& lg = g.leg(leg);
            const model::JointState j = model::leg_ik(model::leg_frame_offset(x, g, leg), lg);
            e = std::max({e, lg.knee_min - j.knee, j.knee - lg.knee_max, lg.hip_min - j.hip, j.hip - lg.hip_max});
        }
        body[static_cast<std::size_t>(k)] = m;
        joint[static_cast<std::size_t>(k)] = e;
        height[static_cast<std::size_t>(k)] = b.center.z();
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (long k = 0; k < n; ++k) one(k);
    } else {
        for (long k = 0; k < n; ++k) one(k);
    }

    SafetyReport r;
    std::vector<double> ticks;
    ticks.reserve(static_cast<std::size_t>(n));
    for (long k = 0; k < n; ++k) {
        const auto i = static_cast<std::size_t>(k);
        if (body[i] < r.min_body_margin) {
            r.min_body_margin = body[i];
            r.min_body_margin_time = log.ticks[i].t;
        }
        if (body[i] < -tol) ++r.body_violation_ticks;
        r.max_joint_excursion = std::max(r.max_joint_excursion, joint[i]);
        if (joint[i] > tol) ++r.joint_violation_ticks;
        r.max_body_z = std::max(r.max_body_z, height[i]);
        const double us = log.ticks[i].assembly_us + log.ticks[i].solve_us;
        r.max_tick_us = std::max(r.max_tick_us, us);
        ticks.push_back(us);
    }
    if (!ticks.empty()) {
        std::nth_element(ticks.begin(), ticks.begin() + static_cast<long>(ticks.size() / 2), ticks.end());
        r.median_tick_us = ticks[ticks.size() / 2];
    }

    for (const planner::LandingEvent& ev : log.landings) {
        const long k = std::lround(ev.t / log.dt);
        if (k < 0 || k >= n) continue;
        RobotState x;
        x.vec = log.ticks[static_cast<std::size_t>(k)].x;
        const Eigen::Vector2d foot = model::world_foot_position(x, g, ev.step.leg).head<2>();
        const double m = ev.step.region.margin(foot);
        ++r.foothold_checks;
        r.worst_foothold_margin = std::min(r.worst_foothold_margin, m);
        if (m < -tol) ++r.foothold_violations;
    }
    return r;
}

void write_csv(const EpisodeLog& log, std::ostream& out, bool timings) {
    out << "t";
    for (int i = 0; i < model::kStateDim; ++i) out << ",x" << i;
    for (int i = 0; i < model::kInputDim; ++i) out << ",uref" << i;
    for (int i = 0; i < model::kInputDim; ++i) out << ",u" << i;
    for (int k = 0; k < safety::kConstraintKinds; ++k)
        out << ",h_" << safety::kind_name(static_cast<safety::ConstraintKind>(k));
    out << ",rows,fallback";
    if (timings) out << ",assembly_us,solve_us";
    out << '\n';
    out.precision(17);
    for (const TickRecord& r : log.ticks) {
        out << r.t;
        for (int i = 0; i < model::kStateDim; ++i) out << ',' << r.x[i];
        for (int i = 0; i < model::kInputDim; ++i) out << ',' << r.u_ref[i];
        for (int i = 0; i < model::kInputDim; ++i) out << ',' << r.u[i];
        for (double h : r.h_min) {
            out << ',';
            if (std::isfinite(h)) out << h;
        }
        out << ',' << r.rows << ',' << (r.fallback ? 1 : 0);
        if (timings) out << ',' << r.assembly_us << ',' << r.solve_us;
        out << '\n';
    }
}

}  // namespace t3cbf::sim
