#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "t3cbf/constraints.hpp"
#include "t3cbf/ecbf.hpp"
#include "t3cbf/model.hpp"
#include "t3cbf/scene.hpp"

namespace t3cbf::planner {

using Eigen::Vector2d;
using Eigen::Vector3d;
using model::Leg;
using model::RobotGeometry;
using model::RobotInput;
using model::RobotState;

struct VelocityCommand {
    double t = 0.0;
    double v = 0.0;
    double omega = 0.0;
};

/// Piecewise-constant command: entry k holds from its t until the next one.
class CommandScript {
public:
    CommandScript() = default;
    /// Entries must have strictly increasing, finite times.
    explicit CommandScript(std::vector<VelocityCommand> entries);
    static CommandScript constant(double v, double omega);
    /// Text lines "t v omega"; '#' starts a comment.
    static CommandScript parse(const std::string& text);
    static CommandScript load(const std::string& path);

    VelocityCommand at(double t) const;
    /// Integral of omega over [0, t].
    double heading_change(double t) const;
    /// Throws std::invalid_argument if any |v| > v_max or |omega| > omega_max.
    void check_limits(double v_max, double omega_max) const;
    const std::vector<VelocityCommand>& entries() const { return entries_; }

private:
    std::vector<VelocityCommand> entries_;
};

enum class Tripod { A, B };  ///< A: LR, RR, MF. B: MR, LF, RF.
enum class LegPhase { Stance, SwingUp, SwingForward, FootLowering };

bool in_tripod(Leg leg, Tripod tripod);

struct GaitParams {
    double cycle = 2.0;
    /// Fractions of a swing spent lifting before and lowering after the
    /// horizontal move.
    double up_fraction = 0.2;
    double lower_fraction = 0.2;

    double half() const { return 0.5 * cycle; }
    void validate() const;
};

struct GaitPhase {
    std::array<LegPhase, model::kLegCount> legs{};
    Tripod swinging = Tripod::A;
    /// Index of the half cycle; it changes exactly at a support switch.
    long half_cycle = 0;
    /// Time within the half cycle and the same as a fraction of it.
    double clock = 0.0;
    double progress = 0.0;
};

/// Tripod A swings in the first half of every cycle, tripod B in the second.
GaitPhase gait_schedule(double t, const GaitParams& params);

/// Support switch (origin exchange) times in (t0, t1].
std::vector<double> support_switches(double t0, double t1, const GaitParams& params);

/// World xy of each leg's nominal stance point (foot below the hip) after the
/// origin follows the commanded unicycle for `horizon` seconds.
std::array<Vector2d, model::kLegCount> nominal_footsteps(const VelocityCommand& cmd, const RobotState& x,
                                                         const RobotGeometry& g, double horizon);

/// Intersection of half-spaces a . p + b >= 0.
struct ConvexRegion {
    std::vector<safety::HalfSpace> halfspaces;

    bool contains(const Vector2d& p, double tol = 0.0) const;
    /// Smallest half-space value at p.
    double margin(const Vector2d& p) const;
    /// Vertices (CCW) of the region clipped to `bound`; empty if the region is.
    std::vector<Vector2d> polygon(const std::vector<Vector2d>& bound) const;
};

struct RegionResult {
    ConvexRegion region;
    /// False when the target lies outside the region (cut away).
    bool target_feasible = true;
    int cuts = 0;
};

/// Plane hull plus one cut per obstacle whose footprint (grown by
/// `clearance`) overlaps the plane and whose height range reaches up to
/// `band` above it. Each cut follows the footprint face nearest the target
/// (projected onto the plane), moved out by `clearance`.
RegionResult safe_convex_region(const scene::Plane& plane, const std::vector<geom::Cuboid>& obstacles,
                                const Vector2d& target, double clearance, double band = 0.6);

/// Closest point of the (non-empty) convex polygon to p.
Vector2d closest_point(const std::vector<Vector2d>& polygon, const Vector2d& p);

struct StepRequest {
    Leg leg = Leg::LF;
    Vector3d start = Vector3d::Zero();  ///< current wheel centre
    int start_plane = -1;
    Vector2d target = Vector2d::Zero();
    double lift_time = 0.0;
    double landing_time = 0.0;
};

struct Footstep {
    Leg leg = Leg::LF;
    Vector3d start = Vector3d::Zero();
    Vector3d target = Vector3d::Zero();  ///< wheel centre at landing
    int plane = -1;
    double lift_time = 0.0;
    double landing_time = 0.0;
    double apex = 0.0;  ///< wheel-bottom clearance above the higher plane
    /// Same plane and a straight path on it: no swing, the wheel keeps rolling.
    bool rolling = false;
    /// No plane within reach or no room on it: the leg holds.
    bool held = false;
    /// Target was moved into the region.
    bool retargeted = false;
    ConvexRegion region;
};

struct PlanParams {
    double capture = 0.3;
    double clearance = 0.09;
    double apex = 0.08;
    double inset = 0.01;
    bool allow_rolling = true;
};

/// Lifts each 2D target onto the nearest plane and into its safe region.
std::vector<Footstep> adjust_to_planes(const std::vector<StepRequest>& requests, const scene::Scene& scene,
                                       const RobotGeometry& g, const PlanParams& params);

/// Piecewise cubic through (knot, value) with zero slope at every knot;
/// constant outside the knots.
class YawSpline {
public:
    YawSpline() = default;
    YawSpline(std::vector<double> knots, std::vector<double> values);

    double value(double t) const;
    double rate(double t) const;
    double accel(double t) const;
    const std::vector<double>& knots() const { return knots_; }

private:
    std::size_t segment(double t) const;
    std::vector<double> knots_;
    std::vector<double> values_;
};

/// Knots at the landing times, valued by the commanded heading there.
YawSpline yaw_trajectory(const CommandScript& cmd, double yaw0, const std::vector<double>& landing_times);

/// Swing profile: cubic in horizontal over the forward part of the swing,
/// cubic up to the apex then cubic down in vertical.
Vector3d swing_position(const Footstep& step, double t, const GaitParams& gait);

struct PlannerParams {
    GaitParams gait;
    PlanParams plan;
    /// Body centre above the plane below it.
    double body_height = 0.40;
    /// Extra body height while the stance feet stand on different planes.
    double stairs_raise = 0.0;
    /// Footstep targets lead the hip by this fraction of a cycle at landing.
    double step_lead = 0.25;
    double v_max = 0.5;
    double omega_max = 0.6;
    double foot_kp = 100.0, foot_kd = 20.0;
    double body_kp = 64.0, body_kd = 16.0;
    double yaw_kp = 25.0, yaw_kd = 10.0;
    double speed_k = 4.0;
    /// Obstacles farther than this from the body centre are left out.
    double obstacle_radius = 1.5;
    bool origin_exchange = true;
};

enum class FootMode { Rolling, Fixed, Swing };

struct LegPlan {
    FootMode mode = FootMode::Rolling;
    int plane = -1;
    /// Fixed: world wheel centre. Rolling: x offset from the body centre.
    Vector3d anchor_point = Vector3d::Zero();
    double roll_offset = 0.0;
    Footstep step;
    ConvexRegion region;
};

struct LandingEvent {
    double t = 0.0;
    Footstep step;
};

/// Stateful reference generator. update() must be called once per tick,
/// before reference() and context(), with non-decreasing times.
class Planner {
public:
    Planner(scene::Scene scene, RobotGeometry geometry, CommandScript cmd, PlannerParams params,
            safety::InputLimits limits = safety::InputLimits::defaults());

    /// Resets the plan for an episode of `duration` seconds starting at x0.
    void start(const RobotState& x0, double duration);
    /// Handles support switches; returns the (possibly re-based) state.
    RobotState update(double t, const RobotState& x);
    RobotInput reference(double t, const RobotState& x) const;
    safety::ConstraintContext context(double t, const RobotState& x) const;

    const GaitPhase& phase() const { return phase_; }
    const std::array<LegPlan, model::kLegCount>& legs() const { return legs_; }
    const std::vector<LandingEvent>& landings() const { return landings_; }
    const YawSpline& yaw() const { return yaw_; }
    const scene::Scene& scene() const { return scene_; }
    const PlannerParams& params() const { return params_; }
    /// World height the body centre is steered to.
    double body_height_reference(const RobotState& x) const;

private:
    void plan_half_cycle(double t, const RobotState& x);
    void land(double t, const RobotState& x);
    /// Reference wheel centre in world for a leg at time t.
    Vector3d foot_reference(const LegPlan& leg, double t, const RobotState& x) const;

    scene::Scene scene_;
    RobotGeometry geometry_;
    CommandScript cmd_;
    PlannerParams params_;
    safety::InputLimits limits_;
    YawSpline yaw_;
    GaitPhase phase_;
    std::array<LegPlan, model::kLegCount> legs_{};
    std::vector<LandingEvent> landings_;
    bool started_ = false;
};

}  // namespace t3cbf::planner
