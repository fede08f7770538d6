#pragma once

#include <array>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "t3cbf/constraints.hpp"
#include "t3cbf/ecbf.hpp"
#include "t3cbf/kernels.hpp"
#include "t3cbf/model.hpp"
#include "t3cbf/planner.hpp"
#include "t3cbf/scene.hpp"

namespace t3cbf::sim {

using model::RobotGeometry;
using model::RobotState;

struct EpisodeConfig {
    double dt = 1e-3;
    double duration = 10.0;
    RobotGeometry geometry = RobotGeometry::defaults();
    planner::PlannerParams planner;
    safety::ConstraintConfig constraints;
    safety::FilterConfig filter = default_filter();
    /// Master switch; when off the reference input is applied unfiltered.
    bool cbf = true;
    /// Start pose of the body centre on the ground.
    Eigen::Vector2d start_xy = Eigen::Vector2d::Zero();
    double start_yaw = 0.0;

    /// Throws std::invalid_argument unless dt > 0 and duration is a whole
    /// number of ticks.
    void validate() const;
    long ticks() const;

    /// Heavy weights on the origin, yaw and body-x inputs so that the filter
    /// prefers moving the body vertically and the legs.
    static safety::FilterConfig default_filter();
};

/// JSON overrides on top of the defaults. Recognized keys: dt, duration, cbf,
/// start {x, y, yaw}, body_height, smoothing {alpha_max, alpha_abs, eps_sqrt,
/// switch_threshold, max ("lse" | "boltzmann"), abs ("xtanh" | "sqrt")},
/// gains {collision, toe, joint, default}, enabled {<kind name>: bool},
/// w_delta, gait {cycle, apex}. Unknown keys and wrong types throw
/// std::invalid_argument naming the key.
EpisodeConfig parse_episode_config(const std::string& text);
EpisodeConfig load_episode_config(const std::string& path);

struct TickRecord {
    double t = 0.0;
    model::StateVector x = model::StateVector::Zero();
    model::InputVector u_ref = model::InputVector::Zero();
    model::InputVector u = model::InputVector::Zero();
    /// Smallest online h per constraint kind (+inf when the kind had no row).
    std::array<double, safety::kConstraintKinds> h_min{};
    int rows = 0;
    int soft_rows = 0;
    double max_slack = 0.0;
    bool fallback = false;
    bool relaxed = false;
    double assembly_us = 0.0;
    double solve_us = 0.0;
};

struct EpisodeLog {
    std::vector<TickRecord> ticks;
    std::vector<planner::LandingEvent> landings;
    RobotGeometry geometry;
    double dt = 0.0;
    int fallbacks = 0;
    /// True if the episode stopped early on a non-finite state.
    bool aborted = false;
};

/// Body centre `body_height` above the plane under xy, every foot below its
/// hip with the wheel on the plane under it; the origin sits at the body.
RobotState standing_state(const scene::Scene& scene, const RobotGeometry& g, const Eigen::Vector2d& xy, double yaw,
                          double body_height);

EpisodeLog run_episode(const scene::Scene& scene, const planner::CommandScript& cmd, const EpisodeConfig& config);

struct SafetyReport {
    double min_body_margin = std::numeric_limits<double>::infinity();
    double min_body_margin_time = 0.0;
    int body_violation_ticks = 0;
    /// Largest distance outside a knee or hip range.
    double max_joint_excursion = 0.0;
    int joint_violation_ticks = 0;
    int foothold_checks = 0;
    int foothold_violations = 0;
    double worst_foothold_margin = std::numeric_limits<double>::infinity();
    double max_tick_us = 0.0;
    double median_tick_us = 0.0;
    double max_body_z = -std::numeric_limits<double>::infinity();

    /// Body clear of every obstacle and joints inside their ranges.
    /// Footholds are reported but not part of this.
    bool ok(double tol = 1e-6) const { return min_body_margin >= -tol && max_joint_excursion <= tol; }
};

/// Exact (non-smooth) margins recomputed from the log and the scene only.
SafetyReport verify_safety(const EpisodeLog& log, const scene::Scene& scene, Exec exec = Exec::Parallel,
                           double tol = 1e-6);

/// One row per tick: t, 36 states, 17 reference inputs, 17 inputs, smallest h
/// per kind, row count, fallback flag and, optionally, timings in µs.
void write_csv(const EpisodeLog& log, std::ostream& out, bool timings = true);

}  // namespace t3cbf::sim
