#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "t3cbf/ecbf.hpp"
#include "t3cbf/geometry.hpp"
#include "t3cbf/model.hpp"
#include "t3cbf/smoothmath.hpp"

namespace t3cbf::safety {

using model::Leg;
using model::RobotGeometry;

/// a . p + b >= 0 on world xy.
struct HalfSpace {
    Eigen::Vector2d a = Eigen::Vector2d::Zero();
    double b = 0.0;
    double eval(const Eigen::Vector2d& p) const { return a.dot(p) + b; }
};

struct LegContext {
    bool stance = true;
    /// Foothold rows apply (foot lowering and stance).
    bool foothold = false;
    /// Toe-vs-obstacle rows apply (swing).
    bool toe_collision = false;
    std::vector<HalfSpace> region;
    double floor = 0.0;
};

struct ConstraintContext {
    std::vector<geom::Cuboid> obstacles;
    std::array<LegContext, model::kLegCount> legs;
};

struct ConstraintConfig {
    smooth::SmoothingParams smoothing;
    /// Obstacles are inflated by this before the smooth margin is taken; a
    /// negative value selects the smoothing's upper error band.
    double body_margin = -1.0;
    int superellipsoid_n = 4;
    /// Joint rows keep this far inside the range, which absorbs the
    /// integration error of a row that is active at its boundary.
    double joint_margin = 1e-4;
    double stability_shrink = 0.05;
    double lambda_collision = 4.0;
    /// The toe margin grows like distance^(2N), so its approach speed is
    /// capped near lambda * distance / (2N); this pole is kept fast.
    double lambda_toe = 24.0;
    double lambda_joint = 8.0;
    double lambda_default = 4.0;
    std::array<bool, kConstraintKinds> enabled{true, true, true, true, true, true};
    bool parallel = false;

    bool on(ConstraintKind k) const { return enabled[static_cast<std::size_t>(k)]; }
    double effective_body_margin() const { return body_margin < 0.0 ? smoothing.upper_band() : body_margin; }
    Eigen::Vector2d gains(ConstraintKind k) const;
};

/// Knee min, knee max, hip min, hip max.
std::array<LocalDerivative, 4> joint_limit_terms(const RobotState& x, const RobotGeometry& g, Leg leg);

LocalDerivative body_collision_term(const RobotState& x, const RobotGeometry& g, const geom::Cuboid& obstacle,
                                    const ConstraintConfig& cfg);

/// Superellipsoid around the obstacle inflated by the wheel radius.
LocalDerivative toe_collision_term(const RobotState& x, const RobotGeometry& g, Leg leg, const geom::Cuboid& obstacle,
                                   int exponent_n);

LocalDerivative foothold_term(const RobotState& x, const RobotGeometry& g, Leg leg, const HalfSpace& edge);

/// Wheel bottom above the floor.
LocalDerivative foot_height_term(const RobotState& x, const RobotGeometry& g, Leg leg, double floor);

/// Hull row (body behind a front foot or ahead of a rear foot by `shrink`),
/// then reach row (foot not further from the body than the leg allows).
std::array<LocalDerivative, 2> stability_terms(const RobotState& x, const RobotGeometry& g, Leg leg, double shrink);

/// Along-heading reach used by the stability reach row.
double stability_reach(const model::LegGeometry& leg);

struct RowTask {
    ConstraintKind kind;
    std::int16_t leg = -1;
    std::int32_t item = -1;
};

/// Which rows the context asks for, in a fixed order.
std::vector<RowTask> plan_rows(const ConstraintContext& ctx, const ConstraintConfig& cfg);

LocalDerivative evaluate_task(const RowTask& task, const RobotState& x, const RobotGeometry& g,
                              const ConstraintContext& ctx, const ConstraintConfig& cfg);

struct BuildStats {
    int dropped_non_finite = 0;
};

/// All active rows. Non-finite terms are dropped and counted.
std::vector<EcbfRow> build_rows(const RobotState& x, const RobotGeometry& g, const ConstraintContext& ctx,
                                const ConstraintConfig& cfg, BuildStats* stats = nullptr);

}  // namespace t3cbf::safety
