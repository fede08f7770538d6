#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "t3cbf/geometry.hpp"

namespace t3cbf::scene {

using Eigen::Vector2d;

/// Horizontal convex polygon at height z. Vertices are counter-clockwise in
/// world xy.
struct Plane {
    int id = 0;
    double z = 0.0;
    std::vector<Vector2d> vertices;

    /// Throws std::invalid_argument unless the polygon is convex, CCW and has
    /// at least three finite vertices.
    void validate() const;
    bool contains(const Vector2d& p, double tol = 0.0) const;
    /// Euclidean distance to the polygon; negative (minus the depth) inside.
    double signed_distance(const Vector2d& p) const;
};

/// Straight flight along +x starting at `start` (the first riser), one tread
/// per step; the last tread is `landing` long.
struct StairsSpec {
    int count = 5;
    double rise = 0.165;
    double run = 0.35;
    Vector2d start = Vector2d(1.0, 0.0);
    double width = 2.0;
    double approach = 3.0;
    double landing = 3.0;
    /// Depth of the cuboid placed at each step nose.
    double edge_depth = 0.04;
    double base_z = 0.0;

    void validate() const;
};

struct Scene {
    std::vector<Plane> planes;
    std::vector<geom::Cuboid> obstacles;
    /// Stairs the scene was built from, kept for reporting.
    std::vector<StairsSpec> stairs;

    void validate() const;
    const Plane& plane(int id) const;
    /// Highest plane containing p (within tol), or nullptr.
    const Plane* plane_at(const Vector2d& p, double tol = 1e-9) const;
    /// Plane with the smallest signed distance to p, or nullptr if none is
    /// within `capture`.
    const Plane* nearest_plane(const Vector2d& p, double capture) const;
};

class SceneError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Appends `count + 1` planes (floor, treads) and one nose cuboid per step.
void add_stairs(Scene& scene, const StairsSpec& spec);

Scene flat_ground(double size = 10.0);
Scene stairs_scene(const StairsSpec& spec = {});

/// JSON with optional arrays planes[] {id, z, vertices}, obstacles[]
/// {center, half_extents, rpy}, stairs[] {count, rise, run, start, width,
/// approach, landing, edge_depth, base_z}. Lengths in meters, angles in
/// radians. Errors name the offending field.
Scene parse_scene(const std::string& text);
Scene load_scene(const std::string& path);

}  // namespace t3cbf::scene
