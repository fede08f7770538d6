#include "t3cbf/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include <json.hpp>

namespace t3cbf::scene {

namespace {

double cross(const Vector2d& a, const Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

double segment_distance(const Vector2d& p, const Vector2d& a, const Vector2d& b) {
    const Vector2d ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (a + t * ab - p).norm();
}

}  // namespace

void Plane::validate() const {
    const std::size_t n = vertices.size();
    if (n < 3) throw std::invalid_argument("plane needs at least three vertices");
    if (!std::isfinite(z)) throw std::invalid_argument("plane height must be finite");
    for (const Vector2d& v : vertices)
        if (!v.allFinite()) throw std::invalid_argument("plane vertices must be finite");
    for (std::size_t i = 0; i < n; ++i) {
        const Vector2d& a = vertices[i];
        const Vector2d& b = vertices[(i + 1) % n];
        const Vector2d& c = vertices[(i + 2) % n];
        if (!(cross(b - a, c - b) > 1e-12)) throw std::invalid_argument("plane polygon must be convex and CCW");
    }
}

bool Plane::contains(const Vector2d& p, double tol) const { return signed_distance(p) <= tol; }

double Plane::signed_distance(const Vector2d& p) const {
    const std::size_t n = vertices.size();
    double outside = -std::numeric_limits<double>::infinity();
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const Vector2d& a = vertices[i];
        const Vector2d& b = vertices[(i + 1) % n];
        const Vector2d e = (b - a).normalized();
        outside = std::max(outside, cross(e, p - a) * -1.0);
        nearest = std::min(nearest, segment_distance(p, a, b));
    }
    return outside > 0.0 ? nearest : -nearest;
}

void StairsSpec::validate() const {
    if (count < 1) throw std::invalid_argument("stairs count must be at least 1");
    if (!(rise > 0.0) || !(run > 0.0) || !(width > 0.0) || !(approach > 0.0) || !(landing > 0.0))
        throw std::invalid_argument("stairs dimensions must be positive");
    if (!(edge_depth > 0.0) || edge_depth >= run) throw std::invalid_argument("edge depth must be in (0, run)");
    if (!start.allFinite() || !std::isfinite(base_z)) throw std::invalid_argument("stairs origin must be finite");
}

void Scene::validate() const {
    for (const Plane& p : planes) p.validate();
    for (std::size_t i = 0; i < planes.size(); ++i)
        for (std::size_t j = i + 1; j < planes.size(); ++j)
            if (planes[i].id == planes[j].id) throw std::invalid_argument("plane ids must be unique");
    for (const geom::Cuboid& c : obstacles) c.validate();
}

const Plane& Scene::plane(int id) const {
    for (const Plane& p : planes)
        if (p.id == id) return p;
    throw std::out_of_range("no plane with id " + std::to_string(id));
}

const Plane* Scene::plane_at(const Vector2d& p, double tol) const {
    const Plane* best = nullptr;
    for (const Plane& pl : planes)
        if (pl.contains(p, tol) && (!best || pl.z > best->z)) best = &pl;
    return best;
}

const Plane* Scene::nearest_plane(const Vector2d& p, double capture) const {
    const Plane* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (const Plane& pl : planes) {
        const double d = pl.signed_distance(p);
        if (d <= capture && d < best_d) {
            best = &pl;
            best_d = d;
        }
    }
    return best;
}

void add_stairs(Scene& scene, const StairsSpec& s) {
    s.validate();
    int next_id = 0;
    for (const Plane& p : scene.planes) next_id = std::max(next_id, p.id + 1);
    const double y0 = s.start.y() - 0.5 * s.width, y1 = s.start.y() + 0.5 * s.width;
    const auto rect = [&](double x0, double x1, double z) {
        Plane p;
        p.id = next_id++;
        p.z = z;
        p.vertices = {Vector2d(x0, y0), Vector2d(x1, y0), Vector2d(x1, y1), Vector2d(x0, y1)};
        return p;
    };
    const double x0 = s.start.x();
    scene.planes.push_back(rect(x0 - s.approach, x0, s.base_z));
    for (int k = 1; k <= s.count; ++k) {
        const double front = x0 + (k - 1) * s.run;
        const double back = k == s.count ? front + s.landing : front + s.run;
        scene.planes.push_back(rect(front, back, s.base_z + k * s.rise));
        scene.obstacles.emplace_back(Eigen::Vector3d(front + 0.5 * s.edge_depth, s.start.y(), s.base_z + (k - 0.5) * s.rise),
                                     Eigen::Matrix3d::Identity(),
                                     Eigen::Vector3d(0.5 * s.edge_depth, 0.5 * s.width, 0.5 * s.rise));
    }
    scene.stairs.push_back(s);
}

Scene flat_ground(double size) {
    Scene s;
    Plane p;
    const double h = 0.5 * size;
    p.vertices = {Vector2d(-h, -h), Vector2d(h, -h), Vector2d(h, h), Vector2d(-h, h)};
    s.planes.push_back(p);
    return s;
}

Scene stairs_scene(const StairsSpec& spec) {
    Scene s;
    add_stairs(s, spec);
    return s;
}

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
    throw SceneError(field + ": " + what);
}

double number(const json& j, const std::string& key, const std::string& where, std::optional<double> fallback = {}) {
    if (!j.contains(key)) {
        if (fallback) return *fallback;
        fail(where + "." + key, "missing");
    }
    const json& v = j.at(key);
    if (!v.is_number()) fail(where + "." + key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(where + "." + key, "must be finite");
    return d;
}

template <int N>
Eigen::Matrix<double, N, 1> vec(const json& j, const std::string& key, const std::string& where,
                                std::optional<Eigen::Matrix<double, N, 1>> fallback = {}) {
    if (!j.contains(key)) {
        if (fallback) return *fallback;
        fail(where + "." + key, "missing");
    }
    const json& v = j.at(key);
    if (!v.is_array() || v.size() != static_cast<std::size_t>(N))
        fail(where + "." + key, "expected an array of " + std::to_string(N) + " numbers");
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) {
        if (!v[static_cast<std::size_t>(i)].is_number()) fail(where + "." + key, "expected numbers");
        out[i] = v[static_cast<std::size_t>(i)].get<double>();
    }
    if (!out.allFinite()) fail(where + "." + key, "must be finite");
    return out;
}

const json& array_field(const json& root, const std::string& key) {
    const json& a = root.at(key);
    if (!a.is_array()) fail(key, "expected an array");
    return a;
}

}  // namespace

Scene parse_scene(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SceneError(std::string("scene: invalid JSON: ") + e.what());
    }
    if (!root.is_object()) fail("scene", "expected an object");
    for (const auto& [key, value] : root.items())
        if (key != "planes" && key != "obstacles" && key != "stairs") fail(key, "unknown field");

    Scene scene;
    if (root.contains("planes")) {
        const json& planes = array_field(root, "planes");
        for (std::size_t i = 0; i < planes.size(); ++i) {
            const std::string where = "planes[" + std::to_string(i) + "]";
            const json& p = planes[i];
            if (!p.is_object()) fail(where, "expected an object");
            Plane plane;
            plane.id = static_cast<int>(number(p, "id", where, static_cast<double>(i)));
            plane.z = number(p, "z", where);
            if (!p.contains("vertices") || !p.at("vertices").is_array()) fail(where + ".vertices", "expected an array");
            const json& vs = p.at("vertices");
            for (std::size_t k = 0; k < vs.size(); ++k) {
                const std::string vw = where + ".vertices[" + std::to_string(k) + "]";
                if (!vs[k].is_array() || vs[k].size() != 2 || !vs[k][0].is_number() || !vs[k][1].is_number())
                    fail(vw, "expected [x, y]");
                plane.vertices.emplace_back(vs[k][0].get<double>(), vs[k][1].get<double>());
            }
            try {
                plane.validate();
            } catch (const std::invalid_argument& e) {
                fail(where + ".vertices", e.what());
            }
            scene.planes.push_back(std::move(plane));
        }
    }
    if (root.contains("obstacles")) {
        const json& obs = array_field(root, "obstacles");
        for (std::size_t i = 0; i < obs.size(); ++i) {
            const std::string where = "obstacles[" + std::to_string(i) + "]";
            const json& o = obs[i];
            if (!o.is_object()) fail(where, "expected an object");
            const Eigen::Vector3d c = vec<3>(o, "center", where);
            const Eigen::Vector3d h = vec<3>(o, "half_extents", where);
            const Eigen::Vector3d rpy = vec<3>(o, "rpy", where, Eigen::Vector3d::Zero());
            if (!(h.array() > 0.0).all()) fail(where + ".half_extents", "must be positive");
            scene.obstacles.emplace_back(c, geom::rot_zyx(rpy.z(), rpy.y(), rpy.x()), h);
        }
    }
    if (root.contains("stairs")) {
        const json& st = array_field(root, "stairs");
        for (std::size_t i = 0; i < st.size(); ++i) {
            const std::string where = "stairs[" + std::to_string(i) + "]";
            const json& s = st[i];
            if (!s.is_object()) fail(where, "expected an object");
            StairsSpec spec;
            spec.count = static_cast<int>(number(s, "count", where, spec.count));
            spec.rise = number(s, "rise", where, spec.rise);
            spec.run = number(s, "run", where, spec.run);
            spec.start = vec<2>(s, "start", where, spec.start);
            spec.width = number(s, "width", where, spec.width);
            spec.approach = number(s, "approach", where, spec.approach);
            spec.landing = number(s, "landing", where, spec.landing);
            spec.edge_depth = number(s, "edge_depth", where, spec.edge_depth);
            spec.base_z = number(s, "base_z", where, spec.base_z);
            try {
                add_stairs(scene, spec);
            } catch (const std::invalid_argument& e) {
                fail(where, e.what());
            }
        }
    }
    try {
        scene.validate();
    } catch (const std::invalid_argument& e) {
        fail("scene", e.what());
    }
    return scene;
}

Scene load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SceneError(path + ": cannot open");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scene(buf.str());
}

}  // namespace t3cbf::scene
