#include "t3cbf/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace t3cbf::planner {

namespace idx = model::idx;
using model::InputVector;

namespace {

double cross(const Vector2d& a, const Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

double smoothstep(double s) { return s * s * (3.0 - 2.0 * s); }

std::vector<Vector2d> convex_hull(std::vector<Vector2d> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vector2d& a, const Vector2d& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    if (pts.size() < 3) return pts;
    std::vector<Vector2d> hull(2 * pts.size());
    std::size_t k = 0;
    for (const Vector2d& p : pts) {
        while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 1e-15) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        const Vector2d& p = pts[i];
        while (k >= lower && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 1e-15) --k;
        hull[k++] = p;
    }
    hull.resize(k - 1);
    return hull;
}

// Outward unit normals paired with a point on each edge of a CCW polygon.
std::vector<std::pair<Vector2d, Vector2d>> outward_faces(const std::vector<Vector2d>& poly) {
    std::vector<std::pair<Vector2d, Vector2d>> out;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vector2d e = poly[(i + 1) % poly.size()] - poly[i];
        if (e.norm() < 1e-12) continue;
        out.emplace_back(Vector2d(e.y(), -e.x()).normalized(), poly[i]);
    }
    return out;
}

// Separating-axis test between convex polygons with a gap allowance.
bool overlaps(const std::vector<Vector2d>& a, const std::vector<Vector2d>& b, double gap) {
    const auto separated_on = [&](const std::vector<Vector2d>& faces_of) {
        for (const auto& [n, p] : outward_faces(faces_of)) {
            double lo_a = std::numeric_limits<double>::infinity(), hi_a = -lo_a;
            double lo_b = lo_a, hi_b = hi_a;
            for (const Vector2d& v : a) {
                lo_a = std::min(lo_a, n.dot(v));
                hi_a = std::max(hi_a, n.dot(v));
            }
            for (const Vector2d& v : b) {
                lo_b = std::min(lo_b, n.dot(v));
                hi_b = std::max(hi_b, n.dot(v));
            }
            if (lo_b - hi_a > gap || lo_a - hi_b > gap) return true;
        }
        return false;
    };
    return !separated_on(a) && !separated_on(b);
}

}  // namespace

CommandScript::CommandScript(std::vector<VelocityCommand> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const VelocityCommand& c = entries_[i];
        if (!std::isfinite(c.t) || !std::isfinite(c.v) || !std::isfinite(c.omega))
            throw std::invalid_argument("command entries must be finite");
        if (i > 0 && !(c.t > entries_[i - 1].t)) throw std::invalid_argument("command times must increase");
    }
}

CommandScript CommandScript::constant(double v, double omega) { return CommandScript({{0.0, v, omega}}); }

CommandScript CommandScript::parse(const std::string& text) {
    std::vector<VelocityCommand> out;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        VelocityCommand c;
        if (!(ls >> c.t)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw std::invalid_argument("command script line " + std::to_string(number) + ": expected t v omega");
        }
        std::string rest;
        if (!(ls >> c.v >> c.omega) || (ls >> rest))
            throw std::invalid_argument("command script line " + std::to_string(number) + ": expected t v omega");
        out.push_back(c);
    }
    return CommandScript(std::move(out));
}

CommandScript CommandScript::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument(path + ": cannot open");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

VelocityCommand CommandScript::at(double t) const {
    VelocityCommand out{t, 0.0, 0.0};
    for (const VelocityCommand& c : entries_) {
        if (c.t > t) break;
        out.v = c.v;
        out.omega = c.omega;
    }
    return out;
}

double CommandScript::heading_change(double t) const {
    double total = 0.0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const double a = std::max(entries_[i].t, 0.0);
        const double b = std::min(i + 1 < entries_.size() ? entries_[i + 1].t : t, t);
        if (b > a) total += entries_[i].omega * (b - a);
    }
    return total;
}

void CommandScript::check_limits(double v_max, double omega_max) const {
    for (const VelocityCommand& c : entries_)
        if (std::abs(c.v) > v_max || std::abs(c.omega) > omega_max)
            throw std::invalid_argument("command at t = " + std::to_string(c.t) + " exceeds the velocity limits");
}

bool in_tripod(Leg leg, Tripod tripod) {
    const bool a = leg == Leg::LR || leg == Leg::RR || leg == Leg::MF;
    return tripod == Tripod::A ? a : !a;
}

void GaitParams::validate() const {
    if (!(cycle > 0.0)) throw std::invalid_argument("gait cycle must be positive");
    if (!(up_fraction >= 0.0 && lower_fraction >= 0.0 && up_fraction + lower_fraction < 1.0))
        throw std::invalid_argument("swing fractions must leave room for the forward move");
}

GaitPhase gait_schedule(double t, const GaitParams& params) {
    GaitPhase ph;
    const double half = params.half();
    ph.half_cycle = static_cast<long>(std::floor(t / half + 1e-9));
    ph.clock = std::max(0.0, t - static_cast<double>(ph.half_cycle) * half);
    ph.progress = std::min(ph.clock / half, 1.0);
    ph.swinging = ph.half_cycle % 2 == 0 ? Tripod::A : Tripod::B;
    for (Leg leg : model::kAllLegs) {
        LegPhase p = LegPhase::Stance;
        if (in_tripod(leg, ph.swinging)) {
            if (ph.progress < params.up_fraction) p = LegPhase::SwingUp;
            else if (ph.progress < 1.0 - params.lower_fraction) p = LegPhase::SwingForward;
            else p = LegPhase::FootLowering;
        }
        ph.legs[static_cast<std::size_t>(model::leg_index(leg))] = p;
    }
    return ph;
}

std::vector<double> support_switches(double t0, double t1, const GaitParams& params) {
    std::vector<double> out;
    const double half = params.half();
    for (long k = static_cast<long>(std::floor(t0 / half)) + 1; static_cast<double>(k) * half <= t1 + 1e-12; ++k)
        if (static_cast<double>(k) * half > t0) out.push_back(static_cast<double>(k) * half);
    return out;
}

std::array<Vector2d, model::kLegCount> nominal_footsteps(const VelocityCommand& cmd, const RobotState& x,
                                                         const RobotGeometry& g, double horizon) {
    const double yaw = x.yaw();
    Vector2d p = x.p().head<2>();
    double yaw_end = yaw;
    if (std::abs(cmd.omega) < 1e-12) {
        p += cmd.v * horizon * Vector2d(std::cos(yaw), std::sin(yaw));
    } else {
        yaw_end = yaw + cmd.omega * horizon;
        const double r = cmd.v / cmd.omega;
        p += r * Vector2d(std::sin(yaw_end) - std::sin(yaw), std::cos(yaw) - std::cos(yaw_end));
    }
    const Eigen::Rotation2Dd rot(yaw_end);
    std::array<Vector2d, model::kLegCount> out;
    for (Leg leg : model::kAllLegs)
        out[static_cast<std::size_t>(model::leg_index(leg))] = p + rot * g.leg(leg).anchor.head<2>();
    return out;
}

bool ConvexRegion::contains(const Vector2d& p, double tol) const { return margin(p) >= -tol; }

double ConvexRegion::margin(const Vector2d& p) const {
    double m = std::numeric_limits<double>::infinity();
    for (const safety::HalfSpace& h : halfspaces) m = std::min(m, h.eval(p));
    return m;
}

std::vector<Vector2d> ConvexRegion::polygon(const std::vector<Vector2d>& bound) const {
    std::vector<Vector2d> poly = bound;
    for (const safety::HalfSpace& h : halfspaces) {
        std::vector<Vector2d> next;
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Vector2d& a = poly[i];
            const Vector2d& b = poly[(i + 1) % poly.size()];
            const double fa = h.eval(a), fb = h.eval(b);
            if (fa >= 0.0) next.push_back(a);
            if ((fa >= 0.0) != (fb >= 0.0)) next.push_back(a + (b - a) * (fa / (fa - fb)));
        }
        poly = std::move(next);
        if (poly.empty()) break;
    }
    return poly;
}

Vector2d closest_point(const std::vector<Vector2d>& polygon, const Vector2d& p) {
    if (polygon.empty()) throw std::invalid_argument("closest_point: empty polygon");
    bool inside = polygon.size() >= 3;
    for (std::size_t i = 0; i < polygon.size() && inside; ++i)
        if (cross(polygon[(i + 1) % polygon.size()] - polygon[i], p - polygon[i]) < 0.0) inside = false;
    if (inside) return p;
    Vector2d best = polygon.front();
    for (std::size_t i = 0; i < polygon.size(); ++i) {
        const Vector2d& a = polygon[i];
        const Vector2d ab = polygon[(i + 1) % polygon.size()] - a;
        const double len2 = ab.squaredNorm();
        const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        const Vector2d q = a + t * ab;
        if ((q - p).squaredNorm() < (best - p).squaredNorm()) best = q;
    }
    return best;
}

RegionResult safe_convex_region(const scene::Plane& plane, const std::vector<geom::Cuboid>& obstacles,
                                const Vector2d& target, double clearance, double band) {
    RegionResult out;
    const std::vector<Vector2d>& hull = plane.vertices;
    // Faces are picked against the target pulled onto the plane, so a target
    // past an obstacle does not cut the plane away entirely.
    const Vector2d anchor = plane.contains(target) ? target : closest_point(hull, target);
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const Vector2d e = (hull[(i + 1) % hull.size()] - hull[i]).normalized();
        const Vector2d n(-e.y(), e.x());
        out.region.halfspaces.push_back({n, -n.dot(hull[i])});
    }
    for (const geom::Cuboid& c : obstacles) {
        std::vector<Vector2d> corners;
        double zlo = std::numeric_limits<double>::infinity(), zhi = -zlo;
        for (int k = 0; k < 8; ++k) {
            const Eigen::Vector3d s((k & 1) ? 1.0 : -1.0, (k & 2) ? 1.0 : -1.0, (k & 4) ? 1.0 : -1.0);
            const Eigen::Vector3d w = c.center + c.rotation * s.cwiseProduct(c.half_extents);
            corners.push_back(w.head<2>());
            zlo = std::min(zlo, w.z());
            zhi = std::max(zhi, w.z());
        }
        if (zhi < plane.z - 1e-9 || zlo > plane.z + band) continue;
        const std::vector<Vector2d> footprint = convex_hull(corners);
        if (!overlaps(footprint, hull, clearance)) continue;
        double best = -std::numeric_limits<double>::infinity();
        safety::HalfSpace cut;
        for (const auto& [n, p] : outward_faces(footprint)) {
            const double d = n.dot(anchor - p);
            if (d > best) {
                best = d;
                cut = {n, -n.dot(p) - clearance};
            }
        }
        out.region.halfspaces.push_back(cut);
        ++out.cuts;
    }
    out.target_feasible = out.region.contains(target);
    return out;
}

std::vector<Footstep> adjust_to_planes(const std::vector<StepRequest>& requests, const scene::Scene& scene,
                                       const RobotGeometry& g, const PlanParams& params) {
    std::vector<Footstep> out;
    for (const StepRequest& r : requests) {
        Footstep s;
        s.leg = r.leg;
        s.start = r.start;
        s.lift_time = r.lift_time;
        s.landing_time = r.landing_time;
        s.apex = params.apex;
        s.plane = r.start_plane;
        s.target = r.start;
        // Every plane within capture competes; the one whose safe region
        // lies closest to the nominal target wins.
        const scene::Plane* plane = nullptr;
        RegionResult region;
        Vector2d xy = r.target;
        double best = std::numeric_limits<double>::infinity();
        for (const scene::Plane& candidate : scene.planes) {
            if (candidate.signed_distance(r.target) > params.capture) continue;
            RegionResult rr = safe_convex_region(candidate, scene.obstacles, r.target, params.clearance);
            Vector2d p = r.target;
            if (!candidate.contains(p) || rr.region.margin(p) < params.inset) {
                ConvexRegion inner = rr.region;
                for (safety::HalfSpace& h : inner.halfspaces) h.b -= params.inset;
                const std::vector<Vector2d> poly = inner.polygon(candidate.vertices);
                if (poly.size() < 3) continue;
                p = closest_point(poly, p);
            }
            // Pushing the target further along the step costs twice: the
            // leg may not reach it in time.
            const Vector2d along = r.target - r.start.head<2>();
            const double ahead = along.norm() > 1e-9 ? std::max(0.0, (p - r.target).dot(along.normalized())) : 0.0;
            const double d = (p - r.target).norm() + ahead;
            if (d < best - 1e-9 || (d < best + 1e-9 && plane && candidate.z > plane->z)) {
                best = d;
                plane = &candidate;
                region = std::move(rr);
                xy = p;
            }
        }
        if (!plane) {
            s.held = true;
            out.push_back(s);
            continue;
        }
        s.retargeted = (xy - r.target).norm() > 1e-12;
        s.plane = plane->id;
        s.region = region.region;
        s.target = Vector3d(xy.x(), xy.y(), plane->z + g.leg(r.leg).wheel_radius);
        s.rolling = params.allow_rolling && plane->id == r.start_plane && region.region.contains(r.start.head<2>()) &&
                    std::abs(r.start.z() - s.target.z()) < 1e-3;
        out.push_back(s);
    }
    return out;
}

YawSpline::YawSpline(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
    if (knots_.size() != values_.size() || knots_.empty()) throw std::invalid_argument("yaw spline needs knots");
    for (std::size_t i = 1; i < knots_.size(); ++i)
        if (!(knots_[i] > knots_[i - 1])) throw std::invalid_argument("yaw spline knots must increase");
}

std::size_t YawSpline::segment(double t) const {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - knots_.begin() - 1));
}

double YawSpline::value(double t) const {
    if (knots_.empty()) return 0.0;
    if (t <= knots_.front()) return values_.front();
    if (t >= knots_.back()) return values_.back();
    const std::size_t i = segment(t);
    const double h = knots_[i + 1] - knots_[i];
    return values_[i] + (values_[i + 1] - values_[i]) * smoothstep((t - knots_[i]) / h);
}

double YawSpline::rate(double t) const {
    if (knots_.size() < 2 || t <= knots_.front() || t >= knots_.back()) return 0.0;
    const std::size_t i = segment(t);
    const double h = knots_[i + 1] - knots_[i];
    const double s = (t - knots_[i]) / h;
    return (values_[i + 1] - values_[i]) * 6.0 * s * (1.0 - s) / h;
}

double YawSpline::accel(double t) const {
    if (knots_.size() < 2 || t < knots_.front() || t >= knots_.back()) return 0.0;
    const std::size_t i = segment(t);
    const double h = knots_[i + 1] - knots_[i];
    const double s = (t - knots_[i]) / h;
    return (values_[i + 1] - values_[i]) * (6.0 - 12.0 * s) / (h * h);
}

YawSpline yaw_trajectory(const CommandScript& cmd, double yaw0, const std::vector<double>& landing_times) {
    std::vector<double> knots, values;
    if (landing_times.empty() || landing_times.front() > 0.0) {
        knots.push_back(0.0);
        values.push_back(yaw0);
    }
    for (double t : landing_times) {
        knots.push_back(t);
        values.push_back(yaw0 + cmd.heading_change(t));
    }
    return {knots, values};
}

Vector3d swing_position(const Footstep& step, double t, const GaitParams& gait) {
    const double span = step.landing_time - step.lift_time;
    const double s = span > 0.0 ? std::clamp((t - step.lift_time) / span, 0.0, 1.0) : 1.0;
    const double q = std::clamp((s - gait.up_fraction) / (1.0 - gait.up_fraction - gait.lower_fraction), 0.0, 1.0);
    Vector3d w;
    w.head<2>() = step.start.head<2>() + (step.target.head<2>() - step.start.head<2>()) * smoothstep(q);
    const double top = std::max(step.start.z(), step.target.z()) + step.apex;
    w.z() = s < 0.5 ? step.start.z() + (top - step.start.z()) * smoothstep(2.0 * s)
                    : top + (step.target.z() - top) * smoothstep(2.0 * s - 1.0);
    return w;
}

Planner::Planner(scene::Scene scene, RobotGeometry geometry, CommandScript cmd, PlannerParams params,
                 safety::InputLimits limits)
    : scene_(std::move(scene)),
      geometry_(std::move(geometry)),
      cmd_(std::move(cmd)),
      params_(params),
      limits_(std::move(limits)) {
    scene_.validate();
    geometry_.validate();
    params_.gait.validate();
    cmd_.check_limits(params_.v_max, params_.omega_max);
    if (scene_.planes.empty()) throw std::invalid_argument("planner needs at least one plane");
}

void Planner::start(const RobotState& x0, double duration) {
    std::vector<double> landings;
    const double half = params_.gait.half();
    for (long k = 1; static_cast<double>(k) * half <= duration + half; ++k) landings.push_back(static_cast<double>(k) * half);
    yaw_ = yaw_trajectory(cmd_, x0.yaw(), landings);
    landings_.clear();
    for (Leg leg : model::kAllLegs) {
        const int i = model::leg_index(leg);
        LegPlan& lp = legs_[static_cast<std::size_t>(i)];
        const Vector3d w = model::world_foot_position(x0, geometry_, leg);
        const scene::Plane* plane = scene_.plane_at(w.head<2>());
        if (!plane) plane = scene_.nearest_plane(w.head<2>(), std::numeric_limits<double>::infinity());
        lp = LegPlan{};
        lp.mode = FootMode::Rolling;
        lp.plane = plane->id;
        lp.roll_offset = x0[idx::foot_x(i)] - x0.body_x();
        lp.anchor_point = Vector3d(w.x(), w.y(), plane->z + geometry_.leg(leg).wheel_radius);
        lp.region = safe_convex_region(*plane, scene_.obstacles, w.head<2>(), params_.plan.clearance).region;
    }
    phase_ = GaitPhase{};
    phase_.half_cycle = -1;
    started_ = true;
}

void Planner::land(double t, const RobotState& x) {
    for (Leg leg : model::kAllLegs) {
        LegPlan& lp = legs_[static_cast<std::size_t>(model::leg_index(leg))];
        if (lp.mode != FootMode::Swing) continue;
        landings_.push_back({t, lp.step});
        const Vector3d w = model::world_foot_position(x, geometry_, leg);
        lp.mode = FootMode::Fixed;
        lp.plane = lp.step.plane;
        lp.region = lp.step.region;
        lp.anchor_point = Vector3d(w.x(), w.y(), lp.step.target.z());
    }
}

void Planner::plan_half_cycle(double t, const RobotState& x) {
    const GaitPhase ph = gait_schedule(t, params_.gait);
    const double half = params_.gait.half();
    const auto targets = nominal_footsteps(cmd_.at(t), x, geometry_, half + params_.step_lead * params_.gait.cycle);
    std::vector<StepRequest> requests;
    for (Leg leg : model::kAllLegs) {
        if (!in_tripod(leg, ph.swinging)) continue;
        const int i = model::leg_index(leg);
        StepRequest r;
        r.leg = leg;
        r.start = model::world_foot_position(x, geometry_, leg);
        r.start_plane = legs_[static_cast<std::size_t>(i)].plane;
        r.target = targets[static_cast<std::size_t>(i)];
        r.lift_time = t;
        r.landing_time = t + half;
        requests.push_back(r);
    }
    for (const Footstep& s : adjust_to_planes(requests, scene_, geometry_, params_.plan)) {
        const int i = model::leg_index(s.leg);
        LegPlan& lp = legs_[static_cast<std::size_t>(i)];
        if (s.held) continue;
        if (s.rolling) {
            if (lp.mode != FootMode::Rolling) lp.roll_offset = x[idx::foot_x(i)] - x.body_x();
            lp.mode = FootMode::Rolling;
            lp.region = s.region;
            continue;
        }
        lp.mode = FootMode::Swing;
        lp.step = s;
    }
}

RobotState Planner::update(double t, const RobotState& x) {
    if (!started_) throw std::logic_error("Planner::update before start");
    RobotState y = x;
    GaitPhase ph = gait_schedule(t, params_.gait);
    if (ph.half_cycle != phase_.half_cycle) {
        if (phase_.half_cycle >= 0) {
            land(t, y);
            if (params_.origin_exchange) {
                const model::OriginPose pose{model::world_body_position(y), y.yaw()};
                y = model::origin_exchange(y, geometry_, pose).state;
            }
        }
        plan_half_cycle(t, y);
    }
    for (Leg leg : model::kAllLegs) {
        const auto k = static_cast<std::size_t>(model::leg_index(leg));
        if (legs_[k].mode != FootMode::Swing) ph.legs[k] = LegPhase::Stance;
    }
    phase_ = ph;
    return y;
}

double Planner::body_height_reference(const RobotState& x) const {
    const Vector2d c = model::world_body_position(x).head<2>();
    const scene::Plane* plane = scene_.plane_at(c);
    if (!plane) plane = scene_.nearest_plane(c, std::numeric_limits<double>::infinity());
    double z = plane->z + params_.body_height;
    if (params_.stairs_raise != 0.0) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const LegPlan& lp : legs_) {
            const double pz = scene_.plane(lp.mode == FootMode::Swing ? lp.step.plane : lp.plane).z;
            lo = std::min(lo, pz);
            hi = std::max(hi, pz);
        }
        if (hi - lo > 1e-6) z += params_.stairs_raise;
    }
    return z;
}

Vector3d Planner::foot_reference(const LegPlan& leg, double t, const RobotState&) const {
    if (leg.mode == FootMode::Swing) return swing_position(leg.step, t, params_.gait);
    return leg.anchor_point;
}

RobotInput Planner::reference(double t, const RobotState& x) const {
    RobotInput u;
    InputVector& a = u.vec;
    const VelocityCommand cmd = cmd_.at(t);
    a[idx::kAccel] = params_.speed_k * (cmd.v - x.speed());
    a[idx::kYawAccel] = yaw_.accel(t) + params_.yaw_kp * (yaw_.value(t) - x.yaw()) +
                        params_.yaw_kd * (yaw_.rate(t) - x.yaw_rate());

    const double kp = params_.body_kp, kd = params_.body_kd;
    const double bz_ref = body_height_reference(x) - x[idx::kPz];
    a[idx::kBodyAx] = -kp * x.body_x() - kd * x[idx::kBodyVx];
    a[idx::kBodyAz] = kp * (bz_ref - x.body_z()) - kd * x[idx::kBodyVz];
    a[idx::kPitchAccel] = -kp * x.pitch() - kd * x[idx::kPitchRate];

    // Origin pose predicted from its current rates, for the feedforward of
    // world-held references seen from the moving origin frame.
    const double eps = 1e-3;
    const auto local = [&](const LegPlan& lp, Leg leg, double tau) {
        const double yaw = x.yaw() + x.yaw_rate() * tau;
        const double mid = x.yaw() + 0.5 * x.yaw_rate() * tau;
        const Vector3d p = x.p() + x.speed() * tau * Vector3d(std::cos(mid), std::sin(mid), 0.0);
        const Vector3d w = foot_reference(lp, t + tau, x);
        return Vector3d(geom::rot_z(yaw).transpose() * (w - p) - geometry_.leg(leg).anchor);
    };

    const double fkp = params_.foot_kp, fkd = params_.foot_kd;
    for (Leg leg : model::kAllLegs) {
        const int i = model::leg_index(leg);
        const LegPlan& lp = legs_[static_cast<std::size_t>(i)];
        const double fx = x[idx::foot_x(i)], fz = x[idx::foot_z(i)];
        const double vx = x[idx::foot_vx(i)], vz = x[idx::foot_vz(i)];
        if (lp.mode == FootMode::Rolling) {
            const double z_ref = scene_.plane(lp.plane).z + geometry_.leg(leg).wheel_radius - x[idx::kPz] -
                                 geometry_.leg(leg).anchor.z();
            a[idx::foot_ax(i)] =
                a[idx::kBodyAx] + fkp * (x.body_x() + lp.roll_offset - fx) + fkd * (x[idx::kBodyVx] - vx);
            a[idx::foot_az(i)] = fkp * (z_ref - fz) - fkd * vz;
            continue;
        }
        const Vector3d r0 = local(lp, leg, 0.0), rp = local(lp, leg, eps), rm = local(lp, leg, -eps);
        const Vector3d dr = (rp - rm) / (2.0 * eps);
        const Vector3d ddr = (rp - 2.0 * r0 + rm) / (eps * eps);
        a[idx::foot_ax(i)] = ddr.x() + fkp * (r0.x() - fx) + fkd * (dr.x() - vx);
        a[idx::foot_az(i)] = ddr.z() + fkp * (r0.z() - fz) + fkd * (dr.z() - vz);
    }
    a = a.cwiseMax(limits_.lo).cwiseMin(limits_.hi);
    return u;
}

safety::ConstraintContext Planner::context(double, const RobotState& x) const {
    safety::ConstraintContext ctx;
    const Vector2d c = model::world_body_position(x).head<2>();
    for (const geom::Cuboid& o : scene_.obstacles)
        if ((o.center.head<2>() - c).norm() - o.half_extents.norm() <= params_.obstacle_radius) ctx.obstacles.push_back(o);
    for (Leg leg : model::kAllLegs) {
        const auto k = static_cast<std::size_t>(model::leg_index(leg));
        const LegPlan& lp = legs_[k];
        safety::LegContext& lc = ctx.legs[k];
        const bool swing = lp.mode == FootMode::Swing;
        lc.stance = !swing;
        lc.toe_collision = swing;
        lc.foothold = !swing || phase_.legs[k] == LegPhase::FootLowering;
        lc.region = swing ? lp.step.region.halfspaces : lp.region.halfspaces;
        if (swing) {
            const Vector2d w = model::world_foot_position(x, geometry_, leg).head<2>();
            const scene::Plane* under = scene_.plane_at(w);
            lc.floor = under ? under->z
                             : std::min(scene_.plane(lp.plane).z, scene_.plane(lp.step.plane).z);
        } else {
            lc.floor = scene_.plane(lp.plane).z;
        }
    }
    return ctx;
}

}  // namespace t3cbf::planner
