#include "t3cbf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <random>
#include <stdexcept>

#include <sched.h>

#include "t3cbf/kernels.hpp"

namespace t3cbf::bench {

namespace {

using Clock = std::chrono::steady_clock;
using Eigen::Vector2d;
using Eigen::Vector3d;

double micros(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::micro>(b - a).count();
}

void pin_current_thread() {
    const int cpu = sched_getcpu();
    if (cpu < 0) return;
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(cpu, &set);
    sched_setaffinity(0, sizeof(set), &set);
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t hash_pairs(const std::vector<geom::CuboidPair>& pairs) {
    std::uint64_t h = 14695981039346656037ull;
    for (const geom::CuboidPair& p : pairs) {
        for (const geom::Cuboid* c : {&p.a, &p.b}) {
            h = fnv1a(c->center.data(), sizeof(double) * 3, h);
            h = fnv1a(c->rotation.data(), sizeof(double) * 9, h);
            h = fnv1a(c->half_extents.data(), sizeof(double) * 3, h);
        }
    }
    return h;
}

volatile double g_sink = 0.0;

using PairFn = std::function<double(const geom::CuboidPair&)>;

/// Per-batch µs per pair.
template <typename F>
std::vector<double> time_batches(const std::vector<geom::CuboidPair>& pairs, int batch, F&& f) {
    const std::size_t warm = std::min<std::size_t>(pairs.size(), 2000);
    double sink = 0.0;
    for (std::size_t i = 0; i < warm; ++i) sink += f(pairs[i]);
    std::vector<double> out;
    out.reserve(pairs.size() / static_cast<std::size_t>(batch) + 1);
    for (std::size_t i = 0; i + static_cast<std::size_t>(batch) <= pairs.size(); i += static_cast<std::size_t>(batch)) {
        const auto t0 = Clock::now();
        for (int k = 0; k < batch; ++k) sink += f(pairs[i + static_cast<std::size_t>(k)]);
        const auto t1 = Clock::now();
        out.push_back(micros(t0, t1) / batch);
    }
    g_sink = g_sink + sink;
    return out;
}

std::vector<double> minus(std::vector<double> v, double base) {
    for (double& x : v) x = std::max(0.0, x - base);
    return v;
}

smooth::SmoothingParams variant(smooth::MaxVariant m, smooth::AbsVariant a) {
    smooth::SmoothingParams p = smooth::SmoothingParams::no_switching();
    p.max_variant = m;
    p.abs_variant = a;
    return p;
}

}  // namespace

Stats summarize(std::vector<double> s) {
    Stats r;
    if (s.empty()) return r;
    double sum = 0.0;
    for (double x : s) sum += x;
    r.mean = sum / static_cast<double>(s.size());
    std::sort(s.begin(), s.end());
    r.median = s[s.size() / 2];
    r.p99 = s[std::min(s.size() - 1, static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(s.size()))) - 1)];
    return r;
}

const MethodTiming& BenchReport::method(const std::string& name) const {
    for (const MethodTiming& m : methods)
        if (m.name == name) return m;
    throw std::out_of_range("no bench method " + name);
}

double BenchReport::ssat_over_sat() const { return method(kLseXtanh).evaluate.median / method(kSat).evaluate.median; }
double BenchReport::lp_over_ssat() const { return method(kLp).evaluate.median / method(kLseXtanh).evaluate.median; }

BenchReport bench_collision(std::uint64_t seed, std::size_t n, int batch) {
    if (n < static_cast<std::size_t>(batch) || batch < 1) throw std::invalid_argument("bench: need at least one batch");
    pin_current_thread();
    const std::vector<geom::CuboidPair> pairs = geom::random_pairs(seed, n);
    BenchReport r;
    r.seed = seed;
    r.pairs = n;
    r.batch = batch;
    r.input_hash = hash_pairs(pairs);

    const auto empty = time_batches(pairs, batch, [](const geom::CuboidPair& p) { return p.a.center.x(); });
    r.baseline_us = summarize(empty).median;

    const geom::PoseParameterization wrt = geom::PoseParameterization::full(geom::Body::A);
    const auto eval = [&](const std::string& name, auto&& f) {
        r.methods.push_back({name, summarize(minus(time_batches(pairs, batch, f), r.baseline_us)), std::nullopt});
    };
    const auto smooth_pair = [&](const std::string& name, const smooth::SmoothingParams& sp) {
        eval(name, [&](const geom::CuboidPair& p) { return geom::ssat_value(p.a, p.b, sp); });
        r.methods.back().differentiate = summarize(minus(time_batches(pairs, batch,
                                                                      [&](const geom::CuboidPair& p) {
                                                                          const geom::CollisionMargin m =
                                                                              geom::ssat_margin(p.a, p.b, sp, wrt);
                                                                          return m.h + m.grad[0] + m.hessian(0, 0);
                                                                      }),
                                                         r.baseline_us));
    };

    eval(kSat, [](const geom::CuboidPair& p) { return geom::sat_intersect(p.a, p.b) ? 1.0 : 0.0; });
    eval(kSatMargin, [](const geom::CuboidPair& p) { return geom::sat_margin(p.a, p.b); });
    smooth_pair(kLseXtanh, variant(smooth::MaxVariant::LSE, smooth::AbsVariant::XTanh));
    smooth_pair(kLseSqrt, variant(smooth::MaxVariant::LSE, smooth::AbsVariant::Sqrt));
    smooth_pair(kBoltzXtanh, variant(smooth::MaxVariant::Boltzmann, smooth::AbsVariant::XTanh));
    eval(kGjk, [](const geom::CuboidPair& p) { return geom::gjk_intersect(p.a, p.b) ? 1.0 : 0.0; });
    eval(kLp, [](const geom::CuboidPair& p) { return geom::lp_min_scaling(p.a, p.b).scaling; });
    return r;
}

void print_bench(const BenchReport& r, std::ostream& out) {
    out << "collision benchmark: " << r.pairs << " pairs, seed " << r.seed << ", batch " << r.batch
        << ", input hash " << std::hex << r.input_hash << std::dec << '\n';
    out << "empty-loop baseline " << std::fixed << std::setprecision(4) << r.baseline_us << " us/pair (subtracted)\n";
    out << std::left << std::setw(20) << "method" << std::right << std::setw(11) << "eval mean" << std::setw(11)
        << "median" << std::setw(11) << "p99" << std::setw(13) << "eval+diff" << std::setw(11) << "median"
        << std::setw(11) << "p99" << '\n';
    for (const MethodTiming& m : r.methods) {
        out << std::left << std::setw(20) << m.name << std::right << std::setw(11) << m.evaluate.mean << std::setw(11)
            << m.evaluate.median << std::setw(11) << m.evaluate.p99;
        if (m.differentiate)
            out << std::setw(13) << m.differentiate->mean << std::setw(11) << m.differentiate->median << std::setw(11)
                << m.differentiate->p99;
        out << '\n';
    }
    out << std::setprecision(2) << "SSAT/SAT " << r.ssat_over_sat() << "x, LP/SSAT " << r.lp_over_ssat() << "x\n";
    out.unsetf(std::ios::floatfield);
    out << std::setprecision(6);
}

void write_bench_csv(const BenchReport& r, std::ostream& out) {
    out << "method,mode,mean_us,median_us,p99_us,ratio_to_sat\n";
    out.precision(6);
    const double sat = r.method(kSat).evaluate.median;
    const auto row = [&](const std::string& name, const char* mode, const Stats& s) {
        out << '"' << name << '"' << ',' << mode << ',' << s.mean << ',' << s.median << ',' << s.p99 << ','
            << s.median / sat << '\n';
    };
    for (const MethodTiming& m : r.methods) {
        row(m.name, "evaluate", m.evaluate);
        if (m.differentiate) row(m.name, "evaluate+differentiate", *m.differentiate);
    }
    out << "\"baseline\",empty," << r.baseline_us << ',' << r.baseline_us << ',' << r.baseline_us << ",\n";
}

// ---------------------------------------------------------------------------
// Boundary sweep

namespace {

double cross2(const Vector2d& a, const Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

std::vector<Vector2d> convex_hull(std::vector<Vector2d> p) {
    std::sort(p.begin(), p.end(), [](const Vector2d& a, const Vector2d& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    std::vector<Vector2d> h(2 * p.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        while (k >= 2 && cross2(h[k - 1] - h[k - 2], p[i] - h[k - 2]) <= 0.0) --k;
        h[k++] = p[i];
    }
    for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross2(h[k - 1] - h[k - 2], p[i] - h[k - 2]) <= 0.0) --k;
        h[k++] = p[i];
    }
    h.resize(k - 1);
    return h;
}

std::vector<Vector2d> footprint(const Vector3d& half, double yaw) {
    const Eigen::Rotation2Dd r(yaw);
    return {r * Vector2d(half.x(), half.y()), r * Vector2d(-half.x(), half.y()), r * Vector2d(-half.x(), -half.y()),
            r * Vector2d(half.x(), -half.y())};
}

/// Distance from the origin (inside) to the polygon along `dir`.
double ray_exit(const std::vector<Vector2d>& poly, const Vector2d& dir) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vector2d& a = poly[i];
        const Vector2d& b = poly[(i + 1) % poly.size()];
        const Vector2d e = b - a;
        const double den = cross2(dir, e);
        if (std::abs(den) < 1e-15) continue;
        const double t = cross2(a, e) / den;
        const double s = cross2(a, dir) / den;
        if (t > 0.0 && s >= -1e-12 && s <= 1.0 + 1e-12) best = std::min(best, t);
    }
    return best;
}

}  // namespace

SweepResult boundary_sweep(const SweepSpec& spec) {
    if (spec.directions < 3) throw std::invalid_argument("sweep: need at least three directions");
    SweepResult res;
    res.spec = spec;
    const geom::Cuboid a(Vector3d::Zero(), Eigen::Matrix3d::Identity(), spec.a_half);
    const Eigen::Matrix3d rb = geom::rot_z(spec.b_tilt);
    const auto b_at = [&](const Vector2d& c) { return geom::Cuboid(Vector3d(c.x(), c.y(), 0.0), rb, spec.b_half); };

    std::vector<Vector2d> sums;
    for (const Vector2d& pa : footprint(spec.a_half, 0.0))
        for (const Vector2d& pb : footprint(spec.b_half, spec.b_tilt)) sums.push_back(pa - pb);
    res.oracle = convex_hull(sums);

    struct Method {
        std::string name;
        double alpha;
        std::function<double(const Vector2d&)> h;
    };
    std::vector<Method> methods;
    methods.push_back({"SAT", 0.0, [&](const Vector2d& c) { return geom::sat_margin(a, b_at(c)); }});
    for (smooth::MaxVariant mv : {smooth::MaxVariant::LSE, smooth::MaxVariant::Boltzmann}) {
        for (double alpha : spec.alphas) {
            smooth::SmoothingParams p = smooth::SmoothingParams::no_switching();
            p.alpha_max = p.alpha_abs = alpha;
            p.max_variant = mv;
            methods.push_back({mv == smooth::MaxVariant::LSE ? "LSE" : "Boltzmann", alpha,
                               [&a, b_at, p](const Vector2d& c) { return geom::ssat_value(a, b_at(c), p); }});
        }
    }

    for (const Method& m : methods) {
        SweepCurve curve;
        curve.method = m.name;
        curve.alpha = m.alpha;
        curve.sat_min = std::numeric_limits<double>::infinity();
        curve.sat_max = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < spec.directions; ++k) {
            const double th = 2.0 * 3.14159265358979323846 * k / spec.directions;
            const Vector2d dir(std::cos(th), std::sin(th));
            double hi = spec.r_max;
            if (!(m.h(hi * dir) > 0.0)) throw std::runtime_error("sweep: r_max is inside the contact region");
            double lo = hi;
            while (lo > 0.0 && m.h(lo * dir) > 0.0) {
                hi = lo;
                lo -= spec.scan;
            }
            lo = std::max(lo, 0.0);
            for (int it = 0; it < 80 && hi - lo > 1e-13; ++it) {
                const double mid = 0.5 * (lo + hi);
                (m.h(mid * dir) > 0.0 ? hi : lo) = mid;
            }
            const Vector2d p = 0.5 * (lo + hi) * dir;
            curve.points.push_back(p);
            const double s = geom::sat_margin(a, b_at(p));
            curve.sat_min = std::min(curve.sat_min, s);
            curve.sat_max = std::max(curve.sat_max, s);
            if (m.name == "SAT") res.sat_oracle_error = std::max(res.sat_oracle_error, std::abs(p.norm() - ray_exit(res.oracle, dir)));
        }
        curve.worst_chord = -std::numeric_limits<double>::infinity();
        const auto n = static_cast<int>(curve.points.size());
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double h = m.h(0.5 * (curve.points[static_cast<std::size_t>(i)] + curve.points[static_cast<std::size_t>(j)]));
                if (h > curve.worst_chord) {
                    curve.worst_chord = h;
                    curve.worst_chord_ends = {i, j};
                }
            }
        }
        res.curves.push_back(std::move(curve));
    }
    return res;
}

void write_sweep_csv(const SweepResult& r, std::ostream& out) {
    out << "method,alpha,direction_deg,x,y\n";
    out.precision(12);
    for (const SweepCurve& c : r.curves)
        for (std::size_t k = 0; k < c.points.size(); ++k)
            out << c.method << ',' << c.alpha << ',' << 360.0 * static_cast<double>(k) / static_cast<double>(c.points.size())
                << ',' << c.points[k].x() << ',' << c.points[k].y() << '\n';
    for (std::size_t k = 0; k < r.oracle.size(); ++k)
        out << "oracle,0," << k << ',' << r.oracle[k].x() << ',' << r.oracle[k].y() << '\n';
}

// ---------------------------------------------------------------------------
// Control-tick load

TimingLoad synthetic_load(int rows) {
    TimingLoad load;
    const model::RobotGeometry& g = load.geometry;
    namespace idx = model::idx;
    const double height = 0.40;
    load.x[idx::kPz] = height;
    for (model::Leg leg : model::kAllLegs) {
        const int i = model::leg_index(leg);
        load.x[idx::foot_z(i)] = g.leg(leg).wheel_radius - height - g.leg(leg).anchor.z();
    }

    // Tripod A stands on hexagonal regions, tripod B swings.
    int fixed = 0;
    for (model::Leg leg : model::kAllLegs) {
        const int i = model::leg_index(leg);
        safety::LegContext& lc = load.context.legs[static_cast<std::size_t>(i)];
        const bool stance = leg == model::Leg::LR || leg == model::Leg::RR || leg == model::Leg::MF;
        lc.stance = stance;
        lc.foothold = stance;
        lc.toe_collision = !stance;
        lc.floor = 0.0;
        if (stance) {
            const Vector2d foot = model::world_foot_position(load.x, g, leg).head<2>();
            for (int e = 0; e < 6; ++e) {
                const double th = e * 3.14159265358979323846 / 3.0;
                const Vector2d nrm(-std::cos(th), -std::sin(th));
                lc.region.push_back({nrm, -nrm.dot(foot) + 0.12});
            }
        }
        fixed += 4 + 1 + (stance ? 2 : 1) + static_cast<int>(lc.region.size());
    }
    const int per_obstacle = 1 + 3;
    if (rows < fixed || (rows - fixed) % per_obstacle != 0)
        throw std::invalid_argument("synthetic_load: row count must be " + std::to_string(fixed) + " + 4k");
    const int count = (rows - fixed) / per_obstacle;

    // Small boxes on an ellipse 0.2-0.3 m clear of the body, spread in height.
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dz(-0.25, 0.25), yaw(-0.5, 0.5);
    for (int k = 0; k < count; ++k) {
        const double th = 2.0 * 3.14159265358979323846 * (k + 0.5) / count;
        const Vector3d c(0.75 * std::cos(th), 0.55 * std::sin(th), height + dz(rng));
        load.context.obstacles.emplace_back(c, geom::rot_z(yaw(rng)), Vector3d(0.05, 0.05, 0.05));
    }
    return load;
}

TimingReport time_control_ticks(const TimingLoad& load, int ticks, std::uint64_t seed,
                                const safety::ConstraintConfig& cc, const safety::FilterConfig& fc) {
    pin_current_thread();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> jitter(0.0, 1e-3), input(0.0, 1.0);
    safety::SafetyFilter filter(fc);
    TimingReport r;
    r.ticks.reserve(static_cast<std::size_t>(ticks));
    std::vector<double> asm_us, solve_us, total_us;
    for (int t = 0; t < ticks; ++t) {
        model::RobotState x = load.x;
        for (int i = 0; i < model::kStateDim; ++i) x[i] += jitter(rng);
        model::RobotInput u_ref;
        for (int i = 0; i < model::kInputDim; ++i) u_ref[i] = input(rng);

        const auto t0 = Clock::now();
        const std::vector<safety::EcbfRow> rows = safety::build_rows(x, load.geometry, load.context, cc);
        const auto t1 = Clock::now();
        const safety::FilterResult res = filter.solve(rows, u_ref);
        const auto t2 = Clock::now();
        g_sink = g_sink + res.u[0];

        TickSample s;
        s.assembly_us = micros(t0, t1);
        s.solve_us = micros(t1, t2);
        s.rows = static_cast<int>(rows.size());
        for (const safety::EcbfRow& row : rows) ++s.per_kind[static_cast<std::size_t>(row.kind)];
        r.ticks.push_back(s);
        asm_us.push_back(s.assembly_us);
        solve_us.push_back(s.solve_us);
        total_us.push_back(s.assembly_us + s.solve_us);
    }
    r.assembly = summarize(asm_us);
    r.solve = summarize(solve_us);
    r.total = summarize(total_us);
    return r;
}

void write_timing_csv(const TimingReport& r, std::ostream& out) {
    out << "tick,rows";
    for (int k = 0; k < safety::kConstraintKinds; ++k)
        out << ",n_" << safety::kind_name(static_cast<safety::ConstraintKind>(k));
    out << ",assembly_us,solve_us,total_us\n";
    out.precision(6);
    for (std::size_t t = 0; t < r.ticks.size(); ++t) {
        const TickSample& s = r.ticks[t];
        out << t << ',' << s.rows;
        for (int n : s.per_kind) out << ',' << n;
        out << ',' << s.assembly_us << ',' << s.solve_us << ',' << s.assembly_us + s.solve_us << '\n';
    }
}

}  // namespace t3cbf::bench
