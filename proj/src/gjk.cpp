#include "t3cbf/geometry.hpp"

namespace t3cbf::geom {

namespace {

constexpr int kMaxIterations = 64;

inline Vector3d box_support(const Cuboid& c, const Vector3d& dir) {
    Vector3d p = c.center;
    for (int k = 0; k < 3; ++k) {
        const double s = c.rotation.col(k).dot(dir) >= 0.0 ? 1.0 : -1.0;
        p += s * c.half_extents[k] * c.rotation.col(k);
    }
    return p;
}

// Support of the Minkowski difference A - B.
inline Vector3d support(const Cuboid& a, const Cuboid& b, const Vector3d& dir) {
    return box_support(a, dir) - box_support(b, -dir);
}

inline Vector3d triple(const Vector3d& x, const Vector3d& y, const Vector3d& z) { return x.cross(y).cross(z); }

struct Simplex {
    std::array<Vector3d, 4> p;  // p[n-1] is the newest point
    int n = 0;
    void push(const Vector3d& v) { p[static_cast<std::size_t>(n++)] = v; }
    void set(std::initializer_list<Vector3d> pts) {
        n = 0;
        for (const auto& v : pts) push(v);
    }
};

bool line_case(Simplex& s, Vector3d& dir) {
    const Vector3d& a = s.p[1];
    const Vector3d& b = s.p[0];
    const Vector3d ab = b - a, ao = -a;
    if (ab.dot(ao) > 0.0) {
        dir = triple(ab, ao, ab);
    } else {
        s.set({a});
        dir = ao;
    }
    return false;
}

bool triangle_case(Simplex& s, Vector3d& dir) {
    const Vector3d a = s.p[2], b = s.p[1], c = s.p[0];
    const Vector3d ab = b - a, ac = c - a, ao = -a;
    const Vector3d abc = ab.cross(ac);
    if (abc.cross(ac).dot(ao) > 0.0) {
        if (ac.dot(ao) > 0.0) {
            s.set({c, a});
            dir = triple(ac, ao, ac);
        } else {
            s.set({b, a});
            return line_case(s, dir);
        }
    } else if (ab.cross(abc).dot(ao) > 0.0) {
        s.set({b, a});
        return line_case(s, dir);
    } else if (abc.dot(ao) > 0.0) {
        dir = abc;
    } else {
        s.set({b, c, a});
        dir = -abc;
    }
    return false;
}

bool tetra_case(Simplex& s, Vector3d& dir) {
    const Vector3d a = s.p[3], b = s.p[2], c = s.p[1], d = s.p[0];
    const Vector3d ab = b - a, ac = c - a, ad = d - a, ao = -a;
    const Vector3d abc = ab.cross(ac), acd = ac.cross(ad), adb = ad.cross(ab);
    if (abc.dot(ao) > 0.0) {
        s.set({c, b, a});
        return triangle_case(s, dir);
    }
    if (acd.dot(ao) > 0.0) {
        s.set({d, c, a});
        return triangle_case(s, dir);
    }
    if (adb.dot(ao) > 0.0) {
        s.set({b, d, a});
        return triangle_case(s, dir);
    }
    return true;
}

bool do_simplex(Simplex& s, Vector3d& dir) {
    switch (s.n) {
        case 2: return line_case(s, dir);
        case 3: return triangle_case(s, dir);
        default: return tetra_case(s, dir);
    }
}

}  // namespace

GjkDiagnostics gjk_intersect_diag(const Cuboid& a, const Cuboid& b) {
    GjkDiagnostics diag;
    auto fallback = [&]() {
        diag.used_fallback = true;
        diag.intersect = sat_margin(a, b) <= 0.0;
        return diag;
    };

    Vector3d dir = a.center - b.center;
    if (dir.squaredNorm() < 1e-24) dir = Vector3d::UnitX();
    Simplex s;
    s.push(support(a, b, dir));
    dir = -s.p[0];

    for (diag.iterations = 1; diag.iterations <= kMaxIterations; ++diag.iterations) {
        const double dn = dir.squaredNorm();
        if (dn < 1e-24) return fallback();
        const Vector3d p = support(a, b, dir);
        const double proj = p.dot(dir);
        if (proj < 0.0) {
            diag.intersect = false;
            return diag;
        }
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < s.n; ++i) best = std::max(best, s.p[static_cast<std::size_t>(i)].dot(dir));
        if (proj - best <= 1e-12 * std::sqrt(dn)) return fallback();
        s.push(p);
        if (do_simplex(s, dir)) {
            diag.intersect = true;
            return diag;
        }
    }
    return fallback();
}

bool gjk_intersect(const Cuboid& a, const Cuboid& b) { return gjk_intersect_diag(a, b).intersect; }

}  // namespace t3cbf::geom
