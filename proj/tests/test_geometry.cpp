#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>
#include <vector>

#include "t3cbf/geometry.hpp"
#include "t3cbf/kernels.hpp"
#include "test_util.hpp"

using namespace t3cbf::geom;
using t3cbf::smooth::SmoothingParams;
using t3cbf::testing::fd_gradient;
using t3cbf::testing::fd_jacobian;
using t3cbf::testing::rel_err;

namespace {

Cuboid unit_cube(const Vector3d& c) { return {c, Matrix3d::Identity(), Vector3d::Constant(0.5)}; }

std::array<Vector3d, 8> vertices(const Cuboid& c) {
    std::array<Vector3d, 8> v;
    for (int i = 0; i < 8; ++i) {
        const Vector3d s((i & 1) ? 1 : -1, (i & 2) ? 1 : -1, (i & 4) ? 1 : -1);
        v[static_cast<std::size_t>(i)] = c.center + c.rotation * s.cwiseProduct(c.half_extents);
    }
    return v;
}

// Independent 15-axis margin from vertex projection intervals.
double projection_margin(const Cuboid& a, const Cuboid& b) {
    const auto va = vertices(a), vb = vertices(b);
    double best = -1e300;
    auto gap = [&](const Vector3d& n) {
        double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
        for (const auto& p : va) {
            amin = std::min(amin, n.dot(p));
            amax = std::max(amax, n.dot(p));
        }
        for (const auto& p : vb) {
            bmin = std::min(bmin, n.dot(p));
            bmax = std::max(bmax, n.dot(p));
        }
        return std::max(bmin - amax, amin - bmax);
    };
    for (int i = 0; i < 3; ++i) {
        best = std::max(best, gap(a.rotation.col(i)));
        best = std::max(best, gap(b.rotation.col(i)));
        for (int j = 0; j < 3; ++j) {
            const Vector3d c = a.rotation.col(i).cross(b.rotation.col(j));
            if (c.norm() > 1e-8) best = std::max(best, gap(c.normalized()));
        }
    }
    return best;
}

Cuboid random_box(std::mt19937_64& rng) { return random_cuboid(rng); }

}  // namespace

TEST_CASE("cuboid validation") {
    Cuboid c;
    CHECK_NOTHROW(c.validate());
    c.half_extents.x() = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = Cuboid{};
    c.rotation(0, 0) = -1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = Cuboid{};
    c.rotation(0, 1) = 0.1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("candidate axes") {
    SUBCASE("identical axis-aligned boxes") {
        const AxisSet s = candidate_axes(unit_cube(Vector3d::Zero()), unit_cube(Vector3d::Zero()));
        // Only the three parallel edge pairs (x*x, y*y, z*z) are degenerate; the
        // other crosses reproduce coordinate axes, so every axis is +-e_k.
        CHECK(s.degenerate_count() == 3);
        for (int i = 0; i < 3; ++i) CHECK(s.degenerate[static_cast<std::size_t>(6 + 4 * i)]);
        for (const auto& n : s.axes) CHECK(n.cwiseAbs().maxCoeff() == doctest::Approx(1.0));
        for (int k = 0; k < 3; ++k) {
            CHECK(s.axes[static_cast<std::size_t>(k)] == Vector3d::Unit(k));
            CHECK(s.axes[static_cast<std::size_t>(3 + k)] == Vector3d::Unit(k));
        }
    }
    SUBCASE("45 degree yaw") {
        Cuboid b = unit_cube(Vector3d::Zero());
        b.rotation = rot_z(std::numbers::pi / 4);
        const AxisSet s = candidate_axes(unit_cube(Vector3d::Zero()), b);
        CHECK(s.degenerate[14]);  // z x z
        CHECK(s.degenerate_count() == 1);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                const Vector3d& n = s.axes[static_cast<std::size_t>(6 + 3 * i + j)];
                CHECK(std::abs(std::abs(n.z()) - 1.0) < 1e-12);
            }
    }
    SUBCASE("random pairs give 15 unit axes") {
        std::mt19937_64 rng(1);
        for (int t = 0; t < 100; ++t) {
            const AxisSet s = candidate_axes(random_box(rng), random_box(rng));
            CHECK(s.degenerate_count() == 0);
            for (const auto& n : s.axes) CHECK(std::abs(n.norm() - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("sat_margin on unit cubes") {
    const Cuboid a = unit_cube(Vector3d::Zero());
    CHECK(sat_margin(a, unit_cube({3, 0, 0})) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(std::abs(sat_margin(a, unit_cube({1, 0, 0}))) < 1e-15);
    CHECK(sat_margin(a, unit_cube({0.5, 0, 0})) == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(projection_margin(a, unit_cube({3, 0, 0})) == doctest::Approx(2.0));
    CHECK(projection_margin(a, unit_cube({0.5, 0, 0})) == doctest::Approx(-0.5));
}

TEST_CASE("sat_margin agrees with vertex projections and point membership") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 2000; ++t) {
        const Cuboid a = random_box(rng), b = random_box(rng);
        const double h = sat_margin(a, b);
        REQUIRE(std::abs(h - projection_margin(a, b)) < 1e-9);
        REQUIRE(std::abs(h - sat_margin(b, a)) < 1e-12);
        if (h > 1e-9) {
            // No sampled point of A lies in B.
            for (int s = 0; s < 50; ++s) {
                const Vector3d p = a.center + a.rotation * Vector3d(u(rng), u(rng), u(rng)).cwiseProduct(a.half_extents);
                REQUIRE_FALSE(b.contains(p));
            }
        }
    }
}

TEST_CASE("sat_intersect agrees with the sign of sat_margin") {
    const auto pairs = random_pairs(17, 20000);
    int mismatches = 0;
    for (const auto& p : pairs) {
        const double h = sat_margin(p.a, p.b);
        if (std::abs(h) < 1e-12) continue;
        if (sat_intersect(p.a, p.b) != (h <= 0.0)) ++mismatches;
    }
    CHECK(mismatches == 0);
    const Cuboid unit({0, 0, 0}, Matrix3d::Identity(), {0.5, 0.5, 0.5});
    CHECK(sat_intersect(unit, unit));
    CHECK_FALSE(sat_intersect(unit, Cuboid({3, 0, 0}, Matrix3d::Identity(), {0.5, 0.5, 0.5})));
}

TEST_CASE("rigid invariance of SAT and SSAT") {
    std::mt19937_64 rng(4);
    const SmoothingParams sp = SmoothingParams::no_switching();
    for (int t = 0; t < 500; ++t) {
        Cuboid a = random_box(rng), b = random_box(rng);
        const Matrix3d r = random_rotation(rng);
        const Vector3d off(0.3 * t, -1.0, 2.0);
        Cuboid ta{r * a.center + off, r * a.rotation, a.half_extents};
        Cuboid tb{r * b.center + off, r * b.rotation, b.half_extents};
        REQUIRE(std::abs(sat_margin(a, b) - sat_margin(ta, tb)) < 1e-9);
        REQUIRE(std::abs(ssat_value(a, b, sp) - ssat_value(ta, tb, sp)) < 1e-9);
    }
}

TEST_CASE("ssat example: unit cubes 3 m apart") {
    const SmoothingParams sp = SmoothingParams::no_switching();
    const double h = ssat_value(unit_cube(Vector3d::Zero()), unit_cube({3, 0, 0}), sp);
    CHECK(h > 2.0 - 0.01);
    CHECK(h < 2.0 + 0.0871);
    const CollisionMargin m = ssat_margin(unit_cube(Vector3d::Zero()), unit_cube({3, 0, 0}), sp,
                                          PoseParameterization::translation(Body::B));
    CHECK(m.h == doctest::Approx(h).epsilon(1e-14));
    // default params switch to exact SAT far away
    CHECK(ssat_value(unit_cube(Vector3d::Zero()), unit_cube({3, 0, 0}), SmoothingParams{}) == doctest::Approx(2.0));
}

TEST_CASE("ssat error band and symmetry on random pairs") {
    const auto pairs = random_pairs(99, 5000);
    for (t3cbf::smooth::MaxVariant mv : {t3cbf::smooth::MaxVariant::LSE}) {
        SmoothingParams sp = SmoothingParams::no_switching();
        sp.max_variant = mv;
        for (const auto& pr : pairs) {
            const double diff = ssat_value(pr.a, pr.b, sp) - sat_margin(pr.a, pr.b);
            REQUIRE(diff >= -sp.lower_band() - 1e-9);
            REQUIRE(diff <= sp.upper_band() + 1e-9);
            REQUIRE(std::abs(ssat_value(pr.a, pr.b, sp) - ssat_value(pr.b, pr.a, sp)) < 1e-9);
        }
    }
}

TEST_CASE("ssat value matches the direct 15-axis, 105-term formula") {
    using t3cbf::smooth::AbsVariant;
    using t3cbf::smooth::MaxVariant;
    auto reference = [](const Cuboid& a, const Cuboid& b, const SmoothingParams& p) {
        auto sabs = [&](double x) {
            return p.abs_variant == AbsVariant::XTanh ? x * std::tanh(p.alpha_abs * x)
                                                      : std::sqrt(x * x + p.eps_sqrt * p.eps_sqrt);
        };
        const AxisSet axes = candidate_axes(a, b);
        std::vector<double> y;
        for (const Vector3d& n : axes.axes) {
            double v = sabs(n.dot(b.center - a.center));
            for (int k = 0; k < 3; ++k) {
                v -= sabs(a.half_extents[k] * n.dot(a.rotation.col(k)));
                v -= sabs(b.half_extents[k] * n.dot(b.rotation.col(k)));
            }
            y.push_back(v);
        }
        return t3cbf::smooth::smooth_max(y, p.max_variant, p.alpha_max).value;
    };
    const auto pairs = random_pairs(23, 4000);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        SmoothingParams p = SmoothingParams::no_switching();
        p.abs_variant = i % 2 ? AbsVariant::Sqrt : AbsVariant::XTanh;
        p.max_variant = i % 3 == 0 ? MaxVariant::Boltzmann : MaxVariant::LSE;
        if (i % 5 == 0) p.alpha_max = p.alpha_abs = 10.0;
        const double ref = reference(pairs[i].a, pairs[i].b, p);
        REQUIRE(std::abs(ssat_value(pairs[i].a, pairs[i].b, p) - ref) < 1e-10);
        const auto wrt = i % 4 == 0 ? PoseParameterization::full(Body::B) : PoseParameterization::translation(Body::A);
        REQUIRE(std::abs(ssat_margin(pairs[i].a, pairs[i].b, p, wrt).h - ref) < 1e-10);
    }
}

TEST_CASE("ssat translation symmetry A<->B") {
    std::mt19937_64 rng(21);
    const SmoothingParams sp = SmoothingParams::no_switching();
    for (int t = 0; t < 200; ++t) {
        const Cuboid a = random_box(rng), b = random_box(rng);
        const CollisionMargin mab = ssat_margin(a, b, sp, PoseParameterization::translation(Body::A));
        const CollisionMargin mba = ssat_margin(b, a, sp, PoseParameterization::translation(Body::B));
        REQUIRE(std::abs(mab.h - mba.h) < 1e-9);
        REQUIRE(rel_err(mab.grad, mba.grad) < 1e-7);
        // translating A is the negative of translating B
        const CollisionMargin mb = ssat_margin(a, b, sp, PoseParameterization::translation(Body::B));
        REQUIRE(rel_err(mab.grad, Eigen::Vector3d(-mb.grad)) < 1e-7);
    }
}

TEST_CASE("ssat derivatives match finite differences") {
    std::mt19937_64 rng(7);
    using t3cbf::smooth::AbsVariant;
    using t3cbf::smooth::MaxVariant;
    int checked = 0;
    for (int t = 0; t < 600; ++t) {
        SmoothingParams sp = SmoothingParams::no_switching();
        if (t % 3 == 1) sp.max_variant = MaxVariant::Boltzmann;
        if (t % 3 == 2) sp.abs_variant = AbsVariant::Sqrt;
        if (t % 2) sp.alpha_max = sp.alpha_abs = 20.0;
        const Cuboid a = random_box(rng), b = random_box(rng);
        const Body body = t % 2 ? Body::A : Body::B;
        const PoseParameterization wrt = t % 4 < 2 ? PoseParameterization::full(body)
                                                   : PoseParameterization(body, {PoseParam::Pitch, PoseParam::X, PoseParam::Yaw});
        const CollisionMargin m = ssat_margin(a, b, sp, wrt);
        auto perturbed = [&](const Eigen::VectorXd& d) { return wrt.body() == Body::A ? std::pair{wrt.perturb(a, d), b} : std::pair{a, wrt.perturb(b, d)}; };
        auto f = [&](const Eigen::VectorXd& d) {
            auto [pa, pb] = perturbed(d);
            return ssat_value(pa, pb, sp);
        };
        auto g = [&](const Eigen::VectorXd& d) {
            auto [pa, pb] = perturbed(d);
            return Eigen::VectorXd(ssat_margin(pa, pb, sp, wrt).grad);
        };
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(wrt.size());
        REQUIRE(m.h == doctest::Approx(f(zero)).epsilon(1e-12));
        REQUIRE(rel_err(Eigen::VectorXd(m.grad), fd_gradient(f, zero)) < 1e-4);
        REQUIRE(rel_err(Eigen::MatrixXd(m.hessian), fd_jacobian(g, zero)) < 1e-4);
        REQUIRE((m.hessian - m.hessian.transpose()).cwiseAbs().maxCoeff() < 1e-9);
        ++checked;
    }
    CHECK(checked == 600);
}

TEST_CASE("superellipsoid margin") {
    Cuboid box{Vector3d(1, 2, 0.5), rot_z(0.3), Vector3d(0.4, 0.2, 0.1)};
    const double infl = 0.05;
    CHECK(superellipsoid_margin(box.center, box, 4, infl).h == doctest::Approx(-1.0));
    const Vector3d face = box.center + box.rotation * Vector3d(0.45, 0, 0);
    CHECK(std::abs(superellipsoid_margin(face, box, 4, infl).h) < 1e-12);
    CHECK_THROWS_AS(superellipsoid_margin(face, box, 0, infl), std::invalid_argument);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Cuboid inflated = box.inflated(infl);
    int outside = 0;
    for (int t = 0; t < 5000; ++t) {
        const Vector3d p = box.center + Vector3d(u(rng), u(rng), u(rng));
        const double h = superellipsoid_margin(p, box, 4, infl).h;
        if (!inflated.contains(p)) {
            ++outside;
            REQUIRE(h > 0.0);
        }
    }
    CHECK(outside > 1000);

    for (int t = 0; t < 500; ++t) {
        const Vector3d p = box.center + 0.5 * Vector3d(u(rng), u(rng), u(rng));
        const CollisionMargin m = superellipsoid_margin(p, box, t % 2 ? 4 : 2, infl);
        auto f = [&](const Eigen::VectorXd& q) { return superellipsoid_margin(q, box, t % 2 ? 4 : 2, infl).h; };
        auto g = [&](const Eigen::VectorXd& q) { return Eigen::VectorXd(superellipsoid_margin(q, box, t % 2 ? 4 : 2, infl).grad); };
        REQUIRE(rel_err(Eigen::VectorXd(m.grad), fd_gradient(f, p)) < 1e-4);
        REQUIRE(rel_err(Eigen::MatrixXd(m.hessian), fd_jacobian(g, p)) < 1e-4);
    }
}

TEST_CASE("gjk") {
    CHECK_FALSE(gjk_intersect(unit_cube(Vector3d::Zero()), unit_cube({3, 0, 0})));
    CHECK(gjk_intersect(unit_cube(Vector3d::Zero()), unit_cube(Vector3d::Zero())));
    const auto pairs = random_pairs(17, 20000);
    int mismatches = 0;
    for (const auto& p : pairs) {
        const double h = sat_margin(p.a, p.b);
        if (std::abs(h) < 1e-9) continue;
        if (gjk_intersect(p.a, p.b) != (h <= 0.0)) ++mismatches;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("lp minimum scaling") {
    const LpResult same = lp_min_scaling(unit_cube(Vector3d::Zero()), unit_cube(Vector3d::Zero()));
    CHECK(same.status == LpStatus::Optimal);
    CHECK(same.scaling <= 1.0);
    CHECK(lp_min_scaling(unit_cube(Vector3d::Zero()), unit_cube({3, 0, 0})).scaling == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(lp_min_scaling(unit_cube(Vector3d::Zero()), unit_cube({1, 0, 0})).scaling == doctest::Approx(1.0).epsilon(1e-10));

    const auto pairs = random_pairs(23, 5000);
    for (const auto& p : pairs) {
        const double h = sat_margin(p.a, p.b);
        if (std::abs(h) < 1e-6) continue;
        const LpResult r = lp_min_scaling(p.a, p.b);
        REQUIRE(r.status == LpStatus::Optimal);
        REQUIRE((r.scaling <= 1.0) == (h <= 0.0));
    }
}
