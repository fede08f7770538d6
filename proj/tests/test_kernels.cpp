#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include <omp.h>

#include "t3cbf/bench.hpp"
#include "t3cbf/kernels.hpp"

using namespace t3cbf;

TEST_CASE("random pairs follow the benchmark distribution") {
    const auto a = geom::random_pairs(9, 5000);
    const auto b = geom::random_pairs(9, 5000);
    const auto c = geom::random_pairs(10, 5000);
    REQUIRE(a.size() == 5000);
    bool same = true, differ = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        same = same && a[i].a.center == b[i].a.center && a[i].b.rotation == b[i].b.rotation;
        differ = differ || a[i].a.center != c[i].a.center;
        for (const geom::Cuboid* q : {&a[i].a, &a[i].b}) {
            CHECK((q->center.array().abs() <= 2.0).all());
            CHECK((q->half_extents.array() >= 0.05 - 1e-12).all());
            CHECK((q->half_extents.array() <= 1.0 + 1e-12).all());
            CHECK((q->rotation.transpose() * q->rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
            CHECK(q->rotation.determinant() > 0.0);
        }
    }
    CHECK(same);
    CHECK(differ);

    // Uniform rotations: the mean of each rotation entry is zero.
    Eigen::Matrix3d mean = Eigen::Matrix3d::Zero();
    for (const auto& p : a) mean += p.a.rotation;
    mean /= static_cast<double>(a.size());
    CHECK(mean.cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("serial and parallel kernels agree bit for bit") {
    omp_set_num_threads(4);
    const auto pairs = geom::random_pairs(3, 20000);
    const smooth::SmoothingParams sp;
    std::vector<double> s(pairs.size()), p(pairs.size());

    geom::sat_margins(pairs, s, Exec::Serial);
    geom::sat_margins(pairs, p, Exec::Parallel);
    CHECK(s == p);
    for (std::size_t i = 0; i < pairs.size(); i += 97) CHECK(s[i] == geom::sat_margin(pairs[i].a, pairs[i].b));

    geom::ssat_values(pairs, sp, s, Exec::Serial);
    geom::ssat_values(pairs, sp, p, Exec::Parallel);
    CHECK(s == p);
    for (std::size_t i = 0; i < pairs.size(); i += 97) CHECK(s[i] == geom::ssat_value(pairs[i].a, pairs[i].b, sp));

    std::vector<std::uint8_t> gs(pairs.size()), gp(pairs.size());
    geom::gjk_results(pairs, gs, Exec::Serial);
    geom::gjk_results(pairs, gp, Exec::Parallel);
    CHECK(gs == gp);
    int agree = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) agree += (gs[i] != 0) == geom::sat_intersect(pairs[i].a, pairs[i].b);
    CHECK(agree == static_cast<int>(pairs.size()));

    std::vector<double> wrong(3);
    CHECK_THROWS_AS(geom::sat_margins(pairs, wrong, Exec::Serial), std::invalid_argument);
}

TEST_CASE("row assembly is exec independent") {
    omp_set_num_threads(4);
    const bench::TimingLoad load = bench::synthetic_load(269);
    safety::ConstraintConfig serial, parallel;
    parallel.parallel = true;
    const auto a = safety::build_rows(load.x, load.geometry, load.context, serial);
    const auto b = safety::build_rows(load.x, load.geometry, load.context, parallel);
    REQUIRE(a.size() == 269);
    REQUIRE(b.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].a == b[i].a);
        CHECK(a[i].lb == b[i].lb);
        CHECK(a[i].h == b[i].h);
        CHECK(a[i].kind == b[i].kind);
    }
    CHECK_THROWS_AS(bench::synthetic_load(270), std::invalid_argument);
}

TEST_CASE("synthetic load is a feasible standing pose") {
    const bench::TimingLoad load = bench::synthetic_load(269);
    const auto rows = safety::build_rows(load.x, load.geometry, load.context, {});
    std::array<int, safety::kConstraintKinds> per_kind{};
    for (const auto& r : rows) {
        ++per_kind[static_cast<std::size_t>(r.kind)];
        CHECK(r.h > 0.0);
    }
    CHECK(per_kind[static_cast<std::size_t>(safety::ConstraintKind::JointLimit)] == 24);
    CHECK(per_kind[static_cast<std::size_t>(safety::ConstraintKind::BodySSAT)] ==
          static_cast<int>(load.context.obstacles.size()));

    const bench::TimingReport r = bench::time_control_ticks(load, 20, 5);
    CHECK(r.ticks.size() == 20);
    for (const auto& t : r.ticks) CHECK(t.rows == 269);
    CHECK(r.total.median >= r.assembly.median);
    std::ostringstream csv;
    bench::write_timing_csv(r, csv);
    CHECK(csv.str().rfind("tick,rows,n_joint_limit,", 0) == 0);
}

TEST_CASE("stats") {
    std::vector<double> v;
    for (int i = 1; i <= 100; ++i) v.push_back(i);
    const bench::Stats s = bench::summarize(v);
    CHECK(s.mean == doctest::Approx(50.5));
    CHECK(s.median == 51.0);
    CHECK(s.p99 == 99.0);
    CHECK(bench::summarize({}).median == 0.0);
}

TEST_CASE("bench report") {
    const bench::BenchReport a = bench::bench_collision(11, 2048, 32);
    const bench::BenchReport b = bench::bench_collision(11, 2048, 32);
    const bench::BenchReport c = bench::bench_collision(12, 2048, 32);
    CHECK(a.input_hash == b.input_hash);
    CHECK(a.input_hash != c.input_hash);
    CHECK(a.methods.size() == 7);
    for (const auto& m : a.methods) {
        CHECK(m.evaluate.median >= 0.0);
        CHECK(m.differentiate.has_value() == (m.name.rfind("SSAT", 0) == 0));
    }
    CHECK(a.baseline_us > 0.0);
    std::ostringstream csv;
    bench::write_bench_csv(a, csv);
    CHECK(csv.str().find("\"SSAT(LSE+xtanh)\",evaluate+differentiate,") != std::string::npos);
    CHECK_THROWS_AS(bench::bench_collision(1, 10, 32), std::invalid_argument);
}
