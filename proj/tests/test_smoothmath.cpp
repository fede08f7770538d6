#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "t3cbf/smoothmath.hpp"
#include "test_util.hpp"

using namespace t3cbf::smooth;
using t3cbf::testing::fd_gradient;
using t3cbf::testing::fd_jacobian;
using t3cbf::testing::rel_err;

namespace {
std::vector<double> to_vec(const Eigen::VectorXd& x) { return {x.data(), x.data() + x.size()}; }
}  // namespace

TEST_CASE("smooth_max LSE examples") {
    const std::vector<double> one{1.25};
    CHECK(smooth_max(one, MaxVariant::LSE, 7.0).value == 1.25);

    const std::vector<double> zeros{0.0, 0.0};
    CHECK(smooth_max(zeros, MaxVariant::LSE, 1.0).value == doctest::Approx(std::log(2.0)).epsilon(1e-15));

    const std::vector<double> v{1.0, 2.0, 3.0};
    const SmoothMax r = smooth_max(v, MaxVariant::LSE, 10.0);
    CHECK(r.value >= 3.0);
    CHECK(r.value <= 3.0 + std::log(3.0) / 10.0);

    Eigen::VectorXd x(3);
    x << 1.0, 2.0, 3.0;
    auto f = [](const Eigen::VectorXd& z) { return smooth_max(to_vec(z), MaxVariant::LSE, 10.0).value; };
    CHECK(rel_err(r.grad, fd_gradient(f, x)) < 1e-6);
    auto g = [](const Eigen::VectorXd& z) { return Eigen::VectorXd(smooth_max(to_vec(z), MaxVariant::LSE, 10.0).grad); };
    CHECK(rel_err(r.hessian, fd_jacobian(g, x)) < 1e-5);
}

TEST_CASE("smooth_max rejects bad input") {
    const std::vector<double> empty;
    CHECK_THROWS_AS(smooth_max(empty, MaxVariant::LSE, 1.0), std::invalid_argument);
    const std::vector<double> bad{1.0, std::nan("")};
    CHECK_THROWS_AS(smooth_max(bad, MaxVariant::LSE, 1.0), std::invalid_argument);
    const std::vector<double> inf{1.0, HUGE_VAL};
    CHECK_THROWS_AS(smooth_max(inf, MaxVariant::Boltzmann, 1.0), std::invalid_argument);
    const std::vector<double> ok{1.0};
    CHECK_THROWS_AS(smooth_max(ok, MaxVariant::LSE, 0.0), std::invalid_argument);
}

TEST_CASE("smooth_max does not overflow on large inputs") {
    const std::vector<double> v{1e6, -1e6, 999999.5};
    const SmoothMax r = smooth_max(v, MaxVariant::LSE, 1e3);
    CHECK(std::isfinite(r.value));
    CHECK(r.value >= 1e6);
    CHECK(r.grad.allFinite());
    const SmoothMax b = smooth_max(v, MaxVariant::Boltzmann, 1e3);
    CHECK(std::isfinite(b.value));
}

TEST_CASE("LSE bound, simplex gradient and Boltzmann range on random vectors") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> nd(2, 16);
    std::uniform_real_distribution<double> xd(-10.0, 10.0);
    const double alphas[] = {1.0, 10.0, 100.0};
    for (int trial = 0; trial < 20000; ++trial) {
        const int n = nd(rng);
        std::vector<double> v(static_cast<std::size_t>(n));
        for (double& e : v) e = xd(rng);
        const double alpha = alphas[trial % 3];
        const double mx = *std::max_element(v.begin(), v.end());
        const double mn = *std::min_element(v.begin(), v.end());
        const SmoothMax r = smooth_max(v, MaxVariant::LSE, alpha);
        REQUIRE(r.value - mx >= 0.0);
        REQUIRE(r.value - mx <= std::log(n) / alpha + 1e-12);
        REQUIRE((r.grad.array() >= 0.0).all());
        REQUIRE(std::abs(r.grad.sum() - 1.0) < 1e-12);
        const SmoothMax b = smooth_max(v, MaxVariant::Boltzmann, alpha);
        REQUIRE(b.value >= mn);
        REQUIRE(b.value <= mx);
    }
}

TEST_CASE("smooth_max derivatives match finite differences") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> xd(-1.0, 1.0);
    for (MaxVariant variant : {MaxVariant::LSE, MaxVariant::Boltzmann}) {
        for (int trial = 0; trial < 200; ++trial) {
            Eigen::VectorXd x(6);
            for (auto& e : x) e = xd(rng);
            const double alpha = trial % 2 ? 3.0 : 20.0;
            auto f = [&](const Eigen::VectorXd& z) { return smooth_max(to_vec(z), variant, alpha).value; };
            auto g = [&](const Eigen::VectorXd& z) { return Eigen::VectorXd(smooth_max(to_vec(z), variant, alpha).grad); };
            const SmoothMax r = smooth_max(to_vec(x), variant, alpha);
            REQUIRE(rel_err(r.grad, fd_gradient(f, x)) < 1e-5);
            REQUIRE(rel_err(r.hessian, fd_jacobian(g, x)) < 1e-5);
            REQUIRE((r.hessian - r.hessian.transpose()).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
}

TEST_CASE("xtanh examples") {
    const SmoothAbs z = smooth_abs(0.0, AbsVariant::XTanh, 10.0);
    CHECK(z.value == 0.0);
    CHECK(z.d1 == 0.0);

    const SmoothAbs five = smooth_abs(5.0, AbsVariant::XTanh, 10.0);
    CHECK(five.value > 5.0 - 0.1);
    CHECK(five.value <= 5.0);

    const SmoothAbs m3 = smooth_abs(-3.0, AbsVariant::XTanh, 2.0);
    const SmoothAbs p3 = smooth_abs(3.0, AbsVariant::XTanh, 2.0);
    CHECK(m3.value == p3.value);
    CHECK(m3.d1 == -p3.d1);
    const double h = 1e-6;
    const double d2_fd = (smooth_abs(-3.0 + h, AbsVariant::XTanh, 2.0).d1 - smooth_abs(-3.0 - h, AbsVariant::XTanh, 2.0).d1) / (2 * h);
    CHECK(rel_err(m3.d2, d2_fd, 1e-12) < 1e-5);
}

TEST_CASE("xtanh bound and symmetry on random inputs") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> xd(-10.0, 10.0);
    const double alphas[] = {1.0, 10.0, 100.0};
    for (int trial = 0; trial < 20000; ++trial) {
        const double x = xd(rng);
        const double alpha = alphas[trial % 3];
        const SmoothAbs r = smooth_abs(x, AbsVariant::XTanh, alpha);
        REQUIRE(std::abs(x) - r.value >= 0.0);
        REQUIRE(std::abs(x) - r.value <= 1.0 / alpha);
        REQUIRE(smooth_abs(-x, AbsVariant::XTanh, alpha).value == r.value);
        REQUIRE(smooth_abs(-x, AbsVariant::XTanh, alpha).d1 == -r.d1);
    }
}

TEST_CASE("table exp matches std::exp on the non-positive axis") {
    using t3cbf::smooth::detail::exp_nonpositive;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> xd(-745.0, 0.0), sd(-1.0, 0.0);
    double worst = 0.0;
    for (int trial = 0; trial < 200000; ++trial) {
        const double x = trial % 2 ? xd(rng) : sd(rng);
        const double ref = std::exp(std::max(x, -708.0));
        worst = std::max(worst, std::abs(exp_nonpositive(x) - ref) / ref);
    }
    CHECK(worst < 5e-16);
    CHECK(exp_nonpositive(0.0) == 1.0);
    CHECK(exp_nonpositive(-1e-300) == 1.0);
}

TEST_CASE("xtanh agrees with the direct tanh formula") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> ld(-12.0, 1.5);
    for (int trial = 0; trial < 20000; ++trial) {
        const double x = (trial % 2 ? -1.0 : 1.0) * std::pow(10.0, ld(rng));
        const double alpha = trial % 3 == 0 ? 100.0 : 7.0;
        const double t = std::tanh(alpha * x);
        const double sech2 = 1.0 - t * t;
        const SmoothAbs r = smooth_abs(x, AbsVariant::XTanh, alpha);
        REQUIRE(std::abs(r.value - x * t) <= 1e-15 * std::max(1.0, std::abs(x)));
        REQUIRE(std::abs(r.d1 - (t + alpha * x * sech2)) <= 1e-14);
        REQUIRE(std::abs(r.d2 - 2.0 * alpha * sech2 * (1.0 - alpha * x * t)) <= 1e-13 * alpha);
    }
}

TEST_CASE("smooth_abs derivatives match finite differences away from zero") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> xd(-2.0, 2.0);
    const double h = 1e-6;
    for (AbsVariant v : {AbsVariant::XTanh, AbsVariant::Sqrt}) {
        for (int trial = 0; trial < 5000; ++trial) {
            const double x = xd(rng);
            if (std::abs(x) < 1e-3) continue;
            const double p = v == AbsVariant::XTanh ? (trial % 2 ? 10.0 : 100.0) : 0.05;
            const SmoothAbs r = smooth_abs(x, v, p);
            const double d1 = (smooth_abs(x + h, v, p).value - smooth_abs(x - h, v, p).value) / (2 * h);
            const double d2 = (smooth_abs(x + h, v, p).d1 - smooth_abs(x - h, v, p).d1) / (2 * h);
            REQUIRE(rel_err(r.d1, d1, 1e-3) < 1e-5);
            REQUIRE(rel_err(r.d2, d2, 1e-3) < 1e-5);
        }
    }
}

TEST_CASE("sqrt variant dominates |x|") {
    for (double x : {-3.0, -0.01, 0.0, 0.002, 1.0}) {
        const SmoothAbs r = smooth_abs(x, AbsVariant::Sqrt, 0.01);
        CHECK(r.value >= std::abs(x));
        CHECK(r.value == doctest::Approx(std::sqrt(x * x + 1e-4)));
    }
    CHECK_THROWS_AS(smooth_abs(1.0, AbsVariant::Sqrt, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(smooth_abs(std::nan(""), AbsVariant::XTanh, 1.0), std::invalid_argument);
}

TEST_CASE("SmoothingParams validation") {
    SmoothingParams p;
    CHECK_NOTHROW(p.validate());
    CHECK(p.upper_band() == doctest::Approx((6.0 + std::log(15.0)) / 100.0));
    p.switch_threshold = 0.05;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = SmoothingParams{};
    p.alpha_abs = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    CHECK_NOTHROW(SmoothingParams::no_switching().validate());
}
