#include "t3cbf/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace t3cbf::geom {

Matrix3d random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    return q.toRotationMatrix();
}

Cuboid random_cuboid(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(-2.0, 2.0);
    std::uniform_real_distribution<double> logext(std::log(0.05), std::log(1.0));
    Cuboid c;
    c.center = Vector3d(pos(rng), pos(rng), pos(rng));
    c.half_extents = Vector3d(std::exp(logext(rng)), std::exp(logext(rng)), std::exp(logext(rng)));
    c.rotation = random_rotation(rng);
    return c;
}

std::vector<CuboidPair> random_pairs(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::vector<CuboidPair> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Cuboid a = random_cuboid(rng);
        Cuboid b = random_cuboid(rng);
        out.push_back({a, b});
    }
    return out;
}

namespace {
void check_sizes(std::size_t a, std::size_t b) {
    if (a != b) throw std::invalid_argument("kernel output size mismatch");
}
}  // namespace

void sat_margins(std::span<const CuboidPair> pairs, std::span<double> out, Exec exec) {
    check_sizes(pairs.size(), out.size());
    const auto n = static_cast<std::ptrdiff_t>(pairs.size());
    if (exec == Exec::Serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = sat_margin(pairs[static_cast<std::size_t>(i)].a, pairs[static_cast<std::size_t>(i)].b);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto s = static_cast<std::size_t>(i);
        out[s] = sat_margin(pairs[s].a, pairs[s].b);
    }
}

void ssat_values(std::span<const CuboidPair> pairs, const smooth::SmoothingParams& params, std::span<double> out,
                 Exec exec) {
    check_sizes(pairs.size(), out.size());
    const auto n = static_cast<std::ptrdiff_t>(pairs.size());
    if (exec == Exec::Serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const auto s = static_cast<std::size_t>(i);
            out[s] = ssat_value(pairs[s].a, pairs[s].b, params);
        }
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto s = static_cast<std::size_t>(i);
        out[s] = ssat_value(pairs[s].a, pairs[s].b, params);
    }
}

void gjk_results(std::span<const CuboidPair> pairs, std::span<std::uint8_t> out, Exec exec) {
    check_sizes(pairs.size(), out.size());
    const auto n = static_cast<std::ptrdiff_t>(pairs.size());
    if (exec == Exec::Serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const auto s = static_cast<std::size_t>(i);
            out[s] = gjk_intersect(pairs[s].a, pairs[s].b) ? 1 : 0;
        }
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto s = static_cast<std::size_t>(i);
        out[s] = gjk_intersect(pairs[s].a, pairs[s].b) ? 1 : 0;
    }
}

}  // namespace t3cbf::geom
