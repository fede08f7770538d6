#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "t3cbf/geometry.hpp"

namespace t3cbf {

/// Selects the serial reference loop or the OpenMP-parallel one. Both produce
/// bit-identical results: every element is computed independently.
enum class Exec { Serial, Parallel };

namespace geom {

struct CuboidPair {
    Cuboid a;
    Cuboid b;
};

/// Uniformly random rotation (Haar measure via normalized Gaussian quaternion).
Matrix3d random_rotation(std::mt19937_64& rng);

/// Benchmark distribution: centers in [-2,2]^3, half-extents log-uniform in
/// [0.05, 1] m, uniform rotations.
Cuboid random_cuboid(std::mt19937_64& rng);

std::vector<CuboidPair> random_pairs(std::uint64_t seed, std::size_t n);

void sat_margins(std::span<const CuboidPair> pairs, std::span<double> out, Exec exec);
void ssat_values(std::span<const CuboidPair> pairs, const smooth::SmoothingParams& params, std::span<double> out,
                 Exec exec);
void gjk_results(std::span<const CuboidPair> pairs, std::span<std::uint8_t> out, Exec exec);

}  // namespace geom
}  // namespace t3cbf
