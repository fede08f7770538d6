#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "t3cbf/constraints.hpp"
#include "t3cbf/ecbf.hpp"
#include "t3cbf/geometry.hpp"
#include "t3cbf/model.hpp"
#include "t3cbf/smoothmath.hpp"

namespace t3cbf::bench {

struct Stats {
    double mean = 0.0;
    double median = 0.0;
    double p99 = 0.0;
};

Stats summarize(std::vector<double> samples);

struct MethodTiming {
    std::string name;
    Stats evaluate;
    /// Empty for methods that have no derivatives.
    std::optional<Stats> differentiate;
};

struct BenchReport {
    std::uint64_t seed = 0;
    std::size_t pairs = 0;
    int batch = 0;
    /// Per-pair cost of the empty loop, already subtracted from every row.
    double baseline_us = 0.0;
    /// FNV-1a over the raw pair data; equal seeds give equal hashes.
    std::uint64_t input_hash = 0;
    std::vector<MethodTiming> methods;

    const MethodTiming& method(const std::string& name) const;
    /// SSAT(LSE+xtanh) evaluate over SAT.
    double ssat_over_sat() const;
    /// LP over SSAT(LSE+xtanh) evaluate.
    double lp_over_ssat() const;
};

inline const std::string kSat = "SAT";
inline const std::string kSatMargin = "SAT margin";
inline const std::string kLseXtanh = "SSAT(LSE+xtanh)";
inline const std::string kLseSqrt = "SSAT(LSE+sqrt)";
inline const std::string kBoltzXtanh = "SSAT(Boltz+xtanh)";
inline const std::string kGjk = "GJK";
inline const std::string kLp = "LP";

/// Times every method over the same random pairs, `batch` pairs per clock
/// read. Statistics are over batches, in µs per pair. Smooth variants run
/// with switching disabled so every pair pays for the full composite; the
/// derivative column is with respect to the full pose of box A.
BenchReport bench_collision(std::uint64_t seed, std::size_t n, int batch = 32);

void print_bench(const BenchReport& r, std::ostream& out);
void write_bench_csv(const BenchReport& r, std::ostream& out);

struct SweepSpec {
    Eigen::Vector3d a_half = Eigen::Vector3d(0.6, 0.4, 0.25);
    Eigen::Vector3d b_half = Eigen::Vector3d(0.3, 0.15, 0.25);
    /// Rotation of box B about z.
    double b_tilt = 10.0 * 3.14159265358979323846 / 180.0;
    std::vector<double> alphas{10.0, 20.0, 50.0};
    int directions = 360;
    double r_max = 3.0;
    /// Inward scan step before bisection.
    double scan = 2e-3;
};

struct SweepCurve {
    std::string method;  ///< "SAT", "LSE" or "Boltzmann"
    double alpha = 0.0;  ///< 0 for SAT
    std::vector<Eigen::Vector2d> points;
    /// Largest h at the midpoint of a chord between two boundary points.
    double worst_chord = 0.0;
    std::array<int, 2> worst_chord_ends{0, 0};
    /// Exact SAT margin range over this curve's points.
    double sat_min = 0.0, sat_max = 0.0;

    bool non_convex(double tol = 1e-9) const { return worst_chord > tol; }
};

struct SweepResult {
    SweepSpec spec;
    std::vector<SweepCurve> curves;
    /// Contact polygon of B's centre from the Minkowski sum of the footprints.
    std::vector<Eigen::Vector2d> oracle;
    /// Largest radial gap between the SAT curve and the oracle polygon.
    double sat_oracle_error = 0.0;
};

/// For each direction in the xy plane, the outermost position of B's centre
/// where the margin crosses zero, found by an inward scan and bisection.
SweepResult boundary_sweep(const SweepSpec& spec = {});
void write_sweep_csv(const SweepResult& r, std::ostream& out);

/// Standing robot with a fixed set of obstacles around the body, sized so
/// that build_rows returns exactly `rows` rows.
struct TimingLoad {
    model::RobotState x;
    model::RobotGeometry geometry = model::RobotGeometry::defaults();
    safety::ConstraintContext context;
};
TimingLoad synthetic_load(int rows = 269);

struct TickSample {
    double assembly_us = 0.0;
    double solve_us = 0.0;
    int rows = 0;
    std::array<int, safety::kConstraintKinds> per_kind{};
};

struct TimingReport {
    std::vector<TickSample> ticks;
    Stats assembly, solve, total;
};

/// Assembly plus filter solve per tick on a jittered copy of the load state,
/// with a random reference input. Deterministic apart from the clock.
TimingReport time_control_ticks(const TimingLoad& load, int ticks, std::uint64_t seed,
                                const safety::ConstraintConfig& cc = {}, const safety::FilterConfig& fc = {});
void write_timing_csv(const TimingReport& r, std::ostream& out);

}  // namespace t3cbf::bench
