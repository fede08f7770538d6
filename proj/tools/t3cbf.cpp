#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "t3cbf/bench.hpp"
#include "t3cbf/harness.hpp"
#include "t3cbf/scene.hpp"

using namespace t3cbf;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string scene;
    std::string script;
    std::string config;
    std::uint64_t seed = 42;
    std::string out = ".";
    bool csv = false;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--scene", c.scene, "Scene JSON (default: built-in stairs)");
    app->add_option("--script", c.script, "Command script, lines of 't v omega' (default: 0.1 m/s straight)");
    app->add_option("--config", c.config, "Episode config JSON");
    app->add_option("--seed", c.seed, "Random seed");
    app->add_option("--out", c.out, "Output directory");
    app->add_flag("--csv", c.csv, "Write CSV output");
}

std::ofstream open_out(const Common& c, const std::string& name) {
    fs::create_directories(c.out);
    const fs::path p = fs::path(c.out) / name;
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    std::cout << "wrote " << p.string() << '\n';
    return f;
}

scene::Scene load_scene(const Common& c) { return c.scene.empty() ? scene::stairs_scene() : scene::load_scene(c.scene); }

planner::CommandScript load_script(const Common& c) {
    return c.script.empty() ? planner::CommandScript::constant(0.1, 0.0) : planner::CommandScript::load(c.script);
}

sim::EpisodeConfig load_config(const Common& c) {
    if (!c.config.empty()) return sim::load_episode_config(c.config);
    sim::EpisodeConfig cfg;
    cfg.duration = 30.0;
    cfg.start_xy = {0.3, 0.0};
    return cfg;
}

void print_report(const std::string& label, const sim::EpisodeLog& log, const sim::SafetyReport& r) {
    std::cout << label << ": " << log.ticks.size() << " ticks" << (log.aborted ? " (aborted)" : "") << ", "
              << log.fallbacks << " fallbacks\n"
              << "  min body margin " << r.min_body_margin << " m at t = " << r.min_body_margin_time << " s ("
              << r.body_violation_ticks << " ticks below zero)\n"
              << "  max joint excursion " << r.max_joint_excursion << " (" << r.joint_violation_ticks << " ticks)\n"
              << "  footholds " << r.foothold_checks - r.foothold_violations << '/' << r.foothold_checks
              << " inside, worst margin " << r.worst_foothold_margin << " m\n"
              << "  tick time median " << r.median_tick_us << " us, max " << r.max_tick_us << " us\n"
              << "  " << (r.ok() ? "safe" : "UNSAFE") << '\n';
}

int run_bench(const Common& c, std::size_t pairs, int batch) {
    const bench::BenchReport r = bench::bench_collision(c.seed, pairs, batch);
    bench::print_bench(r, std::cout);
    if (c.csv) {
        std::ofstream f = open_out(c, "bench.csv");
        bench::write_bench_csv(r, f);
    }
    return 0;
}

int run_sweep(const Common& c, const std::vector<double>& alphas, int directions) {
    bench::SweepSpec spec;
    if (!alphas.empty()) spec.alphas = alphas;
    spec.directions = directions;
    const bench::SweepResult r = bench::boundary_sweep(spec);
    std::cout << "SAT boundary vs Minkowski polygon: max radial error " << r.sat_oracle_error << " m\n";
    for (const bench::SweepCurve& curve : r.curves) {
        if (curve.method == "SAT") continue;
        std::cout << curve.method << " alpha " << curve.alpha << ": worst chord midpoint h " << curve.worst_chord
                  << (curve.non_convex() ? " (non-convex)" : " (convex)") << ", exact margin on curve ["
                  << curve.sat_min << ", " << curve.sat_max << "]\n";
    }
    std::ofstream f = open_out(c, "sweep.csv");
    bench::write_sweep_csv(r, f);
    return 0;
}

int run_episode(const Common& c) {
    const scene::Scene sc = load_scene(c);
    const sim::EpisodeConfig cfg = load_config(c);
    const sim::EpisodeLog log = sim::run_episode(sc, load_script(c), cfg);
    const sim::SafetyReport r = sim::verify_safety(log, sc);
    print_report(cfg.cbf ? "cbf on" : "cbf off", log, r);
    if (c.csv) {
        std::ofstream f = open_out(c, "episode.csv");
        sim::write_csv(log, f);
    }
    return 0;
}

int run_ablation(const Common& c) {
    const scene::Scene sc = load_scene(c);
    const planner::CommandScript cmd = load_script(c);
    sim::EpisodeConfig cfg = load_config(c);
    for (bool on : {true, false}) {
        cfg.cbf = on;
        const sim::EpisodeLog log = sim::run_episode(sc, cmd, cfg);
        print_report(on ? "cbf on" : "cbf off", log, sim::verify_safety(log, sc));
        if (c.csv) {
            std::ofstream f = open_out(c, on ? "ablation_on.csv" : "ablation_off.csv");
            sim::write_csv(log, f);
        }
    }
    return 0;
}

int run_timing(const Common& c, int rows, int ticks) {
    const bench::TimingLoad load = bench::synthetic_load(rows);
    const sim::EpisodeConfig cfg = c.config.empty() ? sim::EpisodeConfig{} : sim::load_episode_config(c.config);
    const bench::TimingReport r = bench::time_control_ticks(load, ticks, c.seed, cfg.constraints, cfg.filter);
    std::cout << rows << " rows, " << ticks << " ticks\n"
              << "  assembly median " << r.assembly.median << " us, p99 " << r.assembly.p99 << " us\n"
              << "  solve    median " << r.solve.median << " us, p99 " << r.solve.p99 << " us\n"
              << "  total    median " << r.total.median << " us, p99 " << r.total.p99 << " us\n";
    if (c.csv) {
        std::ofstream f = open_out(c, "timing.csv");
        bench::write_timing_csv(r, f);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Smooth-SAT collision margins and CBF safety filter for a wheel-legged robot"};
    app.require_subcommand(1);
    Common common;

    CLI::App* bench_cmd = app.add_subcommand("bench", "Time the collision methods on random cuboid pairs");
    add_common(bench_cmd, common);
    std::size_t pairs = 100000;
    int batch = 32;
    bench_cmd->add_option("--pairs", pairs, "Number of random pairs")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--batch", batch, "Pairs per clock read")->check(CLI::PositiveNumber);

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Contact boundaries of SAT and smooth SAT in the plane");
    add_common(sweep_cmd, common);
    std::vector<double> alphas;
    int directions = 360;
    sweep_cmd->add_option("--alpha", alphas, "Smoothing sharpness values");
    sweep_cmd->add_option("--directions", directions, "Sweep directions")->check(CLI::Range(3, 100000));

    CLI::App* run_cmd = app.add_subcommand("run", "Closed-loop runs");
    run_cmd->require_subcommand(1);
    CLI::App* episode_cmd = run_cmd->add_subcommand("episode", "One episode and its safety report");
    CLI::App* ablation_cmd = run_cmd->add_subcommand("ablation", "The same episode with the filter on and off");
    CLI::App* timing_cmd = run_cmd->add_subcommand("timing", "Control tick time on a synthetic row load");
    for (CLI::App* s : {episode_cmd, ablation_cmd, timing_cmd}) add_common(s, common);
    int rows = 269, ticks = 2000;
    timing_cmd->add_option("--rows", rows, "Constraint rows per tick");
    timing_cmd->add_option("--ticks", ticks, "Ticks to time")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);
    try {
        if (bench_cmd->parsed()) return run_bench(common, pairs, batch);
        if (sweep_cmd->parsed()) return run_sweep(common, alphas, directions);
        if (episode_cmd->parsed()) return run_episode(common);
        if (ablation_cmd->parsed()) return run_ablation(common);
        if (timing_cmd->parsed()) return run_timing(common, rows, ticks);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
