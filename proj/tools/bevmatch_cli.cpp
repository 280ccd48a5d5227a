// Command-line front end: rasterize HD-map crops into BEVG grids, solve a
// single localization problem, generate synthetic scenes, and run seeded
// benchmark batches.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "bevmatch/bev_grid.hpp"
#include "bevmatch/harness.hpp"
#include "bevmatch/solver_dema.hpp"
#include "bevmatch/solver_fuma.hpp"
#include "bevmatch/vector_map.hpp"

namespace {

bevmatch::Se2Pose parse_pose_arg(const std::string& s) {
    double x = 0, y = 0, yaw_deg = 0;
    if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &x, &y, &yaw_deg) != 3)
        throw CLI::ValidationError("pose", "expected x,y,yaw_deg (e.g. 1.5,-0.2,0.8)");
    return bevmatch::Se2Pose{x, y, bevmatch::deg_to_rad(yaw_deg)};
}

struct GridOptions {
    double range_x = 2.0, range_y = 1.0, range_yaw_deg = 2.0;
    double step_x = 0.4, step_y = 0.2, step_yaw_deg = 0.4;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--range-x", range_x, "longitudinal hypothesis half range (m)");
        cmd->add_option("--range-y", range_y, "lateral hypothesis half range (m)");
        cmd->add_option("--range-yaw", range_yaw_deg, "yaw hypothesis half range (deg)");
        cmd->add_option("--step-x", step_x, "longitudinal hypothesis step (m)");
        cmd->add_option("--step-y", step_y, "lateral hypothesis step (m)");
        cmd->add_option("--step-yaw", step_yaw_deg, "yaw hypothesis step (deg)");
    }

    void apply(bevmatch::DemaConfig& cfg) const {
        using bevmatch::DofAxis;
        cfg.hyp_x = bevmatch::sample_hypotheses(DofAxis::longitudinal, range_x, step_x);
        cfg.hyp_y = bevmatch::sample_hypotheses(DofAxis::lateral, range_y, step_y);
        cfg.hyp_yaw = bevmatch::sample_hypotheses(DofAxis::yaw,
                                                  bevmatch::deg_to_rad(range_yaw_deg),
                                                  bevmatch::deg_to_rad(step_yaw_deg));
    }
};

int cmd_rasterize(const std::string& map_path, const std::string& pose_arg,
                  const std::string& out_path, const bevmatch::BevSpec& spec) {
    const bevmatch::VectorMap map = bevmatch::load_map(map_path);
    const bevmatch::Se2Pose pose = parse_pose_arg(pose_arg);
    const bevmatch::BevGrid grid =
        bevmatch::rasterize(bevmatch::crop_local_map(map, pose, spec), spec);
    bevmatch::grid_write(grid, out_path);
    std::cout << "wrote " << out_path << " (" << grid.rows() << "x" << grid.cols() << "x"
              << grid.channels << " @ " << spec.resolution << " m/px)\n";
    return 0;
}

int cmd_solve(const std::string& map_path, const std::string& init_arg,
              const std::string& obs_path, const std::string& solver,
              const std::string& out_path, const bevmatch::BevSpec& spec, int pool_factor,
              const GridOptions& grids) {
    const bevmatch::VectorMap map = bevmatch::load_map(map_path);
    const bevmatch::Se2Pose init = parse_pose_arg(init_arg);

    bevmatch::BevGrid ref =
        bevmatch::rasterize(bevmatch::crop_local_map(map, init, spec), spec);
    ref = bevmatch::downsample(ref, pool_factor);

    bevmatch::BevGrid obs = bevmatch::grid_read(obs_path);
    if (obs.rows() == ref.rows() * pool_factor && obs.cols() == ref.cols() * pool_factor) {
        obs = bevmatch::downsample(obs, pool_factor);
    } else if (obs.rows() != ref.rows() || obs.cols() != ref.cols()) {
        throw std::runtime_error("observation grid dims do not match the map raster");
    }

    bevmatch::DemaConfig cfg = bevmatch::default_dema_config();
    grids.apply(cfg);
    bevmatch::PoseEstimate est;
    if (solver == "dema") {
        est = bevmatch::dema_solve(obs, ref, cfg);
    } else if (solver == "fuma") {
        est = bevmatch::fuma_solve(obs, ref, cfg.hyp_x, cfg.hyp_y, cfg.hyp_yaw,
                                   cfg.axis_temperature);
    } else {
        throw std::runtime_error("unknown solver: " + solver);
    }

    nlohmann::ordered_json j;
    j["solver"] = solver;
    j["delta"] = {{"x", est.delta.x},
                  {"y", est.delta.y},
                  {"yaw_deg", bevmatch::rad_to_deg(est.delta.yaw)}};
    j["confidence"] = {{"x", est.conf_x}, {"y", est.conf_y}, {"yaw", est.conf_yaw}};
    j["evaluations"] = est.cost.evaluations;
    j["probs"] = {{"x", bevmatch::distribution_to_json(est.dist_x, false)},
                  {"y", bevmatch::distribution_to_json(est.dist_y, false)},
                  {"yaw_deg", bevmatch::distribution_to_json(est.dist_yaw, true)}};
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << j.dump(2) << '\n';
    std::cout << "delta = (" << est.delta.x << " m, " << est.delta.y << " m, "
              << bevmatch::rad_to_deg(est.delta.yaw) << " deg), evaluations = "
              << est.cost.evaluations << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BEV map-matching localization toolkit"};
    app.require_subcommand(1);

    // rasterize
    std::string map_path, pose_arg, out_path;
    bevmatch::BevSpec spec;
    auto* ras = app.add_subcommand("rasterize", "render a local map crop into a BEVG grid");
    ras->add_option("--map", map_path, "map JSON file")->required();
    ras->add_option("--pose", pose_arg, "crop pose x,y,yaw_deg")->required();
    ras->add_option("--out", out_path, "output .bevg path")->required();
    ras->add_option("--res", spec.resolution, "resolution (m/px)");
    ras->add_option("--xr", spec.x_range, "longitudinal half extent (m)");
    ras->add_option("--yr", spec.y_range, "lateral half extent (m)");
    ras->add_option("--lw", spec.line_width, "stroke width (px)");

    // solve
    std::string init_arg, obs_path, solver = "dema";
    int pool_factor = 4;
    GridOptions solve_grids;
    auto* sol = app.add_subcommand("solve", "estimate the pose correction for one frame");
    sol->add_option("--map", map_path, "map JSON file")->required();
    sol->add_option("--init", init_arg, "initial pose x,y,yaw_deg")->required();
    sol->add_option("--obs", obs_path, "observation .bevg grid")->required();
    sol->add_option("--solver", solver, "dema | fuma")
        ->check(CLI::IsMember({"dema", "fuma"}));
    sol->add_option("--out", out_path, "output est.json path")->required();
    sol->add_option("--res", spec.resolution, "raster resolution (m/px)");
    sol->add_option("--pool", pool_factor, "solver-resolution pooling factor");
    solve_grids.add_to(sol);

    // scene
    std::uint64_t seed = 1;
    bevmatch::SceneParams scene_params;
    auto* scn = app.add_subcommand("scene", "generate a synthetic vector map");
    scn->add_option("--seed", seed, "scene seed")->required();
    scn->add_option("--out", out_path, "output map JSON path")->required();
    scn->add_option("--dividers", scene_params.n_dividers, "lane divider count");
    scn->add_option("--crossings-min", scene_params.min_crossings, "min crossings");
    scn->add_option("--crossings-max", scene_params.max_crossings, "max crossings");

    // bench
    bevmatch::BenchConfig bench;
    GridOptions bench_grids;
    std::string bench_solver = "dema", out_dir = "bench_out", timing = "real";
    auto* bch = app.add_subcommand("bench", "run a seeded benchmark batch");
    bch->add_option("--seed", bench.seed, "master seed");
    bch->add_option("--trials", bench.trials, "trial count");
    bch->add_option("--solver", bench_solver, "dema | fuma | adaptive")
        ->check(CLI::IsMember({"dema", "fuma", "adaptive"}));
    bch->add_option("--tc", bench.t_c, "adaptive confidence threshold");
    bch->add_option("--refiner", [&bench](const std::vector<std::string>& v) {
            if (v[0] == "none") bench.refiner = bevmatch::RefinerKind::none;
            else if (v[0] == "oracle") bench.refiner = bevmatch::RefinerKind::oracle;
            else return false;
            return true;
        }, "adaptive refiner: none | oracle");
    bch->add_option("--on-grid", bench.on_grid, "snap perturbations to the hypothesis grid");
    bch->add_option("--ref-render", [&bench](const std::vector<std::string>& v) {
            if (v[0] == "warp") bench.ref_render = bevmatch::RefRender::warp;
            else if (v[0] == "raster") bench.ref_render = bevmatch::RefRender::raster;
            else return false;
            return true;
        }, "reference grid rendering: warp | raster");
    bch->add_option("--noise-dropout", bench.dropout, "observation element dropout prob");
    bch->add_option("--noise-pixel", bench.pixel_noise, "per-pixel semantic flip prob");
    bch->add_option("--noise-erosion", bench.erosion, "erosion iterations on observation");
    bch->add_option("--workers", bench.workers, "worker threads");
    bch->add_option("--timing", timing, "ms column: real | zero")
        ->check(CLI::IsMember({"real", "zero"}));
    bch->add_flag("--dump-probs", bench.dump_probs, "write probs/<id>.json per trial");
    bch->add_option("--out", out_dir, "report directory");
    bench_grids.add_to(bch);

    CLI11_PARSE(app, argc, argv);

    try {
        if (ras->parsed()) return cmd_rasterize(map_path, pose_arg, out_path, spec);
        if (sol->parsed())
            return cmd_solve(map_path, init_arg, obs_path, solver, out_path, spec,
                             pool_factor, solve_grids);
        if (scn->parsed()) {
            bevmatch::save_map(bevmatch::generate_scene(seed, scene_params), out_path);
            std::cout << "wrote " << out_path << "\n";
            return 0;
        }
        if (bch->parsed()) {
            if (bench_solver == "dema") bench.solver = bevmatch::SolverKind::dema;
            if (bench_solver == "fuma") bench.solver = bevmatch::SolverKind::fuma;
            if (bench_solver == "adaptive") bench.solver = bevmatch::SolverKind::adaptive;
            bench_grids.apply(bench.dema);
            bench.ranges.x = bench_grids.range_x;
            bench.ranges.y = bench_grids.range_y;
            bench.ranges.yaw = bevmatch::deg_to_rad(bench_grids.range_yaw_deg);
            bench.record_timing = timing == "real";
            const bevmatch::BenchResult result = bevmatch::run_bench(bench);
            bevmatch::write_bench_outputs(result, bench, out_dir);
            const auto& rep = result.report;
            std::printf("trials %d | MAE x %.3f m, y %.3f m, yaw %.3f deg | recovery %.1f%% | "
                        "trigger %.1f%%\n",
                        rep.n_trials, rep.mae_x, rep.mae_y, rep.mae_yaw_deg,
                        100.0 * rep.recovery_rate, 100.0 * rep.trigger_rate);
            std::cout << "report written to " << out_dir << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
