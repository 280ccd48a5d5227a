#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bevmatch/bev_grid.hpp"
#include "bevmatch/geometry.hpp"
#include "bevmatch/solver_dema.hpp"
#include "bevmatch/solver_fuma.hpp"
#include "bevmatch/vector_map.hpp"

namespace bevmatch {

/// Deterministic uniform helpers on top of mt19937_64. Draws are derived
/// from raw 64-bit outputs only, so sequences are identical across
/// platforms and library versions.
struct Rng {
    std::mt19937_64 eng;

    explicit Rng(std::uint64_t seed) : eng(seed) {}

    double unit() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * unit(); }
    int uniform_int(int a, int b) {  // inclusive bounds
        const int span = b - a + 1;
        const int v = a + static_cast<int>(unit() * span);
        return v > b ? b : v;
    }
    bool bernoulli(double prob) { return unit() < prob; }
};

/// Stream-splitting mix (splitmix64 finalizer) used to derive independent
/// per-trial seeds from the master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Synthetic scenes
// ---------------------------------------------------------------------------

struct SceneParams {
    int n_dividers = 3;
    double lane_spacing = 3.5;      // m between dividers
    double extent_x = 45.0;         // scene half length along x (m)
    double point_step = 3.0;        // polyline sampling step (m)
    int min_crossings = 1;
    int max_crossings = 2;
    double max_curvature = 2.0;     // lateral bow of the road over extent_x (m)
    double max_slope = 0.06;        // lateral drift per meter
    bool require_asymmetry = true;  // keeps every DoF observable
};

/// Deterministic-by-seed scene: parallel curved lane dividers, two road
/// boundaries at distinct lateral offsets, and crossing outlines that give
/// the longitudinal axis structure. With require_asymmetry the road is
/// guaranteed a bend and unequal boundary offsets, so no DoF is blind and
/// no boundary pair is 180-degree rotation symmetric about the origin.
inline VectorMap generate_scene(std::uint64_t seed, const SceneParams& p = {}) {
    if (p.n_dividers < 0 || p.lane_spacing <= 0.0 || p.extent_x < 2.0 * p.point_step ||
        p.point_step <= 0.0 || p.min_crossings < 0 || p.max_crossings > 2 ||
        p.min_crossings > p.max_crossings || p.max_curvature < 0.0 || p.max_slope < 0.0)
        throw std::invalid_argument("infeasible scene parameters");

    Rng rng(seed);
    double curvature = rng.uniform(-p.max_curvature, p.max_curvature);
    const double slope = rng.uniform(-p.max_slope, p.max_slope);
    if (p.require_asymmetry && std::abs(curvature) < 0.3 && p.max_curvature >= 0.5)
        curvature = curvature < 0.0 ? -0.5 : 0.5;
    auto y_center = [&](double x) {
        const double u = x / p.extent_x;
        return slope * x + curvature * u * u;
    };

    VectorMap map;
    map.frame_tag = "global";
    std::uint64_t next_id = 0;
    const int n_pts = static_cast<int>(std::floor(2.0 * p.extent_x / p.point_step)) + 1;
    auto make_longitudinal = [&](double offset, MapElementClass cls) {
        MapElement e;
        e.id = next_id++;
        e.cls = cls;
        for (int i = 0; i < n_pts; ++i) {
            const double x = -p.extent_x + i * p.point_step;
            e.points.push_back(Vec2{x, y_center(x) + offset});
        }
        map.elements.push_back(std::move(e));
    };

    const double half = 0.5 * (p.n_dividers - 1) * p.lane_spacing;
    for (int i = 0; i < p.n_dividers; ++i) {
        const double jitter = rng.uniform(-0.3, 0.3);
        make_longitudinal(-half + i * p.lane_spacing + jitter, MapElementClass::lane_divider);
    }

    double off_left = rng.uniform(0.0, 0.8);
    double off_right = rng.uniform(0.0, 0.8);
    if (p.require_asymmetry && std::abs(off_left - off_right) < 0.15) off_right = off_left + 0.3;
    const double bound_left = half + 0.5 * p.lane_spacing + off_left;
    const double bound_right = -(half + 0.5 * p.lane_spacing + off_right);
    make_longitudinal(bound_left, MapElementClass::road_boundary);
    make_longitudinal(bound_right, MapElementClass::road_boundary);

    const int n_cross = rng.uniform_int(p.min_crossings, p.max_crossings);
    std::vector<double> cross_x;
    for (int k = 0; k < n_cross; ++k) {
        double xc = 0.0;
        for (int attempt = 0; attempt < 32; ++attempt) {
            xc = rng.uniform(-20.0, 20.0);
            bool ok = true;
            for (double prev : cross_x)
                if (std::abs(prev - xc) < 8.0) ok = false;
            if (ok) break;
        }
        cross_x.push_back(xc);
        const double hl = rng.uniform(1.5, 2.5);
        const double y_lo = y_center(xc) + bound_right + 0.3;
        const double y_hi = y_center(xc) + bound_left - 0.3;
        MapElement e;
        e.id = next_id++;
        e.cls = MapElementClass::pedestrian_crossing;
        e.points = {Vec2{xc - hl, y_lo}, Vec2{xc + hl, y_lo}, Vec2{xc + hl, y_hi},
                    Vec2{xc - hl, y_hi}, Vec2{xc - hl, y_lo}};
        map.elements.push_back(std::move(e));
    }
    return map;
}

// ---------------------------------------------------------------------------
// Perturbations
// ---------------------------------------------------------------------------

struct PerturbRanges {
    double x = 2.0;                 // m
    double y = 1.0;                 // m
    double yaw = deg_to_rad(2.0);   // rad
};

/// Uniform draw within the ranges; with on_grid each component snaps to its
/// hypothesis grid so exact-recovery trials have an attainable answer.
inline Se2Pose sample_perturbation(Rng& rng, const PerturbRanges& ranges, bool on_grid,
                                   const HypothesisGrid& hx, const HypothesisGrid& hy,
                                   const HypothesisGrid& hyaw) {
    Se2Pose p{rng.uniform(-ranges.x, ranges.x), rng.uniform(-ranges.y, ranges.y),
              rng.uniform(-ranges.yaw, ranges.yaw)};
    if (on_grid) {
        p.x = hx.snap(p.x);
        p.y = hy.snap(p.y);
        p.yaw = hyaw.snap(p.yaw);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

enum class SolverKind { dema, fuma, adaptive };

inline const char* solver_kind_name(SolverKind k) {
    switch (k) {
        case SolverKind::dema: return "dema";
        case SolverKind::fuma: return "fuma";
        default: return "adaptive";
    }
}

enum class RefinerKind { none, oracle };

/// How the reference grid at the perturbed pose is produced: `warp` resamples
/// the (intact) observation raster by the ground-truth correction, so the
/// answer the solvers search for is exactly representable; `raster` renders
/// the map crop at the perturbed pose independently, which adds
/// rasterization-phase and crop-content noise on top.
enum class RefRender { warp, raster };

struct BenchConfig {
    std::uint64_t seed = 1;
    int trials = 100;
    SolverKind solver = SolverKind::dema;
    double t_c = 0.4;
    RefinerKind refiner = RefinerKind::oracle;
    PerturbRanges ranges;
    bool on_grid = false;
    RefRender ref_render = RefRender::warp;
    double dropout = 0.0;      // per-element drop probability (observation side)
    double pixel_noise = 0.0;  // per-pixel semantic flip probability
    int erosion = 0;           // erosion iterations on semantic channels
    BevSpec raster_spec;       // 400 x 200 x 4 at defaults
    int pool_factor = 4;       // solver grids 100 x 50
    DemaConfig dema = default_dema_config();
    double fuma_temperature = 2e-3;
    SceneParams scene;
    int workers = 1;
    bool record_timing = true;  // false writes ms = 0 for byte-stable reports
    bool dump_probs = false;
};

/// One benchmark row. gt is the correction the solver should report: the
/// inverse of the injected perturbation, so compose(perturbed_pose, gt)
/// returns to the true pose. Errors are est - gt per axis (yaw wrapped).
struct TrialRecord {
    int trial_id = 0;
    Se2Pose gt;
    Se2Pose est;
    double err_x = 0.0, err_y = 0.0, err_yaw = 0.0;
    double conf_x = 0.0, conf_y = 0.0, conf_yaw = 0.0;
    std::string solver;
    std::int64_t evals = 0;
    double ms = 0.0;
    bool triggered = false;
    bool refine_requested = false;
    bool exact_hit = false;
    bool failed = false;
    std::string error;
    DofDistribution dist_x, dist_y, dist_yaw;
};

using Refiner = std::function<Se2Pose(const PoseEstimate&)>;

struct AdaptiveDecision {
    Se2Pose delta;
    bool triggered = false;
    bool refine_requested = false;
};

/// Keeps the coarse delta when the minimum of the three per-DoF confidences
/// reaches t_c; otherwise defers to the refiner when one is configured, or
/// flags that refinement was requested.
inline AdaptiveDecision adaptive_select(const PoseEstimate& coarse, const Refiner* refiner,
                                        double t_c) {
    if (coarse.min_confidence() >= t_c) return AdaptiveDecision{coarse.delta, false, false};
    if (refiner && *refiner) return AdaptiveDecision{(*refiner)(coarse), true, false};
    return AdaptiveDecision{coarse.delta, true, true};
}

namespace detail {

inline void refresh_background(BevGrid& grid) {
    const int sem = grid.channels - 1;
    for (int r = 0; r < grid.rows(); ++r)
        for (int c = 0; c < grid.cols(); ++c) {
            bool any = false;
            for (int ch = 0; ch < sem; ++ch)
                if (grid.at(r, c, ch) > 0.0f) any = true;
            grid.at(r, c, sem) = any ? 0.0f : 1.0f;
        }
}

inline void apply_pixel_noise(BevGrid& grid, double prob, Rng& rng) {
    const int sem = grid.channels - 1;
    for (int r = 0; r < grid.rows(); ++r)
        for (int c = 0; c < grid.cols(); ++c)
            for (int ch = 0; ch < sem; ++ch)
                if (rng.bernoulli(prob)) grid.at(r, c, ch) = 1.0f - grid.at(r, c, ch);
    refresh_background(grid);
}

inline void erode_semantic(BevGrid& grid, int iterations) {
    const int rows = grid.rows(), cols = grid.cols(), sem = grid.channels - 1;
    for (int it = 0; it < iterations; ++it) {
        BevGrid prev = grid;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                for (int ch = 0; ch < sem; ++ch) {
                    float m = prev.at(r, c, ch);
                    m = std::min(m, r > 0 ? prev.at(r - 1, c, ch) : 0.0f);
                    m = std::min(m, r + 1 < rows ? prev.at(r + 1, c, ch) : 0.0f);
                    m = std::min(m, c > 0 ? prev.at(r, c - 1, ch) : 0.0f);
                    m = std::min(m, c + 1 < cols ? prev.at(r, c + 1, ch) : 0.0f);
                    grid.at(r, c, ch) = m;
                }
    }
    refresh_background(grid);
}

}  // namespace detail

/// Renders the observation at the true pose (optionally degraded) and the
/// reference at the perturbed pose (rasterized there, or equivalently the
/// intact raster warped by the ground-truth correction), runs the configured
/// solver, and records errors under the fixed sign convention. Solver
/// failures become failure rows, never exceptions.
inline TrialRecord run_trial(const VectorMap& map, const Se2Pose& perturbation,
                             const BenchConfig& cfg, int trial_id, Rng& rng) {
    TrialRecord rec;
    rec.trial_id = trial_id;
    const Se2Pose t_gt{};
    const Se2Pose t_init = compose(t_gt, perturbation);
    rec.gt = inverse(perturbation);
    rec.solver = solver_kind_name(cfg.solver);

    VectorMap obs_src;
    obs_src.frame_tag = map.frame_tag;
    const bool degraded = cfg.dropout > 0.0 || cfg.pixel_noise > 0.0 || cfg.erosion > 0;
    for (const MapElement& e : map.elements)
        if (!(cfg.dropout > 0.0 && rng.bernoulli(cfg.dropout))) obs_src.elements.push_back(e);

    BevGrid obs_full = rasterize(crop_local_map(obs_src, t_gt, cfg.raster_spec), cfg.raster_spec);
    if (cfg.pixel_noise > 0.0) detail::apply_pixel_noise(obs_full, cfg.pixel_noise, rng);
    if (cfg.erosion > 0) detail::erode_semantic(obs_full, cfg.erosion);
    const BevGrid obs = downsample(obs_full, cfg.pool_factor);

    // The reference always derives from the intact map so that degradations
    // create a genuine observation/map mismatch.
    BevGrid ref;
    if (cfg.ref_render == RefRender::raster) {
        ref = downsample(
            rasterize(crop_local_map(map, t_init, cfg.raster_spec), cfg.raster_spec),
            cfg.pool_factor);
    } else {
        const BevGrid base =
            degraded ? downsample(rasterize(crop_local_map(map, t_gt, cfg.raster_spec),
                                            cfg.raster_spec),
                                  cfg.pool_factor)
                     : obs;
        ref = warp_by_pose(base, rec.gt, Interp::bilinear);
    }

    const auto start = std::chrono::steady_clock::now();
    try {
        PoseEstimate est;
        switch (cfg.solver) {
            case SolverKind::dema:
                est = dema_solve(obs, ref, cfg.dema);
                rec.est = est.delta;
                break;
            case SolverKind::fuma:
                est = fuma_solve(obs, ref, cfg.dema.hyp_x, cfg.dema.hyp_y, cfg.dema.hyp_yaw,
                                 cfg.fuma_temperature);
                rec.est = est.delta;
                break;
            case SolverKind::adaptive: {
                est = dema_solve(obs, ref, cfg.dema);
                Refiner oracle;
                if (cfg.refiner == RefinerKind::oracle) {
                    const Se2Pose gt = rec.gt;
                    oracle = [gt](const PoseEstimate&) { return gt; };
                }
                const AdaptiveDecision d = adaptive_select(
                    est, cfg.refiner == RefinerKind::none ? nullptr : &oracle, cfg.t_c);
                rec.est = d.delta;
                rec.triggered = d.triggered;
                rec.refine_requested = d.refine_requested;
                break;
            }
        }
        rec.conf_x = est.conf_x;
        rec.conf_y = est.conf_y;
        rec.conf_yaw = est.conf_yaw;
        rec.evals = est.cost.evaluations;
        rec.dist_x = std::move(est.dist_x);
        rec.dist_y = std::move(est.dist_y);
        rec.dist_yaw = std::move(est.dist_yaw);
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
        rec.est = Se2Pose{};
    }
    if (cfg.record_timing) {
        rec.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                           start)
                     .count();
    }

    rec.err_x = rec.est.x - rec.gt.x;
    rec.err_y = rec.est.y - rec.gt.y;
    rec.err_yaw = wrap_angle(rec.est.yaw - rec.gt.yaw);

    auto hit = [](double est, double want, double snapped) {
        return std::abs(est - want) <= 1e-9 || std::abs(est - snapped) <= 1e-9;
    };
    rec.exact_hit = !rec.failed &&
                    hit(rec.est.x, rec.gt.x, cfg.dema.hyp_x.snap(rec.gt.x)) &&
                    hit(rec.est.y, rec.gt.y, cfg.dema.hyp_y.snap(rec.gt.y)) &&
                    hit(rec.est.yaw, rec.gt.yaw, cfg.dema.hyp_yaw.snap(rec.gt.yaw));
    return rec;
}

// ---------------------------------------------------------------------------
// Aggregation and reports
// ---------------------------------------------------------------------------

struct BenchReport {
    int n_trials = 0;
    double mae_x = 0.0, mae_y = 0.0, mae_yaw_deg = 0.0;
    double rmse_x = 0.0, rmse_y = 0.0, rmse_yaw_deg = 0.0;
    double recovery_rate = 0.0;
    double trigger_rate = 0.0;
    std::map<std::string, double> mean_evals;
};

inline BenchReport aggregate(const std::vector<TrialRecord>& records) {
    if (records.empty()) throw std::invalid_argument("aggregate needs at least one record");
    BenchReport rep;
    rep.n_trials = static_cast<int>(records.size());
    double sx = 0, sy = 0, syaw = 0, qx = 0, qy = 0, qyaw = 0;
    int hits = 0, triggers = 0;
    std::map<std::string, std::pair<double, int>> evals;
    for (const TrialRecord& r : records) {
        const double eyaw = rad_to_deg(r.err_yaw);
        sx += std::abs(r.err_x);
        sy += std::abs(r.err_y);
        syaw += std::abs(eyaw);
        qx += r.err_x * r.err_x;
        qy += r.err_y * r.err_y;
        qyaw += eyaw * eyaw;
        hits += r.exact_hit ? 1 : 0;
        triggers += r.triggered ? 1 : 0;
        auto& acc = evals[r.solver];
        acc.first += static_cast<double>(r.evals);
        acc.second += 1;
    }
    const double n = static_cast<double>(rep.n_trials);
    rep.mae_x = sx / n;
    rep.mae_y = sy / n;
    rep.mae_yaw_deg = syaw / n;
    rep.rmse_x = std::sqrt(qx / n);
    rep.rmse_y = std::sqrt(qy / n);
    rep.rmse_yaw_deg = std::sqrt(qyaw / n);
    rep.recovery_rate = hits / n;
    rep.trigger_rate = triggers / n;
    for (const auto& [name, acc] : evals) rep.mean_evals[name] = acc.first / acc.second;
    return rep;
}

struct BenchResult {
    std::vector<TrialRecord> records;
    BenchReport report;
};

/// Runs the full benchmark. Trials draw their RNG streams from the master
/// seed independently, so results do not depend on the worker count; records
/// are collected in trial order.
inline BenchResult run_bench(const BenchConfig& cfg) {
    if (cfg.trials < 1) throw std::invalid_argument("bench needs at least one trial");
    BenchResult result;
    result.records.resize(cfg.trials);
    std::atomic<int> next{0};
    auto worker = [&]() {
        while (true) {
            const int t = next.fetch_add(1);
            if (t >= cfg.trials) break;
            const VectorMap scene = generate_scene(mix_seed(cfg.seed, 2 * t), cfg.scene);
            Rng rng(mix_seed(cfg.seed, 2 * t + 1));
            const Se2Pose perturbation = sample_perturbation(
                rng, cfg.ranges, cfg.on_grid, cfg.dema.hyp_x, cfg.dema.hyp_y, cfg.dema.hyp_yaw);
            result.records[t] = run_trial(scene, perturbation, cfg, t, rng);
        }
    };
    const int workers = std::max(1, cfg.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    result.report = aggregate(result.records);
    return result;
}

namespace detail {

inline std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace detail

inline constexpr const char* kTrialsCsvHeader =
    "trial_id,dx_gt,dy_gt,dyaw_gt,dx_est,dy_est,dyaw_est,err_x,err_y,err_yaw,"
    "conf_x,conf_y,conf_yaw,solver,evals,ms";

/// Fixed-column CSV (yaw columns in degrees) so reports diff cleanly.
inline std::string trials_to_csv(const std::vector<TrialRecord>& records) {
    std::string out = kTrialsCsvHeader;
    out += '\n';
    char ms_buf[32];
    for (const TrialRecord& r : records) {
        out += std::to_string(r.trial_id);
        for (double v : {r.gt.x, r.gt.y, rad_to_deg(r.gt.yaw), r.est.x, r.est.y,
                         rad_to_deg(r.est.yaw), r.err_x, r.err_y, rad_to_deg(r.err_yaw),
                         r.conf_x, r.conf_y, r.conf_yaw}) {
            out += ',';
            out += detail::fmt_g(v);
        }
        out += ',';
        out += r.solver;
        out += ',';
        out += std::to_string(r.evals);
        std::snprintf(ms_buf, sizeof(ms_buf), ",%.3f", r.ms);
        out += ms_buf;
        out += '\n';
    }
    return out;
}

inline nlohmann::ordered_json report_to_json(const BenchReport& rep, const BenchConfig& cfg) {
    nlohmann::ordered_json j;
    j["trials"] = rep.n_trials;
    j["solver"] = solver_kind_name(cfg.solver);
    j["seed"] = cfg.seed;
    j["on_grid"] = cfg.on_grid;
    j["mae"] = {{"x", rep.mae_x}, {"y", rep.mae_y}, {"yaw_deg", rep.mae_yaw_deg}};
    j["rmse"] = {{"x", rep.rmse_x}, {"y", rep.rmse_y}, {"yaw_deg", rep.rmse_yaw_deg}};
    j["recovery_rate"] = rep.recovery_rate;
    j["trigger_rate"] = rep.trigger_rate;
    j["mean_evaluations"] = rep.mean_evals;
    return j;
}

inline nlohmann::ordered_json distribution_to_json(const DofDistribution& d, bool degrees) {
    nlohmann::ordered_json j;
    auto values = nlohmann::ordered_json::array();
    for (double v : d.grid.values) values.push_back(degrees ? rad_to_deg(v) : v);
    j["values"] = std::move(values);
    j["probs"] = d.probs;
    return j;
}

/// Writes trials.csv, summary.json, and (optionally) probs/<id>.json under
/// out_dir.
inline void write_bench_outputs(const BenchResult& result, const BenchConfig& cfg,
                                const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream csv(fs::path(out_dir) / "trials.csv", std::ios::binary);
        if (!csv) throw std::runtime_error("cannot write trials.csv under " + out_dir);
        csv << trials_to_csv(result.records);
    }
    {
        std::ofstream js(fs::path(out_dir) / "summary.json", std::ios::binary);
        if (!js) throw std::runtime_error("cannot write summary.json under " + out_dir);
        js << report_to_json(result.report, cfg).dump(2) << '\n';
    }
    if (cfg.dump_probs) {
        fs::create_directories(fs::path(out_dir) / "probs");
        for (const TrialRecord& r : result.records) {
            nlohmann::ordered_json j;
            j["trial_id"] = r.trial_id;
            j["x"] = distribution_to_json(r.dist_x, false);
            j["y"] = distribution_to_json(r.dist_y, false);
            j["yaw_deg"] = distribution_to_json(r.dist_yaw, true);
            std::ofstream pf(fs::path(out_dir) / "probs" / (std::to_string(r.trial_id) + ".json"),
                             std::ios::binary);
            pf << j.dump(2) << '\n';
        }
    }
}

}  // namespace bevmatch
