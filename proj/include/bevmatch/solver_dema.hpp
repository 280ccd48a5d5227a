#pragma once

#include <Eigen/Core>
#include <cmath>
#include <complex>
#include <vector>

#include "bevmatch/bev_grid.hpp"
#include "bevmatch/fft.hpp"
#include "bevmatch/geometry.hpp"
#include "bevmatch/solver_common.hpp"
#include "bevmatch/warp.hpp"

namespace bevmatch {

struct DemaConfig {
    HypothesisGrid hyp_x;
    HypothesisGrid hyp_y;
    HypothesisGrid hyp_yaw;           // radians
    double yaw_temperature = 1e-4;    // on MSE normalized by map-feature energy
    double axis_temperature = 2e-3;   // on ZNCC in [-1, 1]
    double gem_omega = 3.0;
    int n_theta = 180;
    int n_radius = 64;
};

/// Paper-scale defaults: +-2 m / 0.4 m, +-1 m / 0.2 m, +-2 deg / 0.4 deg
/// (11 hypotheses per DoF).
inline DemaConfig default_dema_config() {
    DemaConfig cfg;
    cfg.hyp_x = sample_hypotheses(DofAxis::longitudinal, 2.0, 0.4);
    cfg.hyp_y = sample_hypotheses(DofAxis::lateral, 1.0, 0.2);
    cfg.hyp_yaw = sample_hypotheses(DofAxis::yaw, deg_to_rad(2.0), deg_to_rad(0.4));
    return cfg;
}

namespace detail {

inline int next_pow2(int v) {
    int n = 2;
    while (n < v) n <<= 1;
    return n;
}

inline double bilinear_at(const std::vector<double>& plane, int n, double r, double c) {
    const int r0 = static_cast<int>(std::floor(r));
    const int c0 = static_cast<int>(std::floor(c));
    const double wr = r - r0, wc = c - c0;
    auto v = [&](int rr, int cc) -> double {
        if (rr < 0 || rr >= n || cc < 0 || cc >= n) return 0.0;
        return plane[static_cast<std::size_t>(rr) * n + cc];
    };
    return (1.0 - wr) * ((1.0 - wc) * v(r0, c0) + wc * v(r0, c0 + 1)) +
           wr * ((1.0 - wc) * v(r0 + 1, c0) + wc * v(r0 + 1, c0 + 1));
}

/// Amplitude spectra of up to two channels at once (packed as the real and
/// imaginary parts of one complex plane and unpacked through conjugate
/// symmetry). Only the centered frequency block |u|, |v| <= band actually
/// sampled by the polar transform is materialized, which also allows the
/// column FFT pass to skip all columns outside the band and the row pass to
/// skip the zero padding. Output blocks are (2*band+1)^2, row-major, DC at
/// the center and zeroed.
inline void amplitude_band_pair(const BevGrid& grid, int ch_a, int ch_b,
                                const FftPlan& plan, int band,
                                std::vector<std::complex<double>>& scratch,
                                std::vector<double>& amp_a, std::vector<double>& amp_b) {
    const int n = plan.size();
    const int rows = grid.rows(), cols = grid.cols();
    const int off_r = (n - rows) / 2;
    const int off_c = (n - cols) / 2;
    scratch.assign(static_cast<std::size_t>(n) * n, {0.0, 0.0});
    for (int r = 0; r < rows; ++r) {
        std::complex<double>* dst = scratch.data() + static_cast<std::size_t>(off_r + r) * n;
        if (ch_b >= 0) {
            for (int c = 0; c < cols; ++c)
                dst[off_c + c] = {static_cast<double>(grid.at(r, c, ch_a)),
                                  static_cast<double>(grid.at(r, c, ch_b))};
        } else {
            for (int c = 0; c < cols; ++c)
                dst[off_c + c] = static_cast<double>(grid.at(r, c, ch_a));
        }
    }
    for (int r = off_r; r < off_r + rows; ++r)
        plan.forward(scratch.data() + static_cast<std::size_t>(r) * n);

    // Columns of interest: frequency indices within [-band, band] mod n.
    std::vector<std::complex<double>> col(n);
    for (int f = -band; f <= band; ++f) {
        const int c = (f + n) % n;
        for (int r = 0; r < n; ++r) col[r] = scratch[static_cast<std::size_t>(r) * n + c];
        plan.forward(col.data());
        for (int r = 0; r < n; ++r) scratch[static_cast<std::size_t>(r) * n + c] = col[r];
    }

    const int side = 2 * band + 1;
    amp_a.assign(static_cast<std::size_t>(side) * side, 0.0);
    amp_b.assign(static_cast<std::size_t>(side) * side, 0.0);
    for (int u = -band; u <= band; ++u) {
        const int r_pos = (u + n) % n;
        const int r_neg = (n - u) % n;
        for (int v = -band; v <= band; ++v) {
            const int c_pos = (v + n) % n;
            const int c_neg = (n - v) % n;
            const std::complex<double> f = scratch[static_cast<std::size_t>(r_pos) * n + c_pos];
            const std::complex<double> g =
                std::conj(scratch[static_cast<std::size_t>(r_neg) * n + c_neg]);
            const std::size_t out = static_cast<std::size_t>(u + band) * side + (v + band);
            amp_a[out] = 0.5 * std::abs(f + g);
            amp_b[out] = 0.5 * std::abs(f - g);
        }
    }
    const std::size_t center = static_cast<std::size_t>(band) * side + band;
    amp_a[center] = 0.0;  // drop the DC term
    amp_b[center] = 0.0;
}

}  // namespace detail

/// Fraction of the usable frequency radius sampled by the polar transform.
/// Only this band carries stable orientation signal for rasterized masks:
/// below it sits the crop-window envelope, above it resampling and
/// rasterization noise dominate the spectrum.
inline constexpr double kYawBandLow = 0.05;
inline constexpr double kYawBandHigh = 0.30;

/// Orientation signature of the grid: per channel, the polar-resampled FFT
/// amplitude spectrum summed over radius. n_theta angular bins span [0, 2pi);
/// rows index angle, columns index channel. Translating the content leaves
/// the feature (nearly) unchanged; rotating it shifts the feature circularly
/// along the angular axis.
inline Eigen::MatrixXd yaw_feature(const BevGrid& grid, int n_theta, int n_radius) {
    const int n = detail::next_pow2(std::max(grid.rows(), grid.cols()));
    const FftPlan plan(n);
    const int h = n / 2;
    const double r_lo = kYawBandLow * (h - 1.0);
    const double r_hi = kYawBandHigh * (h - 1.0);
    const int band = std::min(h - 1, static_cast<int>(std::ceil(r_hi)) + 1);
    const int side = 2 * band + 1;

    // Sampling positions relative to the band block, shared by all channels.
    std::vector<double> pos_r(static_cast<std::size_t>(n_theta) * n_radius);
    std::vector<double> pos_c(pos_r.size());
    for (int t = 0; t < n_theta; ++t) {
        const double theta = 2.0 * kPi * t / n_theta;
        const double ct = std::cos(theta), st = std::sin(theta);
        for (int j = 0; j < n_radius; ++j) {
            const double rad = r_lo + (j + 0.5) * (r_hi - r_lo) / n_radius;
            pos_r[static_cast<std::size_t>(t) * n_radius + j] = band + rad * ct;
            pos_c[static_cast<std::size_t>(t) * n_radius + j] = band + rad * st;
        }
    }

    Eigen::MatrixXd feature = Eigen::MatrixXd::Zero(n_theta, grid.channels);
    std::vector<std::complex<double>> scratch;
    std::vector<double> amp_a, amp_b;
    for (int ch = 0; ch < grid.channels; ch += 2) {
        const int ch_b = ch + 1 < grid.channels ? ch + 1 : -1;
        detail::amplitude_band_pair(grid, ch, ch_b, plan, band, scratch, amp_a, amp_b);
        for (int which = 0; which < (ch_b >= 0 ? 2 : 1); ++which) {
            const std::vector<double>& amp = which == 0 ? amp_a : amp_b;
            for (int t = 0; t < n_theta; ++t) {
                double acc = 0.0;
                for (int j = 0; j < n_radius; ++j) {
                    const std::size_t k = static_cast<std::size_t>(t) * n_radius + j;
                    acc += detail::bilinear_at(amp, side, pos_r[k], pos_c[k]);
                }
                feature(t, ch + which) = acc;
            }
        }
    }
    return feature;
}

/// Yaw distribution: for each hypothesis, warp the observation by that yaw,
/// take its yaw feature, and score the MSE against the map feature
/// (normalized by the map feature's energy); softmin turns costs into
/// probabilities. Flat costs (e.g. a blank observation) give the uniform
/// distribution.
inline DofDistribution solve_yaw(const BevGrid& obs, const BevGrid& map,
                                 const HypothesisGrid& hyps, double temperature,
                                 int n_theta = 180, int n_radius = 64,
                                 EvalCost* cost = nullptr) {
    const Eigen::MatrixXd map_feature = yaw_feature(map, n_theta, n_radius);
    const double denom = map_feature.array().square().mean() + 1e-12;
    std::vector<double> mse(hyps.values.size());
    for (std::size_t k = 0; k < hyps.values.size(); ++k) {
        const BevGrid warped =
            warp_by_pose(obs, Se2Pose{0.0, 0.0, hyps.values[k]}, Interp::bilinear);
        const Eigen::MatrixXd f = yaw_feature(warped, n_theta, n_radius);
        mse[k] = (f - map_feature).array().square().mean() / denom;
        if (cost) {
            ++cost->evaluations;
            cost->bytes_per_eval = static_cast<std::int64_t>(warped.data.size() * sizeof(float));
        }
    }
    return DofDistribution{hyps, softmin_scores(mse, temperature)};
}

/// Generalized-mean pooling across the dimension perpendicular to the axis:
/// longitudinal pools each row over the columns (length = rows), lateral
/// pools each column over the rows (length = cols). omega = 1 degenerates to
/// the arithmetic mean; large omega approaches the max.
inline Eigen::MatrixXd axis_feature(const BevGrid& grid, DofAxis axis, double omega) {
    const int rows = grid.rows(), cols = grid.cols(), channels = grid.channels;
    const bool longitudinal = axis == DofAxis::longitudinal;
    const int out_len = longitudinal ? rows : cols;
    const int pool_len = longitudinal ? cols : rows;
    Eigen::MatrixXd feature(out_len, channels);
    const bool mean_only = omega == 1.0;
    const bool cube = omega == 3.0;
    for (int u = 0; u < out_len; ++u) {
        for (int ch = 0; ch < channels; ++ch) {
            double acc = 0.0;
            for (int v = 0; v < pool_len; ++v) {
                const double val = longitudinal ? grid.at(u, v, ch) : grid.at(v, u, ch);
                if (mean_only) {
                    acc += val;
                } else if (cube) {
                    acc += val * val * val;
                } else if (val > 0.0) {
                    acc += std::pow(val, omega);
                }
            }
            acc /= pool_len;
            feature(u, ch) = mean_only ? acc : cube ? std::cbrt(acc) : std::pow(acc, 1.0 / omega);
        }
    }
    return feature;
}

/// One-axis translation distribution: for each hypothesis, shift the
/// yaw-corrected observation along the axis, pool to an axis feature, and
/// score ZNCC against the map's axis feature. Shifts use bilinear resampling
/// since hypothesis steps are generally sub-pixel at solver resolution.
///
/// `base` is an optional rigid correction (the estimated yaw) folded into
/// every candidate so that shift(base-corrected obs) is realized in a single
/// resample; one resample per candidate keeps the interpolation footprint
/// identical across hypotheses. Passing the already-corrected grid with the
/// default base is equivalent up to one extra resample.
inline DofDistribution solve_axis(const BevGrid& obs_rot, const BevGrid& map,
                                  DofAxis axis, const HypothesisGrid& hyps,
                                  double temperature, double omega,
                                  EvalCost* cost = nullptr, const Se2Pose& base = {}) {
    const Eigen::MatrixXd map_feature = axis_feature(map, axis, omega);
    const std::span<const double> map_flat(map_feature.data(),
                                           static_cast<std::size_t>(map_feature.size()));
    std::vector<double> scores(hyps.values.size());
    for (std::size_t i = 0; i < hyps.values.size(); ++i) {
        const Se2Pose shift = axis == DofAxis::longitudinal
                                  ? Se2Pose{hyps.values[i], 0.0, 0.0}
                                  : Se2Pose{0.0, hyps.values[i], 0.0};
        const BevGrid shifted = warp_by_pose(obs_rot, compose(shift, base), Interp::bilinear);
        const Eigen::MatrixXd f = axis_feature(shifted, axis, omega);
        scores[i] = zncc(std::span<const double>(f.data(), static_cast<std::size_t>(f.size())),
                         map_flat);
        if (cost) {
            ++cost->evaluations;
            cost->bytes_per_eval = static_cast<std::int64_t>(shifted.data.size() * sizeof(float));
        }
    }
    return DofDistribution{hyps, softmax_scores(scores, temperature)};
}

/// Decoupled solve: yaw first from amplitude-spectrum features, then
/// longitudinal and lateral independently on the yaw-corrected observation.
/// Scores exactly N_yaw + N_x + N_y hypotheses. The returned delta is the
/// correction aligning obs to map: warp_by_pose(obs, delta) best matches map,
/// and compose(initial_pose, delta) approaches the true pose.
inline PoseEstimate dema_solve(const BevGrid& obs, const BevGrid& map,
                               const DemaConfig& cfg) {
    PoseEstimate est;
    est.dist_yaw = solve_yaw(obs, map, cfg.hyp_yaw, cfg.yaw_temperature, cfg.n_theta,
                             cfg.n_radius, &est.cost);
    const int k_yaw = est.dist_yaw.argmax();
    const Se2Pose yaw_fix{0.0, 0.0, est.dist_yaw.grid.values[k_yaw]};

    est.dist_x = solve_axis(obs, map, DofAxis::longitudinal, cfg.hyp_x,
                            cfg.axis_temperature, cfg.gem_omega, &est.cost, yaw_fix);
    est.dist_y = solve_axis(obs, map, DofAxis::lateral, cfg.hyp_y,
                            cfg.axis_temperature, cfg.gem_omega, &est.cost, yaw_fix);

    const int i_x = est.dist_x.argmax();
    const int j_y = est.dist_y.argmax();
    est.delta =
        Se2Pose{est.dist_x.grid.values[i_x], est.dist_y.grid.values[j_y], yaw_fix.yaw};
    est.conf_x = est.dist_x.probs[i_x];
    est.conf_y = est.dist_y.probs[j_y];
    est.conf_yaw = est.dist_yaw.probs[k_yaw];
    return est;
}

}  // namespace bevmatch
