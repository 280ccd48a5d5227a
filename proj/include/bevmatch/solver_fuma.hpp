#pragma once

#include <cmath>
#include <vector>

#include "bevmatch/bev_grid.hpp"
#include "bevmatch/geometry.hpp"
#include "bevmatch/solver_common.hpp"
#include "bevmatch/warp.hpp"

namespace bevmatch {

/// Joint probability over the full hypothesis cube, flat index
/// (i * N_y + j) * N_yaw + k for (x_i, y_j, yaw_k).
struct JointDistribution {
    HypothesisGrid grid_x;
    HypothesisGrid grid_y;
    HypothesisGrid grid_yaw;
    std::vector<double> probs;

    std::size_t flat(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * grid_y.values.size() + j) *
                   grid_yaw.values.size() +
               k;
    }
};

/// Sums the joint over the other two axes.
inline DofDistribution marginalize(const JointDistribution& joint, DofAxis axis) {
    const int nx = joint.grid_x.size();
    const int ny = joint.grid_y.size();
    const int nyaw = joint.grid_yaw.size();
    DofDistribution out;
    switch (axis) {
        case DofAxis::longitudinal: out.grid = joint.grid_x; break;
        case DofAxis::lateral: out.grid = joint.grid_y; break;
        case DofAxis::yaw: out.grid = joint.grid_yaw; break;
    }
    out.probs.assign(out.grid.values.size(), 0.0);
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
            for (int k = 0; k < nyaw; ++k) {
                const double p = joint.probs[joint.flat(i, j, k)];
                switch (axis) {
                    case DofAxis::longitudinal: out.probs[i] += p; break;
                    case DofAxis::lateral: out.probs[j] += p; break;
                    case DofAxis::yaw: out.probs[k] += p; break;
                }
            }
    return out;
}

/// Exhaustive joint solve: warps the observation by every (x, y, yaw) triple
/// and scores whole-grid ZNCC against the map; softmax over all
/// N_x * N_y * N_yaw scores gives the joint, marginals give the per-DoF
/// distributions, and the joint argmax is the reported triple.
inline PoseEstimate fuma_solve(const BevGrid& obs, const BevGrid& map,
                               const HypothesisGrid& hyp_x, const HypothesisGrid& hyp_y,
                               const HypothesisGrid& hyp_yaw, double temperature) {
    const std::size_t n = map.data.size();

    // Map side of the ZNCC is fixed: precompute (map - mean) once. With m
    // the per-candidate mean, sum((w - m) .* md) == sum(w .* md) because md
    // sums to zero, so each candidate needs a single fused pass.
    double map_mean = 0.0;
    for (float v : map.data) map_mean += v;
    map_mean /= static_cast<double>(n);
    std::vector<double> map_dev(n);
    double map_norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        map_dev[i] = map.data[i] - map_mean;
        map_norm2 += map_dev[i] * map_dev[i];
    }

    JointDistribution joint;
    joint.grid_x = hyp_x;
    joint.grid_y = hyp_y;
    joint.grid_yaw = hyp_yaw;
    const int nx = hyp_x.size(), ny = hyp_y.size(), nyaw = hyp_yaw.size();
    std::vector<double> scores(static_cast<std::size_t>(nx) * ny * nyaw);

    PoseEstimate est;
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
            for (int k = 0; k < nyaw; ++k) {
                const BevGrid warped = warp_by_pose(
                    obs, Se2Pose{hyp_x.values[i], hyp_y.values[j], hyp_yaw.values[k]},
                    Interp::bilinear);
                double sum = 0.0, sum2 = 0.0, dot = 0.0;
                for (std::size_t t = 0; t < n; ++t) {
                    const double w = warped.data[t];
                    sum += w;
                    sum2 += w * w;
                    dot += w * map_dev[t];
                }
                const double var = sum2 - sum * sum / static_cast<double>(n);
                const double denom = var * map_norm2;
                scores[joint.flat(i, j, k)] = denom > 0.0 ? dot / std::sqrt(denom) : 0.0;
                ++est.cost.evaluations;
                est.cost.bytes_per_eval =
                    static_cast<std::int64_t>(warped.data.size() * sizeof(float));
            }

    joint.probs = softmax_scores(scores, temperature);

    std::size_t best = 0;
    for (std::size_t t = 1; t < joint.probs.size(); ++t)
        if (joint.probs[t] > joint.probs[best]) best = t;
    const int bi = static_cast<int>(best / (static_cast<std::size_t>(ny) * nyaw));
    const int bj = static_cast<int>(best / nyaw % ny);
    const int bk = static_cast<int>(best % nyaw);

    est.dist_x = marginalize(joint, DofAxis::longitudinal);
    est.dist_y = marginalize(joint, DofAxis::lateral);
    est.dist_yaw = marginalize(joint, DofAxis::yaw);
    est.delta = Se2Pose{hyp_x.values[bi], hyp_y.values[bj], hyp_yaw.values[bk]};
    est.conf_x = est.dist_x.probs[bi];
    est.conf_y = est.dist_y.probs[bj];
    est.conf_yaw = est.dist_yaw.probs[bk];
    return est;
}

}  // namespace bevmatch
