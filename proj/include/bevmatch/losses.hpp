#pragma once

#include <cmath>
#include <stdexcept>

#include "bevmatch/geometry.hpp"
#include "bevmatch/solver_common.hpp"

namespace bevmatch {

struct ProbLossResult {
    double value = 0.0;
    bool clamped = false;  // ground truth fell outside the hypothesis range
};

/// Linear interpolation of the probability vector at the ground-truth value;
/// out-of-range values clamp to the boundary bin.
inline double sample1d(const DofDistribution& dist, double gt_value, bool* clamped) {
    const auto& v = dist.grid.values;
    const int n = static_cast<int>(v.size());
    if (gt_value <= v.front()) {
        if (clamped) *clamped = gt_value < v.front();
        return dist.probs.front();
    }
    if (gt_value >= v.back()) {
        if (clamped) *clamped = gt_value > v.back();
        return dist.probs.back();
    }
    if (clamped) *clamped = false;
    int i = 0;
    while (i + 2 < n && v[i + 1] < gt_value) ++i;
    const double t = (gt_value - v[i]) / (v[i + 1] - v[i]);
    return (1.0 - t) * dist.probs[i] + t * dist.probs[i + 1];
}

/// Negative log of the interpolated probability at the ground-truth value,
/// floored at 1e-8 before the log.
inline ProbLossResult prob_loss(const DofDistribution& dist, double gt_value) {
    ProbLossResult res;
    const double p = sample1d(dist, gt_value, &res.clamped);
    res.value = -std::log(std::max(p, 1e-8));
    return res;
}

inline double smooth_l1(double d, double beta = 1.0) {
    const double a = std::abs(d);
    return a < beta ? 0.5 * d * d : a - 0.5 * beta;
}

/// Smooth-L1 distance summed over (x, y, yaw-in-degrees) so the three
/// components share one numeric scale; transition point beta = 1.
inline double pose_loss(const Se2Pose& est, const Se2Pose& gt) {
    return smooth_l1(est.x - gt.x) + smooth_l1(est.y - gt.y) +
           smooth_l1(rad_to_deg(wrap_angle(est.yaw - gt.yaw)));
}

/// Piecewise-constant weight from the pose/semantic loss ratio r:
/// 10 if r < 0.1, 0.1 if r > 10, otherwise 1 (boundaries fall in the
/// middle branch).
inline double adaptive_weight(double pose_loss_value, double sem_loss_value) {
    if (!(sem_loss_value > 0.0))
        throw std::invalid_argument("adaptive_weight needs sem_loss_value > 0");
    const double r = pose_loss_value / sem_loss_value;
    if (r < 0.1) return 10.0;
    if (r > 10.0) return 0.1;
    return 1.0;
}

/// sem_obs + sem_map + w * pose + 0.1 * (prob_x + prob_y + prob_yaw), with
/// w = adaptive_weight(pose, sem_obs).
inline double total_loss(double sem_obs, double sem_map, double pose_l, double prob_x,
                         double prob_y, double prob_yaw) {
    const double w = adaptive_weight(pose_l, sem_obs);
    return sem_obs + sem_map + w * pose_l + 0.1 * (prob_x + prob_y + prob_yaw);
}

}  // namespace bevmatch
