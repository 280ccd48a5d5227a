#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "bevmatch/geometry.hpp"

namespace bevmatch {

/// Probability over the hypotheses of one DoF; probs align with grid.values,
/// sum to 1.
struct DofDistribution {
    HypothesisGrid grid;
    std::vector<double> probs;

    /// Lowest index wins ties, so results are deterministic.
    int argmax() const {
        int best = 0;
        for (std::size_t i = 1; i < probs.size(); ++i)
            if (probs[i] > probs[best]) best = static_cast<int>(i);
        return best;
    }
};

/// Instrumented solver cost: how many pose hypotheses were scored and how
/// large each transformed grid was.
struct EvalCost {
    std::int64_t evaluations = 0;
    std::int64_t bytes_per_eval = 0;
    double wall_ms = 0.0;
};

struct PoseEstimate {
    Se2Pose delta;
    DofDistribution dist_x;
    DofDistribution dist_y;
    DofDistribution dist_yaw;
    double conf_x = 0.0;
    double conf_y = 0.0;
    double conf_yaw = 0.0;
    EvalCost cost;

    double min_confidence() const { return std::min({conf_x, conf_y, conf_yaw}); }
};

/// softmax(scores / temperature); equal scores yield the uniform
/// distribution (the degenerate low-confidence case).
inline std::vector<double> softmax_scores(std::span<const double> scores,
                                          double temperature) {
    std::vector<double> p(scores.size());
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp((scores[i] - mx) / temperature);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

/// softmin(costs) = softmax(-costs).
inline std::vector<double> softmin_scores(std::span<const double> costs,
                                          double temperature) {
    std::vector<double> neg(costs.size());
    for (std::size_t i = 0; i < costs.size(); ++i) neg[i] = -costs[i];
    return softmax_scores(neg, temperature);
}

/// Zero-mean normalized cross-correlation over flattened features, in
/// [-1, 1]; either side having zero variance scores 0.
inline double zncc(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        dot += da * db;
        na += da * da;
        nb += db * db;
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

}  // namespace bevmatch
