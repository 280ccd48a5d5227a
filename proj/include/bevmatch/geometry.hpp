#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bevmatch {

inline constexpr double kPi = 3.14159265358979323846;

/// Normalizes an angle to (-pi, pi].
inline double wrap_angle(double a) {
    double w = std::fmod(a + kPi, 2.0 * kPi);
    if (w <= 0.0) w += 2.0 * kPi;
    return w - kPi;
}

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

/// Planar rigid motion: longitudinal x, lateral y (meters), yaw (radians,
/// counterclockwise, normalized to (-pi, pi]). Ego convention: +x forward,
/// +y left.
struct Se2Pose {
    double x = 0.0;
    double y = 0.0;
    double yaw = 0.0;
};

inline Se2Pose make_pose(double x, double y, double yaw) {
    return Se2Pose{x, y, wrap_angle(yaw)};
}

/// base then delta-in-base-frame: x' = x0 + dx cos a0 - dy sin a0, etc.
inline Se2Pose compose(const Se2Pose& base, const Se2Pose& delta) {
    const double c = std::cos(base.yaw);
    const double s = std::sin(base.yaw);
    return Se2Pose{base.x + delta.x * c - delta.y * s,
                   base.y + delta.x * s + delta.y * c,
                   wrap_angle(base.yaw + delta.yaw)};
}

inline Se2Pose inverse(const Se2Pose& p) {
    const double c = std::cos(p.yaw);
    const double s = std::sin(p.yaw);
    return Se2Pose{-(c * p.x + s * p.y), -(-s * p.x + c * p.y),
                   wrap_angle(-p.yaw)};
}

enum class TransformDirection { into_local, into_global };

/// Maps a single point between the global frame and the frame anchored at
/// pose. into_local: q' = R(-yaw)(q - t). into_global is the inverse.
inline Vec2 transform_point(const Vec2& q, const Se2Pose& pose,
                            TransformDirection dir) {
    const double c = std::cos(pose.yaw);
    const double s = std::sin(pose.yaw);
    if (dir == TransformDirection::into_local) {
        const double dx = q.x - pose.x;
        const double dy = q.y - pose.y;
        return Vec2{c * dx + s * dy, -s * dx + c * dy};
    }
    return Vec2{pose.x + c * q.x - s * q.y, pose.y + s * q.x + c * q.y};
}

inline std::vector<Vec2> transform_points(std::span<const Vec2> points,
                                          const Se2Pose& pose,
                                          TransformDirection dir) {
    std::vector<Vec2> out;
    out.reserve(points.size());
    for (const Vec2& q : points) out.push_back(transform_point(q, pose, dir));
    return out;
}

enum class DofAxis { longitudinal, lateral, yaw };

inline const char* dof_axis_name(DofAxis a) {
    switch (a) {
        case DofAxis::longitudinal: return "longitudinal";
        case DofAxis::lateral: return "lateral";
        default: return "yaw";
    }
}

/// Uniformly spaced candidate offsets for one DoF, centered on zero and
/// symmetric: values[i] == -values[n-1-i].
struct HypothesisGrid {
    DofAxis axis = DofAxis::longitudinal;
    double center = 0.0;
    double half_range = 0.0;
    double step = 1.0;
    std::vector<double> values;

    int size() const { return static_cast<int>(values.size()); }

    /// Index of the grid value nearest to v (ties to the lower index).
    int nearest_index(double v) const {
        int best = 0;
        double best_d = std::abs(values[0] - v);
        for (int i = 1; i < size(); ++i) {
            const double d = std::abs(values[i] - v);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }

    double snap(double v) const { return values[nearest_index(v)]; }
};

/// Builds the centered grid {-half_range, ..., 0, ..., +half_range}.
/// half_range must be an integer multiple of step; rejected otherwise
/// rather than silently rounded.
inline HypothesisGrid sample_hypotheses(DofAxis axis, double half_range,
                                        double step) {
    if (!(step > 0.0)) throw std::invalid_argument("hypothesis step must be > 0");
    if (half_range < 0.0)
        throw std::invalid_argument("hypothesis half_range must be >= 0");
    const double ratio = half_range / step;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
        throw std::invalid_argument(
            "hypothesis half_range (" + std::to_string(half_range) +
            ") is not an integer multiple of step (" + std::to_string(step) + ")");
    }
    const int n = static_cast<int>(rounded);
    HypothesisGrid g;
    g.axis = axis;
    g.center = 0.0;
    g.half_range = half_range;
    g.step = step;
    g.values.resize(2 * n + 1);
    for (int i = 0; i <= 2 * n; ++i) g.values[i] = static_cast<double>(i - n) * step;
    return g;
}

}  // namespace bevmatch
