#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bevmatch/bev_grid.hpp"
#include "bevmatch/geometry.hpp"

namespace bevmatch {

enum class Interp { nearest, bilinear };

/// Per-pixel displacement in pixels (d_row, d_col), same spatial dims as the
/// grid it warps.
struct FlowField {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // rows x cols x 2, row-major

    double& at(int r, int c, int ch) {
        return data[(static_cast<std::size_t>(r) * cols + c) * 2 + ch];
    }
    double at(int r, int c, int ch) const {
        return data[(static_cast<std::size_t>(r) * cols + c) * 2 + ch];
    }
};

namespace detail {

/// Out-of-bounds samples read as 0 in all channels except the last
/// (background), which reads as 1. Keeps mask invariants intact under
/// warping.
inline float oob_fill(int ch, int channels) { return ch == channels - 1 ? 1.0f : 0.0f; }

inline void sample_into(const BevGrid& in, double rf, double cf, Interp interp,
                        float* out_px) {
    const int rows = in.rows(), cols = in.cols(), channels = in.channels;
    if (interp == Interp::nearest) {
        const long r = std::llround(rf);
        const long c = std::llround(cf);
        if (r < 0 || r >= rows || c < 0 || c >= cols) {
            for (int ch = 0; ch < channels; ++ch) out_px[ch] = oob_fill(ch, channels);
        } else {
            const float* src = in.data.data() +
                               (static_cast<std::size_t>(r) * cols + c) * channels;
            for (int ch = 0; ch < channels; ++ch) out_px[ch] = src[ch];
        }
        return;
    }
    const double fr = std::floor(rf);
    const double fc = std::floor(cf);
    const int r0 = static_cast<int>(fr), c0 = static_cast<int>(fc);
    const double wr = rf - fr, wc = cf - fc;
    const double w00 = (1.0 - wr) * (1.0 - wc);
    const double w01 = (1.0 - wr) * wc;
    const double w10 = wr * (1.0 - wc);
    const double w11 = wr * wc;
    auto value = [&](int r, int c, int ch) -> double {
        if (r < 0 || r >= rows || c < 0 || c >= cols) return oob_fill(ch, channels);
        return in.at(r, c, ch);
    };
    for (int ch = 0; ch < channels; ++ch) {
        out_px[ch] = static_cast<float>(w00 * value(r0, c0, ch) + w01 * value(r0, c0 + 1, ch) +
                                        w10 * value(r0 + 1, c0, ch) + w11 * value(r0 + 1, c0 + 1, ch));
    }
}

}  // namespace detail

/// Resamples the grid under a rigid offset: each output pixel takes the input
/// value at delta^-1 applied to its ego coordinates (the into_local transform
/// by delta). Consequently warp_by_pose(warp_by_pose(g, a), b) equals
/// warp_by_pose(g, compose(b, a)) up to interpolation.
///
/// Source coordinates are affine in the column index, so the inner loop uses
/// base + c * slope with a branch-free gather when the whole bilinear stencil
/// is in bounds.
inline BevGrid warp_by_pose(const BevGrid& grid, const Se2Pose& delta, Interp interp) {
    const int rows = grid.rows(), cols = grid.cols(), channels = grid.channels;
    BevGrid out;
    out.spec = grid.spec;
    out.channels = channels;
    out.data.resize(grid.data.size());
    const BevSpec& sp = grid.spec;
    const double c = std::cos(delta.yaw);
    const double s = std::sin(delta.yaw);
    const float* in = grid.data.data();
    for (int r = 0; r < rows; ++r) {
        const double qx = sp.x_of_row(r);
        const double dx = qx - delta.x;
        const double dy0 = sp.y_of_col(0) - delta.y;
        const double row_base = sp.row_of_x(c * dx + s * dy0);
        const double col_base = sp.col_of_y(-s * dx + c * dy0);
        float* out_px = out.data.data() + static_cast<std::size_t>(r) * cols * channels;
        for (int cidx = 0; cidx < cols; ++cidx, out_px += channels) {
            const double rf = row_base + s * cidx;
            const double cf = col_base + c * cidx;
            if (interp == Interp::nearest) {
                const long rr = std::llround(rf);
                const long cc = std::llround(cf);
                if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) {
                    for (int ch = 0; ch < channels; ++ch)
                        out_px[ch] = detail::oob_fill(ch, channels);
                } else {
                    const float* src = in + (static_cast<std::size_t>(rr) * cols + cc) * channels;
                    for (int ch = 0; ch < channels; ++ch) out_px[ch] = src[ch];
                }
                continue;
            }
            const double fr = std::floor(rf);
            const double fc = std::floor(cf);
            const int r0 = static_cast<int>(fr), c0 = static_cast<int>(fc);
            if (r0 >= 0 && r0 + 1 < rows && c0 >= 0 && c0 + 1 < cols) {
                const double wr = rf - fr, wc = cf - fc;
                const double w00 = (1.0 - wr) * (1.0 - wc);
                const double w01 = (1.0 - wr) * wc;
                const double w10 = wr * (1.0 - wc);
                const double w11 = wr * wc;
                const float* p00 = in + (static_cast<std::size_t>(r0) * cols + c0) * channels;
                const float* p10 = p00 + static_cast<std::size_t>(cols) * channels;
                for (int ch = 0; ch < channels; ++ch)
                    out_px[ch] = static_cast<float>(w00 * p00[ch] + w01 * p00[channels + ch] +
                                                    w10 * p10[ch] + w11 * p10[channels + ch]);
            } else {
                detail::sample_into(grid, rf, cf, Interp::bilinear, out_px);
            }
        }
    }
    return out;
}

/// Backward warping: output(p) = input(p + flow(p)).
inline BevGrid warp_by_flow(const BevGrid& grid, const FlowField& flow, Interp interp) {
    const int rows = grid.rows(), cols = grid.cols();
    if (flow.rows != rows || flow.cols != cols)
        throw std::invalid_argument("flow field dims do not match grid");
    BevGrid out;
    out.spec = grid.spec;
    out.channels = grid.channels;
    out.data.resize(grid.data.size());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            detail::sample_into(grid, r + flow.at(r, c, 0), c + flow.at(r, c, 1), interp,
                                out.data.data() +
                                    (static_cast<std::size_t>(r) * cols + c) * grid.channels);
        }
    return out;
}

/// The exact pixel-displacement field under which warp_by_flow reproduces
/// warp_by_pose(delta).
inline FlowField pose_to_flow(const BevSpec& spec, const Se2Pose& delta) {
    spec.validate();
    const int rows = spec.rows(), cols = spec.cols();
    FlowField f;
    f.rows = rows;
    f.cols = cols;
    f.data.resize(static_cast<std::size_t>(rows) * cols * 2);
    const double c = std::cos(delta.yaw);
    const double s = std::sin(delta.yaw);
    for (int r = 0; r < rows; ++r) {
        const double qx = spec.x_of_row(r);
        for (int cidx = 0; cidx < cols; ++cidx) {
            const double qy = spec.y_of_col(cidx);
            const double dx = qx - delta.x;
            const double dy = qy - delta.y;
            const double sx = c * dx + s * dy;
            const double sy = -s * dx + c * dy;
            f.at(r, cidx, 0) = spec.row_of_x(sx) - r;
            f.at(r, cidx, 1) = spec.col_of_y(sy) - cidx;
        }
    }
    return f;
}

/// Projects a flattened (H*W) x D feature onto the span of K basis vectors
/// obtained by channel compression (contiguous channel groups, group means).
/// Implements F_low = V (V^T V)^+ V^T F; the normalization uses a
/// pseudo-inverse with singular-value cutoff 1e-10 * sigma_max since the
/// bases are not guaranteed orthogonal.
inline Eigen::MatrixXd low_rank_project_flat(const Eigen::MatrixXd& feature, int rank) {
    const long n = feature.rows();
    const int dim = static_cast<int>(feature.cols());
    if (rank < 1 || rank > std::min<long>(dim, n))
        throw std::invalid_argument("low_rank_project rank out of range");

    Eigen::MatrixXd V(n, rank);
    const int base = dim / rank;
    const int extra = dim % rank;
    int ch0 = 0;
    for (int g = 0; g < rank; ++g) {
        const int len = base + (g < extra ? 1 : 0);
        V.col(g) = feature.middleCols(ch0, len).rowwise().mean();
        ch0 += len;
    }

    const Eigen::MatrixXd G = V.transpose() * V;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const Eigen::VectorXd& lam = es.eigenvalues();
    const double cutoff = 1e-10 * lam.maxCoeff();
    Eigen::VectorXd inv_lam = Eigen::VectorXd::Zero(rank);
    for (int i = 0; i < rank; ++i)
        if (lam(i) > cutoff && lam(i) > 0.0) inv_lam(i) = 1.0 / lam(i);
    const Eigen::MatrixXd G_pinv =
        es.eigenvectors() * inv_lam.asDiagonal() * es.eigenvectors().transpose();

    return V * (G_pinv * (V.transpose() * feature));
}

inline BevGrid low_rank_project(const BevGrid& feature, int rank) {
    const long n = static_cast<long>(feature.rows()) * feature.cols();
    const int dim = feature.channels;
    Eigen::MatrixXd F(n, dim);
    for (long i = 0; i < n; ++i)
        for (int ch = 0; ch < dim; ++ch)
            F(i, ch) = feature.data[static_cast<std::size_t>(i) * dim + ch];
    const Eigen::MatrixXd projected = low_rank_project_flat(F, rank);
    BevGrid out;
    out.spec = feature.spec;
    out.channels = dim;
    out.data.resize(feature.data.size());
    for (long i = 0; i < n; ++i)
        for (int ch = 0; ch < dim; ++ch)
            out.data[static_cast<std::size_t>(i) * dim + ch] =
                static_cast<float>(projected(i, ch));
    return out;
}

}  // namespace bevmatch
