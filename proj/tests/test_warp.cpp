#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "bevmatch/warp.hpp"

using namespace bevmatch;

namespace {

std::mt19937_64 test_rng(4242);
double uniform(double a, double b) {
    return a + (b - a) * static_cast<double>(test_rng() >> 11) * 0x1.0p-53;
}

BevSpec square_spec(int n) {
    BevSpec s;
    s.resolution = 0.15;
    s.x_range = n * 0.15 / 2.0;
    s.y_range = n * 0.15 / 2.0;
    return s;
}

BevGrid random_mask(const BevSpec& spec, int channels, double density = 0.1) {
    BevGrid g = make_background_grid(spec, channels);
    for (int r = 0; r < g.rows(); ++r)
        for (int c = 0; c < g.cols(); ++c)
            for (int ch = 0; ch + 1 < channels; ++ch)
                if (uniform(0, 1) < density) {
                    g.at(r, c, ch) = 1.0f;
                    g.at(r, c, channels - 1) = 0.0f;
                }
    return g;
}

}  // namespace

TEST_CASE("warp_by_pose: identity with nearest is bit-identical") {
    const BevGrid g = random_mask(square_spec(32), 4);
    const BevGrid w = warp_by_pose(g, Se2Pose{}, Interp::nearest);
    CHECK(w.data == g.data);
}

TEST_CASE("warp_by_pose: whole-pixel forward translation shifts rows") {
    const BevSpec spec = square_spec(32);
    const BevGrid g = random_mask(spec, 4);
    const int k = 3;
    const BevGrid w = warp_by_pose(g, Se2Pose{k * spec.resolution, 0, 0}, Interp::nearest);
    for (int r = 0; r < g.rows(); ++r)
        for (int c = 0; c < g.cols(); ++c)
            for (int ch = 0; ch < 4; ++ch) {
                const float want =
                    r + k < g.rows() ? g.at(r + k, c, ch) : (ch == 3 ? 1.0f : 0.0f);
                CHECK(w.at(r, c, ch) == want);
            }
}

TEST_CASE("warp_by_pose: quarter-turn yaw equals array rotation on a square grid") {
    const int n = 48;
    const BevGrid g = random_mask(square_spec(n), 4);
    const BevGrid w = warp_by_pose(g, Se2Pose{0, 0, kPi / 2}, Interp::nearest);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            for (int ch = 0; ch < 4; ++ch) CHECK(w.at(r, c, ch) == g.at(c, n - 1 - r, ch));
}

TEST_CASE("warp_by_pose: out-of-bounds fill is semantic 0 / background 1") {
    const BevSpec spec = square_spec(16);
    BevGrid g = make_background_grid(spec, 4);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) {
            g.at(r, c, 0) = 1.0f;
            g.at(r, c, 3) = 0.0f;
        }
    const BevGrid w = warp_by_pose(g, Se2Pose{8 * spec.resolution, 0, 0}, Interp::nearest);
    for (int r = 8; r < 16; ++r) {
        CHECK(w.at(r, 0, 0) == 0.0f);
        CHECK(w.at(r, 0, 3) == 1.0f);
    }
}

TEST_CASE("warp composition matches compose-in-grid-order for aligned shifts") {
    const BevSpec spec = square_spec(40);
    const BevGrid g = random_mask(spec, 4);
    const Se2Pose a{2 * spec.resolution, 0, 0};
    const Se2Pose b{0, -3 * spec.resolution, 0};
    const BevGrid two_step = warp_by_pose(warp_by_pose(g, a, Interp::nearest), b, Interp::nearest);
    const BevGrid one_step = warp_by_pose(g, compose(b, a), Interp::nearest);
    CHECK(two_step.data == one_step.data);
}

TEST_CASE("warp_by_flow: zero flow and constant column shift") {
    const BevGrid g = random_mask(square_spec(24), 4);
    FlowField zero;
    zero.rows = g.rows();
    zero.cols = g.cols();
    zero.data.assign(static_cast<std::size_t>(zero.rows) * zero.cols * 2, 0.0);
    CHECK(warp_by_flow(g, zero, Interp::nearest).data == g.data);

    FlowField shift = zero;
    for (int r = 0; r < shift.rows; ++r)
        for (int c = 0; c < shift.cols; ++c) shift.at(r, c, 1) = 1.0;
    const BevGrid w = warp_by_flow(g, shift, Interp::nearest);
    for (int r = 0; r < g.rows(); ++r)
        for (int c = 0; c + 1 < g.cols(); ++c)
            for (int ch = 0; ch < 4; ++ch) CHECK(w.at(r, c, ch) == g.at(r, c + 1, ch));

    FlowField bad;
    bad.rows = 3;
    bad.cols = 3;
    bad.data.assign(18, 0.0);
    CHECK_THROWS_AS(warp_by_flow(g, bad, Interp::nearest), std::invalid_argument);
}

TEST_CASE("pose_to_flow: identity, pure translation, pure yaw") {
    const BevSpec spec = square_spec(32);
    const FlowField zero = pose_to_flow(spec, Se2Pose{});
    for (double v : zero.data) CHECK(std::abs(v) < 1e-12);

    const double d = 0.9;  // 6 pixels
    const FlowField tx = pose_to_flow(spec, Se2Pose{d, 0, 0});
    for (int r = 0; r < tx.rows; ++r)
        for (int c = 0; c < tx.cols; ++c) {
            CHECK(tx.at(r, c, 0) == Catch::Approx(d / spec.resolution).margin(1e-9));
            CHECK(tx.at(r, c, 1) == Catch::Approx(0.0).margin(1e-9));
        }

    const double yaw = deg_to_rad(5.0);
    const FlowField rot = pose_to_flow(spec, Se2Pose{0, 0, yaw});
    for (int r = 0; r < rot.rows; r += 7)
        for (int c = 0; c < rot.cols; c += 5) {
            const double qx = spec.x_of_row(r);
            const double qy = spec.y_of_col(c);
            const double radius = std::hypot(qx, qy);
            const double mag =
                std::hypot(rot.at(r, c, 0), rot.at(r, c, 1)) * spec.resolution;
            CHECK(mag == Catch::Approx(2.0 * radius * std::sin(yaw / 2.0)).margin(1e-9));
        }
}

TEST_CASE("warp_by_flow(pose_to_flow(delta)) reproduces warp_by_pose") {
    const BevSpec spec = square_spec(32);
    const BevGrid g = random_mask(spec, 4);

    // integer-pixel translation, nearest: exact
    const Se2Pose shift{2 * spec.resolution, -4 * spec.resolution, 0};
    CHECK(warp_by_flow(g, pose_to_flow(spec, shift), Interp::nearest).data ==
          warp_by_pose(g, shift, Interp::nearest).data);

    // general delta, bilinear: within 1e-6
    const Se2Pose delta{0.37, -0.21, deg_to_rad(3.3)};
    const BevGrid via_flow = warp_by_flow(g, pose_to_flow(spec, delta), Interp::bilinear);
    const BevGrid via_pose = warp_by_pose(g, delta, Interp::bilinear);
    for (std::size_t i = 0; i < via_flow.data.size(); ++i)
        CHECK(std::abs(via_flow.data[i] - via_pose.data[i]) < 1e-6);
}

namespace {

Eigen::MatrixXd random_feature(long n, int dim) {
    Eigen::MatrixXd f(n, dim);
    for (long i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) f(i, j) = uniform(-1, 1);
    return f;
}

}  // namespace

TEST_CASE("low_rank_project: fixed points of the basis span") {
    const long n = 200;
    const int dim = 32, rank = 8;
    // channels constant within each group equal the group mean, so the
    // feature already lies in the basis span
    Eigen::MatrixXd bases = random_feature(n, rank);
    Eigen::MatrixXd f(n, dim);
    for (int ch = 0; ch < dim; ++ch) f.col(ch) = bases.col(ch / (dim / rank));
    const Eigen::MatrixXd out = low_rank_project_flat(f, rank);
    CHECK((out - f).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("low_rank_project: idempotent") {
    const Eigen::MatrixXd f = random_feature(150, 24);
    const Eigen::MatrixXd once = low_rank_project_flat(f, 6);
    const Eigen::MatrixXd twice = low_rank_project_flat(once, 6);
    CHECK((twice - once).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("low_rank_project: output rank bounded by K (SVD oracle)") {
    const int rank = 16;
    const Eigen::MatrixXd f = random_feature(320, 64);
    const Eigen::MatrixXd out = low_rank_project_flat(f, rank);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(out);
    const auto& sv = svd.singularValues();
    for (int i = rank; i < sv.size(); ++i) CHECK(sv(i) <= 1e-6 * sv(0));
}

TEST_CASE("low_rank_project: homogeneous scaling and norm contraction") {
    const Eigen::MatrixXd f = random_feature(100, 16);
    const Eigen::MatrixXd once = low_rank_project_flat(f, 4);
    const Eigen::MatrixXd scaled = low_rank_project_flat(3.5 * f, 4);
    CHECK((scaled - 3.5 * once).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(once.norm() <= f.norm() * (1.0 + 1e-9));
}

TEST_CASE("low_rank_project: rank bounds are enforced, grid wrapper works") {
    const Eigen::MatrixXd f = random_feature(50, 8);
    CHECK_THROWS_AS(low_rank_project_flat(f, 0), std::invalid_argument);
    CHECK_THROWS_AS(low_rank_project_flat(f, 9), std::invalid_argument);

    BevSpec spec = square_spec(16);
    BevGrid g = make_background_grid(spec, 8);
    for (float& v : g.data) v = static_cast<float>(uniform(-1, 1));
    const BevGrid out = low_rank_project(g, 4);
    CHECK(out.channels == 8);
    const BevGrid again = low_rank_project(out, 4);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        CHECK(std::abs(out.data[i] - again.data[i]) < 1e-5);
}

TEST_CASE("low_rank_project: all-zero feature stays zero") {
    const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(64, 8);
    const Eigen::MatrixXd out = low_rank_project_flat(z, 4);
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}
