#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "bevmatch/vector_map.hpp"

using namespace bevmatch;

namespace {

std::mt19937_64 test_rng(777);
double uniform(double a, double b) {
    return a + (b - a) * static_cast<double>(test_rng() >> 11) * 0x1.0p-53;
}

double point_to_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

double point_to_polyline(const Vec2& p, const std::vector<Vec2>& poly) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < poly.size(); ++i)
        best = std::min(best, point_to_segment(p, poly[i], poly[i + 1]));
    return best;
}

}  // namespace

TEST_CASE("parse_map_json: minimal one-element file") {
    const std::string text = R"({
      "frame": "global",
      "elements": [
        { "id": 0, "class": "lane_divider", "points": [[0.0, 0.0], [10.0, 0.0]] }
      ]
    })";
    const VectorMap m = parse_map_json(text, "<test>");
    REQUIRE(m.elements.size() == 1);
    CHECK(m.frame_tag == "global");
    CHECK(m.elements[0].cls == MapElementClass::lane_divider);
    CHECK(m.elements[0].points.size() == 2);
}

TEST_CASE("parse_map_json: rejections carry diagnostics") {
    CHECK_THROWS_WITH(parse_map_json("{ not json", "<t>"),
                      Catch::Matchers::ContainsSubstring("parse error"));

    const std::string dup = R"({"frame":"g","elements":[
      {"id": 42, "class": "lane_divider", "points": [[0,0],[1,0]]},
      {"id": 42, "class": "road_boundary", "points": [[0,1],[1,1]]}]})";
    CHECK_THROWS_WITH(parse_map_json(dup, "<t>"),
                      Catch::Matchers::ContainsSubstring("42"));

    const std::string short_pts =
        R"({"frame":"g","elements":[{"id": 9, "class": "lane_divider", "points": [[0,0]]}]})";
    CHECK_THROWS_WITH(parse_map_json(short_pts, "<t>"),
                      Catch::Matchers::ContainsSubstring("9"));

    const std::string dup_pts = R"({"frame":"g","elements":[
      {"id": 5, "class": "lane_divider", "points": [[0,0],[0,0],[1,0]]}]})";
    CHECK_THROWS_WITH(parse_map_json(dup_pts, "<t>"),
                      Catch::Matchers::ContainsSubstring("5"));

    const std::string bad_class = R"({"frame":"g","elements":[
      {"id": 1, "class": "traffic_light", "points": [[0,0],[1,0]]}]})";
    CHECK_THROWS_WITH(parse_map_json(bad_class, "<t>"),
                      Catch::Matchers::ContainsSubstring("traffic_light"));
}

TEST_CASE("map JSON round-trips byte-equivalently after canonicalization") {
    VectorMap m;
    m.frame_tag = "global";
    for (int i = 0; i < 10; ++i) {
        MapElement e;
        e.id = static_cast<std::uint64_t>(i);
        e.cls = static_cast<MapElementClass>(i % 3);
        for (int k = 0; k < 4; ++k)
            e.points.push_back(Vec2{uniform(-100, 100), uniform(-50, 50)});
        m.elements.push_back(e);
    }
    const std::string s1 = map_to_json(m);
    const VectorMap m2 = parse_map_json(s1, "<t>");
    const std::string s2 = map_to_json(m2);
    CHECK(s1 == s2);
}

TEST_CASE("fourier_encode: zero input alternates sin 0 / cos 1") {
    const std::vector<Vec2> p{{0, 0}};
    const auto enc = fourier_encode(p, 4, 1.0 / 60.0);
    REQUIRE(enc.size() == 1);
    REQUIRE(enc[0].size() == 16);
    for (std::size_t i = 0; i < enc[0].size(); i += 2) {
        CHECK(enc[0][i] == 0.0);
        CHECK(enc[0][i + 1] == 1.0);
    }
}

TEST_CASE("fourier_encode: every entry within [-1, 1]") {
    std::vector<Vec2> pts;
    for (int i = 0; i < 50; ++i) pts.push_back(Vec2{uniform(-1e3, 1e3), uniform(-1e3, 1e3)});
    const auto enc = fourier_encode(pts, 8, 1.0 / 60.0);
    for (const auto& row : enc)
        for (double v : row) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
}

TEST_CASE("fourier_encode: single band scalar evaluation") {
    const double s = 0.05;
    const double u = 0.25 / (2.0 * s);  // phase 2*pi*s*u = pi/4
    const auto enc = fourier_encode(std::vector<Vec2>{{u, 0.0}}, 1, s);
    REQUIRE(enc[0].size() == 4);
    CHECK(enc[0][0] == Catch::Approx(std::sin(kPi / 4)));
    CHECK(enc[0][1] == Catch::Approx(std::cos(kPi / 4)));
    CHECK(enc[0][2] == 0.0);
    CHECK(enc[0][3] == 1.0);
}

TEST_CASE("fourier_encode is translation-covariant per the angle identity") {
    const int bands = 6;
    const double scale = 1.0 / 60.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Vec2 u{uniform(-100, 100), uniform(-100, 100)};
        const Vec2 d{uniform(-10, 10), uniform(-10, 10)};
        const auto base = fourier_encode(std::vector<Vec2>{u}, bands, scale);
        const auto moved =
            fourier_encode(std::vector<Vec2>{{u.x + d.x, u.y + d.y}}, bands, scale);
        for (int b = 0; b < bands; ++b) {
            const double f = scale * std::ldexp(1.0, b);
            const double px = 2 * kPi * f * d.x;
            const double py = 2 * kPi * f * d.y;
            const double sin_x = base[0][2 * b] * std::cos(px) + base[0][2 * b + 1] * std::sin(px);
            const double cos_x = base[0][2 * b + 1] * std::cos(px) - base[0][2 * b] * std::sin(px);
            CHECK(moved[0][2 * b] == Catch::Approx(sin_x).margin(1e-9));
            CHECK(moved[0][2 * b + 1] == Catch::Approx(cos_x).margin(1e-9));
            const int off = 2 * bands;
            const double sin_y =
                base[0][off + 2 * b] * std::cos(py) + base[0][off + 2 * b + 1] * std::sin(py);
            CHECK(moved[0][off + 2 * b] == Catch::Approx(sin_y).margin(1e-9));
        }
    }
}

TEST_CASE("resample_polyline keeps points on the source polyline") {
    std::vector<Vec2> poly{{0, 0}};
    for (int i = 1; i < 40; ++i)
        poly.push_back(Vec2{poly.back().x + uniform(0.5, 2.0), uniform(-3, 3)});
    const auto res = resample_polyline(poly, 20);
    REQUIRE(res.size() == 20);
    CHECK(res.front().x == poly.front().x);
    CHECK(res.back().x == Catch::Approx(poly.back().x));
    for (const Vec2& p : res) CHECK(point_to_polyline(p, poly) < 1e-9);
}

TEST_CASE("build_element_embedding: zero padding past valid_count") {
    MapElement e{0, MapElementClass::lane_divider, {Vec2{0, 0}, Vec2{5, 1}}};
    const ElementEmbedding emb = build_element_embedding(e, 10, 128);
    CHECK(emb.valid_count == 2);
    CHECK(emb.dim == 128);
    for (int r = 2; r < 10; ++r)
        for (int c = 0; c < emb.dim; ++c) CHECK(emb.at(r, c) == 0.0);
    double norm = 0.0;
    for (int c = 0; c < emb.dim; ++c) norm += std::abs(emb.at(0, c));
    CHECK(norm > 0.0);
}

TEST_CASE("build_element_embedding: straight line has identical direction blocks") {
    MapElement e;
    e.id = 1;
    e.cls = MapElementClass::road_boundary;
    for (int i = 0; i < 6; ++i) e.points.push_back(Vec2{2.0 * i, 3.0 * i});
    const EmbeddingConfig cfg;
    const ElementEmbedding emb = build_element_embedding(e, 6, 128, 0, cfg);
    const int dir_off = 4 * cfg.bands;
    for (int r = 1; r < emb.valid_count; ++r)
        for (int c = 0; c < 4 * cfg.bands; ++c)
            CHECK(emb.at(r, dir_off + c) == Catch::Approx(emb.at(0, dir_off + c)).margin(1e-12));
}

TEST_CASE("build_element_embedding: long elements resample to n_points") {
    MapElement e;
    e.id = 2;
    e.cls = MapElementClass::lane_divider;
    for (int i = 0; i < 40; ++i) e.points.push_back(Vec2{1.5 * i, std::sin(0.2 * i)});
    const ElementEmbedding emb = build_element_embedding(e, 20, 128);
    CHECK(emb.valid_count == 20);
    CHECK(emb.n_points == 20);
}

TEST_CASE("build_element_embedding: class one-hot and width checks") {
    MapElement e{3, MapElementClass::pedestrian_crossing, {Vec2{0, 0}, Vec2{1, 1}}};
    const EmbeddingConfig cfg;
    const ElementEmbedding emb = build_element_embedding(e, 4, 128, 5, cfg);
    const int sem_off = 8 * cfg.bands;
    CHECK(emb.at(0, sem_off + 0) == 0.0);
    CHECK(emb.at(0, sem_off + 1) == 1.0);
    CHECK(emb.at(0, sem_off + 2) == 0.0);

    CHECK_THROWS_AS(build_element_embedding(e, 4, 8 * cfg.bands + 3), std::invalid_argument);
}
