#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "bevmatch/geometry.hpp"

namespace bevmatch {

enum class MapElementClass { lane_divider = 0, pedestrian_crossing = 1, road_boundary = 2 };

inline constexpr int kNumElementClasses = 3;

inline const char* element_class_name(MapElementClass c) {
    switch (c) {
        case MapElementClass::lane_divider: return "lane_divider";
        case MapElementClass::pedestrian_crossing: return "pedestrian_crossing";
        default: return "road_boundary";
    }
}

inline MapElementClass element_class_from_name(const std::string& s) {
    if (s == "lane_divider") return MapElementClass::lane_divider;
    if (s == "pedestrian_crossing") return MapElementClass::pedestrian_crossing;
    if (s == "road_boundary") return MapElementClass::road_boundary;
    throw std::invalid_argument("unknown map element class: " + s);
}

/// A typed polyline: >= 2 points, consecutive points distinct (1e-6 m).
struct MapElement {
    std::uint64_t id = 0;
    MapElementClass cls = MapElementClass::lane_divider;
    std::vector<Vec2> points;
};

struct VectorMap {
    std::vector<MapElement> elements;
    std::string frame_tag;
};

inline void validate_element(const MapElement& e) {
    if (e.points.size() < 2)
        throw std::invalid_argument("map element " + std::to_string(e.id) +
                                    " has fewer than 2 points");
    for (std::size_t k = 1; k < e.points.size(); ++k) {
        const double dx = e.points[k].x - e.points[k - 1].x;
        const double dy = e.points[k].y - e.points[k - 1].y;
        if (std::hypot(dx, dy) <= 1e-6)
            throw std::invalid_argument("map element " + std::to_string(e.id) +
                                        " has duplicate consecutive points at index " +
                                        std::to_string(k));
    }
}

/// Enforces per-element invariants plus id uniqueness across the map.
inline void validate_map(const VectorMap& m) {
    std::unordered_set<std::uint64_t> seen;
    for (const MapElement& e : m.elements) {
        validate_element(e);
        if (!seen.insert(e.id).second)
            throw std::invalid_argument("duplicate map element id " + std::to_string(e.id));
    }
}

// ---------------------------------------------------------------------------
// JSON schema:
//   { "frame": string,
//     "elements": [ { "id": uint, "class": "...", "points": [[x,y],...] } ] }
// Coordinates are meters in a planar frame. save_map rounds coordinates to
// 9 significant digits so written files are canonical and diff-stable.
// ---------------------------------------------------------------------------

inline VectorMap parse_map_json(const std::string& text, const std::string& origin) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(origin + ": JSON parse error: " + e.what());
    }
    VectorMap m;
    try {
        m.frame_tag = j.value("frame", "");
        if (!j.contains("elements") || !j["elements"].is_array())
            throw std::runtime_error("missing \"elements\" array");
        for (const auto& je : j["elements"]) {
            MapElement e;
            if (!je.contains("id")) throw std::runtime_error("element missing \"id\"");
            e.id = je["id"].get<std::uint64_t>();
            if (!je.contains("class"))
                throw std::runtime_error("element " + std::to_string(e.id) +
                                         " missing \"class\"");
            e.cls = element_class_from_name(je["class"].get<std::string>());
            if (!je.contains("points") || !je["points"].is_array())
                throw std::runtime_error("element " + std::to_string(e.id) +
                                         " missing \"points\" array");
            for (const auto& jp : je["points"]) {
                if (!jp.is_array() || jp.size() != 2)
                    throw std::runtime_error("element " + std::to_string(e.id) +
                                             " has a point that is not [x, y]");
                e.points.push_back(Vec2{jp[0].get<double>(), jp[1].get<double>()});
            }
            m.elements.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(origin + ": malformed map field: " + e.what());
    }
    validate_map(m);
    return m;
}

inline VectorMap load_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open map file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_map_json(ss.str(), path);
}

/// Rounds through a 9-significant-digit decimal representation.
inline double canonical_coord(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::strtod(buf, nullptr);
}

inline std::string map_to_json(const VectorMap& m) {
    nlohmann::ordered_json j;
    j["frame"] = m.frame_tag;
    j["elements"] = nlohmann::ordered_json::array();
    for (const MapElement& e : m.elements) {
        nlohmann::ordered_json je;
        je["id"] = e.id;
        je["class"] = element_class_name(e.cls);
        auto pts = nlohmann::ordered_json::array();
        for (const Vec2& p : e.points)
            pts.push_back({canonical_coord(p.x), canonical_coord(p.y)});
        je["points"] = std::move(pts);
        j["elements"].push_back(std::move(je));
    }
    return j.dump(2) + "\n";
}

inline void save_map(const VectorMap& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write map file: " + path);
    out << map_to_json(m);
}

// ---------------------------------------------------------------------------
// Fourier position encoding and fixed-size element embeddings.
// ---------------------------------------------------------------------------

/// Row k encodes points[k] as [sin(2pi f_b x), cos(2pi f_b x)] for b = 0..B-1,
/// then the same for y; f_b = base_scale * 2^b. Output is len x 4B, all
/// entries in [-1, 1].
inline std::vector<std::vector<double>> fourier_encode(std::span<const Vec2> points,
                                                       int bands, double base_scale) {
    if (bands < 1) throw std::invalid_argument("fourier_encode needs bands >= 1");
    std::vector<double> freq(bands);
    for (int b = 0; b < bands; ++b)
        freq[b] = base_scale * std::ldexp(1.0, b);  // base_scale * 2^b
    std::vector<std::vector<double>> out(points.size(),
                                         std::vector<double>(4 * bands, 0.0));
    for (std::size_t k = 0; k < points.size(); ++k) {
        double* row = out[k].data();
        for (int b = 0; b < bands; ++b) {
            const double px = 2.0 * kPi * freq[b] * points[k].x;
            row[2 * b] = std::sin(px);
            row[2 * b + 1] = std::cos(px);
        }
        for (int b = 0; b < bands; ++b) {
            const double py = 2.0 * kPi * freq[b] * points[k].y;
            row[2 * bands + 2 * b] = std::sin(py);
            row[2 * bands + 2 * b + 1] = std::cos(py);
        }
    }
    return out;
}

/// Fixed-size per-element embedding: n_points rows of width dim; rows past
/// valid_count are exactly zero.
struct ElementEmbedding {
    int n_points = 0;
    int dim = 0;
    int valid_count = 0;
    std::vector<double> data;  // n_points x dim, row-major

    double at(int row, int col) const { return data[static_cast<std::size_t>(row) * dim + col]; }
};

/// Uniform arc-length resampling to n samples (keeps both endpoints).
inline std::vector<Vec2> resample_polyline(const std::vector<Vec2>& pts, int n) {
    if (n < 2) throw std::invalid_argument("resample_polyline needs n >= 2");
    std::vector<double> cum(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i)
        cum[i] = cum[i - 1] + std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
    const double total = cum.back();
    std::vector<Vec2> out(n);
    std::size_t seg = 0;
    for (int k = 0; k < n; ++k) {
        const double t = total * static_cast<double>(k) / static_cast<double>(n - 1);
        while (seg + 2 < pts.size() && cum[seg + 1] < t) ++seg;
        const double len = cum[seg + 1] - cum[seg];
        const double u = len > 0.0 ? (t - cum[seg]) / len : 0.0;
        out[k] = Vec2{pts[seg].x + u * (pts[seg + 1].x - pts[seg].x),
                      pts[seg].y + u * (pts[seg + 1].y - pts[seg].y)};
    }
    return out;
}

struct EmbeddingConfig {
    int bands = 8;                 // Fourier bands B
    double base_scale = 1.0 / 60.0;  // one period spans the longitudinal extent
};

/// Concatenates per point: Fourier(position), Fourier(direction), one-hot
/// class code, sinusoidal element-index code, to width exactly dim.
/// Elements longer than n_points are arc-length resampled; shorter ones are
/// zero-padded. The last point reuses the previous direction.
inline ElementEmbedding build_element_embedding(const MapElement& element, int n_points,
                                                int dim, int element_index = 0,
                                                const EmbeddingConfig& cfg = {}) {
    validate_element(element);
    if (n_points < 2) throw std::invalid_argument("embedding n_points must be >= 2");
    const int fourier_width = 4 * cfg.bands;
    const int natural = 2 * fourier_width + kNumElementClasses;
    if (dim < natural + 1)
        throw std::invalid_argument("embedding dim " + std::to_string(dim) +
                                    " smaller than concatenated width " +
                                    std::to_string(natural + 1));
    const int ins_width = dim - natural;

    std::vector<Vec2> pts = element.points;
    if (static_cast<int>(pts.size()) > n_points) pts = resample_polyline(pts, n_points);
    const int valid = static_cast<int>(pts.size());

    std::vector<Vec2> dirs(valid);
    for (int k = 0; k + 1 < valid; ++k)
        dirs[k] = Vec2{pts[k + 1].x - pts[k].x, pts[k + 1].y - pts[k].y};
    dirs[valid - 1] = dirs[valid - 2];

    const auto pos_enc = fourier_encode(pts, cfg.bands, cfg.base_scale);
    const auto dir_enc = fourier_encode(dirs, cfg.bands, cfg.base_scale);

    ElementEmbedding emb;
    emb.n_points = n_points;
    emb.dim = dim;
    emb.valid_count = valid;
    emb.data.assign(static_cast<std::size_t>(n_points) * dim, 0.0);
    for (int k = 0; k < valid; ++k) {
        double* row = emb.data.data() + static_cast<std::size_t>(k) * dim;
        int off = 0;
        for (int c = 0; c < fourier_width; ++c) row[off++] = pos_enc[k][c];
        for (int c = 0; c < fourier_width; ++c) row[off++] = dir_enc[k][c];
        row[off + static_cast<int>(element.cls)] = 1.0;
        off += kNumElementClasses;
        for (int c = 0; c < ins_width; ++c) {
            const double expo = static_cast<double>(c - (c % 2)) / ins_width;
            const double arg = element_index / std::pow(10000.0, expo);
            row[off + c] = (c % 2 == 0) ? std::sin(arg) : std::cos(arg);
        }
    }
    return emb;
}

}  // namespace bevmatch
