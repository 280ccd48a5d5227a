#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "bevmatch/geometry.hpp"
#include "bevmatch/vector_map.hpp"

namespace bevmatch {

/// Grid geometry. Pixel (row, col) centers sit at ego coordinates
///   x = x_range - (row + 0.5) * resolution   (forward = up)
///   y = y_range - (col + 0.5) * resolution   (left = image-left)
/// so rows = 2*x_range/resolution and cols = 2*y_range/resolution.
struct BevSpec {
    double x_range = 30.0;      // half extent, longitudinal (m)
    double y_range = 15.0;      // half extent, lateral (m)
    double resolution = 0.15;   // m / pixel
    int line_width = 2;         // raster stroke width, pixels

    int rows() const { return static_cast<int>(std::llround(2.0 * x_range / resolution)); }
    int cols() const { return static_cast<int>(std::llround(2.0 * y_range / resolution)); }

    void validate() const {
        if (!(resolution > 0.0)) throw std::invalid_argument("resolution must be > 0");
        if (line_width < 1) throw std::invalid_argument("line_width must be >= 1");
        const double rx = 2.0 * x_range / resolution;
        const double ry = 2.0 * y_range / resolution;
        if (std::abs(rx - std::round(rx)) > 1e-6 || std::abs(ry - std::round(ry)) > 1e-6)
            throw std::invalid_argument("grid extents must be integer multiples of resolution");
    }

    double x_of_row(double row) const { return x_range - (row + 0.5) * resolution; }
    double y_of_col(double col) const { return y_range - (col + 0.5) * resolution; }
    // Continuous pixel coordinates (row_of_x(x_of_row(r)) == r).
    double row_of_x(double x) const { return (x_range - x) / resolution - 0.5; }
    double col_of_y(double y) const { return (y_range - y) / resolution - 0.5; }
    // Cell containing a point (half-open intervals, no rounding ties).
    int cell_row(double x) const { return static_cast<int>(std::floor((x_range - x) / resolution)); }
    int cell_col(double y) const { return static_cast<int>(std::floor((y_range - y) / resolution)); }
};

/// H x W x C grid of real values, row-major (row, col, channel). Rasterized
/// masks hold one channel per semantic class plus a background channel LAST;
/// background = 1 iff every semantic channel is 0.
struct BevGrid {
    BevSpec spec;
    int channels = 0;
    std::vector<float> data;

    int rows() const { return spec.rows(); }
    int cols() const { return spec.cols(); }

    float& at(int r, int c, int ch) {
        return data[(static_cast<std::size_t>(r) * cols() + c) * channels + ch];
    }
    float at(int r, int c, int ch) const {
        return data[(static_cast<std::size_t>(r) * cols() + c) * channels + ch];
    }
};

/// All-background grid (semantic channels 0, last channel 1).
inline BevGrid make_background_grid(const BevSpec& spec, int channels) {
    spec.validate();
    BevGrid g;
    g.spec = spec;
    g.channels = channels;
    g.data.assign(static_cast<std::size_t>(g.rows()) * g.cols() * channels, 0.0f);
    for (int r = 0; r < g.rows(); ++r)
        for (int c = 0; c < g.cols(); ++c) g.at(r, c, channels - 1) = 1.0f;
    return g;
}

// ---------------------------------------------------------------------------
// Local-map cropping
// ---------------------------------------------------------------------------

namespace detail {

struct ClippedSegment {
    Vec2 a, b;
    bool start_clipped = false;
    bool end_clipped = false;
};

inline int rect_outcode(const Vec2& p, double xr, double yr) {
    int code = 0;
    if (p.x < -xr) code |= 1;
    if (p.x > xr) code |= 2;
    if (p.y < -yr) code |= 4;
    if (p.y > yr) code |= 8;
    return code;
}

/// Cohen-Sutherland segment clipping against |x|<=xr, |y|<=yr. Crossed
/// coordinates are pinned exactly onto the boundary value.
inline std::optional<ClippedSegment> clip_segment(Vec2 a, Vec2 b, double xr, double yr) {
    int ca = rect_outcode(a, xr, yr);
    int cb = rect_outcode(b, xr, yr);
    bool clipped_a = false, clipped_b = false;
    while (true) {
        if ((ca | cb) == 0) return ClippedSegment{a, b, clipped_a, clipped_b};
        if ((ca & cb) != 0) return std::nullopt;
        const bool move_a = ca != 0;
        const int code = move_a ? ca : cb;
        Vec2 p;
        if (code & 1) {
            p = Vec2{-xr, a.y + (b.y - a.y) * (-xr - a.x) / (b.x - a.x)};
        } else if (code & 2) {
            p = Vec2{xr, a.y + (b.y - a.y) * (xr - a.x) / (b.x - a.x)};
        } else if (code & 4) {
            p = Vec2{a.x + (b.x - a.x) * (-yr - a.y) / (b.y - a.y), -yr};
        } else {
            p = Vec2{a.x + (b.x - a.x) * (yr - a.y) / (b.y - a.y), yr};
        }
        if (move_a) {
            a = p;
            ca = rect_outcode(a, xr, yr);
            clipped_a = true;
        } else {
            b = p;
            cb = rect_outcode(b, xr, yr);
            clipped_b = true;
        }
    }
}

}  // namespace detail

/// Transforms map elements into the frame anchored at pose, then clips each
/// polyline to the spec's range rectangle. Polylines leaving and re-entering
/// the rectangle split into separate pieces; every piece keeps the source
/// element's id and class. Elements wholly outside are dropped.
inline VectorMap crop_local_map(const VectorMap& map, const Se2Pose& pose,
                                const BevSpec& spec) {
    spec.validate();
    const double xr = spec.x_range;
    const double yr = spec.y_range;
    VectorMap out;
    out.frame_tag = "ego";
    for (const MapElement& e : map.elements) {
        const std::vector<Vec2> local =
            transform_points(e.points, pose, TransformDirection::into_local);
        MapElement piece;
        piece.id = e.id;
        piece.cls = e.cls;
        auto flush = [&]() {
            if (piece.points.size() >= 2) out.elements.push_back(piece);
            piece.points.clear();
        };
        auto append = [&](const Vec2& p) {
            if (!piece.points.empty()) {
                const Vec2& back = piece.points.back();
                if (std::hypot(p.x - back.x, p.y - back.y) <= 1e-6) return;
            }
            piece.points.push_back(p);
        };
        for (std::size_t k = 0; k + 1 < local.size(); ++k) {
            const auto seg = detail::clip_segment(local[k], local[k + 1], xr, yr);
            if (!seg) {
                flush();
                continue;
            }
            if (seg->start_clipped) flush();
            append(seg->a);
            append(seg->b);
            if (seg->end_clipped) flush();
        }
        flush();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rasterization
// ---------------------------------------------------------------------------

namespace detail {

inline void plot(std::vector<std::uint8_t>& plane, int rows, int cols, int r, int c) {
    if (r >= 0 && r < rows && c >= 0 && c < cols)
        plane[static_cast<std::size_t>(r) * cols + c] = 1;
}

inline void draw_line(std::vector<std::uint8_t>& plane, int rows, int cols, int r0,
                      int c0, int r1, int c1) {
    const int dr = std::abs(r1 - r0), dc = std::abs(c1 - c0);
    const int sr = r0 < r1 ? 1 : -1, sc = c0 < c1 ? 1 : -1;
    int err = (dr > dc ? dr : -dc) / 2;
    while (true) {
        plot(plane, rows, cols, r0, c0);
        if (r0 == r1 && c0 == c1) break;
        const int e = err;
        if (e > -dr) {
            err -= dc;
            r0 += sr;
        }
        if (e < dc) {
            err += dr;
            c0 += sc;
        }
    }
}

/// Dilates a 1-px stroke to width w (square element, biased down-right for
/// even widths so w = 2 yields exactly two pixels across).
inline std::vector<std::uint8_t> thicken(const std::vector<std::uint8_t>& plane,
                                         int rows, int cols, int w) {
    if (w <= 1) return plane;
    const int lo = -((w - 1) / 2);
    const int hi = w / 2;
    std::vector<std::uint8_t> out(plane.size(), 0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (!plane[static_cast<std::size_t>(r) * cols + c]) continue;
            for (int dr = lo; dr <= hi; ++dr)
                for (int dc = lo; dc <= hi; ++dc) plot(out, rows, cols, r + dr, c + dc);
        }
    return out;
}

}  // namespace detail

/// Draws each polyline into its class channel (Bresenham center line, then
/// thickening to spec.line_width). Channels are multi-hot across classes;
/// the background channel is 1 exactly where no semantic channel is set.
inline BevGrid rasterize(const VectorMap& local_map, const BevSpec& spec) {
    spec.validate();
    const int rows = spec.rows(), cols = spec.cols();
    BevGrid grid = make_background_grid(spec, kNumElementClasses + 1);
    for (int cls = 0; cls < kNumElementClasses; ++cls) {
        std::vector<std::uint8_t> plane(static_cast<std::size_t>(rows) * cols, 0);
        bool any = false;
        for (const MapElement& e : local_map.elements) {
            if (static_cast<int>(e.cls) != cls) continue;
            any = true;
            for (std::size_t k = 0; k + 1 < e.points.size(); ++k) {
                detail::draw_line(plane, rows, cols, spec.cell_row(e.points[k].x),
                                  spec.cell_col(e.points[k].y),
                                  spec.cell_row(e.points[k + 1].x),
                                  spec.cell_col(e.points[k + 1].y));
            }
        }
        if (!any) continue;
        plane = detail::thicken(plane, rows, cols, spec.line_width);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                if (plane[static_cast<std::size_t>(r) * cols + c]) {
                    grid.at(r, c, cls) = 1.0f;
                    grid.at(r, c, kNumElementClasses) = 0.0f;
                }
    }
    return grid;
}

/// Average-pools each channel by an integer factor; output values stay in
/// the input's value range.
inline BevGrid downsample(const BevGrid& grid, int factor) {
    if (factor < 1) throw std::invalid_argument("downsample factor must be >= 1");
    if (factor == 1) return grid;
    const int rows = grid.rows(), cols = grid.cols();
    if (rows % factor != 0 || cols % factor != 0)
        throw std::invalid_argument("grid dims not divisible by downsample factor");
    BevGrid out;
    out.spec = grid.spec;
    out.spec.resolution *= factor;
    out.channels = grid.channels;
    out.data.assign(static_cast<std::size_t>(rows / factor) * (cols / factor) * grid.channels,
                    0.0f);
    const double inv = 1.0 / (factor * factor);
    for (int r = 0; r < rows / factor; ++r)
        for (int c = 0; c < cols / factor; ++c)
            for (int ch = 0; ch < grid.channels; ++ch) {
                double acc = 0.0;
                for (int i = 0; i < factor; ++i)
                    for (int j = 0; j < factor; ++j)
                        acc += grid.at(r * factor + i, c * factor + j, ch);
                out.at(r, c, ch) = static_cast<float>(acc * inv);
            }
    return out;
}

// ---------------------------------------------------------------------------
// BEVG binary format: magic "BEVG", u16 version = 1, then little-endian
// u32 H, u32 W, u32 C, f32 resolution_m, f32 x_range_m, f32 y_range_m,
// then H*W*C f32 values in row-major (row, col, channel) order.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f32(std::string& s, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(s, bits);
}
inline std::uint16_t get_u16(const std::string& s, std::size_t off) {
    return static_cast<std::uint16_t>(static_cast<unsigned char>(s[off]) |
                                      (static_cast<unsigned char>(s[off + 1]) << 8));
}
inline std::uint32_t get_u32(const std::string& s, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[off + i]);
    return v;
}
inline float get_f32(const std::string& s, std::size_t off) {
    const std::uint32_t bits = get_u32(s, off);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace detail

inline constexpr std::size_t kBevgHeaderBytes = 4 + 2 + 3 * 4 + 3 * 4;

inline std::string grid_serialize(const BevGrid& grid) {
    std::string s;
    s.reserve(kBevgHeaderBytes + grid.data.size() * 4);
    s += "BEVG";
    detail::put_u16(s, 1);
    detail::put_u32(s, static_cast<std::uint32_t>(grid.rows()));
    detail::put_u32(s, static_cast<std::uint32_t>(grid.cols()));
    detail::put_u32(s, static_cast<std::uint32_t>(grid.channels));
    detail::put_f32(s, static_cast<float>(grid.spec.resolution));
    detail::put_f32(s, static_cast<float>(grid.spec.x_range));
    detail::put_f32(s, static_cast<float>(grid.spec.y_range));
    for (float v : grid.data) detail::put_f32(s, v);
    return s;
}

inline BevGrid grid_deserialize(const std::string& s, const std::string& origin) {
    if (s.size() < kBevgHeaderBytes)
        throw std::runtime_error(origin + ": truncated BEVG header: got " +
                                 std::to_string(s.size()) + " bytes, need " +
                                 std::to_string(kBevgHeaderBytes));
    if (s.compare(0, 4, "BEVG") != 0)
        throw std::runtime_error(origin + ": bad magic at offset 0 (expected \"BEVG\")");
    const std::uint16_t version = detail::get_u16(s, 4);
    if (version != 1)
        throw std::runtime_error(origin + ": unsupported BEVG version " +
                                 std::to_string(version) + " at offset 4");
    const std::uint32_t rows = detail::get_u32(s, 6);
    const std::uint32_t cols = detail::get_u32(s, 10);
    const std::uint32_t channels = detail::get_u32(s, 14);
    BevGrid g;
    g.spec.resolution = detail::get_f32(s, 18);
    const double xr = detail::get_f32(s, 22);
    const double yr = detail::get_f32(s, 26);
    g.spec.line_width = 1;
    g.channels = static_cast<int>(channels);
    const std::size_t count = static_cast<std::size_t>(rows) * cols * channels;
    const std::size_t need = kBevgHeaderBytes + count * 4;
    if (s.size() != need)
        throw std::runtime_error(origin + ": payload length mismatch at offset " +
                                 std::to_string(kBevgHeaderBytes) + ": got " +
                                 std::to_string(s.size()) + " bytes, need " +
                                 std::to_string(need));
    if (!(g.spec.resolution > 0.0) ||
        std::abs(2.0 * xr / g.spec.resolution - rows) > 0.01 ||
        std::abs(2.0 * yr / g.spec.resolution - cols) > 0.01)
        throw std::runtime_error(origin + ": header dims do not match ranges/resolution");
    // Ranges are stored as f32; rebuild them from the exact dims so the
    // integer-extent invariant holds in double precision.
    g.spec.x_range = rows * g.spec.resolution / 2.0;
    g.spec.y_range = cols * g.spec.resolution / 2.0;
    g.spec.validate();
    g.data.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        g.data[i] = detail::get_f32(s, kBevgHeaderBytes + i * 4);
    return g;
}

inline void grid_write(const BevGrid& grid, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write grid file: " + path);
    const std::string s = grid_serialize(grid);
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline BevGrid grid_read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open grid file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return grid_deserialize(ss.str(), path);
}

}  // namespace bevmatch
