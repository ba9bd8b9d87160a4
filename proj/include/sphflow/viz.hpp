#pragma once

// Flow visualisation: colour-coded top views and Euler streamlines.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "sphflow/core.hpp"
#include "sphflow/mesh.hpp"
#include "sphflow/parallel.hpp"
#include "sphflow/spectral.hpp"

namespace sphflow {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 8-bit RGB raster, row-major, top row first.
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    RasterImage() = default;
    RasterImage(int w, int h, Rgb fill = {}) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3)
    {
        if (w < 1 || h < 1) throw InputError("image dimensions must be >= 1");
        for (std::size_t i = 0; i < pixels.size(); i += 3) {
            pixels[i] = fill.r;
            pixels[i + 1] = fill.g;
            pixels[i + 2] = fill.b;
        }
    }

    Rgb at(int x, int y) const
    {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        return {pixels[i], pixels[i + 1], pixels[i + 2]};
    }

    void set(int x, int y, Rgb c)
    {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        pixels[i] = c.r;
        pixels[i + 1] = c.g;
        pixels[i + 2] = c.b;
    }
};

/// Length-preserving projection onto the xy-plane. Vectors (nearly) parallel
/// to e_z map to zero and set `degenerate`.
inline Vec3 project_for_display(const Vec3& v, bool* degenerate = nullptr)
{
    const double len = v.norm();
    const Vec3 planar(v.x(), v.y(), 0.0);
    const double plen = planar.norm();
    if (degenerate) *degenerate = false;
    if (len == 0.0) return Vec3::Zero();
    if (plen < 1e-14 * len) {
        if (degenerate) *degenerate = true;
        return Vec3::Zero();
    }
    return planar * (len / plen);
}

/// The standard 55-bin optical flow colour wheel.
class ColorWheel {
public:
    static constexpr int kRY = 15, kYG = 6, kGC = 4, kCB = 11, kBM = 13, kMR = 6;
    static constexpr int kBins = kRY + kYG + kGC + kCB + kBM + kMR;

    ColorWheel()
    {
        int k = 0;
        for (int i = 0; i < kRY; ++i) wheel_[k++] = {255, std::floor(255.0 * i / kRY), 0};
        for (int i = 0; i < kYG; ++i) wheel_[k++] = {255 - std::floor(255.0 * i / kYG), 255, 0};
        for (int i = 0; i < kGC; ++i) wheel_[k++] = {0, 255, std::floor(255.0 * i / kGC)};
        for (int i = 0; i < kCB; ++i) wheel_[k++] = {0, 255 - std::floor(255.0 * i / kCB), 255};
        for (int i = 0; i < kBM; ++i) wheel_[k++] = {std::floor(255.0 * i / kBM), 0, 255};
        for (int i = 0; i < kMR; ++i) wheel_[k++] = {255, 0, 255 - std::floor(255.0 * i / kMR)};
    }

    const std::array<double, 3>& bin(int k) const { return wheel_[static_cast<std::size_t>(k)]; }

    /// Colour of planar vector (fx, fy) with saturation `rad` in [0, 1].
    Rgb color(double fx, double fy, double rad) const
    {
        rad = std::clamp(rad, 0.0, 1.0);
        const double a = std::atan2(-fy, -fx) / kPi;
        const double fk = (a + 1.0) / 2.0 * (kBins - 1);
        const int k0 = static_cast<int>(fk);
        const int k1 = (k0 + 1) % kBins;
        const double f = fk - k0;
        std::array<std::uint8_t, 3> out{};
        for (int c = 0; c < 3; ++c) {
            const double col = (1.0 - f) * wheel_[static_cast<std::size_t>(k0)][c] / 255.0 +
                               f * wheel_[static_cast<std::size_t>(k1)][c] / 255.0;
            out[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(255.0 * (1.0 - rad * (1.0 - col)));
        }
        return {out[0], out[1], out[2]};
    }

private:
    std::array<std::array<double, 3>, kBins> wheel_{};
};

/// Sphere point seen at pixel (x, y) of a top-view orthographic image, or
/// nothing off the unit disk.
inline std::optional<Vec3> top_view_point(int x, int y, int width, int height)
{
    const double px = 2.0 * (x + 0.5) / width - 1.0;
    const double py = 1.0 - 2.0 * (y + 0.5) / height;
    const double r2 = px * px + py * py;
    if (r2 > 1.0) return std::nullopt;
    return Vec3(px, py, std::sqrt(1.0 - r2));
}

/// Pixel of a sphere point in the top view.
inline std::array<int, 2> top_view_pixel(const Vec3& p, int width, int height)
{
    const int x = static_cast<int>(std::floor((p.x() + 1.0) * 0.5 * width));
    const int y = static_cast<int>(std::floor((1.0 - p.y()) * 0.5 * height));
    return {std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1)};
}

struct ColorizeResult {
    RasterImage image;
    std::size_t degenerate_pixels = 0;
};

/// Top view of the northern hemisphere, colour-coded with disk radius R.
inline ColorizeResult colorize(const TriMesh& mesh, const TriField& field, double radius, int width, int height)
{
    if (!(radius > 0.0) || !std::isfinite(radius)) throw InputError("colour disk radius must be positive");
    if (field.vectors.size() != mesh.faces.size()) throw InputError("field does not match mesh");
    ColorizeResult out{RasterImage(width, height), 0};
    const ColorWheel wheel;
    const PointLocator locator(mesh);
    std::vector<char> degenerate(static_cast<std::size_t>(width) * height, 0);
    parallel::for_each_index(0, static_cast<std::size_t>(height), 4, [&](std::size_t yy) {
        const int y = static_cast<int>(yy);
        for (int x = 0; x < width; ++x) {
            const auto p = top_view_point(x, y, width, height);
            if (!p) continue;
            const auto f = locator.find(*p);
            if (!f) continue;
            bool deg = false;
            const Vec3 d = project_for_display(field.vectors[*f], &deg);
            degenerate[yy * width + x] = deg;
            out.image.set(x, y, wheel.color(d.x(), d.y(), d.norm() / radius));
        }
    });
    for (char c : degenerate) out.degenerate_pixels += c;
    return out;
}

/// Largest vector length of a field.
inline double max_length(const TriField& field)
{
    double m = 0.0;
    for (const auto& v : field.vectors) m = std::max(m, v.norm());
    return m;
}

struct Streamline {
    Vec3 seed = Vec3::UnitZ();
    std::vector<Vec3> points;
    bool truncated = false;  // left the mesh coverage before tau steps
};

struct StreamlineOptions {
    int tau = 50;
    std::optional<double> h;  // default 1 / (10 max|v|)
};

/// Automatic Euler step 1 / (10 max|v|).
inline double auto_step(const TriField& field)
{
    const double m = max_length(field);
    if (!(m > 0.0)) throw InputError("h undefined: the field vanishes everywhere");
    return 1.0 / (10.0 * m);
}

/// Default seeds: level-4 icosphere vertices inside the mesh coverage.
inline std::vector<Vec3> default_seeds(const TriMesh& mesh)
{
    const PointLocator locator(mesh);
    std::vector<Vec3> seeds;
    for (const auto& v : build_icosphere(4).vertices) {
        if (locator.find(v)) seeds.push_back(v);
    }
    return seeds;
}

/// Explicit Euler with re-projection onto the unit sphere after each step.
inline std::vector<Streamline> trace_streamlines(const TriMesh& mesh, const TriField& field,
                                                 const std::vector<Vec3>& seeds, const StreamlineOptions& opt = {})
{
    if (opt.tau < 1) throw InputError("streamline length tau must be >= 1");
    if (field.vectors.size() != mesh.faces.size()) throw InputError("field does not match mesh");
    const double h = opt.h ? *opt.h : auto_step(field);
    if (!std::isfinite(h)) throw InputError("streamline step must be finite");
    const PointLocator locator(mesh);
    std::vector<Streamline> lines(seeds.size());
    parallel::for_each_index(0, seeds.size(), 16, [&](std::size_t s) {
        Streamline& line = lines[s];
        line.seed = seeds[s].normalized();
        line.points.reserve(static_cast<std::size_t>(opt.tau) + 1);
        Vec3 x = line.seed;
        line.points.push_back(x);
        for (int t = 0; t < opt.tau; ++t) {
            const auto f = locator.find(x);
            if (!f) {
                line.truncated = true;
                break;
            }
            x = (x + h * field.vectors[*f]).normalized();
            line.points.push_back(x);
        }
    });
    return lines;
}

inline constexpr Rgb kStreamlineStart{255, 255, 0};
inline constexpr Rgb kStreamlineEnd{0, 128, 0};

/// Colour of step t out of tau on the yellow-to-green ramp.
inline Rgb streamline_color(int t, int tau)
{
    const double s = tau > 0 ? std::clamp(static_cast<double>(t) / tau, 0.0, 1.0) : 0.0;
    auto mix = [s](std::uint8_t a, std::uint8_t b) {
        return static_cast<std::uint8_t>(std::lround((1.0 - s) * a + s * b));
    };
    return {mix(kStreamlineStart.r, kStreamlineEnd.r), mix(kStreamlineStart.g, kStreamlineEnd.g),
            mix(kStreamlineStart.b, kStreamlineEnd.b)};
}

/// Top-view polylines on black, no antialiasing. Points on the southern
/// hemisphere are not drawn.
inline RasterImage render_streamlines(const std::vector<Streamline>& lines, int width, int height, int tau = 50)
{
    if (lines.empty()) throw InputError("no streamlines to render");
    RasterImage img(width, height);
    for (const auto& line : lines) {
        for (std::size_t k = 0; k < line.points.size(); ++k) {
            const Vec3& a = line.points[k];
            if (a.z() < 0.0) continue;
            const Rgb c = streamline_color(static_cast<int>(k), tau);
            auto [x0, y0] = top_view_pixel(a, width, height);
            if (k + 1 >= line.points.size() || line.points[k + 1].z() < 0.0) {
                img.set(x0, y0, c);
                continue;
            }
            const auto [x1, y1] = top_view_pixel(line.points[k + 1], width, height);
            // Bresenham
            const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
            const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
            int err = dx + dy;
            while (true) {
                img.set(x0, y0, c);
                if (x0 == x1 && y0 == y1) break;
                const int e2 = 2 * err;
                if (e2 >= dy) {
                    err += dy;
                    x0 += sx;
                }
                if (e2 <= dx) {
                    err += dx;
                    y0 += sy;
                }
            }
        }
    }
    return img;
}

}  // namespace sphflow
