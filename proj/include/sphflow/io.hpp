#pragma once

// Text and binary file formats. Every writer emits doubles with 17
// significant digits so readers recover the exact values.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sphflow/core.hpp"
#include "sphflow/fields.hpp"
#include "sphflow/harmonics.hpp"
#include "sphflow/mesh.hpp"
#include "sphflow/spectral.hpp"
#include "sphflow/viz.hpp"

namespace sphflow::io {

namespace detail {

inline std::ifstream open_in(const std::string& path, bool binary = false)
{
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw InputError("cannot open " + path);
    return in;
}

inline std::ofstream open_out(const std::string& path, bool binary = false)
{
    std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw InputError("cannot write " + path);
    return out;
}

inline void finish(std::ofstream& out, const std::string& path)
{
    out.flush();
    if (!out) throw InputError("write failed: " + path);
}

/// Line reader tracking line numbers for error messages.
class Lines {
public:
    Lines(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

    bool next(std::string& line)
    {
        while (std::getline(in_, line)) {
            ++number_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") != std::string::npos) return true;
        }
        return false;
    }

    std::string require()
    {
        std::string line;
        if (!next(line)) fail("unexpected end of file");
        return line;
    }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw InputError(path_ + ":" + std::to_string(number_) + ": " + what);
    }

    std::vector<std::string> fields(const std::string& line, char sep = ' ') const
    {
        std::vector<std::string> out;
        if (sep == ' ') {
            std::istringstream ss(line);
            std::string tok;
            while (ss >> tok) out.push_back(tok);
        } else {
            std::size_t start = 0;
            while (true) {
                const auto pos = line.find(sep, start);
                out.push_back(line.substr(start, pos - start));
                if (pos == std::string::npos) break;
                start = pos + 1;
            }
        }
        return out;
    }

    double number(const std::string& s) const
    {
        double v = 0.0;
        if (!parse_double(s, v) || !std::isfinite(v)) fail("invalid number '" + s + "'");
        return v;
    }

    template <typename Int>
    Int integer(const std::string& s) const
    {
        Int v{};
        if (!parse_int(s, v)) fail("invalid integer '" + s + "'");
        return v;
    }

    Vec3 vec3(const std::string& line, char sep = ' ') const
    {
        const auto f = fields(line, sep);
        if (f.size() != 3) fail("expected 3 coordinates");
        return {number(f[0]), number(f[1]), number(f[2])};
    }

    void expect_end()
    {
        std::string extra;
        if (next(extra)) fail("unexpected trailing content");
    }

private:
    std::istream& in_;
    std::string path_;
    std::size_t number_ = 0;
};

inline std::string vec_text(const Vec3& v, char sep = ' ')
{
    return format_double17(v.x()) + sep + format_double17(v.y()) + sep + format_double17(v.z());
}

}  // namespace detail

inline constexpr const char* kFormatVersion = "spheremesh 1, spherefield 1, spheretrifield 1, voxelgrid 1, coeffs csv 1";

// --- mesh -------------------------------------------------------------------

inline void write_mesh(const std::string& path, const TriMesh& mesh)
{
    auto out = detail::open_out(path);
    out << "spheremesh 1\n" << mesh.vertices.size() << ' ' << mesh.faces.size() << ' ' << mesh.level << '\n';
    for (const auto& v : mesh.vertices) out << detail::vec_text(v) << '\n';
    for (const auto& f : mesh.faces) out << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    detail::finish(out, path);
}

inline TriMesh read_mesh(const std::string& path)
{
    auto in = detail::open_in(path);
    detail::Lines lines(in, path);
    if (lines.require() != "spheremesh 1") lines.fail("expected header 'spheremesh 1'");
    const auto counts = lines.fields(lines.require());
    if (counts.size() != 3) lines.fail("expected '<V> <F> <level>'");
    const auto nv = lines.integer<std::size_t>(counts[0]);
    const auto nf = lines.integer<std::size_t>(counts[1]);
    TriMesh mesh;
    mesh.level = lines.integer<int>(counts[2]);
    mesh.vertices.reserve(nv);
    mesh.faces.reserve(nf);
    for (std::size_t v = 0; v < nv; ++v) mesh.vertices.push_back(lines.vec3(lines.require()));
    for (std::size_t f = 0; f < nf; ++f) {
        const auto t = lines.fields(lines.require());
        if (t.size() != 3) lines.fail("expected 3 vertex indices");
        Face face{};
        for (int j = 0; j < 3; ++j) {
            face[static_cast<std::size_t>(j)] = lines.integer<std::uint32_t>(t[static_cast<std::size_t>(j)]);
            if (face[static_cast<std::size_t>(j)] >= nv) lines.fail("vertex index out of range");
        }
        mesh.faces.push_back(face);
    }
    lines.expect_end();
    validate_mesh(mesh);
    return mesh;
}

// --- scalar frames ----------------------------------------------------------

inline void write_frame(const std::string& path, const ScalarFrame& f)
{
    auto out = detail::open_out(path);
    out << "spherefield 1\n" << f.values.size() << '\n';
    for (double v : f.values) out << format_double17(v) << '\n';
    detail::finish(out, path);
}

inline ScalarFrame read_frame(const std::string& path)
{
    auto in = detail::open_in(path);
    detail::Lines lines(in, path);
    if (lines.require() != "spherefield 1") lines.fail("expected header 'spherefield 1'");
    const auto n = lines.integer<std::size_t>(lines.require());
    ScalarFrame f;
    f.values.reserve(n);
    for (std::size_t v = 0; v < n; ++v) f.values.push_back(lines.number(lines.require()));
    lines.expect_end();
    return f;
}

// --- per-triangle fields ------------------------------------------------------

inline void write_trifield(const std::string& path, const TriField& f)
{
    auto out = detail::open_out(path);
    out << "spheretrifield 1\n" << f.vectors.size() << '\n';
    for (const auto& v : f.vectors) out << detail::vec_text(v) << '\n';
    detail::finish(out, path);
}

inline TriField read_trifield(const std::string& path)
{
    auto in = detail::open_in(path);
    detail::Lines lines(in, path);
    if (lines.require() != "spheretrifield 1") lines.fail("expected header 'spheretrifield 1'");
    const auto n = lines.integer<std::size_t>(lines.require());
    TriField f;
    f.vectors.reserve(n);
    for (std::size_t i = 0; i < n; ++i) f.vectors.push_back(lines.vec3(lines.require()));
    lines.expect_end();
    return f;
}

// --- coefficients -------------------------------------------------------------

inline void write_coeffs(const std::string& path, const CoeffVector& c)
{
    auto out = detail::open_out(path);
    out << "vtype,n,j,value\n";
    for (std::size_t p = 0; p < c.spec.dim(); ++p) {
        const BasisIndex b = c.spec.at(p);
        out << b.vtype << ',' << b.n << ',' << b.j << ',' << format_double17(c.values[static_cast<Eigen::Index>(p)])
            << '\n';
    }
    detail::finish(out, path);
}

/// Rows must follow the canonical order and cover complete degrees.
inline CoeffVector read_coeffs(const std::string& path)
{
    auto in = detail::open_in(path);
    detail::Lines lines(in, path);
    if (lines.require() != "vtype,n,j,value") lines.fail("expected header 'vtype,n,j,value'");
    std::vector<double> vals;
    std::vector<BasisIndex> idx;
    std::string line;
    while (lines.next(line)) {
        const auto f = lines.fields(line, ',');
        if (f.size() != 4) lines.fail("expected 4 comma-separated fields");
        idx.push_back({lines.integer<int>(f[0]), lines.integer<int>(f[1]), lines.integer<int>(f[2])});
        vals.push_back(lines.number(f[3]));
    }
    int n_max = 0;
    for (const auto& b : idx) n_max = std::max(n_max, b.n);
    if (n_max < 1) throw InputError(path + ": no coefficients");
    const BasisSpec spec = make_basis_spec(n_max);
    if (idx.size() != spec.dim()) {
        throw InputError(path + ": " + std::to_string(idx.size()) + " rows, a complete basis of degree " +
                         std::to_string(n_max) + " has " + std::to_string(spec.dim()));
    }
    CoeffVector c(spec);
    for (std::size_t p = 0; p < idx.size(); ++p) {
        if (!(idx[p] == spec.at(p))) {
            throw InputError(path + ": row " + std::to_string(p + 2) + " is out of canonical order");
        }
        c.values[static_cast<Eigen::Index>(p)] = vals[p];
    }
    return c;
}

// --- weight schedules -----------------------------------------------------------

/// Per-degree weights, one block of rows n = 1..n_max per step k = 1..K:
/// header `step,n,mu`. Returns μ expanded to basis positions for each step.
inline std::vector<Vector> read_weight_schedule(const std::string& path, const BasisSpec& spec)
{
    auto in = detail::open_in(path);
    detail::Lines lines(in, path);
    if (lines.require() != "step,n,mu") lines.fail("expected header 'step,n,mu'");
    std::vector<Vector> steps;
    std::string line;
    int expect_step = 1, expect_n = 1;
    while (lines.next(line)) {
        const auto f = lines.fields(line, ',');
        if (f.size() != 3) lines.fail("expected 3 comma-separated fields");
        const int k = lines.integer<int>(f[0]);
        const int n = lines.integer<int>(f[1]);
        const double mu = lines.number(f[2]);
        if (k != expect_step || n != expect_n) {
            lines.fail("expected step " + std::to_string(expect_step) + ", degree " + std::to_string(expect_n));
        }
        if (!(mu > 0.0)) lines.fail("weights must be positive");
        if (n == 1) steps.emplace_back(static_cast<Eigen::Index>(spec.dim()));
        steps.back().segment(static_cast<Eigen::Index>(BasisSpec::degree_offset(n)), 2 * (2 * n + 1)).setConstant(mu);
        if (n == spec.n_max) {
            ++expect_step;
            expect_n = 1;
        } else {
            ++expect_n;
        }
    }
    if (expect_n != 1) throw InputError(path + ": step " + std::to_string(expect_step) + " stops before degree " +
                                        std::to_string(spec.n_max));
    if (steps.empty()) throw InputError(path + ": no weights");
    return steps;
}

// --- points -------------------------------------------------------------------

inline std::vector<Vec3> read_points(const std::string& path)
{
    auto in = detail::open_in(path);
    detail::Lines lines(in, path);
    std::vector<Vec3> pts;
    std::string line;
    while (lines.next(line)) pts.push_back(lines.vec3(line, ','));
    return pts;
}

inline void write_points(const std::string& path, const std::vector<Vec3>& pts)
{
    auto out = detail::open_out(path);
    for (const auto& p : pts) out << detail::vec_text(p, ',') << '\n';
    detail::finish(out, path);
}

// --- voxel grids ----------------------------------------------------------------

inline constexpr std::size_t kVoxelHeaderBytes = 64;

inline void write_voxels(const std::string& path, const VoxelGrid& g)
{
    g.validate();
    std::ostringstream hs;
    hs << "voxelgrid 1 " << g.nx << ' ' << g.ny << ' ' << g.nz;
    for (int i = 0; i < 3; ++i) hs << ' ' << format_double(g.spacing[i]);
    for (int i = 0; i < 3; ++i) hs << ' ' << format_double(g.origin[i]);
    std::string header = hs.str();
    if (header.size() > kVoxelHeaderBytes - 1) throw InputError("voxel header does not fit in 64 bytes");
    header.resize(kVoxelHeaderBytes - 1, ' ');
    header.push_back('\n');
    auto out = detail::open_out(path, true);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (float v : g.values) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, &v, 4);
        const char le[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                            static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
        out.write(le, 4);
    }
    detail::finish(out, path);
}

inline VoxelGrid read_voxels(const std::string& path)
{
    auto in = detail::open_in(path, true);
    std::string header(kVoxelHeaderBytes, '\0');
    if (!in.read(header.data(), static_cast<std::streamsize>(kVoxelHeaderBytes))) {
        throw InputError(path + ": truncated voxel header");
    }
    std::istringstream hs(header);
    std::string magic, version;
    VoxelGrid g;
    hs >> magic >> version >> g.nx >> g.ny >> g.nz >> g.spacing[0] >> g.spacing[1] >> g.spacing[2] >> g.origin[0] >>
        g.origin[1] >> g.origin[2];
    if (!hs || magic != "voxelgrid" || version != "1") throw InputError(path + ": malformed voxel header");
    if (g.nx < 1 || g.ny < 1 || g.nz < 1) throw InputError(path + ": voxel dimensions must be >= 1");
    const std::size_t n = static_cast<std::size_t>(g.nx) * g.ny * g.nz;
    std::vector<unsigned char> raw(n * 4);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
        throw InputError(path + ": voxel data shorter than the header dimensions");
    }
    g.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = std::uint32_t{raw[4 * i]} | (std::uint32_t{raw[4 * i + 1]} << 8) |
                                   (std::uint32_t{raw[4 * i + 2]} << 16) | (std::uint32_t{raw[4 * i + 3]} << 24);
        std::memcpy(&g.values[i], &bits, 4);
    }
    g.validate();
    return g;
}

// --- reports, images, streamlines -----------------------------------------------

/// `key=value` lines in insertion order.
class Report {
public:
    void set(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }
    void set(const std::string& key, double value) { set(key, format_double(value)); }
    void set(const std::string& key, int value) { set(key, std::to_string(value)); }
    void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
    void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

    void write(const std::string& path) const
    {
        auto out = detail::open_out(path);
        for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
        detail::finish(out, path);
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

inline void write_ppm(const std::string& path, const RasterImage& img)
{
    auto out = detail::open_out(path, true);
    out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    detail::finish(out, path);
}

inline void write_streamlines(const std::string& path, const std::vector<Streamline>& lines)
{
    auto out = detail::open_out(path);
    out << "seed,step,x,y,z\n";
    for (std::size_t s = 0; s < lines.size(); ++s) {
        for (std::size_t k = 0; k < lines[s].points.size(); ++k) {
            out << s << ',' << k << ',' << detail::vec_text(lines[s].points[k], ',') << '\n';
        }
    }
    detail::finish(out, path);
}

}  // namespace sphflow::io
