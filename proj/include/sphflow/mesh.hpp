#pragma once

// Triangulated unit sphere: icosahedron subdivision, per-triangle geometry,
// hemisphere restriction and spherical point location.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sphflow/core.hpp"
#include "sphflow/parallel.hpp"

namespace sphflow {

using Face = std::array<std::uint32_t, 3>;

/// Vertices on the unit sphere plus counter-clockwise (seen from outside)
/// index triples. `level` is the subdivision count of the icosphere the mesh
/// was cut from, or -1 for meshes of unknown provenance.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    int level = -1;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t face_count() const { return faces.size(); }

    Vec3 centroid(std::size_t f) const
    {
        const auto& t = faces[f];
        return (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
    }
};

/// Flat-triangle geometry. heights[j] points from vertex j to the opposite
/// edge; grad[j] = heights[j] / |heights[j]|^2.
struct TriangleGeom {
    double area = 0.0;
    std::array<Vec3, 3> heights;
    std::array<Vec3, 3> grad;
    Vec3 normal = Vec3::Zero();
};

inline constexpr int kMaxIcosphereLevel = 9;

inline std::size_t icosphere_face_count(int level) { return std::size_t{20} << (2 * level); }
inline std::size_t icosphere_vertex_count(int level) { return (std::size_t{10} << (2 * level)) + 2; }

namespace detail {

inline Vec3 sphere_midpoint(const Vec3& a, const Vec3& b) { return (a + b).normalized(); }

/// Regular icosahedron with one vertex at +z and one at -z; the two rings of
/// five sit at z = ±1/√5, the lower ring rotated by 36°. Every coordinate is
/// built from sqrt only, so the mesh is bit-reproducible.
inline TriMesh base_icosahedron()
{
    const double s5 = std::sqrt(5.0);
    const double z = 1.0 / s5;
    const double r = 2.0 / s5;
    // cos/sin of multiples of 36°
    const double c36 = (s5 + 1.0) / 4.0;
    const double c72 = (s5 - 1.0) / 4.0;
    const double s36 = std::sqrt(10.0 - 2.0 * s5) / 4.0;
    const double s72 = std::sqrt(10.0 + 2.0 * s5) / 4.0;
    const std::array<double, 10> cs{1.0, c36, c72, -c72, -c36, -1.0, -c36, -c72, c72, c36};
    const std::array<double, 10> sn{0.0, s36, s72, s72, s36, 0.0, -s36, -s72, -s72, -s36};

    TriMesh m;
    m.level = 0;
    m.vertices.reserve(12);
    m.vertices.emplace_back(0.0, 0.0, 1.0);
    for (int k = 0; k < 5; ++k) m.vertices.emplace_back(r * cs[2 * k], r * sn[2 * k], z);
    for (int k = 0; k < 5; ++k) m.vertices.emplace_back(r * cs[2 * k + 1], r * sn[2 * k + 1], -z);
    m.vertices.emplace_back(0.0, 0.0, -1.0);

    auto up = [](int k) { return static_cast<std::uint32_t>(1 + (k % 5)); };
    auto lo = [](int k) { return static_cast<std::uint32_t>(6 + (k % 5)); };
    for (int k = 0; k < 5; ++k) m.faces.push_back({0, up(k), up(k + 1)});
    for (int k = 0; k < 5; ++k) {
        m.faces.push_back({up(k), lo(k), up(k + 1)});
        m.faces.push_back({up(k + 1), lo(k), lo(k + 1)});
    }
    for (int k = 0; k < 5; ++k) m.faces.push_back({11, lo(k + 1), lo(k)});

    for (auto& f : m.faces) {
        const Vec3& a = m.vertices[f[0]];
        const Vec3& b = m.vertices[f[1]];
        const Vec3& c = m.vertices[f[2]];
        if ((b - a).cross(c - a).dot(a + b + c) < 0.0) std::swap(f[1], f[2]);
    }
    return m;
}

/// Children of (a, b, c) with edge midpoints ab, bc, ca, in this order.
inline std::array<Face, 4> split_face(const Face& f, std::uint32_t ab, std::uint32_t bc, std::uint32_t ca)
{
    return {Face{f[0], ab, ca}, Face{ab, f[1], bc}, Face{ca, bc, f[2]}, Face{ab, bc, ca}};
}

inline void subdivide(TriMesh& m)
{
    std::unordered_map<std::uint64_t, std::uint32_t> midpoints;
    midpoints.reserve(m.faces.size() * 2);
    auto mid = [&](std::uint32_t a, std::uint32_t b) {
        const std::uint64_t key = (std::uint64_t{std::min(a, b)} << 32) | std::max(a, b);
        auto [it, inserted] = midpoints.try_emplace(key, static_cast<std::uint32_t>(m.vertices.size()));
        if (inserted) m.vertices.push_back(sphere_midpoint(m.vertices[a], m.vertices[b]));
        return it->second;
    };
    std::vector<Face> next;
    next.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
        const auto ab = mid(f[0], f[1]);
        const auto bc = mid(f[1], f[2]);
        const auto ca = mid(f[2], f[0]);
        for (const auto& child : split_face(f, ab, bc, ca)) next.push_back(child);
    }
    m.faces = std::move(next);
    ++m.level;
}

}  // namespace detail

/// Icosphere with 20·4^level faces. Children of face f at one level are faces
/// 4f..4f+3 of the next, and coarse vertices keep their indices.
inline TriMesh build_icosphere(int level)
{
    if (level < 0) throw InputError("icosphere level must be non-negative, got " + std::to_string(level));
    if (level > kMaxIcosphereLevel) {
        throw InputError("icosphere level " + std::to_string(level) + " exceeds the memory guard (max " +
                         std::to_string(kMaxIcosphereLevel) + ")");
    }
    TriMesh m = detail::base_icosahedron();
    for (int k = 0; k < level; ++k) detail::subdivide(m);
    return m;
}

/// Keeps faces whose three vertices satisfy z >= -tol; unreferenced vertices
/// are dropped and the remaining ones keep their relative order.
inline TriMesh restrict_to_upper_hemisphere(const TriMesh& mesh, double tol = 1e-12)
{
    std::vector<std::int64_t> remap(mesh.vertices.size(), -1);
    TriMesh out;
    out.level = mesh.level;
    std::vector<Face> kept;
    for (const auto& f : mesh.faces) {
        if (mesh.vertices[f[0]].z() >= -tol && mesh.vertices[f[1]].z() >= -tol && mesh.vertices[f[2]].z() >= -tol) {
            kept.push_back(f);
            for (auto v : f) remap[v] = 0;
        }
    }
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        if (remap[v] == 0) {
            remap[v] = static_cast<std::int64_t>(out.vertices.size());
            out.vertices.push_back(mesh.vertices[v]);
        }
    }
    out.faces.reserve(kept.size());
    for (const auto& f : kept) {
        out.faces.push_back({static_cast<std::uint32_t>(remap[f[0]]), static_cast<std::uint32_t>(remap[f[1]]),
                             static_cast<std::uint32_t>(remap[f[2]])});
    }
    return out;
}

/// Structural checks: index bounds, every vertex referenced, finite unit vertices.
inline void validate_mesh(const TriMesh& mesh, double unit_tol = 1e-9)
{
    std::vector<char> used(mesh.vertices.size(), 0);
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        for (auto v : mesh.faces[f]) {
            if (v >= mesh.vertices.size()) {
                throw InputError("face " + std::to_string(f) + " references vertex " + std::to_string(v) +
                                 " out of range");
            }
            used[v] = 1;
        }
        const auto& t = mesh.faces[f];
        const Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        if (!(n.norm() > 1e-14)) throw InputError("face " + std::to_string(f) + " is degenerate (zero area)");
    }
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        if (!used[v]) throw InputError("vertex " + std::to_string(v) + " is not referenced by any face");
        if (!all_finite(mesh.vertices[v]) || std::abs(mesh.vertices[v].norm() - 1.0) > unit_tol) {
            throw InputError("vertex " + std::to_string(v) + " is not a finite unit vector");
        }
    }
}

/// Number of distinct undirected edges.
inline std::size_t edge_count(const TriMesh& mesh)
{
    std::unordered_map<std::uint64_t, char> edges;
    edges.reserve(mesh.faces.size() * 2);
    for (const auto& f : mesh.faces) {
        for (int j = 0; j < 3; ++j) {
            const auto a = f[j];
            const auto b = f[(j + 1) % 3];
            edges.emplace((std::uint64_t{std::min(a, b)} << 32) | std::max(a, b), 0);
        }
    }
    return edges.size();
}

inline TriangleGeom triangle_geometry(const Vec3& a, const Vec3& b, const Vec3& c)
{
    const std::array<Vec3, 3> v{a, b, c};
    TriangleGeom g;
    const Vec3 cr = (b - a).cross(c - a);
    g.area = 0.5 * cr.norm();
    const double scale = std::max({(b - a).squaredNorm(), (c - b).squaredNorm(), (a - c).squaredNorm()});
    if (!(g.area > 1e-14 * scale) || !std::isfinite(g.area)) throw NumericalError("degenerate triangle");
    g.normal = cr / cr.norm();
    if (g.normal.dot(a + b + c) < 0.0) g.normal = -g.normal;
    for (int j = 0; j < 3; ++j) {
        const Vec3& p = v[j];
        const Vec3& q = v[(j + 1) % 3];
        const Vec3& r = v[(j + 2) % 3];
        const Vec3 e = r - q;
        const double t = (p - q).dot(e) / e.squaredNorm();
        g.heights[j] = (q + t * e) - p;
        g.grad[j] = g.heights[j] / g.heights[j].squaredNorm();
    }
    return g;
}

inline TriangleGeom triangle_geometry(const TriMesh& mesh, std::size_t face)
{
    if (face >= mesh.faces.size()) throw InputError("face index " + std::to_string(face) + " out of range");
    const auto& f = mesh.faces[face];
    try {
        return triangle_geometry(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
    } catch (const NumericalError&) {
        throw NumericalError("degenerate triangle at face " + std::to_string(face));
    }
}

/// Geometry of every face, indexed like mesh.faces.
inline std::vector<TriangleGeom> mesh_geometry(const TriMesh& mesh)
{
    std::vector<TriangleGeom> geom(mesh.faces.size());
    parallel::for_each_index(0, mesh.faces.size(), 1024, [&](std::size_t f) { geom[f] = triangle_geometry(mesh, f); });
    return geom;
}

inline double total_area(const std::vector<TriangleGeom>& geom)
{
    double s = 0.0;
    for (const auto& g : geom) s += g.area;
    return s;
}

/// Constant surface gradient of the linear interpolant of vertex values
/// (a, b, c) on a flat triangle: (a - b) h_2/|h_2|^2 + (a - c) h_3/|h_3|^2.
inline Vec3 pl_gradient_on_triangle(const TriangleGeom& g, double a, double b, double c)
{
    return (a - b) * g.grad[1] + (a - c) * g.grad[2];
}

/// True when p lies in the spherical triangle spanned by (a, b, c), i.e. on
/// the inner side of all three great circles through the edges, up to an
/// angular slack `tol`.
inline bool spherical_contains(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& p, double tol)
{
    if (p.dot(a + b + c) <= 0.0) return false;
    const Vec3 n0 = a.cross(b);
    const Vec3 n1 = b.cross(c);
    const Vec3 n2 = c.cross(a);
    return p.dot(n0) >= -tol * n0.norm() && p.dot(n1) >= -tol * n1.norm() && p.dot(n2) >= -tol * n2.norm();
}

inline constexpr double kLocateTolerance = 1e-12;

/// Lowest-index face whose radial projection contains p, by scanning all faces.
inline std::optional<std::size_t> locate_brute_force(const TriMesh& mesh, const Vec3& p_in)
{
    const Vec3 p = p_in.normalized();
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& t = mesh.faces[f];
        if (spherical_contains(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]], p, kLocateTolerance)) {
            return f;
        }
    }
    return std::nullopt;
}

/// Point location by descending the subdivision hierarchy of the icosphere
/// the mesh was cut from. Meshes that do not match an icosphere (by bitwise
/// vertex comparison) fall back to a linear scan. Holds a pointer to `mesh`.
class PointLocator {
public:
    explicit PointLocator(const TriMesh& mesh) : mesh_(&mesh), base_(detail::base_icosahedron())
    {
        if (mesh.level < 0 || mesh.level > kMaxIcosphereLevel) return;
        local_of_full_.assign(icosphere_face_count(mesh.level), -1);
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
            const Vec3 c = mesh.centroid(f).normalized();
            std::optional<std::size_t> found;
            descend_all(c, [&](std::size_t full, const std::array<Vec3, 3>& tri) {
                const auto& t = mesh.faces[f];
                if (same_triangle(tri, {mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]})) {
                    found = full;
                    return true;
                }
                return false;
            });
            if (!found || local_of_full_[*found] != -1) {
                local_of_full_.clear();
                return;
            }
            local_of_full_[*found] = static_cast<std::int64_t>(f);
        }
        hierarchical_ = true;
    }

    bool hierarchical() const { return hierarchical_; }

    /// Lowest-index containing face, or nullopt when p is outside the mesh.
    std::optional<std::size_t> find(const Vec3& p_in) const
    {
        if (!hierarchical_) return locate_brute_force(*mesh_, p_in);
        const Vec3 p = p_in.normalized();
        std::optional<std::size_t> result;
        descend_all(p, [&](std::size_t full, const std::array<Vec3, 3>&) {
            const auto local = local_of_full_[full];
            if (local < 0) return false;
            const auto& t = mesh_->faces[static_cast<std::size_t>(local)];
            if (spherical_contains(mesh_->vertices[t[0]], mesh_->vertices[t[1]], mesh_->vertices[t[2]], p,
                                   kLocateTolerance)) {
                if (!result || static_cast<std::size_t>(local) < *result) result = static_cast<std::size_t>(local);
            }
            return false;
        });
        return result;
    }

    std::size_t locate(const Vec3& p) const
    {
        if (auto f = find(p)) return *f;
        throw InputError("uncovered point: no face of the mesh contains the query point");
    }

private:
    static bool same_triangle(const std::array<Vec3, 3>& a, const std::array<Vec3, 3>& b)
    {
        for (int r = 0; r < 3; ++r) {
            if (a[0] == b[r] && a[1] == b[(r + 1) % 3] && a[2] == b[(r + 2) % 3]) return true;
        }
        return false;
    }

    // Visits leaves (full-icosphere indices, increasing) whose ancestors all
    // contain p, until `visit` returns true. The coarse slack is wider than the
    // leaf test, so no leaf that contains p is skipped.
    template <typename Visit>
    void descend_all(const Vec3& p, Visit&& visit) const
    {
        for (std::size_t f = 0; f < base_.faces.size(); ++f) {
            const auto& t = base_.faces[f];
            const std::array<Vec3, 3> tri{base_.vertices[t[0]], base_.vertices[t[1]], base_.vertices[t[2]]};
            if (descend(p, tri, f, 0, visit)) return;
        }
    }

    template <typename Visit>
    bool descend(const Vec3& p, const std::array<Vec3, 3>& tri, std::size_t index, int level, Visit& visit) const
    {
        if (!spherical_contains(tri[0], tri[1], tri[2], p, kCoarseTolerance)) return false;
        if (level == mesh_->level) return visit(index, tri);
        const Vec3 ab = detail::sphere_midpoint(tri[0], tri[1]);
        const Vec3 bc = detail::sphere_midpoint(tri[1], tri[2]);
        const Vec3 ca = detail::sphere_midpoint(tri[2], tri[0]);
        const std::array<std::array<Vec3, 3>, 4> children{{{tri[0], ab, ca}, {ab, tri[1], bc}, {ca, bc, tri[2]}, {ab, bc, ca}}};
        for (std::size_t c = 0; c < 4; ++c) {
            if (descend(p, children[c], 4 * index + c, level + 1, visit)) return true;
        }
        return false;
    }

    static constexpr double kCoarseTolerance = 1e-9;

    const TriMesh* mesh_;
    TriMesh base_;
    std::vector<std::int64_t> local_of_full_;
    bool hierarchical_ = false;
};

/// One-shot point location; build a PointLocator for repeated queries.
inline std::size_t locate(const TriMesh& mesh, const Vec3& p)
{
    return PointLocator(mesh).locate(p);
}

}  // namespace sphflow
