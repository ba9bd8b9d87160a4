#pragma once

// Scalar data on the mesh: frames, discrete derivatives, voxel projection,
// sphere fitting and synthetic rotating frame pairs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sphflow/core.hpp"
#include "sphflow/harmonics.hpp"
#include "sphflow/mesh.hpp"
#include "sphflow/parallel.hpp"
#include "sphflow/spectral.hpp"

namespace sphflow {

/// One value per mesh vertex.
struct ScalarFrame {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

inline void require_frame_on(const ScalarFrame& f, const TriMesh& mesh, const char* what)
{
    if (f.values.size() != mesh.vertices.size()) {
        throw InputError(std::string(what) + " has " + std::to_string(f.values.size()) + " values, mesh has " +
                         std::to_string(mesh.vertices.size()) + " vertices");
    }
}

/// Constant gradient of the PL interpolant on every triangle.
inline std::vector<Vec3> pl_gradient(const TriMesh& mesh, const std::vector<TriangleGeom>& geom, const ScalarFrame& f)
{
    require_frame_on(f, mesh, "frame");
    if (geom.size() != mesh.faces.size()) throw InputError("geometry does not match mesh");
    std::vector<Vec3> out(mesh.faces.size());
    parallel::for_each_index(0, mesh.faces.size(), 2048, [&](std::size_t i) {
        const auto& t = mesh.faces[i];
        out[i] = pl_gradient_on_triangle(geom[i], f.values[t[0]], f.values[t[1]], f.values[t[2]]);
    });
    return out;
}

inline std::vector<Vec3> pl_gradient(const TriMesh& mesh, const ScalarFrame& f)
{
    return pl_gradient(mesh, mesh_geometry(mesh), f);
}

/// Forward difference f1 - f0 per vertex.
inline ScalarFrame time_derivative(const ScalarFrame& f0, const ScalarFrame& f1)
{
    if (f0.values.size() != f1.values.size()) {
        throw InputError("frames differ in length (" + std::to_string(f0.values.size()) + " vs " +
                         std::to_string(f1.values.size()) + ")");
    }
    ScalarFrame d{std::vector<double>(f0.values.size())};
    for (std::size_t v = 0; v < d.values.size(); ++v) d.values[v] = f1.values[v] - f0.values[v];
    return d;
}

// ---------------------------------------------------------------------------
// Volumetric data

/// Regular voxel grid; voxel (i, j, k) sits at origin + (i sx, j sy, k sz).
struct VoxelGrid {
    int nx = 0, ny = 0, nz = 0;
    Vec3 spacing = Vec3::Ones();
    Vec3 origin = Vec3::Zero();
    std::vector<float> values;  // x fastest

    void validate() const
    {
        if (nx < 1 || ny < 1 || nz < 1) throw InputError("voxel grid dimensions must be >= 1");
        if (!(spacing.minCoeff() > 0.0) || !all_finite(spacing)) throw InputError("voxel spacing must be positive");
        if (!all_finite(origin)) throw InputError("voxel origin must be finite");
        if (values.size() != static_cast<std::size_t>(nx) * ny * nz) {
            throw InputError("voxel grid holds " + std::to_string(values.size()) + " values, dimensions need " +
                             std::to_string(static_cast<std::size_t>(nx) * ny * nz));
        }
    }

    /// Voxel value; indices outside the grid read as 0.
    double at(long i, long j, long k) const
    {
        if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) return 0.0;
        return values[static_cast<std::size_t>((k * ny + j) * nx + i)];
    }

    /// Trilinear interpolation at a world point.
    double sample(const Vec3& world) const
    {
        const Vec3 g = (world - origin).cwiseQuotient(spacing);
        const double fx = std::floor(g.x()), fy = std::floor(g.y()), fz = std::floor(g.z());
        if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(fz)) return 0.0;
        const long i = static_cast<long>(fx), j = static_cast<long>(fy), k = static_cast<long>(fz);
        const double tx = g.x() - fx, ty = g.y() - fy, tz = g.z() - fz;
        double acc = 0.0;
        for (int dz = 0; dz < 2; ++dz) {
            const double wz = dz ? tz : 1.0 - tz;
            for (int dy = 0; dy < 2; ++dy) {
                const double wy = dy ? ty : 1.0 - ty;
                for (int dx = 0; dx < 2; ++dx) {
                    const double wx = dx ? tx : 1.0 - tx;
                    acc += wx * wy * wz * at(i + dx, j + dy, k + dz);
                }
            }
        }
        return acc;
    }
};

struct SphereFit {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
    double rms = 0.0;  // RMS of |x - center| - radius
};

inline constexpr int kDefaultRadialSamples = 11;

/// Radial maximum projection: for each vertex v the largest interpolated value
/// on the segment center + c r v, c in [1 - eps, 1 + eps] (uniform samples).
inline ScalarFrame project_voxels(const VoxelGrid& grid, const SphereFit& fit, const TriMesh& mesh, double eps,
                                  int samples = kDefaultRadialSamples)
{
    grid.validate();
    if (!(eps > 0.0) || !std::isfinite(eps)) throw InputError("projection eps must be positive");
    if (samples < 2) throw InputError("projection needs at least 2 radial samples");
    if (!(fit.radius > 0.0)) throw InputError("sphere radius must be positive");
    ScalarFrame out{std::vector<double>(mesh.vertices.size())};
    parallel::for_each_index(0, mesh.vertices.size(), 1024, [&](std::size_t v) {
        double best = -std::numeric_limits<double>::infinity();
        for (int s = 0; s < samples; ++s) {
            const double c = (1.0 - eps) + 2.0 * eps * s / (samples - 1);
            best = std::max(best, grid.sample(fit.center + (c * fit.radius) * mesh.vertices[v]));
        }
        out.values[v] = best;
    });
    return out;
}

struct Normalized {
    ScalarFrame frame;
    bool was_constant = false;
};

/// Affine map of [min, max] onto [0, 1]; constant frames come back unchanged.
inline Normalized normalize(const ScalarFrame& f)
{
    if (f.values.empty()) return {f, true};
    const auto [lo_it, hi_it] = std::minmax_element(f.values.begin(), f.values.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw NumericalError("frame contains non-finite values");
    if (!(hi > lo)) return {f, true};
    Normalized out{ScalarFrame{std::vector<double>(f.values.size())}, false};
    const double inv = 1.0 / (hi - lo);
    for (std::size_t v = 0; v < f.values.size(); ++v) out.frame.values[v] = (f.values[v] - lo) * inv;
    return out;
}

/// Algebraic least-squares sphere: |x|^2 = 2 c.x - d, radius sqrt(|c|^2 - d).
inline SphereFit fit_sphere(const std::vector<Vec3>& points)
{
    if (points.size() < 4) throw InputError("sphere fit needs at least 4 points, got " + std::to_string(points.size()));
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd m(n, 4);
    Eigen::VectorXd rhs(n);
    // centre the data for conditioning
    Vec3 mean = Vec3::Zero();
    for (const auto& p : points) {
        if (!all_finite(p)) throw InputError("sphere fit: non-finite point");
        mean += p;
    }
    mean /= static_cast<double>(points.size());
    double scale = 0.0;
    for (const auto& p : points) scale = std::max(scale, (p - mean).norm());
    if (!(scale > 0.0)) throw InputError("sphere fit: all points coincide");
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3 x = (points[static_cast<std::size_t>(i)] - mean) / scale;
        m.row(i) << 2.0 * x.x(), 2.0 * x.y(), 2.0 * x.z(), -1.0;
        rhs[i] = x.squaredNorm();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
    qr.setThreshold(1e-10);
    if (qr.rank() < 4) throw InputError("sphere fit: points are coplanar or otherwise degenerate");
    const Eigen::VectorXd sol = qr.solve(rhs);
    const Vec3 c = sol.head<3>();
    const double r2 = c.squaredNorm() - sol[3];
    if (!(r2 > 0.0)) throw NumericalError("sphere fit: negative squared radius");
    SphereFit fit;
    fit.center = mean + scale * c;
    fit.radius = scale * std::sqrt(r2);
    double ss = 0.0;
    for (const auto& p : points) {
        const double e = (p - fit.center).norm() - fit.radius;
        ss += e * e;
    }
    fit.rms = std::sqrt(ss / static_cast<double>(points.size()));
    return fit;
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Uniform in [-1, 1) from the top 53 bits; identical on every platform.
inline double uniform_pm1(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;
}

/// Random coefficients for degrees 1..degree with amplitude (2n+1)^{-1/2},
/// so every degree carries comparable energy.
inline ScalarCoeffs random_base(std::uint64_t seed, int degree)
{
    if (degree < 1 || degree > kMaxDegree) throw InputError("base degree must be in [1, " + std::to_string(kMaxDegree) + "]");
    std::mt19937_64 rng(seed);
    ScalarCoeffs c(degree);
    for (int n = 1; n <= degree; ++n) {
        const double amp = 1.0 / std::sqrt(2.0 * n + 1.0);
        for (int j = 1; j <= 2 * n + 1; ++j) c.at(n, j) = amp * uniform_pm1(rng);
    }
    return c;
}

/// Rescales c (through the constant term) so its values at `points` span [0, 1].
inline ScalarCoeffs fit_to_unit_range(ScalarCoeffs c, std::span<const Vec3> points)
{
    const auto vals = evaluate_at(c, points);
    if (vals.empty()) return c;
    const auto [lo_it, hi_it] = std::minmax_element(vals.begin(), vals.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) return c;
    const double k = 1.0 / (hi - lo);
    for (double& v : c.values) v *= k;
    c.at(0, 1) -= lo * k * std::sqrt(4.0 * kPi);
    return c;
}

/// Coefficients of the rotation field delta (axis × x), a pure degree-1
/// toroidal field: axis × x = sqrt(8π/3) Σ_m a_m y3_{1,m}.
inline CoeffVector rotation_flow(const BasisSpec& spec, const Vec3& axis, double delta)
{
    CoeffVector c(spec);
    const double k = delta * std::sqrt(8.0 * kPi / 3.0);
    c[BasisIndex{3, 1, 1}] = k * axis.y();
    c[BasisIndex{3, 1, 2}] = k * axis.z();
    c[BasisIndex{3, 1, 3}] = k * axis.x();
    return c;
}

inline constexpr double kMaxSyntheticDelta = 0.2;

struct SyntheticTruth {
    ScalarFrame frame0;
    ScalarFrame frame1;
    CoeffVector true_flow;
    double delta = 0.0;
};

/// frame0 = Σ c Y at the vertices; frame1(v) = frame0(R(-delta) v) with R the
/// rotation about `axis`.
inline SyntheticTruth synth_rotation(const TriMesh& mesh, const ScalarCoeffs& base, const Vec3& axis_in, double delta,
                                     const BasisSpec& spec)
{
    if (base.n_max > spec.n_max) {
        throw InputError("base degree " + std::to_string(base.n_max) + " exceeds the basis degree " +
                         std::to_string(spec.n_max));
    }
    if (!(std::abs(delta) <= kMaxSyntheticDelta)) throw InputError("rotation angle must satisfy |delta| <= 0.2");
    if (!all_finite(axis_in) || !(axis_in.norm() > 0.0)) throw InputError("rotation axis must be a non-zero vector");
    const Vec3 axis = axis_in.normalized();
    const Eigen::Matrix3d rot = Eigen::AngleAxisd(-delta, axis).toRotationMatrix();
    std::vector<Vec3> moved(mesh.vertices.size());
    for (std::size_t v = 0; v < moved.size(); ++v) moved[v] = delta == 0.0 ? mesh.vertices[v] : Vec3(rot * mesh.vertices[v]);
    SyntheticTruth out;
    out.frame0.values = evaluate_at(base, mesh.vertices);
    out.frame1.values = evaluate_at(base, moved);
    out.true_flow = rotation_flow(spec, axis, delta);
    out.delta = delta;
    return out;
}

}  // namespace sphflow
