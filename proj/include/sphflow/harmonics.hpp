#pragma once

// Real fully normalised scalar spherical harmonics Y_nj and the tangential
// vector spherical harmonics built from them, both exact (pointwise) and as
// piecewise-constant approximations on a triangulated sphere.
//
// Conventions: j = m + n + 1 for m = -n..n; no Condon-Shortley phase;
//   Y_nm = N_n|m| P_n|m|(cos θ) · {√2 cos mφ (m > 0), 1 (m = 0), √2 sin |m|φ (m < 0)}.
// Evaluation uses Cartesian coordinates: with ρ = sin θ,
//   P̄_nm(cos θ) = Q_nm(z) ρ^m and ρ^m (cos mφ + i sin mφ) = (x + i y)^m,
// where Q_nm is a polynomial in z. This avoids any division by sin θ, so
// values and surface gradients are defined at the poles too.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sphflow/core.hpp"
#include "sphflow/mesh.hpp"
#include "sphflow/parallel.hpp"

namespace sphflow {

inline constexpr int kMaxDegree = 150;

/// λ_n = n(n+1), the eigenvalues of the Laplace-Beltrami operator.
inline double eigenvalue(int n)
{
    if (n < 0) throw InputError("eigenvalue: degree must be non-negative");
    return static_cast<double>(static_cast<std::int64_t>(n) * (n + 1));
}

/// Position of Y_nj among all scalar harmonics of degree <= n_max.
inline std::size_t scalar_index(int n, int j) { return static_cast<std::size_t>(n * n + j - 1); }
inline std::size_t scalar_count(int n_max) { return static_cast<std::size_t>((n_max + 1) * (n_max + 1)); }

/// (vtype, n, j) with vtype 2 = y^(2) (gradient type), 3 = y^(3) (curl type).
struct BasisIndex {
    int vtype = 2;
    int n = 1;
    int j = 1;

    int m() const { return j - n - 1; }
    friend bool operator==(const BasisIndex&, const BasisIndex&) = default;
};

/// Tangential basis truncated at degree n_max, in canonical order: n
/// ascending, then vtype 2 before 3, then j ascending.
struct BasisSpec {
    int n_max = 1;

    std::size_t dim() const { return static_cast<std::size_t>(2 * (n_max * n_max + 2 * n_max)); }

    static std::size_t degree_offset(int n) { return static_cast<std::size_t>(2 * (n * n - 1)); }

    std::size_t index_of(const BasisIndex& b) const
    {
        if ((b.vtype != 2 && b.vtype != 3) || b.n < 1 || b.n > n_max || b.j < 1 || b.j > 2 * b.n + 1) {
            throw InputError("basis index (" + std::to_string(b.vtype) + "," + std::to_string(b.n) + "," +
                             std::to_string(b.j) + ") outside the basis with n_max " + std::to_string(n_max));
        }
        return degree_offset(b.n) + static_cast<std::size_t>((b.vtype - 2) * (2 * b.n + 1) + b.j - 1);
    }

    BasisIndex at(std::size_t p) const
    {
        if (p >= dim()) throw InputError("basis position " + std::to_string(p) + " out of range");
        int n = 1;
        while (degree_offset(n + 1) <= p) ++n;
        const auto r = static_cast<int>(p - degree_offset(n));
        const int width = 2 * n + 1;
        return {2 + r / width, n, 1 + r % width};
    }

    /// Degree of every position, in canonical order.
    std::vector<int> degrees() const
    {
        std::vector<int> out;
        out.reserve(dim());
        for (int n = 1; n <= n_max; ++n) out.insert(out.end(), static_cast<std::size_t>(2 * (2 * n + 1)), n);
        return out;
    }

    friend bool operator==(const BasisSpec&, const BasisSpec&) = default;
};

inline BasisSpec make_basis_spec(int n_max)
{
    if (n_max < 1 || n_max > kMaxDegree) {
        throw InputError("n_max must lie in [1, " + std::to_string(kMaxDegree) + "], got " + std::to_string(n_max));
    }
    return BasisSpec{n_max};
}

/// Evaluates all Y_nj with n <= n_max (and optionally their surface
/// gradients) at one point. Holds the recurrence coefficients; reusable.
class HarmonicEvaluator {
public:
    explicit HarmonicEvaluator(int n_max) : n_max_(n_max)
    {
        if (n_max < 0 || n_max > kMaxDegree) throw InputError("harmonic degree out of range");
        const auto size = static_cast<std::size_t>((n_max + 1) * (n_max + 1));
        a_.assign(size, 0.0);
        b_.assign(size, 0.0);
        diag_.assign(static_cast<std::size_t>(n_max + 1), 0.0);
        diag_[0] = 1.0 / std::sqrt(4.0 * kPi);
        for (int m = 1; m <= n_max; ++m) {
            diag_[m] = diag_[m - 1] * std::sqrt((2.0 * m + 1.0) / (2.0 * m));
        }
        for (int m = 0; m <= n_max; ++m) {
            for (int n = m + 2; n <= n_max; ++n) {
                const double nn = n;
                const double mm = m;
                a_[tri(n, m)] = std::sqrt((4.0 * nn * nn - 1.0) / (nn * nn - mm * mm));
                b_[tri(n, m)] = std::sqrt(((nn - 1.0) * (nn - 1.0) - mm * mm) / (4.0 * (nn - 1.0) * (nn - 1.0) - 1.0));
            }
        }
        q_.resize(size);
        dq_.resize(size);
        c_.resize(static_cast<std::size_t>(n_max + 1));
        s_.resize(static_cast<std::size_t>(n_max + 1));
    }

    int n_max() const { return n_max_; }

    /// values[scalar_index(n, j)] = Y_nj(p); p is normalised first.
    void values(const Vec3& p, std::span<double> out) { evaluate(p, out, {}); }

    /// Values and surface gradients ∇_S Y_nj(p).
    void values_and_gradients(const Vec3& p, std::span<double> vals, std::span<Vec3> grads)
    {
        evaluate(p, vals, grads);
    }

private:
    std::size_t tri(int n, int m) const { return static_cast<std::size_t>(n * (n_max_ + 1) + m); }

    void evaluate(const Vec3& p_in, std::span<double> vals, std::span<Vec3> grads)
    {
        if (vals.size() < scalar_count(n_max_)) throw InputError("harmonic output buffer too small");
        const bool want_grad = !grads.empty();
        if (want_grad && grads.size() < scalar_count(n_max_)) throw InputError("gradient output buffer too small");
        const double norm = p_in.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) throw InputError("harmonic evaluation at a non-finite or zero point");
        const Vec3 p = p_in / norm;
        const double x = p.x(), y = p.y(), z = p.z();

        // Q_nm(z) and dQ_nm/dz by the three-term recurrence in n.
        for (int m = 0; m <= n_max_; ++m) {
            q_[tri(m, m)] = diag_[m];
            dq_[tri(m, m)] = 0.0;
            if (m + 1 <= n_max_) {
                const double f = std::sqrt(2.0 * m + 3.0);
                q_[tri(m + 1, m)] = f * z * diag_[m];
                dq_[tri(m + 1, m)] = f * diag_[m];
            }
            for (int n = m + 2; n <= n_max_; ++n) {
                const double a = a_[tri(n, m)];
                const double b = b_[tri(n, m)];
                q_[tri(n, m)] = a * (z * q_[tri(n - 1, m)] - b * q_[tri(n - 2, m)]);
                dq_[tri(n, m)] = a * (q_[tri(n - 1, m)] + z * dq_[tri(n - 1, m)] - b * dq_[tri(n - 2, m)]);
            }
        }
        // (x + i y)^m
        c_[0] = 1.0;
        s_[0] = 0.0;
        for (int m = 1; m <= n_max_; ++m) {
            c_[m] = c_[m - 1] * x - s_[m - 1] * y;
            s_[m] = s_[m - 1] * x + c_[m - 1] * y;
        }

        const double r2 = std::sqrt(2.0);
        for (int n = 0; n <= n_max_; ++n) {
            for (int m = -n; m <= n; ++m) {
                const int am = std::abs(m);
                const double q = q_[tri(n, am)];
                double t, tx, ty;  // azimuthal factor and its x/y derivatives
                if (m == 0) {
                    t = 1.0;
                    tx = ty = 0.0;
                } else if (m > 0) {
                    t = r2 * c_[am];
                    tx = r2 * am * c_[am - 1];
                    ty = -r2 * am * s_[am - 1];
                } else {
                    t = r2 * s_[am];
                    tx = r2 * am * s_[am - 1];
                    ty = r2 * am * c_[am - 1];
                }
                const std::size_t idx = scalar_index(n, m + n + 1);
                vals[idx] = q * t;
                if (want_grad) {
                    const Vec3 g(q * tx, q * ty, dq_[tri(n, am)] * t);
                    grads[idx] = g - p * p.dot(g);
                }
            }
        }
    }

    int n_max_;
    std::vector<double> a_, b_, diag_, q_, dq_, c_, s_;
};

/// Y_nj(p) for a single index.
inline double eval_scalar_sh(int n, int j, const Vec3& p)
{
    if (n < 0 || n > kMaxDegree || j < 1 || j > 2 * n + 1) {
        throw InputError("scalar harmonic index (" + std::to_string(n) + "," + std::to_string(j) + ") out of range");
    }
    HarmonicEvaluator ev(n);
    std::vector<double> vals(scalar_count(n));
    ev.values(p, vals);
    return vals[scalar_index(n, j)];
}

/// y^(2)_nj(p) = λ_n^{-1/2} ∇_S Y_nj(p), y^(3)_nj(p) = y^(2)_nj(p) × p.
inline Vec3 eval_vector_sh(const BasisIndex& idx, const Vec3& p)
{
    if ((idx.vtype != 2 && idx.vtype != 3) || idx.n < 1 || idx.n > kMaxDegree || idx.j < 1 || idx.j > 2 * idx.n + 1) {
        throw InputError("vector harmonic index out of range");
    }
    HarmonicEvaluator ev(idx.n);
    std::vector<double> vals(scalar_count(idx.n));
    std::vector<Vec3> grads(scalar_count(idx.n));
    ev.values_and_gradients(p, vals, grads);
    const Vec3 g = grads[scalar_index(idx.n, idx.j)] / std::sqrt(eigenvalue(idx.n));
    return idx.vtype == 2 ? g : Vec3(g.cross(p.normalized()));
}

/// Coefficients of a scalar function over Y_nj, n = 0..n_max, indexed by
/// scalar_index(n, j).
struct ScalarCoeffs {
    int n_max = 0;
    std::vector<double> values;

    explicit ScalarCoeffs(int n = 0) : n_max(n), values(scalar_count(n), 0.0) {}

    double& at(int n, int j) { return values[scalar_index(n, j)]; }
    double at(int n, int j) const { return values[scalar_index(n, j)]; }
};

/// Σ c_nj Y_nj at each point.
inline std::vector<double> evaluate_at(const ScalarCoeffs& c, std::span<const Vec3> points)
{
    std::vector<double> out(points.size());
    parallel::for_chunks(0, points.size(), 512, [&](std::size_t lo, std::size_t hi) {
        HarmonicEvaluator ev(c.n_max);
        std::vector<double> vals(scalar_count(c.n_max));
        for (std::size_t v = lo; v < hi; ++v) {
            ev.values(points[v], vals);
            double acc = 0.0;
            for (std::size_t s = 0; s < vals.size(); ++s) acc += c.values[s] * vals[s];
            out[v] = acc;
        }
    });
    return out;
}

/// Y_nj at every vertex: row v holds all scalar harmonics up to n_max.
inline RowMatrix vertex_harmonics(const TriMesh& mesh, int n_max)
{
    RowMatrix out(static_cast<Eigen::Index>(mesh.vertices.size()), static_cast<Eigen::Index>(scalar_count(n_max)));
    parallel::for_chunks(0, mesh.vertices.size(), 512, [&](std::size_t lo, std::size_t hi) {
        HarmonicEvaluator ev(n_max);
        for (std::size_t v = lo; v < hi; ++v) {
            ev.values(mesh.vertices[v], std::span<double>(out.row(static_cast<Eigen::Index>(v)).data(),
                                                         static_cast<std::size_t>(out.cols())));
        }
    });
    return out;
}

/// ŷ_p on one triangle for all p in canonical order: the PL surface gradient
/// of the interpolated Y_nj scaled by λ_n^{-1/2}; type 3 is crossed with the
/// flat-triangle normal.
inline void triangle_basis(const TriangleGeom& g, const double* y0, const double* y1, const double* y2,
                           const BasisSpec& spec, std::span<Vec3> out)
{
    std::size_t p = 0;
    for (int n = 1; n <= spec.n_max; ++n) {
        const double inv_sqrt_lambda = 1.0 / std::sqrt(eigenvalue(n));
        const std::size_t width = static_cast<std::size_t>(2 * n + 1);
        for (std::size_t j = 0; j < width; ++j) {
            const std::size_t s = static_cast<std::size_t>(n * n) + j;
            out[p + j] = pl_gradient_on_triangle(g, y0[s], y1[s], y2[s]) * inv_sqrt_lambda;
            out[p + width + j] = out[p + j].cross(g.normal);
        }
        p += 2 * width;
    }
}

/// Per-triangle constant vectors ŷ_p, triangle-major.
struct BasisTable {
    BasisSpec spec;
    std::size_t faces = 0;
    std::vector<Vec3> values;

    const Vec3& at(std::size_t face, std::size_t p) const { return values[face * spec.dim() + p]; }
    std::span<const Vec3> row(std::size_t face) const { return {values.data() + face * spec.dim(), spec.dim()}; }
};

inline constexpr std::size_t kDefaultTableBudgetBytes = std::size_t{4} << 30;

inline BasisTable mesh_basis(const TriMesh& mesh, const std::vector<TriangleGeom>& geom, const BasisSpec& spec,
                             std::size_t budget_bytes = kDefaultTableBudgetBytes)
{
    const std::size_t bytes = mesh.faces.size() * spec.dim() * sizeof(Vec3);
    if (bytes > budget_bytes) {
        throw InputError("basis table needs " + std::to_string(bytes >> 20) + " MiB, above the budget of " +
                         std::to_string(budget_bytes >> 20) + " MiB");
    }
    if (geom.size() != mesh.faces.size()) throw InputError("geometry does not match mesh");
    const RowMatrix yv = vertex_harmonics(mesh, spec.n_max);
    BasisTable table{spec, mesh.faces.size(), std::vector<Vec3>(mesh.faces.size() * spec.dim())};
    parallel::for_each_index(0, mesh.faces.size(), 256, [&](std::size_t f) {
        const auto& t = mesh.faces[f];
        triangle_basis(geom[f], yv.row(t[0]).data(), yv.row(t[1]).data(), yv.row(t[2]).data(), spec,
                       std::span<Vec3>(table.values.data() + f * spec.dim(), spec.dim()));
    });
    return table;
}

inline BasisTable mesh_basis(const TriMesh& mesh, const BasisSpec& spec,
                             std::size_t budget_bytes = kDefaultTableBudgetBytes)
{
    return mesh_basis(mesh, mesh_geometry(mesh), spec, budget_bytes);
}

/// Area-weighted Gram matrix ⟨ŷ_p, ŷ_q⟩ = Σ_i A_i ŷ_p|T_i · ŷ_q|T_i.
inline Matrix discrete_gram(const BasisTable& table, const std::vector<TriangleGeom>& geom)
{
    const std::size_t dim = table.spec.dim();
    Matrix gram = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    // basis-major copy, one contiguous row of faces per (p, component)
    RowMatrix cols(static_cast<Eigen::Index>(3 * dim), static_cast<Eigen::Index>(table.faces));
    for (std::size_t f = 0; f < table.faces; ++f) {
        for (std::size_t p = 0; p < dim; ++p) {
            for (int c = 0; c < 3; ++c) cols(static_cast<Eigen::Index>(3 * p + c), static_cast<Eigen::Index>(f)) = table.at(f, p)[c];
        }
    }
    parallel::for_each_index(0, dim, 4, [&](std::size_t p) {
        const double* px = cols.row(static_cast<Eigen::Index>(3 * p)).data();
        const double* py = cols.row(static_cast<Eigen::Index>(3 * p + 1)).data();
        const double* pz = cols.row(static_cast<Eigen::Index>(3 * p + 2)).data();
        for (std::size_t q = p; q < dim; ++q) {
            const double* qx = cols.row(static_cast<Eigen::Index>(3 * q)).data();
            const double* qy = cols.row(static_cast<Eigen::Index>(3 * q + 1)).data();
            const double* qz = cols.row(static_cast<Eigen::Index>(3 * q + 2)).data();
            double acc = 0.0;
            for (std::size_t f = 0; f < table.faces; ++f) acc += (px[f] * qx[f] + py[f] * qy[f] + pz[f] * qz[f]) * geom[f].area;
            gram(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) = acc;
        }
    });
    for (std::size_t p = 0; p < dim; ++p) {
        for (std::size_t q = 0; q < p; ++q) {
            gram(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) =
                gram(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(p));
        }
    }
    return gram;
}

}  // namespace sphflow
