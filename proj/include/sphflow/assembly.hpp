#pragma once

// Galerkin systems of the optical flow functional: quadrature table, the data
// matrix A, right-hand side b, matrix-free products and the u+v block system.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sphflow/core.hpp"
#include "sphflow/fields.hpp"
#include "sphflow/harmonics.hpp"
#include "sphflow/mesh.hpp"
#include "sphflow/parallel.hpp"
#include "sphflow/spectral.hpp"

namespace sphflow {

/// Which frame supplies the spatial gradient of the data.
enum class GradientAnchor { first, average };

/// q_ip = ∇F̂|T_i · ŷ_p|T_i, areas A_i and bvals_i = (A_i/3) Σ_j ∂tF̂(v_ij).
struct QuadratureTable {
    BasisSpec spec;
    RowMatrix q;  // faces × dim
    Vector areas;
    Vector bvals;

    std::size_t faces() const { return static_cast<std::size_t>(q.rows()); }
    std::size_t dim() const { return spec.dim(); }
};

namespace detail {

inline std::vector<Vec3> anchor_gradient(const TriMesh& mesh, const std::vector<TriangleGeom>& geom,
                                         const ScalarFrame& f0, const ScalarFrame& f1, GradientAnchor anchor)
{
    if (anchor == GradientAnchor::first) return pl_gradient(mesh, geom, f0);
    ScalarFrame mid{std::vector<double>(f0.values.size())};
    for (std::size_t v = 0; v < mid.values.size(); ++v) mid.values[v] = 0.5 * (f0.values[v] + f1.values[v]);
    return pl_gradient(mesh, geom, mid);
}

inline QuadratureTable quadrature_skeleton(const TriMesh& mesh, const std::vector<TriangleGeom>& geom,
                                           const ScalarFrame& f0, const ScalarFrame& f1, const BasisSpec& spec)
{
    require_frame_on(f0, mesh, "first frame");
    require_frame_on(f1, mesh, "second frame");
    if (geom.size() != mesh.faces.size()) throw InputError("geometry does not match mesh");
    QuadratureTable qt;
    qt.spec = spec;
    qt.q.resize(static_cast<Eigen::Index>(mesh.faces.size()), static_cast<Eigen::Index>(spec.dim()));
    qt.areas.resize(static_cast<Eigen::Index>(mesh.faces.size()));
    qt.bvals.resize(static_cast<Eigen::Index>(mesh.faces.size()));
    const ScalarFrame dt = time_derivative(f0, f1);
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
        const auto& t = mesh.faces[i];
        const auto ii = static_cast<Eigen::Index>(i);
        qt.areas[ii] = geom[i].area;
        qt.bvals[ii] = geom[i].area / 3.0 * (dt.values[t[0]] + dt.values[t[1]] + dt.values[t[2]]);
    }
    return qt;
}

}  // namespace detail

/// Quadrature table from a precomputed basis table.
inline QuadratureTable build_quadrature(const TriMesh& mesh, const std::vector<TriangleGeom>& geom,
                                        const ScalarFrame& f0, const ScalarFrame& f1, const BasisTable& table,
                                        GradientAnchor anchor = GradientAnchor::first)
{
    if (table.faces != mesh.faces.size()) throw InputError("basis table does not match mesh");
    QuadratureTable qt = detail::quadrature_skeleton(mesh, geom, f0, f1, table.spec);
    const auto grad = detail::anchor_gradient(mesh, geom, f0, f1, anchor);
    const std::size_t dim = table.spec.dim();
    parallel::for_each_index(0, mesh.faces.size(), 256, [&](std::size_t i) {
        double* row = qt.q.row(static_cast<Eigen::Index>(i)).data();
        const Vec3* y = table.values.data() + i * dim;
        for (std::size_t p = 0; p < dim; ++p) row[p] = grad[i].dot(y[p]);
    });
    return qt;
}

/// Quadrature table computing ŷ_p triangle by triangle, without storing the
/// basis table. Bitwise identical to the table path.
inline QuadratureTable build_quadrature_streamed(const TriMesh& mesh, const std::vector<TriangleGeom>& geom,
                                                 const ScalarFrame& f0, const ScalarFrame& f1, const BasisSpec& spec,
                                                 GradientAnchor anchor = GradientAnchor::first)
{
    QuadratureTable qt = detail::quadrature_skeleton(mesh, geom, f0, f1, spec);
    const auto grad = detail::anchor_gradient(mesh, geom, f0, f1, anchor);
    const RowMatrix yv = vertex_harmonics(mesh, spec.n_max);
    const std::size_t dim = spec.dim();
    parallel::for_chunks(0, mesh.faces.size(), 256, [&](std::size_t lo, std::size_t hi) {
        std::vector<Vec3> y(dim);
        for (std::size_t i = lo; i < hi; ++i) {
            const auto& t = mesh.faces[i];
            triangle_basis(geom[i], yv.row(t[0]).data(), yv.row(t[1]).data(), yv.row(t[2]).data(), spec, y);
            double* row = qt.q.row(static_cast<Eigen::Index>(i)).data();
            for (std::size_t p = 0; p < dim; ++p) row[p] = grad[i].dot(y[p]);
        }
    });
    return qt;
}

inline QuadratureTable build_quadrature(const TriMesh& mesh, const ScalarFrame& f0, const ScalarFrame& f1,
                                        const BasisSpec& spec, GradientAnchor anchor = GradientAnchor::first)
{
    return build_quadrature_streamed(mesh, mesh_geometry(mesh), f0, f1, spec, anchor);
}

inline constexpr std::size_t kDenseLimit = 4096;
inline constexpr std::size_t kDefaultDenseBudgetBytes = std::size_t{4} << 30;

/// a_pq = Σ_i q_ip q_iq A_i, summed in triangle order; upper triangle mirrored.
inline Matrix assemble_A(const QuadratureTable& qt, std::size_t budget_bytes = kDefaultDenseBudgetBytes)
{
    const std::size_t dim = qt.dim();
    if (dim * dim * sizeof(double) > budget_bytes) {
        throw InputError("dense system of dimension " + std::to_string(dim) +
                         " exceeds the memory budget; use matrix-free mode");
    }
    const auto d = static_cast<Eigen::Index>(dim);
    Matrix a = Matrix::Zero(d, d);
    const std::size_t faces = qt.faces();
    parallel::for_chunks(0, dim, 8, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> acc(dim);
        for (std::size_t p = lo; p < hi; ++p) {
            std::fill(acc.begin() + static_cast<std::ptrdiff_t>(p), acc.end(), 0.0);
            for (std::size_t i = 0; i < faces; ++i) {
                const double* row = qt.q.row(static_cast<Eigen::Index>(i)).data();
                const double qip = row[p];
                const double ai = qt.areas[static_cast<Eigen::Index>(i)];
                for (std::size_t q = p; q < dim; ++q) acc[q] += qip * row[q] * ai;
            }
            for (std::size_t q = p; q < dim; ++q) a(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) = acc[q];
        }
    });
    for (Eigen::Index p = 0; p < d; ++p) {
        for (Eigen::Index q = 0; q < p; ++q) a(p, q) = a(q, p);
    }
    return a;
}

/// b_p = -Σ_i q_ip bvals_i, summed in triangle order.
inline Vector assemble_b(const QuadratureTable& qt)
{
    const std::size_t dim = qt.dim();
    Vector b = Vector::Zero(static_cast<Eigen::Index>(dim));
    parallel::for_chunks(0, dim, 64, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = 0; i < qt.faces(); ++i) {
            const double* row = qt.q.row(static_cast<Eigen::Index>(i)).data();
            const double bi = qt.bvals[static_cast<Eigen::Index>(i)];
            for (std::size_t p = lo; p < hi; ++p) b[static_cast<Eigen::Index>(p)] -= row[p] * bi;
        }
    });
    return b;
}

namespace detail {
inline constexpr std::size_t kApplyBlock = 512;
}

/// A x = qᵀ (areas ⊙ (q x)) without forming A. Triangles are processed in
/// fixed blocks whose partial sums are combined by a fixed pairwise tree.
inline Vector apply_A(const QuadratureTable& qt, const Vector& x)
{
    if (static_cast<std::size_t>(x.size()) != qt.dim()) throw InputError("apply_A: vector length mismatch");
    const std::size_t faces = qt.faces();
    const std::size_t blocks = std::max<std::size_t>(1, (faces + detail::kApplyBlock - 1) / detail::kApplyBlock);
    std::vector<Vector> parts(blocks, Vector::Zero(x.size()));
    parallel::for_each_index(0, blocks, 1, [&](std::size_t blk) {
        Vector& acc = parts[blk];
        const std::size_t hi = std::min(faces, (blk + 1) * detail::kApplyBlock);
        for (std::size_t i = blk * detail::kApplyBlock; i < hi; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            const double t = qt.q.row(ii).dot(x) * qt.areas[ii];
            acc += t * qt.q.row(ii).transpose();
        }
    });
    return parallel::pairwise_sum(parts);
}

/// The data matrix A, held dense or applied from the quadrature table.
class DataOperator {
public:
    enum class Mode { automatic, dense, matrix_free };

    DataOperator(const QuadratureTable& qt, Mode mode = Mode::automatic) : qt_(&qt)
    {
        const bool dense = mode == Mode::dense || (mode == Mode::automatic && qt.dim() <= kDenseLimit);
        if (dense) dense_ = assemble_A(qt);
    }

    bool is_dense() const { return dense_.has_value(); }
    std::size_t dim() const { return qt_->dim(); }
    const QuadratureTable& table() const { return *qt_; }
    const Matrix* matrix() const { return dense_ ? &*dense_ : nullptr; }

    Vector apply(const Vector& x) const
    {
        if (dense_) return (*dense_) * x;
        return apply_A(*qt_, x);
    }

private:
    const QuadratureTable* qt_;
    std::optional<Matrix> dense_;
};

inline void require_positive_weights(const Vector& w, const char* what)
{
    if (w.size() == 0 || !(w.minCoeff() > 0.0) || !w.allFinite()) {
        throw InputError(std::string(what) + " must be positive and finite");
    }
}

/// (A + D) for the single-field model.
class RegularizedOperator {
public:
    RegularizedOperator(const DataOperator& a, Vector d) : a_(&a), d_(std::move(d))
    {
        if (static_cast<std::size_t>(d_.size()) != a.dim()) throw InputError("weight vector length mismatch");
    }

    std::size_t dim() const { return a_->dim(); }
    Vector apply(const Vector& x) const { return a_->apply(x) + d_.cwiseProduct(x); }

private:
    const DataOperator* a_;
    Vector d_;
};

/// [[A + D1, A], [A, A + D2]] acting on (u; v); A(u+v) is applied once.
class BlockSystem {
public:
    BlockSystem(const DataOperator& a, Vector d1, Vector d2) : a_(&a), d1_(std::move(d1)), d2_(std::move(d2))
    {
        require_positive_weights(d1_, "weights of u");
        require_positive_weights(d2_, "weights of v");
        if (static_cast<std::size_t>(d1_.size()) != a.dim() || static_cast<std::size_t>(d2_.size()) != a.dim()) {
            throw InputError("block system: weight vector length mismatch");
        }
    }

    std::size_t dim() const { return 2 * a_->dim(); }

    Vector apply(const Vector& x) const
    {
        const auto n = static_cast<Eigen::Index>(a_->dim());
        const Vector au = a_->apply(x.head(n) + x.tail(n));
        Vector y(2 * n);
        y.head(n) = au + d1_.cwiseProduct(x.head(n));
        y.tail(n) = au + d2_.cwiseProduct(x.tail(n));
        return y;
    }

    static Vector rhs(const Vector& b)
    {
        Vector r(2 * b.size());
        r << b, b;
        return r;
    }

    Matrix to_dense() const
    {
        const auto n = static_cast<Eigen::Index>(a_->dim());
        const Matrix a = a_->matrix() ? *a_->matrix() : assemble_A(a_->table());
        Matrix m(2 * n, 2 * n);
        m << a, a, a, a;
        m.topLeftCorner(n, n).diagonal() += d1_;
        m.bottomRightCorner(n, n).diagonal() += d2_;
        return m;
    }

private:
    const DataOperator* a_;
    Vector d1_;
    Vector d2_;
};

/// b - A c_prev.
inline Vector hierarchical_rhs(const Vector& b, const DataOperator& a, const CoeffVector& c_prev)
{
    if (c_prev.values.size() != b.size()) throw InputError("hierarchical rhs: length mismatch");
    return b - a.apply(c_prev.values);
}

}  // namespace sphflow
