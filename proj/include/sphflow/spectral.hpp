#pragma once

// Coefficient-space calculus over the tangential basis: Sobolev weights and
// norms, synthesis/analysis against per-triangle fields, Helmholtz split.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sphflow/core.hpp"
#include "sphflow/harmonics.hpp"
#include "sphflow/mesh.hpp"
#include "sphflow/parallel.hpp"

namespace sphflow {

/// Coefficients of a tangent field over the canonical basis of `spec`.
struct CoeffVector {
    BasisSpec spec;
    Vector values;

    CoeffVector() = default;
    explicit CoeffVector(const BasisSpec& s) : spec(s), values(Vector::Zero(static_cast<Eigen::Index>(s.dim()))) {}
    CoeffVector(const BasisSpec& s, Vector v) : spec(s), values(std::move(v))
    {
        if (static_cast<std::size_t>(values.size()) != spec.dim()) {
            throw InputError("coefficient vector has " + std::to_string(values.size()) + " entries, basis needs " +
                             std::to_string(spec.dim()));
        }
    }

    double& operator[](const BasisIndex& b) { return values[static_cast<Eigen::Index>(spec.index_of(b))]; }
    double operator[](const BasisIndex& b) const { return values[static_cast<Eigen::Index>(spec.index_of(b))]; }
};

/// One tangent vector per triangle.
struct TriField {
    std::vector<Vec3> vectors;
};

enum class WeightKind { power, halving, exponent };

inline std::string to_string(WeightKind k)
{
    switch (k) {
    case WeightKind::power: return "power";
    case WeightKind::halving: return "halving";
    case WeightKind::exponent: return "exponent";
    }
    return "?";
}

/// Regularisation weights μ_n as a function of degree.
///   power:    α λ_n^s
///   halving:  2^{1-k} α λ_n^s
///   exponent: α λ_n^{s - (k-1)/4}
struct WeightSequence {
    WeightKind kind = WeightKind::power;
    double alpha = 1.0;
    double s = 1.0;
    int step = 1;

    double at_degree(int n) const
    {
        const double lambda = eigenvalue(n);
        switch (kind) {
        case WeightKind::power: return alpha * std::pow(lambda, s);
        case WeightKind::halving: return std::ldexp(1.0, 1 - step) * alpha * std::pow(lambda, s);
        case WeightKind::exponent: return alpha * std::pow(lambda, s - 0.25 * (step - 1));
        }
        return 0.0;
    }

    WeightSequence at_step(int k) const
    {
        WeightSequence w = *this;
        w.step = k;
        return w;
    }
};

/// μ_p for every basis position; both vtypes of a degree share the weight.
inline Vector weights(const WeightSequence& seq, const BasisSpec& spec)
{
    if (!(seq.alpha > 0.0) || !std::isfinite(seq.alpha)) {
        throw InputError("weight scale alpha must be positive, got " + format_double(seq.alpha));
    }
    if (seq.step < 1) throw InputError("weight schedule step must be >= 1");
    Vector out(static_cast<Eigen::Index>(spec.dim()));
    for (int n = 1; n <= spec.n_max; ++n) {
        const double mu = seq.at_degree(n);
        out.segment(static_cast<Eigen::Index>(BasisSpec::degree_offset(n)), 2 * (2 * n + 1)).setConstant(mu);
    }
    return out;
}

/// sqrt(Σ_p w_p c_p²).
inline double sobolev_norm(const CoeffVector& c, const Vector& w)
{
    if (c.values.size() != w.size()) throw InputError("sobolev_norm: weight and coefficient lengths differ");
    return std::sqrt((w.array() * c.values.array().square()).sum());
}

inline void require_table_matches(const CoeffVector& c, const BasisTable& table)
{
    if (!(c.spec == table.spec)) {
        throw InputError("basis mismatch: coefficients have n_max " + std::to_string(c.spec.n_max) +
                         ", basis table has n_max " + std::to_string(table.spec.n_max));
    }
}

/// Per-triangle Σ_p c_p ŷ_p.
inline TriField synthesize(const CoeffVector& c, const BasisTable& table)
{
    require_table_matches(c, table);
    TriField out{std::vector<Vec3>(table.faces)};
    const std::size_t dim = table.spec.dim();
    parallel::for_each_index(0, table.faces, 1024, [&](std::size_t f) {
        Vec3 acc = Vec3::Zero();
        const Vec3* row = table.values.data() + f * dim;
        for (std::size_t p = 0; p < dim; ++p) acc += c.values[static_cast<Eigen::Index>(p)] * row[p];
        out.vectors[f] = acc;
    });
    return out;
}

namespace detail {
inline constexpr std::size_t kReductionBlock = 512;
}

/// Discrete inner products c_p = Σ_i A_i f|T_i · ŷ_p|T_i (no Gram inversion).
inline CoeffVector analyze(const TriField& f, const BasisTable& table, const std::vector<TriangleGeom>& geom)
{
    if (f.vectors.size() != table.faces || geom.size() != table.faces) {
        throw InputError("analyze: field, geometry and basis table disagree on the triangle count");
    }
    const std::size_t dim = table.spec.dim();
    const std::size_t blocks = (table.faces + detail::kReductionBlock - 1) / detail::kReductionBlock;
    std::vector<Vector> parts(std::max<std::size_t>(blocks, 1), Vector::Zero(static_cast<Eigen::Index>(dim)));
    parallel::for_each_index(0, blocks, 1, [&](std::size_t b) {
        Vector& acc = parts[b];
        const std::size_t hi = std::min(table.faces, (b + 1) * detail::kReductionBlock);
        for (std::size_t i = b * detail::kReductionBlock; i < hi; ++i) {
            const Vec3 w = f.vectors[i] * geom[i].area;
            const Vec3* row = table.values.data() + i * dim;
            for (std::size_t p = 0; p < dim; ++p) acc[static_cast<Eigen::Index>(p)] += row[p].dot(w);
        }
    });
    return CoeffVector(table.spec, parallel::pairwise_sum(parts));
}

/// (curl-free part, divergence-free part): vtype-2 and vtype-3 entries.
inline std::pair<CoeffVector, CoeffVector> helmholtz_split(const CoeffVector& c)
{
    CoeffVector curl_free(c.spec);
    CoeffVector div_free(c.spec);
    for (int n = 1; n <= c.spec.n_max; ++n) {
        const auto off = static_cast<Eigen::Index>(BasisSpec::degree_offset(n));
        const Eigen::Index width = 2 * n + 1;
        curl_free.values.segment(off, width) = c.values.segment(off, width);
        div_free.values.segment(off + width, width) = c.values.segment(off + width, width);
    }
    return {std::move(curl_free), std::move(div_free)};
}

/// Scalar potential and stream function: the field equals
/// ∇_S(potential) + ∇_S(stream) × ν with coefficients c_p λ_n^{-1/2}.
inline std::pair<ScalarCoeffs, ScalarCoeffs> stream_potentials(const CoeffVector& c)
{
    ScalarCoeffs potential(c.spec.n_max);
    ScalarCoeffs stream(c.spec.n_max);
    for (int n = 1; n <= c.spec.n_max; ++n) {
        const double inv = 1.0 / std::sqrt(eigenvalue(n));
        for (int j = 1; j <= 2 * n + 1; ++j) {
            potential.at(n, j) = c[BasisIndex{2, n, j}] * inv;
            stream.at(n, j) = c[BasisIndex{3, n, j}] * inv;
        }
    }
    return {std::move(potential), std::move(stream)};
}

/// Σ over degrees of the squared coefficients, index n (entry 0 unused).
inline std::vector<double> degree_energy(const CoeffVector& c)
{
    std::vector<double> e(static_cast<std::size_t>(c.spec.n_max + 1), 0.0);
    for (int n = 1; n <= c.spec.n_max; ++n) {
        e[n] = c.values.segment(static_cast<Eigen::Index>(BasisSpec::degree_offset(n)), 2 * (2 * n + 1)).squaredNorm();
    }
    return e;
}

}  // namespace sphflow
