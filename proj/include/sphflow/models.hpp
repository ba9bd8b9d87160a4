#pragma once

// Variational flow models: single field, u+v split and the hierarchical
// multiscale scheme, plus evaluation of the discrete data term.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "sphflow/assembly.hpp"
#include "sphflow/core.hpp"
#include "sphflow/krylov.hpp"
#include "sphflow/parallel.hpp"
#include "sphflow/spectral.hpp"

namespace sphflow {

struct FlowEstimate {
    CoeffVector coeffs;
    SolveReport report;
    WeightSequence weights;
};

struct UVDecomposition {
    CoeffVector u;
    CoeffVector v;
    SolveReport report;
};

struct Hierarchy {
    std::vector<CoeffVector> steps;        // u_k
    std::vector<CoeffVector> accumulated;  // u^(k) = Σ_{i<=k} u_i
    std::vector<SolveReport> reports;
    std::vector<double> data_terms;        // D(u^(k))
    WeightSequence schedule;
};

/// Ready-made ingredients of the linear systems for one frame pair.
struct FlowProblem {
    const QuadratureTable* qt = nullptr;
    DataOperator a;
    Vector b;

    explicit FlowProblem(const QuadratureTable& table, DataOperator::Mode mode = DataOperator::Mode::automatic)
        : qt(&table), a(table, mode), b(assemble_b(table))
    {
    }
};

/// Solves (A + D) w = rhs.
inline CoeffVector solve_regularized(const FlowProblem& prob, const Vector& d, const Vector& rhs,
                                     const SolverOptions& opt, SolveReport& report)
{
    require_positive_weights(d, "regularisation weights");
    const RegularizedOperator op(prob.a, d);
    return CoeffVector(prob.qt->spec, krylov_solve(op, rhs, opt, report));
}

/// Minimiser of D(u, F) + ‖u‖²_μ over the basis span.
inline FlowEstimate estimate_flow(const FlowProblem& prob, const WeightSequence& w, const SolverOptions& opt = {})
{
    FlowEstimate est;
    est.weights = w;
    est.coeffs = solve_regularized(prob, weights(w, prob.qt->spec), prob.b, opt, est.report);
    return est;
}

/// Σ_i A_i (q_i·c + m_i)² with m_i the triangle mean of ∂tF̂.
inline double data_term(const QuadratureTable& qt, const CoeffVector& c)
{
    if (!(c.spec == qt.spec)) throw InputError("data_term: coefficient basis does not match the quadrature table");
    const std::size_t faces = qt.faces();
    const std::size_t block = 512;
    const std::size_t blocks = std::max<std::size_t>(1, (faces + block - 1) / block);
    std::vector<Vector> parts(blocks, Vector::Zero(1));
    parallel::for_each_index(0, blocks, 1, [&](std::size_t blk) {
        double acc = 0.0;
        const std::size_t hi = std::min(faces, (blk + 1) * block);
        for (std::size_t i = blk * block; i < hi; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            const double area = qt.areas[ii];
            const double r = qt.q.row(ii).dot(c.values) + qt.bvals[ii] / area;
            acc += area * r * r;
        }
        parts[blk][0] = acc;
    });
    return parallel::pairwise_sum(parts)[0];
}

/// Minimiser of D(u + v, F) + ‖u‖²_μ + ‖v‖²_ν.
inline UVDecomposition solve_uv(const FlowProblem& prob, const WeightSequence& wu, const WeightSequence& wv,
                                const SolverOptions& opt = {})
{
    const BasisSpec& spec = prob.qt->spec;
    const BlockSystem sys(prob.a, weights(wu, spec), weights(wv, spec));
    UVDecomposition out;
    const Vector x = krylov_solve(sys, BlockSystem::rhs(prob.b), opt, out.report);
    const auto n = static_cast<Eigen::Index>(spec.dim());
    out.u = CoeffVector(spec, x.head(n));
    out.v = CoeffVector(spec, x.tail(n));
    return out;
}

struct HierarchyOptions {
    int steps = 1;
    SolverOptions solver;
    std::optional<SolverOptions> first_step;  // replaces `solver` for k = 1
};

/// Settings used for the first step when the long first solve is requested.
inline SolverOptions long_first_step(SolverOptions base)
{
    base.max_iter = 1000;
    base.tol = 0.025;
    return base;
}

/// u_k solves (A + D^(k)) u_k = b - A u^(k-1) with D^(k) = diag(mu[k-1]);
/// the weights must not increase from one step to the next.
inline Hierarchy solve_hierarchical(const FlowProblem& prob, const std::vector<Vector>& mu,
                                    const HierarchyOptions& opt)
{
    if (opt.steps < 1) throw InputError("hierarchical scheme needs at least one step");
    if (mu.size() < static_cast<std::size_t>(opt.steps)) throw InputError("weight schedule has fewer entries than steps");
    const BasisSpec& spec = prob.qt->spec;
    for (int k = 2; k <= opt.steps; ++k) {
        const Vector& prev = mu[static_cast<std::size_t>(k - 2)];
        const Vector& cur = mu[static_cast<std::size_t>(k - 1)];
        if (cur.size() != prev.size() || (cur.array() > prev.array()).any()) {
            throw InputError("weight schedule increases between steps " + std::to_string(k - 1) + " and " +
                             std::to_string(k));
        }
    }
    Hierarchy h;
    CoeffVector total(spec);
    for (int k = 1; k <= opt.steps; ++k) {
        const SolverOptions& so = (k == 1 && opt.first_step) ? *opt.first_step : opt.solver;
        const Vector rhs = k == 1 ? prob.b : hierarchical_rhs(prob.b, prob.a, total);
        SolveReport rep;
        CoeffVector uk = solve_regularized(prob, mu[static_cast<std::size_t>(k - 1)], rhs, so, rep);
        if (k == 1) {
            total = uk;
        } else {
            total.values += uk.values;
        }
        h.steps.push_back(std::move(uk));
        h.accumulated.push_back(total);
        h.reports.push_back(rep);
        h.data_terms.push_back(data_term(*prob.qt, total));
    }
    return h;
}

inline Hierarchy solve_hierarchical(const FlowProblem& prob, const WeightSequence& schedule,
                                    const HierarchyOptions& opt)
{
    if (opt.steps < 1) throw InputError("hierarchical scheme needs at least one step");
    std::vector<Vector> mu;
    for (int k = 1; k <= opt.steps; ++k) mu.push_back(weights(schedule.at_step(k), prob.qt->spec));
    Hierarchy h = solve_hierarchical(prob, mu, opt);
    h.schedule = schedule;
    return h;
}

}  // namespace sphflow
