#pragma once

// Iterative solvers for the symmetric positive definite Galerkin systems.
// Operators are any type with `Vector apply(const Vector&) const` and
// `std::size_t dim() const`.

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "sphflow/core.hpp"

namespace sphflow {

enum class KrylovMethod { gmres, cg };

struct SolverOptions {
    KrylovMethod method = KrylovMethod::gmres;
    double tol = 0.02;
    int max_iter = 100;
    int restart = 50;
};

struct SolveReport {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
    double wall_time = 0.0;
    std::vector<double> history;  // relative residual estimate per iteration
};

namespace detail {

inline void check_options(const SolverOptions& opt)
{
    if (!(opt.tol > 0.0)) throw InputError("solver tolerance must be positive");
    if (opt.max_iter < 1) throw InputError("solver iteration limit must be >= 1");
    if (opt.restart < 1) throw InputError("GMRES restart length must be >= 1");
}

template <typename Op>
Vector checked_apply(const Op& op, const Vector& x)
{
    Vector y = op.apply(x);
    if (!y.allFinite()) throw NumericalError("non-finite value in operator output");
    return y;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Restarted GMRES from a zero initial guess (modified Gram-Schmidt, Givens
/// rotations). Convergence is always confirmed on the true residual.
template <typename Op>
Vector gmres(const Op& op, const Vector& rhs, const SolverOptions& opt, SolveReport& report)
{
    detail::check_options(opt);
    const auto t0 = std::chrono::steady_clock::now();
    const auto n = rhs.size();
    if (static_cast<std::size_t>(n) != op.dim()) throw InputError("solver: operator and rhs dimensions differ");
    report = {};
    Vector x = Vector::Zero(n);
    const double bnorm = rhs.norm();
    if (!std::isfinite(bnorm)) throw NumericalError("non-finite right-hand side");
    if (bnorm == 0.0) {
        report.converged = true;
        return x;
    }

    const int m = std::max(1, std::min<int>(opt.restart, static_cast<int>(n)));
    Vector r = rhs;
    double rel = 1.0;
    while (true) {
        const double beta = r.norm();
        rel = beta / bnorm;
        if (rel <= opt.tol || report.iterations >= opt.max_iter) break;

        std::vector<Vector> v;
        v.reserve(static_cast<std::size_t>(m) + 1);
        v.push_back(r / beta);
        Matrix h = Matrix::Zero(m + 1, m);
        Vector cs = Vector::Zero(m), sn = Vector::Zero(m), g = Vector::Zero(m + 1);
        g[0] = beta;
        int k = 0;
        for (; k < m && report.iterations < opt.max_iter; ++k) {
            Vector w = detail::checked_apply(op, v[static_cast<std::size_t>(k)]);
            for (int i = 0; i <= k; ++i) {
                h(i, k) = w.dot(v[static_cast<std::size_t>(i)]);
                w -= h(i, k) * v[static_cast<std::size_t>(i)];
            }
            h(k + 1, k) = w.norm();
            for (int i = 0; i < k; ++i) {
                const double t = cs[i] * h(i, k) + sn[i] * h(i + 1, k);
                h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
                h(i, k) = t;
            }
            const double denom = std::hypot(h(k, k), h(k + 1, k));
            if (denom == 0.0) throw NumericalError("GMRES breakdown: singular Hessenberg matrix");
            cs[k] = h(k, k) / denom;
            sn[k] = h(k + 1, k) / denom;
            const double hk1 = h(k + 1, k);
            h(k, k) = denom;
            h(k + 1, k) = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            ++report.iterations;
            const double est = std::abs(g[k + 1]) / bnorm;
            report.history.push_back(est);
            if (est <= opt.tol || hk1 <= 1e-14 * denom) {
                ++k;
                break;
            }
            v.push_back(w / hk1);
        }
        // y = H(0:k,0:k)^{-1} g(0:k), back substitution
        Vector y = g.head(k);
        for (int i = k - 1; i >= 0; --i) {
            for (int j = i + 1; j < k; ++j) y[i] -= h(i, j) * y[j];
            y[i] /= h(i, i);
        }
        for (int i = 0; i < k; ++i) x += y[i] * v[static_cast<std::size_t>(i)];
        r = rhs - detail::checked_apply(op, x);
    }
    report.relative_residual = rel;
    report.converged = rel <= opt.tol;
    report.wall_time = detail::seconds_since(t0);
    return x;
}

/// Conjugate gradients from a zero initial guess; final residual recomputed.
template <typename Op>
Vector conjugate_gradient(const Op& op, const Vector& rhs, const SolverOptions& opt, SolveReport& report)
{
    detail::check_options(opt);
    const auto t0 = std::chrono::steady_clock::now();
    const auto n = rhs.size();
    if (static_cast<std::size_t>(n) != op.dim()) throw InputError("solver: operator and rhs dimensions differ");
    report = {};
    Vector x = Vector::Zero(n);
    const double bnorm = rhs.norm();
    if (!std::isfinite(bnorm)) throw NumericalError("non-finite right-hand side");
    if (bnorm == 0.0) {
        report.converged = true;
        return x;
    }
    Vector r = rhs;
    Vector p = r;
    double rr = r.squaredNorm();
    while (report.iterations < opt.max_iter && std::sqrt(rr) / bnorm > opt.tol) {
        const Vector ap = detail::checked_apply(op, p);
        const double pap = p.dot(ap);
        if (!(pap > 0.0)) throw NumericalError("conjugate gradients: operator is not positive definite");
        const double alpha = rr / pap;
        x += alpha * p;
        r -= alpha * ap;
        const double rr_next = r.squaredNorm();
        p = r + (rr_next / rr) * p;
        rr = rr_next;
        ++report.iterations;
        report.history.push_back(std::sqrt(rr) / bnorm);
    }
    report.relative_residual = (rhs - detail::checked_apply(op, x)).norm() / bnorm;
    report.converged = report.relative_residual <= opt.tol;
    report.wall_time = detail::seconds_since(t0);
    return x;
}

template <typename Op>
Vector krylov_solve(const Op& op, const Vector& rhs, const SolverOptions& opt, SolveReport& report)
{
    return opt.method == KrylovMethod::cg ? conjugate_gradient(op, rhs, opt, report) : gmres(op, rhs, opt, report);
}

inline std::string to_string(KrylovMethod m) { return m == KrylovMethod::cg ? "cg" : "gmres"; }

}  // namespace sphflow
