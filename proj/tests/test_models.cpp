#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace sphflow;

namespace {

const oracle::RotationFixture& fixture()
{
    static const oracle::RotationFixture fx = oracle::rotation_fixture();
    return fx;
}

const SolverOptions kTight{KrylovMethod::gmres, 1e-10, 3000, 50};

double energy_fraction_low(const CoeffVector& c, int n_cut)
{
    const auto e = degree_energy(c);
    double low = 0.0, all = 0.0;
    for (std::size_t n = 1; n < e.size(); ++n) {
        all += e[n];
        if (static_cast<int>(n) <= n_cut) low += e[n];
    }
    return low / all;
}

int median_degree(const CoeffVector& c)
{
    const auto e = degree_energy(c);
    double all = 0.0;
    for (double v : e) all += v;
    double acc = 0.0;
    for (std::size_t n = 1; n < e.size(); ++n) {
        acc += e[n];
        if (acc >= 0.5 * all) return static_cast<int>(n);
    }
    return static_cast<int>(e.size()) - 1;
}

}  // namespace

TEST(EstimateFlow, ZeroRhsGivesZeroFlow)
{
    const auto& fx = fixture();
    const auto qt = build_quadrature(fx.mesh, fx.truth.frame0, fx.truth.frame0, fx.spec);
    const FlowProblem prob(qt);
    const auto est = estimate_flow(prob, {WeightKind::power, 1.0, 1.0, 1});
    EXPECT_EQ(est.coeffs.values.norm(), 0.0);
    EXPECT_TRUE(est.report.converged);
}

TEST(EstimateFlow, NormDecreasesWithWeightScale)
{
    const auto& fx = fixture();
    const FlowProblem prob(fx.qt);
    double prev = std::numeric_limits<double>::infinity();
    for (double t : {1.0, 10.0, 100.0}) {
        const double n = estimate_flow(prob, {WeightKind::power, 0.01 * t, 1.0, 1}, kTight).coeffs.values.norm();
        EXPECT_LT(n, prev);
        prev = n;
    }
}

TEST(EstimateFlow, SolvesRegularizedSystem)
{
    const auto& fx = fixture();
    const FlowProblem prob(fx.qt);
    const WeightSequence w{WeightKind::power, 0.01, 1.0, 1};
    const auto est = estimate_flow(prob, w);
    EXPECT_TRUE(est.report.converged);
    EXPECT_LE(est.report.relative_residual, 0.02);
    const Matrix m = assemble_A(fx.qt) + Matrix(weights(w, fx.spec).asDiagonal());
    EXPECT_NEAR((m * est.coeffs.values - prob.b).norm() / prob.b.norm(), est.report.relative_residual, 1e-12);
}

TEST(EstimateFlow, RecoversRotation)
{
    const auto& fx = fixture();
    const FlowProblem prob(fx.qt);
    const auto est = estimate_flow(prob, {WeightKind::power, 0.01, 1.0, 1});
    const double err = (est.coeffs.values - fx.truth.true_flow.values).norm() / fx.truth.true_flow.values.norm();
    EXPECT_LE(err, 0.2);
}

TEST(EstimateFlow, MinimiserOfRotationIsToroidal)
{
    const auto& fx = fixture();
    const auto est = estimate_flow(FlowProblem(fx.qt), {WeightKind::power, 0.01, 1.0, 1}, kTight);
    const auto [curl_free, div_free] = helmholtz_split(est.coeffs);
    EXPECT_LE(curl_free.values.norm(), 0.05 * div_free.values.norm());
    EXPECT_LE((est.coeffs.values - fx.truth.true_flow.values).norm(), 0.2 * fx.truth.true_flow.values.norm());
}

TEST(EstimateFlow, InvariantUnderJointScaling)
{
    const auto& fx = fixture();
    const double t = 4.0;
    ScalarFrame g0 = fx.truth.frame0, g1 = fx.truth.frame1;
    for (double& v : g0.values) v *= t;
    for (double& v : g1.values) v *= t;
    const auto qt = build_quadrature_streamed(fx.mesh, fx.geom, g0, g1, fx.spec);
    const auto a = estimate_flow(FlowProblem(fx.qt), {WeightKind::power, 0.01, 1.0, 1}, kTight);
    const auto b = estimate_flow(FlowProblem(qt), {WeightKind::power, 0.01 * t * t, 1.0, 1}, kTight);
    EXPECT_LE((a.coeffs.values - b.coeffs.values).norm(), 1e-8 * a.coeffs.values.norm());
}

TEST(EstimateFlow, GmresAndCgAgree)
{
    const auto& fx = fixture();
    const FlowProblem prob(fx.qt);
    const WeightSequence w{WeightKind::power, 0.01, 1.0, 1};
    const auto g = estimate_flow(prob, w, {KrylovMethod::gmres, 0.02, 100, 50});
    const auto c = estimate_flow(prob, w, {KrylovMethod::cg, 0.02, 100, 50});
    EXPECT_TRUE(g.report.converged);
    EXPECT_TRUE(c.report.converged);
    EXPECT_LE((g.coeffs.values - c.coeffs.values).norm(), 10 * 0.02 * c.coeffs.values.norm());
}

TEST(DataTerm, ZeroFlowAndEqualFrames)
{
    const auto& fx = fixture();
    double expect = 0.0;
    for (Eigen::Index i = 0; i < fx.qt.areas.size(); ++i) {
        const double m = fx.qt.bvals[i] / fx.qt.areas[i];
        expect += fx.qt.areas[i] * m * m;
    }
    EXPECT_NEAR(data_term(fx.qt, CoeffVector(fx.spec)), expect, 1e-14 * expect);
    const auto same = build_quadrature(fx.mesh, fx.truth.frame0, fx.truth.frame0, fx.spec);
    EXPECT_EQ(data_term(same, CoeffVector(fx.spec)), 0.0);
}

TEST(DataTerm, QuadraticExpansion)
{
    const auto& fx = fixture();
    const Matrix a = assemble_A(fx.qt);
    const Vector b = assemble_b(fx.qt);
    const double d0 = data_term(fx.qt, CoeffVector(fx.spec));
    for (int t = 0; t < 3; ++t) {
        CoeffVector c(fx.spec);
        for (Eigen::Index p = 0; p < c.values.size(); ++p) c.values[p] = 0.01 * std::sin(0.7 * p + t);
        const double expect = c.values.dot(a * c.values) - 2 * b.dot(c.values) + d0;
        EXPECT_NEAR(data_term(fx.qt, c), expect, 1e-10);
    }
    EXPECT_THROW(data_term(fx.qt, CoeffVector(make_basis_spec(3))), InputError);
}

TEST(SolveUV, IdenticalWeightsSplitEvenly)
{
    const auto& fx = fixture();
    const FlowProblem prob(fx.qt);
    const WeightSequence w{WeightKind::power, 0.02, 1.0, 1};
    const auto uv = solve_uv(prob, w, w, kTight);
    EXPECT_LE((uv.u.values - uv.v.values).cwiseAbs().maxCoeff(), 1e-8);
    const auto single = estimate_flow(prob, {WeightKind::power, 0.01, 1.0, 1}, kTight);
    EXPECT_LE((uv.u.values + uv.v.values - single.coeffs.values).norm(), 1e-8 * single.coeffs.values.norm());
}

TEST(SolveUV, StiffSecondComponentVanishes)
{
    const auto& fx = fixture();
    const FlowProblem prob(fx.qt);
    const WeightSequence wu{WeightKind::power, 0.01, 1.0, 1};
    const WeightSequence wv{WeightKind::power, 0.01 * 1e6, 1.0, 1};
    const auto uv = solve_uv(prob, wu, wv, kTight);
    EXPECT_LE(uv.v.values.norm(), 1e-3 * uv.u.values.norm());
    const auto single = estimate_flow(prob, wu, kTight);
    EXPECT_LE((uv.u.values - single.coeffs.values).norm(), 1e-3 * single.coeffs.values.norm());
}

TEST(SolveUV, SmoothAndOscillatoryParts)
{
    // r = 1, s = -1, α = 0.1, β = 1e6
    const auto& fx = fixture();
    const FlowProblem prob(fx.qt);
    const auto uv = solve_uv(prob, {WeightKind::power, 1e-1, 1.0, 1}, {WeightKind::power, 1e6, -1.0, 1});
    EXPECT_GE(energy_fraction_low(uv.u, 5), 0.8);
    EXPECT_GT(median_degree(uv.v), median_degree(uv.u));
}

TEST(Hierarchical, SingleStepEqualsEstimate)
{
    const auto& fx = fixture();
    const FlowProblem prob(fx.qt);
    const WeightSequence w{WeightKind::halving, 1000.0, 1.0, 1};
    const auto h = solve_hierarchical(prob, w, {1, SolverOptions{}, std::nullopt});
    const auto e = estimate_flow(prob, w);
    ASSERT_EQ(h.steps.size(), 1u);
    EXPECT_TRUE((h.steps[0].values.array() == e.coeffs.values.array()).all());
    EXPECT_TRUE((h.accumulated[0].values.array() == e.coeffs.values.array()).all());
}

TEST(Hierarchical, HalvingScheduleDecreasesDataTerm)
{
    const auto& fx = fixture();
    const FlowProblem prob(fx.qt);
    const auto h = solve_hierarchical(prob, {WeightKind::halving, 1000.0, 1.0, 1}, {8, SolverOptions{}, std::nullopt});
    ASSERT_EQ(h.data_terms.size(), 8u);
    double prev = data_term(fx.qt, CoeffVector(fx.spec));
    for (double d : h.data_terms) {
        EXPECT_LE(d, prev);
        prev = d;
    }
    CoeffVector sum(fx.spec);
    for (std::size_t k = 0; k < h.steps.size(); ++k) {
        sum.values += h.steps[k].values;
        EXPECT_LE((sum.values - h.accumulated[k].values).norm(), 1e-15 * std::max(1.0, sum.values.norm()));
    }
}

TEST(Hierarchical, ExponentScheduleApproachesTruth)
{
    const auto& fx = fixture();
    const FlowProblem prob(fx.qt);
    const auto h = solve_hierarchical(prob, {WeightKind::exponent, 1.0, 2.0, 1}, {9, SolverOptions{}, std::nullopt});
    double prev = data_term(fx.qt, CoeffVector(fx.spec));
    for (double d : h.data_terms) {
        EXPECT_LE(d, prev);
        prev = d;
    }
    double prev_err = fx.truth.true_flow.values.norm();
    for (std::size_t k = 0; k < 5; ++k) {
        const double err = (h.accumulated[k].values - fx.truth.true_flow.values).norm();
        EXPECT_LE(err, prev_err) << "step " << k + 1;
        prev_err = err;
    }
}

TEST(Hierarchical, RejectsIncreasingSchedule)
{
    const auto& fx = fixture();
    const FlowProblem prob(fx.qt);
    const Vector w1 = weights({WeightKind::power, 1.0, 1.0, 1}, fx.spec);
    Vector w2 = 0.5 * w1;
    w2[3] = 2.0 * w1[3];
    EXPECT_THROW(solve_hierarchical(prob, std::vector<Vector>{w1, w2}, {2, SolverOptions{}, std::nullopt}), InputError);
    EXPECT_NO_THROW(solve_hierarchical(prob, std::vector<Vector>{w1, 0.5 * w1}, {2, SolverOptions{}, std::nullopt}));
    EXPECT_THROW(solve_hierarchical(prob, std::vector<Vector>{w1}, {2, SolverOptions{}, std::nullopt}), InputError);
    EXPECT_THROW(solve_hierarchical(prob, WeightSequence{}, {0, SolverOptions{}, std::nullopt}), InputError);
}

TEST(Hierarchical, FirstStepOverride)
{
    const auto& fx = fixture();
    const FlowProblem prob(fx.qt);
    const SolverOptions first = long_first_step(SolverOptions{});
    EXPECT_EQ(first.max_iter, 1000);
    EXPECT_EQ(first.tol, 0.025);
    const auto h = solve_hierarchical(prob, {WeightKind::halving, 1000.0, 1.0, 1}, {2, SolverOptions{}, first});
    EXPECT_LE(h.reports[0].relative_residual, 0.025);
    EXPECT_LE(h.reports[1].relative_residual, 0.02);
}
