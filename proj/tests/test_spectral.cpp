#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace sphflow;

namespace {

CoeffVector random_coeffs(const BasisSpec& spec, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    CoeffVector c(spec);
    for (Eigen::Index p = 0; p < c.values.size(); ++p) c.values[p] = g(rng);
    return c;
}

}  // namespace

TEST(Weights, WorkedExamples)
{
    const BasisSpec spec = make_basis_spec(3);
    EXPECT_DOUBLE_EQ(weights({WeightKind::power, 1.0, 1.0, 1}, spec)[spec.index_of({2, 1, 1})], 2.0);
    EXPECT_DOUBLE_EQ(weights({WeightKind::halving, 1000.0, 1.0, 2}, spec)[spec.index_of({3, 1, 3})], 1000.0);
    EXPECT_DOUBLE_EQ(weights({WeightKind::exponent, 1.0, 2.0, 5}, spec)[spec.index_of({2, 2, 4})], 6.0);
}

TEST(Weights, SharedAcrossTypesAndValidated)
{
    const BasisSpec spec = make_basis_spec(5);
    const Vector w = weights({WeightKind::power, 0.5, 1.5, 1}, spec);
    for (std::size_t p = 0; p < spec.dim(); ++p) {
        const BasisIndex b = spec.at(p);
        EXPECT_DOUBLE_EQ(w[static_cast<Eigen::Index>(p)], 0.5 * std::pow(eigenvalue(b.n), 1.5));
    }
    EXPECT_THROW(weights({WeightKind::power, 0.0, 1.0, 1}, spec), InputError);
    EXPECT_THROW(weights({WeightKind::power, -1.0, 1.0, 1}, spec), InputError);
}

TEST(Weights, SchedulesAreNonIncreasing)
{
    const BasisSpec spec = make_basis_spec(8);
    for (WeightKind kind : {WeightKind::halving, WeightKind::exponent}) {
        const WeightSequence seq{kind, 3.0, 1.0, 1};
        for (int k = 1; k < 10; ++k) {
            const Vector a = weights(seq.at_step(k), spec);
            const Vector b = weights(seq.at_step(k + 1), spec);
            EXPECT_TRUE((b.array() <= a.array()).all()) << to_string(kind) << " step " << k;
        }
    }
}

TEST(SobolevNorm, SingleCoefficientAndParseval)
{
    const BasisSpec spec = make_basis_spec(6);
    for (int n = 1; n <= 6; ++n) {
        CoeffVector c(spec);
        c[{2, n, 1}] = 1.0;
        EXPECT_NEAR(sobolev_norm(c, weights({WeightKind::power, 1.0, 0.7, 1}, spec)),
                    std::pow(eigenvalue(n), 0.35), 1e-14);
    }
    const CoeffVector r = random_coeffs(spec, 3);
    EXPECT_NEAR(sobolev_norm(r, weights({WeightKind::power, 1.0, 0.0, 1}, spec)), r.values.norm(), 1e-12);
    EXPECT_THROW(sobolev_norm(r, Vector::Ones(3)), InputError);
}

TEST(SobolevNorm, EquivalentSequencesGiveEquivalentNorms)
{
    const BasisSpec spec = make_basis_spec(12);
    const double s = 1.0;
    const Vector ref = weights({WeightKind::power, 1.0, s, 1}, spec);
    Vector mu(ref.size());
    for (int n = 1; n <= spec.n_max; ++n) {
        const auto off = static_cast<Eigen::Index>(BasisSpec::degree_offset(n));
        mu.segment(off, 2 * (2 * n + 1)).setConstant(std::pow(eigenvalue(n), s) * (1.0 + 0.1 * std::sin(n)));
    }
    // c μ <= λ^s <= C μ with c = 1/1.1, C = 1/0.9
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const CoeffVector x = random_coeffs(spec, seed);
        const double a = sobolev_norm(x, ref), b = sobolev_norm(x, mu);
        EXPECT_GE(a, std::sqrt(1.0 / 1.1) * b - 1e-12);
        EXPECT_LE(a, std::sqrt(1.0 / 0.9) * b + 1e-12);
    }
}

TEST(SobolevNorm, Homogeneous)
{
    const BasisSpec spec = make_basis_spec(4);
    const Vector w = weights({WeightKind::power, 2.0, 1.0, 1}, spec);
    CoeffVector c = random_coeffs(spec, 9);
    const double base = sobolev_norm(c, w);
    c.values *= -3.0;
    EXPECT_NEAR(sobolev_norm(c, w), 3.0 * base, 1e-12);
}

class SpectralOnMesh : public ::testing::Test {
protected:
    void SetUp() override
    {
        mesh = build_icosphere(3);
        geom = mesh_geometry(mesh);
        spec = make_basis_spec(5);
        table = mesh_basis(mesh, geom, spec);
    }
    TriMesh mesh;
    std::vector<TriangleGeom> geom;
    BasisSpec spec;
    BasisTable table;
};

TEST_F(SpectralOnMesh, SynthesizeUnitAndLinear)
{
    for (std::size_t p : {std::size_t{0}, std::size_t{7}, spec.dim() - 1}) {
        CoeffVector c(spec);
        c.values[static_cast<Eigen::Index>(p)] = 1.0;
        const TriField f = synthesize(c, table);
        for (std::size_t i = 0; i < mesh.faces.size(); ++i) EXPECT_EQ(f.vectors[i], table.at(i, p));
    }
    const CoeffVector c1 = random_coeffs(spec, 1), c2 = random_coeffs(spec, 2);
    CoeffVector mix(spec);
    mix.values = 2.5 * c1.values - 0.75 * c2.values;
    const TriField f1 = synthesize(c1, table), f2 = synthesize(c2, table), fm = synthesize(mix, table);
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
        EXPECT_NEAR((fm.vectors[i] - (2.5 * f1.vectors[i] - 0.75 * f2.vectors[i])).norm(), 0.0, 1e-12);
    }
    EXPECT_THROW(synthesize(CoeffVector(make_basis_spec(2)), table), InputError);
}

TEST_F(SpectralOnMesh, AnalyzeIsGramTimesCoefficients)
{
    const Matrix gram = discrete_gram(table, geom);
    const CoeffVector c = random_coeffs(spec, 4);
    const CoeffVector back = analyze(synthesize(c, table), table, geom);
    EXPECT_LT((back.values - gram * c.values).cwiseAbs().maxCoeff(), 1e-12);
    const CoeffVector zero = analyze(TriField{std::vector<Vec3>(mesh.faces.size(), Vec3::Zero())}, table, geom);
    EXPECT_EQ(zero.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Analyze, UnitFieldRecoversCoefficient)
{
    const TriMesh mesh = build_icosphere(5);
    const auto geom = mesh_geometry(mesh);
    const BasisSpec spec = make_basis_spec(10);
    const BasisTable table = mesh_basis(mesh, geom, spec);
    for (std::size_t q : {std::size_t{3}, std::size_t{100}, spec.dim() - 2}) {
        CoeffVector c(spec);
        c.values[static_cast<Eigen::Index>(q)] = 1.0;
        const CoeffVector a = analyze(synthesize(c, table), table, geom);
        EXPECT_NEAR(a.values[static_cast<Eigen::Index>(q)], 1.0, 0.02);
        Vector off = a.values;
        off[static_cast<Eigen::Index>(q)] = 0.0;
        EXPECT_LE(off.cwiseAbs().maxCoeff(), 0.02);
    }
}

TEST(Synthesize, RotationTruthMatchesProjectedRotationField)
{
    double prev = 0.0;
    for (int level = 3; level <= 6; ++level) {
        const TriMesh mesh = build_icosphere(level);
        const auto geom = mesh_geometry(mesh);
        const BasisSpec spec = make_basis_spec(1);
        const CoeffVector c = rotation_flow(spec, Vec3::UnitZ(), 0.01);
        const TriField f = synthesize(c, mesh_basis(mesh, geom, spec));
        double err = 0.0;
        for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
            const Vec3 u = 0.01 * Vec3::UnitZ().cross(mesh.centroid(i).normalized());
            const Vec3 planar = u - u.dot(geom[i].normal) * geom[i].normal;
            err = std::max(err, (f.vectors[i] - planar).norm());
        }
        if (level > 3) EXPECT_NEAR(prev / err, 2.0, 0.2) << "level " << level;
        prev = err;
    }
}

TEST(Helmholtz, SplitIsExactAndDisjoint)
{
    const BasisSpec spec = make_basis_spec(7);
    const CoeffVector c = random_coeffs(spec, 5);
    const auto [cf, df] = helmholtz_split(c);
    for (std::size_t p = 0; p < spec.dim(); ++p) {
        const auto i = static_cast<Eigen::Index>(p);
        if (spec.at(p).vtype == 2) {
            EXPECT_EQ(cf.values[i], c.values[i]);
            EXPECT_EQ(df.values[i], 0.0);
        } else {
            EXPECT_EQ(cf.values[i], 0.0);
            EXPECT_EQ(df.values[i], c.values[i]);
        }
        EXPECT_EQ(cf.values[i] + df.values[i], c.values[i]);
    }
}

TEST(Helmholtz, RotationIsPurelyDivergenceFree)
{
    const BasisSpec spec = make_basis_spec(4);
    const CoeffVector c = rotation_flow(spec, Vec3(1, 2, 3).normalized(), 0.05);
    const auto [cf, df] = helmholtz_split(c);
    EXPECT_EQ(cf.values.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(df.values, c.values);
}

TEST(Helmholtz, RotationCoefficientsReproduceAxisCrossX)
{
    const Vec3 axis = Vec3(0.3, -0.5, 0.8).normalized();
    const BasisSpec spec = make_basis_spec(1);
    const CoeffVector c = rotation_flow(spec, axis, 0.1);
    std::mt19937_64 rng(6);
    for (int i = 0; i < 20; ++i) {
        const Vec3 x = oracle::random_unit(rng);
        Vec3 u = Vec3::Zero();
        for (std::size_t p = 0; p < spec.dim(); ++p) u += c.values[static_cast<Eigen::Index>(p)] * eval_vector_sh(spec.at(p), x);
        EXPECT_NEAR((u - 0.1 * axis.cross(x)).norm(), 0.0, 1e-14);
    }
}

TEST(Helmholtz, DivergenceFreePartHasNoWeakDivergence)
{
    const BasisSpec spec = make_basis_spec(5);
    const CoeffVector c = random_coeffs(spec, 8);
    const CoeffVector df = helmholtz_split(c).second;
    const auto rule = oracle::sphere_rule(14, 28);
    std::vector<Vec3> w(rule.size(), Vec3::Zero());
    for (std::size_t k = 0; k < rule.size(); ++k)
        for (std::size_t p = 0; p < spec.dim(); ++p) w[k] += df.values[static_cast<Eigen::Index>(p)] * eval_vector_sh(spec.at(p), rule[k].p);
    for (int n = 1; n <= 5; ++n) {
        for (int j = 1; j <= 2 * n + 1; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < rule.size(); ++k) {
                acc += rule[k].w * (eval_vector_sh({2, n, j}, rule[k].p) * std::sqrt(eigenvalue(n))).dot(w[k]);
            }
            EXPECT_LE(std::abs(acc), 1e-5);
        }
    }
}

TEST(StreamPotentials, Values)
{
    const BasisSpec spec = make_basis_spec(3);
    CoeffVector c(spec);
    c[{2, 1, 2}] = 1.0;
    c[{3, 3, 4}] = 2.0;
    const auto [pot, stream] = stream_potentials(c);
    EXPECT_DOUBLE_EQ(pot.at(1, 2), 1.0 / std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(stream.at(3, 4), 2.0 / std::sqrt(12.0));
    EXPECT_EQ(pot.at(0, 1), 0.0);
    const auto [p0, s0] = stream_potentials(CoeffVector(spec));
    for (double v : p0.values) EXPECT_EQ(v, 0.0);
    for (double v : s0.values) EXPECT_EQ(v, 0.0);
}

TEST(StreamPotentials, GradientOfPotentialMatchesCurlFreeField)
{
    const BasisSpec spec = make_basis_spec(4);
    const CoeffVector c = random_coeffs(spec, 10);
    const CoeffVector cf = helmholtz_split(c).first;
    const ScalarCoeffs pot = stream_potentials(c).first;
    for (int level = 4; level <= 5; ++level) {
        const TriMesh mesh = build_icosphere(level);
        const auto geom = mesh_geometry(mesh);
        const TriField field = synthesize(cf, mesh_basis(mesh, geom, spec));
        const ScalarFrame frame{evaluate_at(pot, mesh.vertices)};
        const auto grad = pl_gradient(mesh, geom, frame);
        double err = 0.0, ref = 0.0;
        for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
            err = std::max(err, (grad[i] - field.vectors[i]).norm());
            ref = std::max(ref, field.vectors[i].norm());
        }
        EXPECT_LT(err, 1e-12 * ref);  // identical PL construction
    }
}
