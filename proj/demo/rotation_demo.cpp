// Rotation demo: synthesize a rotating brightness pattern on the northern
// hemisphere, estimate its flow and write the usual pictures.
//
//   rotation_demo [output-directory]

#include <cstdio>
#include <filesystem>
#include <string>

#include "sphflow/io.hpp"
#include "sphflow/sphflow.hpp"

using namespace sphflow;

int main(int argc, char** argv)
{
    const std::filesystem::path out = argc > 1 ? argv[1] : "rotation_demo_out";
    std::filesystem::create_directories(out);

    const TriMesh full = build_icosphere(5);
    const TriMesh mesh = restrict_to_upper_hemisphere(full);
    const BasisSpec spec = make_basis_spec(15);
    std::printf("mesh: %zu faces, basis: %zu fields\n", mesh.faces.size(), spec.dim());

    // random degree-10 brightness, rotated by 0.01 rad about e_z
    const auto base = fit_to_unit_range(random_base(42, 10), full.vertices);
    const SyntheticTruth truth = synth_rotation(mesh, base, Vec3::UnitZ(), 0.01, spec);

    const QuadratureTable qt = build_quadrature(mesh, truth.frame0, truth.frame1, spec);
    const FlowProblem prob(qt);
    const auto est = estimate_flow(prob, {WeightKind::power, 0.01, 1.0, 1});
    std::printf("gmres: %d iterations, relative residual %.4f\n", est.report.iterations,
                est.report.relative_residual);

    const auto [curl_free, div_free] = helmholtz_split(est.coeffs);
    std::printf("divergence-free norm %.3e, curl-free norm %.3e\n", div_free.values.norm(), curl_free.values.norm());

    const TriField field = synthesize(est.coeffs, mesh_basis(mesh, spec));
    const double radius = max_length(field);
    io::write_ppm((out / "flow.ppm").string(), colorize(mesh, field, radius, 512, 512).image);

    const auto lines = trace_streamlines(mesh, field, default_seeds(mesh));
    io::write_ppm((out / "streamlines.ppm").string(), render_streamlines(lines, 512, 512));
    io::write_coeffs((out / "flow.csv").string(), est.coeffs);
    std::printf("colour disk radius %.3e, %zu streamlines, results in %s\n", radius, lines.size(), out.c_str());
    return 0;
}
