// sphflow: command-line front end for optical flow on the sphere.
//
// Every subcommand reads and writes files; nothing but --help and --version
// output goes to stdout. Exit status: 0 success, 1 user error, 2 numerical
// failure, with a single "sphflow: error[...]" line on stderr.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sphflow/io.hpp"
#include "sphflow/sphflow.hpp"

using namespace sphflow;

namespace {

Vec3 parse_vec3(const std::string& text, const std::string& flag)
{
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(',', start);
        parts.push_back(text.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    Vec3 v;
    if (parts.size() != 3) throw InputError(flag + " expects x,y,z");
    for (int i = 0; i < 3; ++i) {
        if (!parse_double(parts[static_cast<std::size_t>(i)], v[i]) || !std::isfinite(v[i])) {
            throw InputError(flag + " expects x,y,z, got '" + text + "'");
        }
    }
    return v;
}

void require_finite(const CoeffVector& c, const char* what)
{
    if (!c.values.allFinite()) throw NumericalError(std::string(what) + " contains non-finite coefficients");
}

void warn_unconverged(const SolveReport& r, const std::string& what)
{
    if (!r.converged) {
        std::cerr << "sphflow: warning: " << what << " stopped after " << r.iterations
                  << " iterations at relative residual " << format_double(r.relative_residual) << '\n';
    }
}

void add_solve(io::Report& rep, const std::string& prefix, const SolveReport& r)
{
    rep.set(prefix + "iterations", r.iterations);
    rep.set(prefix + "relative_residual", r.relative_residual);
    rep.set(prefix + "converged", r.converged);
    rep.set(prefix + "wall_time", r.wall_time);
}

// Options shared by the estimation subcommands.
struct EstimateInputs {
    std::string mesh, f0, f1;
    int n_max = 10;
    std::string anchor = "first";
    std::string solver = "gmres";
    SolverOptions opt;
    bool matrix_free = false;
    bool force_dense = false;
    std::string report;

    void add(CLI::App* cmd)
    {
        cmd->add_option("--mesh", mesh, "mesh file")->required();
        cmd->add_option("--f0", f0, "first frame")->required();
        cmd->add_option("--f1", f1, "second frame")->required();
        cmd->add_option("--nmax", n_max, "largest harmonic degree")->check(CLI::Range(1, kMaxDegree));
        cmd->add_option("--gradient", anchor, "spatial gradient from the first frame or the frame average")
            ->check(CLI::IsMember({"first", "average"}));
        cmd->add_option("--solver", solver, "Krylov method")->check(CLI::IsMember({"gmres", "cg"}));
        cmd->add_option("--tol", opt.tol, "relative residual tolerance")->check(CLI::PositiveNumber);
        cmd->add_option("--max-iter", opt.max_iter, "iteration limit")->check(CLI::PositiveNumber);
        cmd->add_option("--restart", opt.restart, "GMRES restart length")->check(CLI::PositiveNumber);
        auto* mf = cmd->add_flag("--matrix-free", matrix_free, "apply A from the quadrature table");
        cmd->add_flag("--force-dense", force_dense, "assemble A densely above the size guard")->excludes(mf);
        cmd->add_option("--report", report, "key=value solve report");
    }

    struct Loaded {
        TriMesh mesh;
        BasisSpec spec;
        QuadratureTable qt;
    };

    Loaded load() const
    {
        Loaded l;
        l.mesh = io::read_mesh(mesh);
        const ScalarFrame a = io::read_frame(f0);
        const ScalarFrame b = io::read_frame(f1);
        l.spec = make_basis_spec(n_max);
        if (l.spec.dim() > kDenseLimit && !matrix_free && !force_dense) {
            throw InputError("basis dimension " + std::to_string(l.spec.dim()) + " exceeds the dense limit " +
                             std::to_string(kDenseLimit) + "; pass --matrix-free or --force-dense");
        }
        l.qt = build_quadrature(l.mesh, a, b, l.spec, anchor == "average" ? GradientAnchor::average : GradientAnchor::first);
        return l;
    }

    DataOperator::Mode mode() const
    {
        if (matrix_free) return DataOperator::Mode::matrix_free;
        if (force_dense) return DataOperator::Mode::dense;
        return DataOperator::Mode::automatic;
    }

    SolverOptions solver_options() const
    {
        SolverOptions o = opt;
        o.method = solver == "cg" ? KrylovMethod::cg : KrylovMethod::gmres;
        return o;
    }
};

struct WeightInputs {
    std::string kind = "power";
    double alpha = 1.0;
    double s = 1.0;

    WeightSequence sequence() const
    {
        WeightSequence w;
        w.kind = kind == "halving" ? WeightKind::halving : kind == "exponent" ? WeightKind::exponent : WeightKind::power;
        w.alpha = alpha;
        w.s = s;
        return w;
    }
};

int run(int argc, char** argv)
{
    CLI::App app{"Optical flow on the sphere by vector spherical harmonics", "sphflow"};
    app.set_version_flag("--version", std::string("sphflow 1.0.0 (") + io::kFormatVersion + ")");
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);

    // icosphere
    auto* ico = app.add_subcommand("icosphere", "write an icosphere mesh");
    int level = 4;
    bool hemisphere = false;
    std::string ico_out;
    ico->add_option("--level", level, "subdivision level")->check(CLI::Range(0, kMaxIcosphereLevel));
    ico->add_flag("--hemisphere", hemisphere, "keep only the faces with z >= 0");
    ico->add_option("--out", ico_out, "mesh file")->required();

    // synth
    auto* syn = app.add_subcommand("synth", "rotation test pair with known flow");
    std::string syn_mesh, syn_f0, syn_f1, syn_truth, syn_axis = "0,0,1";
    std::uint64_t syn_seed = 0;
    int syn_degree = 10, syn_nmax = 15;
    double syn_delta = 0.01;
    syn->add_option("--mesh", syn_mesh, "mesh file")->required();
    syn->add_option("--seed", syn_seed, "random seed for the base brightness")->required();
    syn->add_option("--degree", syn_degree, "degree of the base brightness")->check(CLI::Range(0, kMaxDegree));
    syn->add_option("--nmax", syn_nmax, "degree of the truth coefficient file")->check(CLI::Range(1, kMaxDegree));
    syn->add_option("--delta", syn_delta, "rotation angle");
    syn->add_option("--axis", syn_axis, "rotation axis x,y,z");
    syn->add_option("--f0", syn_f0, "first frame")->required();
    syn->add_option("--f1", syn_f1, "second frame")->required();
    syn->add_option("--truth", syn_truth, "true flow coefficients");

    // project
    auto* prj = app.add_subcommand("project", "radial maximum projection of a voxel grid");
    std::string prj_mesh, prj_vox, prj_points, prj_center, prj_out;
    double prj_radius = 0.0, prj_eps = 0.1;
    int prj_samples = kDefaultRadialSamples;
    bool prj_raw = false;
    prj->add_option("--mesh", prj_mesh, "mesh file")->required();
    prj->add_option("--voxels", prj_vox, "voxel grid")->required();
    auto* pts_opt = prj->add_option("--points", prj_points, "surface points to fit the sphere to");
    auto* ctr_opt = prj->add_option("--center", prj_center, "sphere centre x,y,z")->excludes(pts_opt);
    auto* rad_opt = prj->add_option("--radius", prj_radius, "sphere radius")->excludes(pts_opt);
    ctr_opt->needs(rad_opt);
    rad_opt->needs(ctr_opt);
    prj->add_option("--eps", prj_eps, "relative shell half-width")->check(CLI::PositiveNumber);
    prj->add_option("--samples", prj_samples, "radial samples")->check(CLI::Range(2, 100000));
    prj->add_flag("--raw", prj_raw, "skip scaling to [0,1]");
    prj->add_option("--out", prj_out, "frame file")->required();

    // fitsphere
    auto* fit = app.add_subcommand("fitsphere", "least-squares sphere through points");
    std::string fit_points, fit_out;
    fit->add_option("--points", fit_points, "points csv")->required();
    fit->add_option("--out", fit_out, "key=value result")->required();

    // estimate
    auto* est = app.add_subcommand("estimate", "single-field flow estimate");
    EstimateInputs est_in;
    WeightInputs est_w;
    std::string est_weights_file, est_out;
    est_in.add(est);
    est->add_option("--alpha", est_w.alpha, "weight scale")->check(CLI::PositiveNumber);
    est->add_option("--s", est_w.s, "Sobolev exponent");
    est->add_option("--weights-file", est_weights_file, "per-degree weights (step,n,mu; step 1 used)");
    est->add_option("--out", est_out, "coefficient file")->required();

    // uv
    auto* uv = app.add_subcommand("uv", "u+v decomposition");
    EstimateInputs uv_in;
    double uv_alpha = 0.1, uv_r = 1.0, uv_beta = 1e6, uv_s = -1.0;
    std::string uv_out_u, uv_out_v;
    uv_in.add(uv);
    uv->add_option("--alpha", uv_alpha, "weight scale of u")->check(CLI::PositiveNumber);
    uv->add_option("--r", uv_r, "Sobolev exponent of u");
    uv->add_option("--beta", uv_beta, "weight scale of v")->check(CLI::PositiveNumber);
    uv->add_option("--s", uv_s, "Sobolev exponent of v");
    uv->add_option("--out-u", uv_out_u, "coefficients of u")->required();
    uv->add_option("--out-v", uv_out_v, "coefficients of v")->required();

    // hier
    auto* hier = app.add_subcommand("hier", "hierarchical multiscale estimate");
    EstimateInputs hier_in;
    WeightInputs hier_w;
    hier_w.kind = "halving";
    int hier_steps = 8;
    bool long_first = false;
    std::string hier_file, hier_out, hier_prefix;
    hier_in.add(hier);
    hier->add_option("--schedule", hier_w.kind, "weight schedule")->check(CLI::IsMember({"halving", "exponent"}));
    hier->add_option("--alpha", hier_w.alpha, "weight scale")->check(CLI::PositiveNumber);
    hier->add_option("--s", hier_w.s, "Sobolev exponent at step 1");
    hier->add_option("--steps", hier_steps, "number of steps")->check(CLI::PositiveNumber);
    hier->add_option("--weights-file", hier_file, "per-step, per-degree weights (step,n,mu)");
    hier->add_flag("--long-first-step", long_first, "step 1 with 1000 iterations and tolerance 0.025");
    hier->add_option("--out", hier_out, "coefficients of the accumulated estimate")->required();
    hier->add_option("--step-prefix", hier_prefix, "write step k coefficients to <prefix>k.csv");

    // helmholtz
    auto* hh = app.add_subcommand("helmholtz", "split into curl-free and divergence-free parts");
    std::string hh_in, hh_curl, hh_div;
    hh->add_option("--coeffs", hh_in, "coefficient file")->required();
    hh->add_option("--curl-free", hh_curl, "curl-free coefficients")->required();
    hh->add_option("--div-free", hh_div, "divergence-free coefficients")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "coefficients to a per-triangle field");
    std::string ev_mesh, ev_coeffs, ev_out;
    ev->add_option("--mesh", ev_mesh, "mesh file")->required();
    ev->add_option("--coeffs", ev_coeffs, "coefficient file")->required();
    ev->add_option("--out", ev_out, "field file")->required();

    // render
    auto* ren = app.add_subcommand("render", "colour-coded top view of a field");
    std::string ren_mesh, ren_field, ren_out, ren_report;
    double ren_radius = 0.0;
    int ren_size = 512;
    ren->add_option("--mesh", ren_mesh, "mesh file")->required();
    ren->add_option("--field", ren_field, "field file")->required();
    ren->add_option("--radius", ren_radius, "colour disk radius (default: longest vector)")->check(CLI::PositiveNumber);
    ren->add_option("--size", ren_size, "image width and height")->check(CLI::Range(1, 16384));
    ren->add_option("--out", ren_out, "PPM image")->required();
    ren->add_option("--report", ren_report, "key=value summary");

    // streamlines
    auto* sl = app.add_subcommand("streamlines", "Euler streamlines of a field");
    std::string sl_mesh, sl_field, sl_seeds, sl_out, sl_image;
    int sl_tau = 50, sl_size = 512;
    double sl_h = 0.0;
    sl->add_option("--mesh", sl_mesh, "mesh file")->required();
    sl->add_option("--field", sl_field, "field file")->required();
    sl->add_option("--seeds", sl_seeds, "seed points csv (default: level-4 icosphere vertices)");
    sl->add_option("--tau", sl_tau, "steps per line")->check(CLI::PositiveNumber);
    sl->add_option("--step", sl_h, "step length (default: 1/(10 max|v|))")->check(CLI::PositiveNumber);
    sl->add_option("--out", sl_out, "streamline csv")->required();
    sl->add_option("--image", sl_image, "PPM rendering");
    sl->add_option("--size", sl_size, "image width and height")->check(CLI::Range(1, 16384));

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "sphflow: error[usage]: " << e.what() << '\n';
        return 1;
    }

    if (threads > 0) parallel::set_threads(threads);

    if (*ico) {
        TriMesh m = build_icosphere(level);
        if (hemisphere) m = restrict_to_upper_hemisphere(m);
        io::write_mesh(ico_out, m);
    } else if (*syn) {
        const TriMesh m = io::read_mesh(syn_mesh);
        const auto base = fit_to_unit_range(random_base(syn_seed, syn_degree), m.vertices);
        const BasisSpec spec = make_basis_spec(syn_nmax);
        const auto truth = synth_rotation(m, base, parse_vec3(syn_axis, "--axis"), syn_delta, spec);
        io::write_frame(syn_f0, truth.frame0);
        io::write_frame(syn_f1, truth.frame1);
        if (!syn_truth.empty()) io::write_coeffs(syn_truth, truth.true_flow);
    } else if (*prj) {
        const TriMesh m = io::read_mesh(prj_mesh);
        const VoxelGrid g = io::read_voxels(prj_vox);
        SphereFit sf;
        if (!prj_points.empty()) {
            sf = fit_sphere(io::read_points(prj_points));
        } else if (!prj_center.empty()) {
            sf.center = parse_vec3(prj_center, "--center");
            sf.radius = prj_radius;
        } else {
            throw InputError("project needs --points or --center with --radius");
        }
        ScalarFrame f = project_voxels(g, sf, m, prj_eps, prj_samples);
        if (!prj_raw) {
            const Normalized n = normalize(f);
            if (n.was_constant) std::cerr << "sphflow: warning: projected frame is constant\n";
            f = n.frame;
        }
        io::write_frame(prj_out, f);
    } else if (*fit) {
        const SphereFit sf = fit_sphere(io::read_points(fit_points));
        io::Report r;
        r.set("center", io::detail::vec_text(sf.center, ','));
        r.set("radius", sf.radius);
        r.set("rms", sf.rms);
        r.write(fit_out);
    } else if (*est) {
        const auto l = est_in.load();
        const FlowProblem prob(l.qt, est_in.mode());
        SolveReport rep;
        CoeffVector c;
        if (!est_weights_file.empty()) {
            const auto mu = io::read_weight_schedule(est_weights_file, l.spec);
            c = solve_regularized(prob, mu.front(), prob.b, est_in.solver_options(), rep);
        } else {
            const auto e = estimate_flow(prob, est_w.sequence(), est_in.solver_options());
            c = e.coeffs;
            rep = e.report;
        }
        require_finite(c, "estimate");
        warn_unconverged(rep, "solver");
        io::write_coeffs(est_out, c);
        if (!est_in.report.empty()) {
            io::Report r;
            r.set("dim", l.spec.dim());
            r.set("faces", l.mesh.faces.size());
            r.set("dense", prob.a.is_dense());
            add_solve(r, "", rep);
            r.set("data_term", data_term(l.qt, c));
            r.write(est_in.report);
        }
    } else if (*uv) {
        const auto l = uv_in.load();
        const FlowProblem prob(l.qt, uv_in.mode());
        const auto d = solve_uv(prob, {WeightKind::power, uv_alpha, uv_r, 1}, {WeightKind::power, uv_beta, uv_s, 1},
                                uv_in.solver_options());
        require_finite(d.u, "u");
        require_finite(d.v, "v");
        warn_unconverged(d.report, "solver");
        io::write_coeffs(uv_out_u, d.u);
        io::write_coeffs(uv_out_v, d.v);
        if (!uv_in.report.empty()) {
            io::Report r;
            r.set("dim", 2 * l.spec.dim());
            add_solve(r, "", d.report);
            CoeffVector sum = d.u;
            sum.values += d.v.values;
            r.set("data_term", data_term(l.qt, sum));
            r.write(uv_in.report);
        }
    } else if (*hier) {
        const auto l = hier_in.load();
        const FlowProblem prob(l.qt, hier_in.mode());
        HierarchyOptions ho{hier_steps, hier_in.solver_options(), std::nullopt};
        if (long_first) ho.first_step = long_first_step(ho.solver);
        Hierarchy h;
        if (!hier_file.empty()) {
            const auto mu = io::read_weight_schedule(hier_file, l.spec);
            if (hier->count("--steps") == 0) ho.steps = static_cast<int>(mu.size());
            h = solve_hierarchical(prob, mu, ho);
        } else {
            h = solve_hierarchical(prob, hier_w.sequence(), ho);
        }
        for (std::size_t k = 0; k < h.steps.size(); ++k) {
            require_finite(h.accumulated[k], "hierarchical estimate");
            warn_unconverged(h.reports[k], "step " + std::to_string(k + 1));
            if (!hier_prefix.empty()) io::write_coeffs(hier_prefix + std::to_string(k + 1) + ".csv", h.steps[k]);
        }
        io::write_coeffs(hier_out, h.accumulated.back());
        if (!hier_in.report.empty()) {
            io::Report r;
            r.set("dim", l.spec.dim());
            r.set("steps", h.steps.size());
            for (std::size_t k = 0; k < h.steps.size(); ++k) {
                const std::string p = "step" + std::to_string(k + 1) + ".";
                add_solve(r, p, h.reports[k]);
                r.set(p + "data_term", h.data_terms[k]);
            }
            r.write(hier_in.report);
        }
    } else if (*hh) {
        const CoeffVector c = io::read_coeffs(hh_in);
        const auto [curl_free, div_free] = helmholtz_split(c);
        io::write_coeffs(hh_curl, curl_free);
        io::write_coeffs(hh_div, div_free);
    } else if (*ev) {
        const TriMesh m = io::read_mesh(ev_mesh);
        const CoeffVector c = io::read_coeffs(ev_coeffs);
        io::write_trifield(ev_out, synthesize(c, mesh_basis(m, c.spec)));
    } else if (*ren) {
        const TriMesh m = io::read_mesh(ren_mesh);
        const TriField f = io::read_trifield(ren_field);
        double radius = ren_radius;
        if (radius == 0.0) {
            radius = max_length(f);
            if (!(radius > 0.0)) radius = 1.0;
        }
        const auto res = colorize(m, f, radius, ren_size, ren_size);
        if (res.degenerate_pixels > 0) {
            std::cerr << "sphflow: warning: " << res.degenerate_pixels << " pixels hold vectors parallel to e_z\n";
        }
        io::write_ppm(ren_out, res.image);
        if (!ren_report.empty()) {
            io::Report r;
            r.set("radius", radius);
            r.set("degenerate_pixels", res.degenerate_pixels);
            r.write(ren_report);
        }
    } else if (*sl) {
        const TriMesh m = io::read_mesh(sl_mesh);
        const TriField f = io::read_trifield(sl_field);
        const auto seeds = sl_seeds.empty() ? default_seeds(m) : io::read_points(sl_seeds);
        StreamlineOptions opt{sl_tau, std::nullopt};
        if (sl_h > 0.0) opt.h = sl_h;
        const auto lines = trace_streamlines(m, f, seeds, opt);
        std::size_t truncated = 0;
        for (const auto& l : lines) truncated += l.truncated;
        if (truncated > 0) std::cerr << "sphflow: warning: " << truncated << " streamlines left the mesh\n";
        io::write_streamlines(sl_out, lines);
        if (!sl_image.empty()) io::write_ppm(sl_image, render_streamlines(lines, sl_size, sl_size, sl_tau));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    try {
        return run(argc, argv);
    } catch (const InputError& e) {
        std::cerr << "sphflow: error[input]: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "sphflow: error[numerical]: " << e.what() << '\n';
        return 2;
    } catch (const std::bad_alloc&) {
        std::cerr << "sphflow: error[numerical]: out of memory\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "sphflow: error[internal]: " << e.what() << '\n';
        return 2;
    }
}
