#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "sphflow/io.hpp"
#include "sphflow/sphflow.hpp"

using namespace sphflow;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("sphflow_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write_text(const std::string& name, const std::string& text) const
    {
        std::ofstream(path(name)) << text;
        return path(name);
    }

    static std::string slurp(const std::string& p)
    {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path dir_;
};

template <typename Fn>
std::string error_of(Fn&& fn)
{
    try {
        fn();
    } catch (const InputError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

using IoTest = TempDir;

TEST_F(IoTest, MeshRoundTripIsBitwise)
{
    const TriMesh mesh = restrict_to_upper_hemisphere(build_icosphere(3));
    io::write_mesh(path("m.txt"), mesh);
    const TriMesh back = io::read_mesh(path("m.txt"));
    EXPECT_EQ(back.level, mesh.level);
    EXPECT_EQ(back.faces, mesh.faces);
    ASSERT_EQ(back.vertices.size(), mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) ASSERT_EQ(back.vertices[i], mesh.vertices[i]);
    io::write_mesh(path("m2.txt"), back);
    EXPECT_EQ(slurp(path("m.txt")), slurp(path("m2.txt")));
}

TEST_F(IoTest, FrameRoundTripIsBitwise)
{
    ScalarFrame f = oracle::random_frame(500, 3);
    f.values[0] = 1e-300;
    f.values[1] = -0.1;
    f.values[2] = 1.0 / 3.0;
    io::write_frame(path("f.txt"), f);
    EXPECT_EQ(io::read_frame(path("f.txt")).values, f.values);
}

TEST_F(IoTest, TriFieldRoundTripIsBitwise)
{
    std::mt19937_64 rng(4);
    TriField f;
    for (int i = 0; i < 300; ++i) f.vectors.push_back(oracle::random_unit(rng) * 1e-3);
    io::write_trifield(path("t.txt"), f);
    const TriField back = io::read_trifield(path("t.txt"));
    ASSERT_EQ(back.vectors.size(), f.vectors.size());
    for (std::size_t i = 0; i < f.vectors.size(); ++i) ASSERT_EQ(back.vectors[i], f.vectors[i]);
}

TEST_F(IoTest, CoeffRoundTripIsBitwise)
{
    const BasisSpec spec = make_basis_spec(6);
    CoeffVector c(spec);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    for (Eigen::Index p = 0; p < c.values.size(); ++p) c.values[p] = g(rng) * std::pow(10.0, static_cast<double>(p % 7) - 3);
    io::write_coeffs(path("c.csv"), c);
    const CoeffVector back = io::read_coeffs(path("c.csv"));
    EXPECT_TRUE(back.spec == spec);
    for (Eigen::Index p = 0; p < c.values.size(); ++p) ASSERT_EQ(back.values[p], c.values[p]);
}

TEST_F(IoTest, CoeffFileLayout)
{
    CoeffVector c(make_basis_spec(1));
    c.values << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
    io::write_coeffs(path("c.csv"), c);
    EXPECT_EQ(slurp(path("c.csv")), "vtype,n,j,value\n2,1,1,1\n2,1,2,2\n2,1,3,3\n3,1,1,4\n3,1,2,5\n3,1,3,6\n");
}

TEST_F(IoTest, PointsAndVoxelsRoundTrip)
{
    std::mt19937_64 rng(2);
    std::vector<Vec3> pts;
    for (int i = 0; i < 50; ++i) pts.push_back(oracle::random_unit(rng) * 3.7);
    io::write_points(path("p.csv"), pts);
    EXPECT_EQ(io::read_points(path("p.csv")), pts);

    VoxelGrid g;
    g.nx = 3;
    g.ny = 4;
    g.nz = 5;
    g.spacing = Vec3(0.1, 0.25, 1.0 / 3.0);
    g.origin = Vec3(-1.5, 0.0, 2.0);
    std::uniform_real_distribution<float> u(-2.0f, 2.0f);
    for (int i = 0; i < 60; ++i) g.values.push_back(u(rng));
    io::write_voxels(path("v.bin"), g);
    EXPECT_EQ(fs::file_size(path("v.bin")), io::kVoxelHeaderBytes + 60 * 4);
    const VoxelGrid back = io::read_voxels(path("v.bin"));
    EXPECT_EQ(back.nx, 3);
    EXPECT_EQ(back.ny, 4);
    EXPECT_EQ(back.nz, 5);
    EXPECT_EQ(back.spacing, g.spacing);
    EXPECT_EQ(back.origin, g.origin);
    EXPECT_EQ(0, std::memcmp(back.values.data(), g.values.data(), 60 * sizeof(float)));
}

TEST_F(IoTest, VoxelDataIsLittleEndian)
{
    VoxelGrid g;
    g.nx = g.ny = g.nz = 1;
    g.values = {1.0f};
    io::write_voxels(path("v.bin"), g);
    const std::string raw = slurp(path("v.bin"));
    ASSERT_EQ(raw.size(), 68u);
    EXPECT_EQ(raw.substr(0, 11), "voxelgrid 1");
    EXPECT_EQ(static_cast<unsigned char>(raw[64]), 0x00);
    EXPECT_EQ(static_cast<unsigned char>(raw[65]), 0x00);
    EXPECT_EQ(static_cast<unsigned char>(raw[66]), 0x80);
    EXPECT_EQ(static_cast<unsigned char>(raw[67]), 0x3f);
}

TEST_F(IoTest, MalformedMeshNamesLine)
{
    write_text("bad.txt", "spheremesh 1\n3 1 -1\n1 0 0\n0 1 0\nnope 0 1\n0 1 2\n");
    const std::string msg = error_of([&] { io::read_mesh(path("bad.txt")); });
    EXPECT_NE(msg.find("bad.txt:5"), std::string::npos) << msg;
    EXPECT_NE(msg.find("nope"), std::string::npos) << msg;

    write_text("idx.txt", "spheremesh 1\n3 1 -1\n1 0 0\n0 1 0\n0 0 1\n0 1 7\n");
    EXPECT_NE(error_of([&] { io::read_mesh(path("idx.txt")); }).find("out of range"), std::string::npos);

    write_text("hdr.txt", "spheremesh 2\n");
    EXPECT_NE(error_of([&] { io::read_mesh(path("hdr.txt")); }).find("hdr.txt:1"), std::string::npos);

    write_text("short.txt", "spheremesh 1\n3 1 -1\n1 0 0\n");
    EXPECT_NE(error_of([&] { io::read_mesh(path("short.txt")); }).find("end of file"), std::string::npos);

    write_text("degen.txt", "spheremesh 1\n3 1 -1\n1 0 0\n1 0 0\n0 0 1\n0 1 2\n");
    EXPECT_THROW(io::read_mesh(path("degen.txt")), InputError);
}

TEST_F(IoTest, MalformedFramesAndFields)
{
    write_text("f.txt", "spherefield 1\n2\n0.5\nnan\n");
    EXPECT_NE(error_of([&] { io::read_frame(path("f.txt")); }).find("f.txt:4"), std::string::npos);
    write_text("g.txt", "spherefield 1\n1\n0.5\n0.7\n");
    EXPECT_NE(error_of([&] { io::read_frame(path("g.txt")); }).find("trailing"), std::string::npos);
    write_text("t.txt", "spheretrifield 1\n1\n1 2\n");
    EXPECT_NE(error_of([&] { io::read_trifield(path("t.txt")); }).find("3 coordinates"), std::string::npos);
    EXPECT_NE(error_of([&] { io::read_frame(path("missing.txt")); }).find("cannot open"), std::string::npos);
}

TEST_F(IoTest, MalformedCoefficients)
{
    write_text("order.csv", "vtype,n,j,value\n2,1,2,0\n2,1,1,0\n2,1,3,0\n3,1,1,0\n3,1,2,0\n3,1,3,0\n");
    EXPECT_NE(error_of([&] { io::read_coeffs(path("order.csv")); }).find("canonical order"), std::string::npos);
    write_text("short.csv", "vtype,n,j,value\n2,1,1,0\n2,1,2,0\n");
    EXPECT_NE(error_of([&] { io::read_coeffs(path("short.csv")); }).find("complete basis"), std::string::npos);
    write_text("hdr.csv", "a,b,c,d\n");
    EXPECT_NE(error_of([&] { io::read_coeffs(path("hdr.csv")); }).find("hdr.csv:1"), std::string::npos);
    write_text("num.csv", "vtype,n,j,value\n2,1,1,x\n");
    EXPECT_NE(error_of([&] { io::read_coeffs(path("num.csv")); }).find("num.csv:2"), std::string::npos);
}

TEST_F(IoTest, TruncatedVoxels)
{
    VoxelGrid g;
    g.nx = g.ny = g.nz = 2;
    g.values.assign(8, 1.0f);
    io::write_voxels(path("v.bin"), g);
    fs::resize_file(path("v.bin"), io::kVoxelHeaderBytes + 12);
    EXPECT_NE(error_of([&] { io::read_voxels(path("v.bin")); }).find("shorter"), std::string::npos);
    write_text("h.bin", "voxelgrid 9 1 1 1 1 1 1 0 0 0");
    EXPECT_THROW(io::read_voxels(path("h.bin")), InputError);
}

TEST_F(IoTest, PpmAndStreamlineOutput)
{
    RasterImage img(3, 2, {10, 20, 30});
    img.set(2, 1, {1, 2, 3});
    io::write_ppm(path("i.ppm"), img);
    const std::string raw = slurp(path("i.ppm"));
    ASSERT_EQ(raw.size(), std::string("P6\n3 2\n255\n").size() + 18);
    EXPECT_EQ(raw.substr(0, 11), "P6\n3 2\n255\n");
    EXPECT_EQ(static_cast<unsigned char>(raw[11]), 10);
    EXPECT_EQ(static_cast<unsigned char>(raw.back()), 3);

    Streamline a, b;
    a.points = {Vec3::UnitZ(), Vec3::UnitX()};
    b.points = {Vec3::UnitY()};
    io::write_streamlines(path("s.csv"), {a, b});
    EXPECT_EQ(slurp(path("s.csv")), "seed,step,x,y,z\n0,0,0,0,1\n0,1,1,0,0\n1,0,0,1,0\n");
}

TEST_F(IoTest, ReportKeepsInsertionOrder)
{
    io::Report r;
    r.set("iterations", 12);
    r.set("converged", true);
    r.set("residual", 0.015);
    r.write(path("r.txt"));
    EXPECT_EQ(slurp(path("r.txt")), "iterations=12\nconverged=true\nresidual=0.015\n");
}
