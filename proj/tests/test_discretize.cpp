#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "metagen/discretize.hpp"
#include "metagen/frontend.hpp"

using namespace metagen;
using namespace metagen::discretize;

namespace {

std::string read_model(const std::string& name) {
    std::string dir = std::getenv("METAGEN_TESTDATA") ? std::getenv("METAGEN_TESTDATA") : "models";
    std::ifstream in(dir + "/" + name);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

assembly::StructurePtr model(const std::string& name) {
    return frontend::evaluate(frontend::parse_program(read_model(name)));
}

/// Sphere of radius r centered in the cell, assembled directly.
assembly::StructurePtr centered_sphere(double r) {
    auto v = cp::make_vertex(
        cp::resolve_entity(cp::PolytopeKind::Cuboid, cp::EntityCategory::Face, "TOP"));
    auto skel = cp::build_skeleton({cp::SkeletonItem{v, {}}});
    auto lift = lifting::lift_spheres(skel, r);
    lift.spheres = {{{0.5, 0.5, 0.5}, r}};
    auto e = assembly::embed_cuboid(1.0, 1.0, 1.0,
                                    cp::resolve_entity(cp::PolytopeKind::Cuboid,
                                                       cp::EntityCategory::Corner,
                                                       "FRONT_BOTTOM_LEFT"));
    return assembly::StructureIR::make_leaf(assembly::make_tile({lift}, e), assembly::PatternOp{});
}

/// Half-edge audit: closed iff every edge is shared by exactly two triangles.
bool is_closed(const TriMesh& mesh, int* bad_edges = nullptr) {
    std::map<std::pair<int, int>, int> count;
    for (auto& t : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            int a = t[e], b = t[(e + 1) % 3];
            count[{std::min(a, b), std::max(a, b)}]++;
        }
    int bad = 0;
    for (auto& [e, c] : count)
        if (c != 2) ++bad;
    if (bad_edges) *bad_edges = bad;
    return bad == 0;
}

int euler_characteristic(const TriMesh& mesh) {
    std::set<std::pair<int, int>> edges;
    for (auto& t : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            int a = t[e], b = t[(e + 1) % 3];
            edges.insert({std::min(a, b), std::max(a, b)});
        }
    return int(mesh.vertices.size()) - int(edges.size()) + int(mesh.triangles.size());
}

}  // namespace

TEST_CASE("solid program voxelizes to volume fraction 1") {
    auto grid = voxelize(model("solid_cube.py"), 8);
    CHECK(grid.volume_fraction() == 1.0);
}

TEST_CASE("empty structure voxelizes to volume fraction 0") {
    auto a = model("solid_cube.py");
    auto empty = assembly::StructureIR::make_csg(assembly::StructureIR::Subtract, a, a);
    auto grid = voxelize(empty, 8);
    CHECK(grid.volume_fraction() == 0.0);
}

TEST_CASE("centered sphere volume matches the analytic value at R=100") {
    auto grid = voxelize(centered_sphere(0.4), 100);
    double analytic = 4.0 / 3.0 * M_PI * 0.4 * 0.4 * 0.4;
    CHECK(grid.volume_fraction() == Catch::Approx(analytic).margin(0.01));
}

TEST_CASE("corner spheres volume matches the octant-sum analytic value") {
    auto grid = voxelize(model("corner_spheres.py"), 64);
    double analytic = 4.0 / 3.0 * M_PI * std::pow(0.3, 3);  // 8 corner octants
    CHECK(grid.volume_fraction() == Catch::Approx(analytic).margin(0.005));
}

TEST_CASE("voxelize validates the resolution range") {
    CHECK_THROWS_AS(voxelize(model("solid_cube.py"), 1), Error);
    CHECK_THROWS_AS(voxelize(model("solid_cube.py"), 1000), Error);
}

TEST_CASE("voxelize is identical across thread counts") {
    auto ir = model("grid_frame.py");
    auto a = voxelize(ir, 32, 1);
    auto b = voxelize(ir, 32, 4);
    CHECK(a.occupancy == b.occupancy);
}

TEST_CASE("sphere mesh is closed with Euler characteristic 2") {
    auto mesh = extract_mesh(centered_sphere(0.35), 24);
    CHECK(is_closed(mesh));
    CHECK(euler_characteristic(mesh) == 2);
    double analytic = 4.0 / 3.0 * M_PI * std::pow(0.35, 3);
    CHECK(mesh.signed_volume() == Catch::Approx(analytic).margin(0.01));
}

TEST_CASE("beam frame mesh is watertight even though it touches the walls") {
    auto mesh = extract_mesh(model("grid_frame.py"), 24);
    int bad = 0;
    CHECK(is_closed(mesh, &bad));
    CHECK(bad == 0);
}

TEST_CASE("empty fields yield EmptyMesh") {
    auto a = model("solid_cube.py");
    auto empty = assembly::StructureIR::make_csg(assembly::StructureIR::Subtract, a, a);
    try {
        extract_mesh(empty, 8);
        FAIL("expected EmptyMesh");
    } catch (const Error& e) {
        CHECK(e.code() == "EmptyMesh");
    }
}

TEST_CASE("mesh volume agrees with voxel volume within 3/R") {
    for (const char* name : {"grid_frame.py", "corner_spheres.py"}) {
        auto ir = model(name);
        for (int R : {16, 32}) {
            auto grid = voxelize(ir, R);
            auto mesh = extract_mesh(ir, R);
            CHECK(std::abs(mesh.signed_volume() - grid.volume_fraction()) < 3.0 / R);
        }
    }
}

TEST_CASE("obj export writes v and f records and round-trips") {
    TriMesh tri;
    tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    tri.triangles = {{0, 1, 2}};
    tri.normals = {{0, 0, 1}};
    auto path = std::filesystem::temp_directory_path() / "metagen_tri.obj";
    export_obj(tri, path.string());

    std::ifstream in(path);
    std::string line;
    int v = 0, f = 0;
    while (std::getline(in, line)) {
        if (line.rfind("v ", 0) == 0) ++v;
        if (line.rfind("f ", 0) == 0) ++f;
    }
    CHECK(v == 3);
    CHECK(f == 1);

    auto back = import_obj(path.string());
    CHECK(back.vertices.size() == tri.vertices.size());
    CHECK(back.triangles.size() == tri.triangles.size());
    std::filesystem::remove(path);
}

TEST_CASE("obj export is byte deterministic") {
    auto mesh = extract_mesh(model("corner_spheres.py"), 16);
    auto p1 = std::filesystem::temp_directory_path() / "metagen_d1.obj";
    auto p2 = std::filesystem::temp_directory_path() / "metagen_d2.obj";
    export_obj(mesh, p1.string());
    export_obj(mesh, p2.string());
    std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    CHECK(!sa.empty());
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("solid cube front view fills the frame uniformly") {
    auto mesh = extract_mesh(model("solid_cube.py"), 16);
    auto views = render_views(mesh, 64);
    const RenderImage& front = views[0];
    // interior pixels shaded (not background); the whole frame is covered
    int background = 0;
    for (int y = 1; y < front.height - 1; ++y)
        for (int x = 1; x < front.width - 1; ++x) {
            const uint8_t* p = front.at(x, y);
            if (p[0] == 255 && p[1] == 255 && p[2] == 255) ++background;
        }
    CHECK(background == 0);
}

TEST_CASE("background pixels are exactly white") {
    auto mesh = extract_mesh(centered_sphere(0.25), 24);
    auto views = render_views(mesh, 64);
    for (auto& img : views) {
        const uint8_t* corner = img.at(0, 0);
        CHECK(int(corner[0]) == 255);
        CHECK(int(corner[1]) == 255);
        CHECK(int(corner[2]) == 255);
    }
}

TEST_CASE("renders are byte deterministic") {
    auto mesh = extract_mesh(model("grid_frame.py"), 16);
    auto a = render_views(mesh, 128);
    auto b = render_views(mesh, 128);
    for (int i = 0; i < 4; ++i) CHECK(a[i].pixels == b[i].pixels);
}

TEST_CASE("png writer emits a decodable signature and is deterministic") {
    auto mesh = extract_mesh(centered_sphere(0.3), 16);
    auto views = render_views(mesh, 64);
    auto p1 = std::filesystem::temp_directory_path() / "metagen_r1.png";
    auto p2 = std::filesystem::temp_directory_path() / "metagen_r2.png";
    write_png(views[3], p1.string());
    write_png(views[3], p2.string());
    std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    REQUIRE(sa.size() > 8);
    CHECK(uint8_t(sa[0]) == 137);
    CHECK(sa.substr(1, 3) == "PNG");
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("supersampled voxelization stays close to center sampling") {
    auto ir = centered_sphere(0.4);
    auto center = voxelize(ir, 32);
    auto super = voxelize(*ir, 32, 1, 3);
    double analytic = 4.0 / 3.0 * M_PI * std::pow(0.4, 3);
    CHECK(super.volume_fraction() == Catch::Approx(analytic).margin(0.01));
    long diff = 0;
    for (size_t i = 0; i < center.occupancy.size(); ++i)
        diff += center.occupancy[i] != super.occupancy[i];
    CHECK(diff < long(center.occupancy.size() / 100));
}

TEST_CASE("voxel surface debug mesher is closed and volume-exact") {
    auto grid = voxelize(centered_sphere(0.35), 16);
    auto mesh = extract_voxel_surface(grid);
    CHECK(is_closed(mesh));
    CHECK(mesh.signed_volume() == Catch::Approx(grid.volume_fraction()).margin(1e-12));
}

TEST_CASE("voxelization error shrinks with resolution") {
    auto ir = model("corner_spheres.py");
    double v16 = voxelize(ir, 16).volume_fraction();
    double v32 = voxelize(ir, 32).volume_fraction();
    double v64 = voxelize(ir, 64).volume_fraction();
    CHECK(std::abs(v32 - v64) <= std::abs(v16 - v32) + 1e-3);
}
