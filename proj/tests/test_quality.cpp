#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "metagen/quality.hpp"

using namespace metagen;
using namespace metagen::quality;
using discretize::VoxelGrid;

namespace {

std::string read_model(const std::string& name) {
    std::string dir = std::getenv("METAGEN_TESTDATA") ? std::getenv("METAGEN_TESTDATA") : "models";
    std::ifstream in(dir + "/" + name);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

VoxelGrid sphere_grid(int R, double r, Vec3 c = {0.5, 0.5, 0.5}) {
    VoxelGrid g;
    g.resolution = R;
    g.occupancy.assign(size_t(R) * R * R, 0);
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < R; ++j)
            for (int k = 0; k < R; ++k) {
                Vec3 p{(i + 0.5) / R, (j + 0.5) / R, (k + 0.5) / R};
                g.at(i, j, k) = norm(p - c) < r;
            }
    return g;
}

/// Independent oracle: materialize the 3x3x3 block and flood it directly.
bool spanning_oracle(const VoxelGrid& g) {
    const int R = g.resolution, B = 3 * R;
    std::vector<uint8_t> occ(size_t(B) * B * B), seen(size_t(B) * B * B, 0);
    auto id = [B](int i, int j, int k) { return size_t((i * B + j) * B + k); };
    for (int i = 0; i < B; ++i)
        for (int j = 0; j < B; ++j)
            for (int k = 0; k < B; ++k) occ[id(i, j, k)] = g.at(i % R, j % R, k % R);
    for (int si = 0; si < B; ++si)
        for (int sj = 0; sj < B; ++sj)
            for (int sk = 0; sk < B; ++sk) {
                if (!occ[id(si, sj, sk)] || seen[id(si, sj, sk)]) continue;
                std::vector<std::array<int, 3>> stack{{si, sj, sk}};
                seen[id(si, sj, sk)] = 1;
                bool t[6] = {};
                while (!stack.empty()) {
                    auto [i, j, k] = stack.back();
                    stack.pop_back();
                    t[0] |= i == 0;
                    t[1] |= i == B - 1;
                    t[2] |= j == 0;
                    t[3] |= j == B - 1;
                    t[4] |= k == 0;
                    t[5] |= k == B - 1;
                    const int d[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                         {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
                    for (auto& dd : d) {
                        int a = i + dd[0], b = j + dd[1], c = k + dd[2];
                        if (a < 0 || b < 0 || c < 0 || a >= B || b >= B || c >= B) continue;
                        if (!occ[id(a, b, c)] || seen[id(a, b, c)]) continue;
                        seen[id(a, b, c)] = 1;
                        stack.push_back({a, b, c});
                    }
                }
                if (t[0] && t[1] && t[2] && t[3] && t[4] && t[5]) return true;
            }
    return false;
}

}  // namespace

TEST_CASE("check_compiles accepts the appendix programs") {
    auto [ok, diag] = check_compiles(read_model("schwarz_p.py"));
    CHECK(ok);
    CHECK(diag.empty());
}

TEST_CASE("check_compiles reports non-structure returns") {
    std::string src = R"(from metagen import *

def make_structure() -> Structure:
    v0 = vertex(cuboid.corners.FRONT_BOTTOM_LEFT)
    v1 = vertex(cuboid.corners.BACK_TOP_RIGHT)
    beams = UniformBeams(skeleton([Polyline([v0, v1])]), 0.1)
    e = cuboid.embed(1.0, 1.0, 1.0, cornerAtAABBMin=cuboid.corners.FRONT_BOTTOM_LEFT)
    return Tile([beams], e)
)";
    auto [ok, diag] = check_compiles(src);
    CHECK_FALSE(ok);
    CHECK(diag.find("TypeError") != std::string::npos);
}

TEST_CASE("check_compiles carries entity suggestions") {
    std::string src = "from metagen import *\n\ndef make_structure() -> Structure:\n    return vertex(tet.faces.NORTH)\n";
    auto [ok, diag] = check_compiles(src);
    CHECK_FALSE(ok);
    CHECK(diag.find("did you mean") != std::string::npos);
}

TEST_CASE("full solid is tilable") {
    VoxelGrid g;
    g.resolution = 8;
    g.occupancy.assign(512, 1);
    auto [ok, reason] = check_tilable(g);
    CHECK(ok);
}

TEST_CASE("isolated centered sphere is not tilable") {
    auto g = sphere_grid(16, 0.25);
    auto [ok, reason] = check_tilable(g);
    CHECK_FALSE(ok);
    CHECK(reason.find("span") != std::string::npos);
    CHECK_FALSE(spanning_oracle(g));
}

TEST_CASE("tilable agrees with the materialized flood-fill oracle") {
    // frame-like grid: occupied along the voxel edges of the cell
    VoxelGrid g;
    const int R = 12;
    g.resolution = R;
    g.occupancy.assign(size_t(R) * R * R, 0);
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < R; ++j)
            for (int k = 0; k < R; ++k) {
                int edge_count = (i == 0 || i == R - 1) + (j == 0 || j == R - 1) +
                                 (k == 0 || k == R - 1);
                g.at(i, j, k) = edge_count >= 2;
            }
    auto [ok, reason] = check_tilable(g);
    CHECK(ok);
    CHECK(spanning_oracle(g));
}

TEST_CASE("tilability is invariant under axis permutation") {
    auto g = sphere_grid(12, 0.45, {0.5, 0.5, 0.3});
    VoxelGrid swapped;
    swapped.resolution = 12;
    swapped.occupancy.assign(g.occupancy.size(), 0);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j)
            for (int k = 0; k < 12; ++k) swapped.at(k, i, j) = g.at(i, j, k);
    CHECK(check_tilable(g).first == check_tilable(swapped).first);
}

TEST_CASE("mirror structures pass boundary periodicity at every resolution") {
    std::string src = R"(from metagen import *

def make_structure() -> Structure:
    v0 = vertex(cuboid.corners.FRONT_BOTTOM_LEFT)
    v1 = vertex(cuboid.edges.TOP_RIGHT, [0.3])
    skel = skeleton([Polyline([v0, v1])])
    beams = UniformBeams(skel, 0.2)
    e = cuboid.embed(0.5, 0.5, 0.5, cornerAtAABBMin=cuboid.corners.FRONT_BOTTOM_LEFT)
    return Structure(Tile([beams], e), CuboidFullMirror())
)";
    auto ir = frontend::evaluate(frontend::parse_program(src));
    for (int R : {8, 16, 24, 33}) {
        auto grid = discretize::voxelize(ir, R);
        // the periodicity half must hold; spanning may or may not
        const int n = grid.resolution;
        for (int a = 0; a < 3; ++a)
            for (int u = 0; u < n; ++u)
                for (int v = 0; v < n; ++v) {
                    int lo[3], hi[3];
                    lo[a] = 0;
                    hi[a] = n - 1;
                    lo[(a + 1) % 3] = hi[(a + 1) % 3] = u;
                    lo[(a + 2) % 3] = hi[(a + 2) % 3] = v;
                    REQUIRE(grid.at(lo[0], lo[1], lo[2]) == grid.at(hi[0], hi[1], hi[2]));
                }
    }
}

TEST_CASE("check_physical enforces the gates") {
    auto C = homog::StiffnessTensor{homog::isotropic_stiffness(0.5, 0.3)};
    auto props = homog::extract_properties(C, 0.5);
    CHECK(check_physical(props, C).first);

    auto bad = props;
    bad.E = 1.5;
    auto [ok1, r1] = check_physical(bad, C);
    CHECK_FALSE(ok1);
    CHECK(r1 == "E>1");

    auto nan = props;
    nan.nu = std::numeric_limits<double>::quiet_NaN();
    auto [ok2, r2] = check_physical(nan, C);
    CHECK_FALSE(ok2);
    CHECK(r2.find("finite") != std::string::npos);

    auto zero_v = props;
    zero_v.V = 0.0;
    CHECK_FALSE(check_physical(zero_v, C).first);
}

TEST_CASE("validate_model short-circuits on syntax errors") {
    auto report = validate_model("def broken(:\n", 8);
    CHECK_FALSE(report.compiled);
    CHECK_FALSE(report.tilable);
    CHECK_FALSE(report.physical);
    CHECK_FALSE(report.overall);
    CHECK_FALSE(report.grid.has_value());
}

TEST_CASE("floating spheres fail tilability, not compilation") {
    std::string src = R"(from metagen import *

def make_structure() -> Structure:
    v0 = vertex(cuboid.faces.TOP, [0.5, 0.5])
    skel = skeleton([v0])
    lifted = Spheres(skel, 0.1)
    e = cuboid.embed(1.0, 1.0, 1.0, cornerAtAABBMin=cuboid.corners.FRONT_BOTTOM_LEFT)
    return Structure(Tile([lifted], e), Identity())
)";
    auto report = validate_model(src, 16);
    CHECK(report.compiled);
    CHECK_FALSE(report.tilable);
    CHECK_FALSE(report.overall);
}

TEST_CASE("grid frame validates end to end") {
    // R=32 resolves the 0.06-diameter beams; at R=16 the voxel centers all
    // miss them and the structure digitizes to nothing.
    auto report = validate_model(read_model("grid_frame.py"), 32);
    CHECK(report.compiled);
    CHECK(report.tilable);
    CHECK(report.physical);
    CHECK(report.overall);
    CHECK(report.properties->E <= 1.0 + 1e-3);
    CHECK(report.elapsed_seconds > 0);
}
