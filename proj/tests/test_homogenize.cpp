#include <catch2/catch_amalgamated.hpp>

#include "metagen/homogenize.hpp"

using namespace metagen;
using namespace metagen::homog;
using discretize::VoxelGrid;

namespace {

VoxelGrid full_grid(int R) {
    VoxelGrid g;
    g.resolution = R;
    g.occupancy.assign(size_t(R) * R * R, 1);
    return g;
}

VoxelGrid laminate_grid(int R, int axis) {
    VoxelGrid g;
    g.resolution = R;
    g.occupancy.assign(size_t(R) * R * R, 0);
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < R; ++j)
            for (int k = 0; k < R; ++k) {
                int along = axis == 0 ? i : (axis == 1 ? j : k);
                g.at(i, j, k) = along < R / 2 ? 1 : 0;
            }
    return g;
}

/// Classical laminate (Backus) average for the stacking axis z, given the
/// two phases' isotropic stiffnesses and 50/50 fractions. Independent oracle.
Matrix6 backus_laminate(const Matrix6& C1, const Matrix6& C2) {
    auto avg = [&](auto f) { return 0.5 * (f(C1) + f(C2)); };
    double inv_c33 = avg([](const Matrix6& C) { return 1.0 / C(2, 2); });
    double c13_c33 = avg([](const Matrix6& C) { return C(0, 2) / C(2, 2); });
    double c11_rel = avg([](const Matrix6& C) { return C(0, 0) - C(0, 2) * C(0, 2) / C(2, 2); });
    double c12_rel = avg([](const Matrix6& C) { return C(0, 1) - C(0, 2) * C(0, 2) / C(2, 2); });
    double inv_c44 = avg([](const Matrix6& C) { return 1.0 / C(3, 3); });
    double c66 = avg([](const Matrix6& C) { return C(5, 5); });

    Matrix6 C = Matrix6::Zero();
    C(2, 2) = 1.0 / inv_c33;
    C(0, 2) = C(2, 0) = C(1, 2) = C(2, 1) = c13_c33 / inv_c33;
    C(0, 0) = C(1, 1) = c11_rel + c13_c33 * c13_c33 / inv_c33;
    C(0, 1) = C(1, 0) = c12_rel + c13_c33 * c13_c33 / inv_c33;
    C(3, 3) = C(4, 4) = 1.0 / inv_c44;
    C(5, 5) = c66;
    return C;
}

}  // namespace

TEST_CASE("solid grid reproduces the analytic isotropic tensor") {
    auto Ct = homogenize(full_grid(16));
    Matrix6 ref = isotropic_stiffness(1.0, 0.45);
    // C11 = E(1-nu)/((1+nu)(1-2nu)), C12 = E nu/(...), C44 = E/(2(1+nu))
    CHECK(ref(0, 0) == Catch::Approx(3.793103));
    CHECK(ref(0, 1) == Catch::Approx(3.103448));
    CHECK(ref(3, 3) == Catch::Approx(0.344828));
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            double tol = 0.01 * std::max(1.0, std::abs(ref(i, j)));
            REQUIRE(std::abs(Ct.C(i, j) - ref(i, j)) < tol);
        }

    auto props = extract_properties(Ct, 1.0);
    CHECK(props.E == Catch::Approx(1.0).margin(1e-3));
    CHECK(props.nu == Catch::Approx(0.45).margin(1e-3));
    CHECK(props.A < 1e-3);
    CHECK(props.V == 1.0);
}

TEST_CASE("empty grid is singular") {
    VoxelGrid g;
    g.resolution = 8;
    g.occupancy.assign(512, 0);
    try {
        homogenize(g);
        FAIL("expected SingularSystem");
    } catch (const Error& e) {
        CHECK(e.code() == "SingularSystem");
    }
}

TEST_CASE("laminate matches the classical series/parallel values") {
    HomogenizeOptions opt;
    opt.check_singular = false;  // the void-scale axis is the point here
    auto Ct = homogenize(laminate_grid(32, 2), {}, opt);

    Matrix6 C1 = isotropic_stiffness(1.0, 0.45);
    Matrix6 C2 = isotropic_stiffness(1e-9, 0.45);
    Matrix6 ref = backus_laminate(C1, C2);

    // series (Reuss) direction: E3 from the laminate compliance
    Matrix6 Sref = ref.inverse();
    double E3_ref = 1.0 / Sref(2, 2);
    auto S = compliance(Ct).S;
    double E3 = 1.0 / S(2, 2);
    CHECK(E3 == Catch::Approx(E3_ref).epsilon(0.05));

    // parallel (Voigt) in-plane stiffness
    CHECK(Ct.C(0, 0) == Catch::Approx(ref(0, 0)).epsilon(0.05));
}

TEST_CASE("axis permutation permutes the directional moduli") {
    HomogenizeOptions opt;
    opt.check_singular = false;
    auto Cz = homogenize(laminate_grid(16, 2), {}, opt);
    auto Cx = homogenize(laminate_grid(16, 0), {}, opt);
    auto pz = extract_properties(Cz, 0.5);
    auto px = extract_properties(Cx, 0.5);
    CHECK(px.E1 == Catch::Approx(pz.E3).epsilon(1e-4));
    CHECK(px.E2 == Catch::Approx(pz.E1).epsilon(1e-4));
    CHECK(px.G23 == Catch::Approx(pz.G12).epsilon(1e-4));
}

TEST_CASE("reuss bounds voigt for random SPD tensors") {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix6 M;
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) M(i, j) = rng.uniform(-1, 1);
        Matrix6 C = M.transpose() * M + 0.05 * Matrix6::Identity();
        StiffnessTensor Ct{C};
        auto p = extract_properties(Ct, 0.5);

        // independent re-evaluation of the VRH formulas
        Matrix6 S = C.inverse();
        double K_V = (C(0, 0) + C(1, 1) + C(2, 2) + 2 * (C(0, 1) + C(0, 2) + C(1, 2))) / 9;
        double G_V = ((C(0, 0) + C(1, 1) + C(2, 2)) - (C(0, 1) + C(0, 2) + C(1, 2))) / 15 +
                     (C(3, 3) + C(4, 4) + C(5, 5)) / 5;
        double K_R = 1 / (S(0, 0) + S(1, 1) + S(2, 2) + 2 * (S(0, 1) + S(0, 2) + S(1, 2)));
        double G_R = 15 / (4 * (S(0, 0) + S(1, 1) + S(2, 2)) - 4 * (S(0, 1) + S(0, 2) + S(1, 2)) +
                           3 * (S(3, 3) + S(4, 4) + S(5, 5)));
        REQUIRE(K_R <= K_V + 1e-9);
        REQUIRE(G_R <= G_V + 1e-9);
        REQUIRE(p.A >= -1e-6);
        REQUIRE(p.K == Catch::Approx((K_V + K_R) / 2));
        REQUIRE(p.A == Catch::Approx(5 * G_V / G_R + K_V / K_R - 6).margin(1e-9));
    }
}

TEST_CASE("cubic tensor anisotropy matches a direct formula evaluation") {
    Matrix6 C = Matrix6::Zero();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) C(i, j) = i == j ? 1.0 : 0.3;
    for (int i = 3; i < 6; ++i) C(i, i) = 0.2;
    auto p = extract_properties(StiffnessTensor{C}, 0.4);

    Matrix6 S = C.inverse();
    double K_V = (3 * 1.0 + 6 * 0.3) / 9;
    double G_V = (3 * 1.0 - 3 * 0.3) / 15 + 3 * 0.2 / 5;
    double K_R = 1 / (3 * (S(0, 0) + 2 * S(0, 1)));
    double G_R = 15 / (12 * S(0, 0) - 12 * S(0, 1) + 9 * S(3, 3));
    CHECK(p.A == Catch::Approx(5 * G_V / G_R + K_V / K_R - 6).margin(1e-12));
}

TEST_CASE("isotropic stiffness collapses VRH") {
    auto p = extract_properties(StiffnessTensor{isotropic_stiffness(1.0, 0.45)}, 1.0);
    CHECK(p.E == Catch::Approx(1.0).margin(1e-6));
    CHECK(p.nu == Catch::Approx(0.45).margin(1e-6));
    CHECK(std::abs(p.A) < 1e-6);
    for (double nu_ij : {p.nu12, p.nu13, p.nu23, p.nu21, p.nu31, p.nu32})
        CHECK(nu_ij == Catch::Approx(0.45).margin(1e-9));
}

TEST_CASE("scaling C scales the moduli but not nu or A") {
    Matrix6 base = isotropic_stiffness(0.7, 0.3);
    base(0, 1) += 0.05;
    base(1, 0) += 0.05;  // mildly anisotropic
    auto a = extract_properties(StiffnessTensor{base}, 0.5);
    auto b = extract_properties(StiffnessTensor{Matrix6(0.5 * base)}, 0.5);
    CHECK(b.E == Catch::Approx(0.5 * a.E));
    CHECK(b.G == Catch::Approx(0.5 * a.G));
    CHECK(b.K == Catch::Approx(0.5 * a.K));
    CHECK(b.nu == Catch::Approx(a.nu));
    CHECK(b.A == Catch::Approx(a.A).margin(1e-12));
}

TEST_CASE("ill conditioned tensors are rejected") {
    Matrix6 C = isotropic_stiffness(1.0, 0.45);
    C(5, 5) = 1e-15;
    try {
        compliance(StiffnessTensor{C});
        FAIL("expected IllConditioned");
    } catch (const Error& e) {
        CHECK(e.code() == "IllConditioned");
    }
}

TEST_CASE("round_2sf") {
    CHECK(round_2sf(0.2681) == 0.27);
    CHECK(round_2sf(-0.004449) == -0.0044);
    CHECK(round_2sf(0.995) == 1.0);
    CHECK(round_2sf(0.0) == 0.0);
    CHECK(std::signbit(round_2sf(-0.0)) == false);
    CHECK(round_2sf(123456.0) == 120000.0);
    CHECK(round_2sf(0.451) == 0.45);
    CHECK(round_2sf(-1.0) == -1.0);
    CHECK(round_2sf(19.5) == 20.0);
}
