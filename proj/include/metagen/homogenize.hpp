#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <vector>

#include "metagen/core.hpp"
#include "metagen/discretize.hpp"
#include "metagen/errors.hpp"

namespace metagen::homog {

using discretize::VoxelGrid;

/// Fixed reference material of the whole pipeline.
struct BaseMaterial {
    double E_base = 1.0;
    double nu_base = 0.45;
    double rho_base = 1.0;
};

using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// 6x6 stiffness in Voigt order (11,22,33,23,13,12), relative to E_base.
struct StiffnessTensor {
    Matrix6 C = Matrix6::Zero();
};

struct ComplianceTensor {
    Matrix6 S = Matrix6::Zero();
};

struct PropertyVector {
    double E = 0, G = 0, K = 0, nu = 0, A = 0, V = 0;
    double E1 = 0, E2 = 0, E3 = 0;
    double G23 = 0, G13 = 0, G12 = 0;
    double nu12 = 0, nu13 = 0, nu23 = 0, nu21 = 0, nu31 = 0, nu32 = 0;
};

inline Matrix6 isotropic_stiffness(double E, double nu) {
    const double lambda = E * nu / ((1 + nu) * (1 - 2 * nu));
    const double mu = E / (2 * (1 + nu));
    Matrix6 C = Matrix6::Zero();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) C(i, j) = (i == j) ? lambda + 2 * mu : lambda;
    for (int i = 3; i < 6; ++i) C(i, i) = mu;
    return C;
}

struct HomogenizeOptions {
    double void_stiffness_scale = 1e-9;  // E_void = scale * E_base
    double pcg_tolerance = 1e-6;         // relative residual
    int pcg_max_iterations = 5000;
    bool check_singular = true;          // throw SingularSystem on non-load-bearing axes
};

namespace detail {

/// 24x24 trilinear hexahedral element stiffness for a cube of side h and
/// unit Young's modulus (2x2x2 Gauss quadrature; exact for this element).
inline Eigen::Matrix<double, 24, 24> hex_stiffness(double h, double nu) {
    Matrix6 C = isotropic_stiffness(1.0, nu);
    Eigen::Matrix<double, 24, 24> K = Eigen::Matrix<double, 24, 24>::Zero();
    const double g = 1.0 / std::sqrt(3.0);
    for (int gp = 0; gp < 8; ++gp) {
        double xi = (gp & 1) ? g : -g;
        double eta = (gp & 2) ? g : -g;
        double zeta = (gp & 4) ? g : -g;
        // corner a has local signs (sx, sy, sz) from its bit pattern
        Eigen::Matrix<double, 6, 24> B = Eigen::Matrix<double, 6, 24>::Zero();
        for (int a = 0; a < 8; ++a) {
            double sx = (a & 1) ? 1 : -1;
            double sy = (a & 2) ? 1 : -1;
            double sz = (a & 4) ? 1 : -1;
            // dN/dx = (2/h) * dN/dxi etc.
            double dNdx = sx * (1 + sy * eta) * (1 + sz * zeta) / 8.0 * (2.0 / h);
            double dNdy = sy * (1 + sx * xi) * (1 + sz * zeta) / 8.0 * (2.0 / h);
            double dNdz = sz * (1 + sx * xi) * (1 + sy * eta) / 8.0 * (2.0 / h);
            int ux = 3 * a, uy = 3 * a + 1, uz = 3 * a + 2;
            B(0, ux) = dNdx;
            B(1, uy) = dNdy;
            B(2, uz) = dNdz;
            B(3, uy) = dNdz;
            B(3, uz) = dNdy;
            B(4, ux) = dNdz;
            B(4, uz) = dNdx;
            B(5, ux) = dNdy;
            B(5, uy) = dNdx;
        }
        K += B.transpose() * C * B * (h * h * h / 8.0);
    }
    return K;
}

/// Nodal displacements of a unit macroscopic strain over one element
/// (positions relative to the element origin; rigid part is irrelevant).
inline std::array<Eigen::Matrix<double, 24, 1>, 6> macro_displacements(double h) {
    std::array<Eigen::Matrix<double, 24, 1>, 6> u0;
    for (auto& u : u0) u.setZero();
    for (int a = 0; a < 8; ++a) {
        double x = (a & 1) ? h : 0, y = (a & 2) ? h : 0, z = (a & 4) ? h : 0;
        int ux = 3 * a, uy = 3 * a + 1, uz = 3 * a + 2;
        u0[0](ux) = x;                       // e11
        u0[1](uy) = y;                       // e22
        u0[2](uz) = z;                       // e33
        u0[3](uy) = 0.5 * z; u0[3](uz) += 0.5 * y;  // gamma23 = 1
        u0[4](ux) = 0.5 * z; u0[4](uz) += 0.5 * x;  // gamma13 = 1
        u0[5](ux) += 0.5 * y; u0[5](uy) += 0.5 * x; // gamma12 = 1
    }
    return u0;
}

}  // namespace detail

/// Periodic homogenization of the voxel grid: trilinear hexahedral elements,
/// six unit macroscopic strain cases, degree-of-freedom wrapping, and a
/// diagonally preconditioned matrix-free conjugate gradient solver. C is
/// assembled from the mutual energies of the corrected strain fields.
inline StiffnessTensor homogenize(const VoxelGrid& grid, const BaseMaterial& base = {},
                                  const HomogenizeOptions& opt = {}) {
    const int R = grid.resolution;
    if (grid.occupied_count() == 0)
        fail("SingularSystem", "the grid has no occupied voxels");
    const double h = 1.0 / R;
    const auto K0 = detail::hex_stiffness(h, base.nu_base);
    const auto u0 = detail::macro_displacements(h);
    const double E_void = opt.void_stiffness_scale * base.E_base;

    const long nodes = long(R) * R * R;
    const long ndof = nodes * 3;
    auto node_id = [R](int i, int j, int k) {
        return (long(i % R) * R + (j % R)) * R + (k % R);
    };

    const size_t nodes_sz = size_t(nodes);
    const size_t ndof_sz = size_t(ndof);
    std::vector<double> density(nodes_sz);  // element Young's moduli (element = voxel)
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < R; ++j)
            for (int k = 0; k < R; ++k)
                density[size_t(node_id(i, j, k))] = grid.at(i, j, k) ? base.E_base : E_void;

    // element -> 24 global dofs
    std::vector<int> gather(nodes_sz * 24);
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < R; ++j)
            for (int k = 0; k < R; ++k) {
                long e = node_id(i, j, k);
                for (int a = 0; a < 8; ++a) {
                    long n = node_id(i + (a & 1), j + ((a >> 1) & 1), k + ((a >> 2) & 1));
                    for (int d = 0; d < 3; ++d)
                        gather[size_t(e) * 24 + a * 3 + d] = int(n * 3 + d);
                }
            }

    auto matvec = [&](const std::vector<double>& w, std::vector<double>& y) {
        std::fill(y.begin(), y.end(), 0.0);
        Eigen::Matrix<double, 24, 1> we, ye;
        for (long e = 0; e < nodes; ++e) {
            const int* g = &gather[size_t(e) * 24];
            for (int a = 0; a < 24; ++a) we(a) = w[size_t(g[a])];
            ye.noalias() = K0 * we;
            const double Ee = density[size_t(e)];
            for (int a = 0; a < 24; ++a) y[size_t(g[a])] += Ee * ye(a);
        }
    };

    std::vector<double> diag(ndof_sz, 0.0);
    for (long e = 0; e < nodes; ++e) {
        const int* g = &gather[size_t(e) * 24];
        const double Ee = density[size_t(e)];
        for (int a = 0; a < 24; ++a) diag[size_t(g[a])] += Ee * K0(a, a);
    }

    // Six load vectors from the macroscopic strain cases.
    std::array<Eigen::Matrix<double, 24, 1>, 6> g0;
    for (int c = 0; c < 6; ++c) g0[c].noalias() = K0 * u0[c];
    std::array<std::vector<double>, 6> w_cases;
    for (int c = 0; c < 6; ++c) {
        std::vector<double> f(ndof_sz, 0.0);
        for (long e = 0; e < nodes; ++e) {
            const int* g = &gather[size_t(e) * 24];
            const double Ee = density[size_t(e)];
            for (int a = 0; a < 24; ++a) f[size_t(g[a])] -= Ee * g0[c](a);
        }

        // PCG with Jacobi preconditioner. Block-wise dot products keep the
        // reduction order fixed regardless of threading.
        std::vector<double> w(ndof_sz, 0.0), r = f, z(ndof_sz), p(ndof_sz), q(ndof_sz);
        auto dot_v = [&](const std::vector<double>& a, const std::vector<double>& b) {
            double total = 0;
            const size_t block = 4096;
            for (size_t start = 0; start < a.size(); start += block) {
                double partial = 0;
                size_t end = std::min(a.size(), start + block);
                for (size_t i = start; i < end; ++i) partial += a[i] * b[i];
                total += partial;
            }
            return total;
        };
        double fnorm = std::sqrt(dot_v(f, f));
        if (fnorm == 0.0) {
            w_cases[c] = std::move(w);
            continue;
        }
        for (size_t i = 0; i < z.size(); ++i) z[i] = r[i] / diag[i];
        p = z;
        double rz = dot_v(r, z);
        int it = 0;
        for (; it < opt.pcg_max_iterations; ++it) {
            if (std::sqrt(dot_v(r, r)) <= opt.pcg_tolerance * fnorm) break;
            matvec(p, q);
            double alpha = rz / dot_v(p, q);
            for (size_t i = 0; i < w.size(); ++i) w[i] += alpha * p[i];
            for (size_t i = 0; i < r.size(); ++i) r[i] -= alpha * q[i];
            for (size_t i = 0; i < z.size(); ++i) z[i] = r[i] / diag[i];
            double rz_new = dot_v(r, z);
            double beta = rz_new / rz;
            rz = rz_new;
            for (size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
        }
        if (it >= opt.pcg_max_iterations && std::sqrt(dot_v(r, r)) > opt.pcg_tolerance * fnorm)
            fail("SolverNoConvergence",
                 "PCG did not reach the residual tolerance in " +
                     std::to_string(opt.pcg_max_iterations) + " iterations (load case " +
                     std::to_string(c) + ")");
        w_cases[c] = std::move(w);
    }

    // Mutual energies of the corrected displacement fields.
    Matrix6 C = Matrix6::Zero();
    {
        std::array<Eigen::Matrix<double, 24, 1>, 6> v;
        std::array<Eigen::Matrix<double, 24, 1>, 6> Kv;
        for (long e = 0; e < nodes; ++e) {
            const int* g = &gather[size_t(e) * 24];
            const double Ee = density[size_t(e)];
            for (int c = 0; c < 6; ++c) {
                for (int a = 0; a < 24; ++a) v[c](a) = u0[c](a) + w_cases[c][size_t(g[a])];
                Kv[c].noalias() = K0 * v[c];
            }
            for (int a = 0; a < 6; ++a)
                for (int b = a; b < 6; ++b) C(a, b) += Ee * v[a].dot(Kv[b]);
        }
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < a; ++b) C(a, b) = C(b, a);
    }
    // |Y| = 1 for the unit cell; symmetrize away the solver noise.
    C = ((C + C.transpose()) / 2.0).eval();

    if (opt.check_singular) {
        for (int a = 0; a < 6; ++a)
            if (C(a, a) < 10.0 * E_void)
                fail("SingularSystem",
                     "structure is not load-bearing along axis " + std::to_string(a) +
                         " (C(" + std::to_string(a) + "," + std::to_string(a) + ") = " +
                         format_double(C(a, a), 6) + ")");
    }
    return StiffnessTensor{C};
}

/// Two-significant-figure rounding, half away from zero; -0 normalizes to 0.
inline double round_2sf(double x) {
    if (x == 0.0 || !std::isfinite(x)) return x == 0.0 ? 0.0 : x;
    double ax = std::abs(x);
    int e = int(std::floor(std::log10(ax)));
    long double scale = std::pow(10.0L, e - 1);
    long double v = (long double)ax / scale;
    // tiny nudge so decimal halves stored just below .5 in binary still round up
    long double r = std::floor(v + 0.5L + 1e-9L);
    double out = double(r * scale);
    return std::copysign(out, x) + 0.0;
}

inline ComplianceTensor compliance(const StiffnessTensor& Ct) {
    Eigen::JacobiSVD<Matrix6> svd(Ct.C);
    double cond = svd.singularValues()(0) / svd.singularValues()(5);
    if (!std::isfinite(cond) || cond > 1e12)
        fail("IllConditioned", "stiffness tensor condition number " + format_double(cond, 4));
    return ComplianceTensor{Ct.C.inverse()};
}

/// The 18 scalar properties via Voigt-Reuss-Hill averaging.
inline PropertyVector extract_properties(const StiffnessTensor& Ct, double volume_fraction) {
    const Matrix6& C = Ct.C;
    const Matrix6 S = compliance(Ct).S;

    PropertyVector p;
    const double K_V = (C(0, 0) + C(1, 1) + C(2, 2) + 2 * (C(0, 1) + C(0, 2) + C(1, 2))) / 9.0;
    const double G_V = ((C(0, 0) + C(1, 1) + C(2, 2)) - (C(0, 1) + C(0, 2) + C(1, 2))) / 15.0 +
                       (C(3, 3) + C(4, 4) + C(5, 5)) / 5.0;
    const double K_R = 1.0 / (S(0, 0) + S(1, 1) + S(2, 2) + 2 * (S(0, 1) + S(0, 2) + S(1, 2)));
    const double G_R = 15.0 / (4 * (S(0, 0) + S(1, 1) + S(2, 2)) -
                               4 * (S(0, 1) + S(0, 2) + S(1, 2)) +
                               3 * (S(3, 3) + S(4, 4) + S(5, 5)));
    p.K = (K_V + K_R) / 2.0;
    p.G = (G_V + G_R) / 2.0;
    p.E = 9.0 * p.K * p.G / (3.0 * p.K + p.G);
    p.nu = (3.0 * p.K - 2.0 * p.G) / (2.0 * (3.0 * p.K + p.G));
    p.A = 5.0 * G_V / G_R + K_V / K_R - 6.0;
    p.V = volume_fraction;
    p.E1 = 1.0 / S(0, 0);
    p.E2 = 1.0 / S(1, 1);
    p.E3 = 1.0 / S(2, 2);
    p.G23 = 1.0 / S(3, 3);
    p.G13 = 1.0 / S(4, 4);
    p.G12 = 1.0 / S(5, 5);
    // nu_ij = -S_ji / S_ii: loading along i, response along j
    p.nu12 = -S(1, 0) / S(0, 0);
    p.nu13 = -S(2, 0) / S(0, 0);
    p.nu23 = -S(2, 1) / S(1, 1);
    p.nu21 = -S(0, 1) / S(1, 1);
    p.nu31 = -S(0, 2) / S(2, 2);
    p.nu32 = -S(1, 2) / S(2, 2);
    return p;
}

/// Flat key -> value map with the Appendix symbol names.
inline std::vector<std::pair<std::string, double>> property_items(const PropertyVector& p) {
    return {
        {"E", p.E},       {"E_1", p.E1},    {"E_2", p.E2},    {"E_3", p.E3},
        {"G", p.G},       {"G_23", p.G23},  {"G_13", p.G13},  {"G_12", p.G12},
        {"nu", p.nu},     {"nu_12", p.nu12}, {"nu_13", p.nu13}, {"nu_23", p.nu23},
        {"nu_21", p.nu21}, {"nu_31", p.nu31}, {"nu_32", p.nu32},
        {"K", p.K},       {"A", p.A},       {"V", p.V},
    };
}

}  // namespace metagen::homog
