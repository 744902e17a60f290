#pragma once

#include <chrono>
#include <deque>
#include <optional>
#include <string>

#include "metagen/discretize.hpp"
#include "metagen/frontend.hpp"
#include "metagen/homogenize.hpp"

namespace metagen::quality {

using discretize::VoxelGrid;

struct ValidationReport {
    bool compiled = false;
    std::string compile_diagnostics;
    bool tilable = false;
    std::string tilable_reason;
    bool physical = false;
    std::string physical_reason;
    bool overall = false;
    double elapsed_seconds = 0;

    // pipeline products, kept for reuse by ingest
    assembly::StructurePtr ir;
    std::optional<VoxelGrid> grid;
    std::optional<homog::StiffnessTensor> stiffness;
    std::optional<homog::PropertyVector> properties;
};

/// MetaDSL compilation check: the program must parse and evaluate to a
/// Structure under its default parameters (all type checks included).
inline std::pair<bool, std::string> check_compiles(const std::string& program_text,
                                                   assembly::StructurePtr* out_ir = nullptr,
                                                   const frontend::EvalConfig& cfg = {}) {
    try {
        auto ast = frontend::parse_program(program_text);
        auto ir = frontend::evaluate(ast, {}, cfg);
        if (out_ir) *out_ir = ir;
        return {true, ""};
    } catch (const Error& e) {
        return {false, e.diagnostic()};
    }
}

/// 3-D tilability: opposite boundary faces of the base cell must match, and
/// one 6-connected component of the (virtual) 3x3x3 tiling must reach all
/// six outer block faces.
inline std::pair<bool, std::string> check_tilable(const VoxelGrid& grid) {
    const int R = grid.resolution;

    for (int a = 0; a < 3; ++a) {
        for (int u = 0; u < R; ++u)
            for (int v = 0; v < R; ++v) {
                int lo[3], hi[3];
                lo[a] = 0;
                hi[a] = R - 1;
                lo[(a + 1) % 3] = hi[(a + 1) % 3] = u;
                lo[(a + 2) % 3] = hi[(a + 2) % 3] = v;
                if (grid.at(lo[0], lo[1], lo[2]) != grid.at(hi[0], hi[1], hi[2]))
                    return {false, "opposite boundary faces differ along axis " + std::to_string(a)};
            }
    }

    // Periodic flood fill over the virtual 3R block.
    const int B = 3 * R;
    std::vector<uint8_t> visited(size_t(B) * B * B, 0);
    auto vid = [B](int i, int j, int k) { return size_t((i * B + j) * B + k); };
    auto occupied = [&](int i, int j, int k) { return grid.at_periodic(i, j, k); };

    for (int si = 0; si < B; ++si)
        for (int sj = 0; sj < B; ++sj)
            for (int sk = 0; sk < B; ++sk) {
                if (visited[vid(si, sj, sk)] || !occupied(si, sj, sk)) continue;
                bool touch[6] = {false, false, false, false, false, false};
                std::deque<std::array<int, 3>> queue{{si, sj, sk}};
                visited[vid(si, sj, sk)] = 1;
                while (!queue.empty()) {
                    auto [i, j, k] = queue.front();
                    queue.pop_front();
                    if (i == 0) touch[0] = true;
                    if (i == B - 1) touch[1] = true;
                    if (j == 0) touch[2] = true;
                    if (j == B - 1) touch[3] = true;
                    if (k == 0) touch[4] = true;
                    if (k == B - 1) touch[5] = true;
                    static const int d[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                                {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
                    for (auto& dd : d) {
                        int ni = i + dd[0], nj = j + dd[1], nk = k + dd[2];
                        if (ni < 0 || nj < 0 || nk < 0 || ni >= B || nj >= B || nk >= B) continue;
                        if (visited[vid(ni, nj, nk)] || !occupied(ni, nj, nk)) continue;
                        visited[vid(ni, nj, nk)] = 1;
                        queue.push_back({ni, nj, nk});
                    }
                }
                if (touch[0] && touch[1] && touch[2] && touch[3] && touch[4] && touch[5])
                    return {true, ""};
            }
    return {false, "no connected component spans the 3x3x3 tiling"};
}

/// Physical consistency: E <= 1 (relative to the base material), sensible
/// volume fraction, finite symmetric PSD stiffness.
inline std::pair<bool, std::string> check_physical(const homog::PropertyVector& props,
                                                   const homog::StiffnessTensor& Ct) {
    const double* values[] = {&props.E,   &props.G,   &props.K,    &props.nu,   &props.A,
                              &props.V,   &props.E1,  &props.E2,   &props.E3,   &props.G23,
                              &props.G13, &props.G12, &props.nu12, &props.nu13, &props.nu23,
                              &props.nu21, &props.nu31, &props.nu32};
    for (const double* v : values)
        if (!std::isfinite(*v)) return {false, "non-finite property value"};
    if (!(props.E <= 1.0 + 1e-3)) return {false, "E>1"};
    if (!(props.V > 0.0 && props.V <= 1.0)) return {false, "volume fraction outside (0,1]"};

    double scale = Ct.C.cwiseAbs().maxCoeff();
    if ((Ct.C - Ct.C.transpose()).cwiseAbs().maxCoeff() > 1e-8 * std::max(scale, 1e-30))
        return {false, "stiffness tensor is not symmetric"};
    Eigen::SelfAdjointEigenSolver<homog::Matrix6> eig(Ct.C);
    if (eig.eigenvalues()(0) < -1e-8 * std::max(scale, 1e-30))
        return {false, "stiffness tensor is not positive semidefinite"};
    return {true, ""};
}

/// Run the three MetaDB admission checks in order, short-circuiting on failure.
inline ValidationReport validate_model(const std::string& program_text, int resolution,
                                       const frontend::EvalConfig& cfg = {},
                                       const homog::HomogenizeOptions& hopt = {}) {
    auto start = std::chrono::steady_clock::now();
    ValidationReport report;

    auto [ok, diag] = check_compiles(program_text, &report.ir, cfg);
    report.compiled = ok;
    report.compile_diagnostics = diag;
    if (report.compiled) {
        report.grid = discretize::voxelize(*report.ir, resolution);
        auto [tok, treason] = check_tilable(*report.grid);
        report.tilable = tok;
        report.tilable_reason = treason;
        if (report.tilable) {
            try {
                report.stiffness = homog::homogenize(*report.grid, {}, hopt);
                report.properties =
                    homog::extract_properties(*report.stiffness, report.grid->volume_fraction());
                auto [pok, preason] = check_physical(*report.properties, *report.stiffness);
                report.physical = pok;
                report.physical_reason = preason;
            } catch (const Error& e) {
                report.physical = false;
                report.physical_reason = e.diagnostic();
            }
        }
    }
    report.overall = report.compiled && report.tilable && report.physical;
    report.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace metagen::quality
