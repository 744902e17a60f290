#pragma once

// Test-only oracles, independent of the implementation paths they check.

#include <functional>
#include <vector>

#include "metagen/assembly.hpp"
#include "metagen/core.hpp"
#include "metagen/cp.hpp"

namespace oracles {

using metagen::Vec3;

/// Monte-Carlo volume estimate of {field < 0} over the unit cell.
inline double mc_volume(const std::function<double(const Vec3&)>& field, int samples,
                        uint64_t seed) {
    metagen::Rng rng(seed);
    int inside = 0;
    for (int i = 0; i < samples; ++i) {
        Vec3 p{rng.uniform(), rng.uniform(), rng.uniform()};
        if (field(p) < 0) ++inside;
    }
    return double(inside) / samples;
}

/// Point containment in the canonical polytope image under an embedding +
/// isometry, with strict interior tolerance.
inline bool inside_cp(const metagen::assembly::Embedding& e, const metagen::assembly::Isometry& iso,
                      const Vec3& world, double tol = 1e-9) {
    using metagen::cp::PolytopeKind;
    // invert: canonical <- embedding <- isometry
    Vec3 local = iso.apply_inverse(world);
    Vec3 c;
    for (int a = 0; a < 3; ++a) {
        double u = (local[a] - e.min_pt[a]) / e.size[a];
        c[a] = e.flip[a] ? 1.0 - u : u;
    }
    switch (e.polytope) {
        case PolytopeKind::Cuboid:
            return c.x > tol && c.x < 1 - tol && c.y > tol && c.y < 1 - tol && c.z > tol &&
                   c.z < 1 - tol;
        case PolytopeKind::Tet:
            return c.z > tol && c.y > c.z + tol && c.x > c.y + tol && c.x < 1 - tol &&
                   c.y > tol && c.y < 1 - tol;
        case PolytopeKind::TriPrism:
            return c.x > tol && c.z > tol && c.x + c.z < 1 - tol && c.y > tol && c.y < 1 - tol;
    }
    return false;
}

/// Voxel-paint coverage multiplicity over [0,1]^3 at resolution R. Query
/// points carry a fixed sub-voxel offset so none of them sits exactly on a
/// mirror plane (those belong to no open interior).
struct PaintResult {
    int max_multiplicity = 0;
    int min_multiplicity = 1 << 30;
    long covered = 0;
    long total = 0;
};

inline PaintResult voxel_paint(const metagen::assembly::Embedding& e,
                               const metagen::assembly::TransformSet& set, int R = 64) {
    PaintResult res;
    const Vec3 jitter{0.137, 0.251, 0.383};
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < R; ++j)
            for (int k = 0; k < R; ++k) {
                Vec3 p{(i + jitter.x) / R, (j + jitter.y) / R, (k + jitter.z) / R};
                int count = 0;
                for (const auto& iso : set.isometries)
                    if (inside_cp(e, iso, p)) ++count;
                res.max_multiplicity = std::max(res.max_multiplicity, count);
                res.min_multiplicity = std::min(res.min_multiplicity, count);
                if (count > 0) ++res.covered;
                ++res.total;
            }
    return res;
}

/// O(n*m) brute-force distance to a triangle soup.
inline double brute_force_distance(const Vec3& p, const std::vector<Vec3>& verts,
                                   const std::vector<std::array<int, 3>>& tris) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : tris) {
        Vec3 q = metagen::lifting::closest_point_triangle(p, verts[t[0]], verts[t[1]], verts[t[2]]);
        best = std::min(best, metagen::norm(p - q));
    }
    return best;
}

}  // namespace oracles
