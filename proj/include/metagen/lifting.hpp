#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <map>
#include <optional>
#include <vector>

#include "metagen/core.hpp"
#include "metagen/cp.hpp"
#include "metagen/errors.hpp"

namespace metagen::lifting {

using cp::LiftKind;
using cp::SkeletonSpec;

/// Piecewise-linear beam diameter over normalized arc length.
struct ThicknessProfile {
    std::vector<std::pair<double, double>> samples;  // (t, diameter)

    void validate() const {
        if (samples.size() < 2) fail("ProfileRange", "profile needs at least 2 samples");
        for (auto& [t, d] : samples) {
            if (!(t >= 0.0 && t <= 1.0)) fail("ProfileRange", "profile position outside [0,1]");
            if (!(d > 0.0)) fail("NonPositiveThickness", "profile diameter must be positive");
        }
        for (size_t i = 1; i < samples.size(); ++i)
            if (!(samples[i].first > samples[i - 1].first))
                fail("ProfileNotIncreasing", "profile positions must be strictly increasing");
        if (samples.front().first != 0.0 || samples.back().first != 1.0)
            fail("ProfileRange", "profile must cover positions 0 and 1");
    }

    double diameter_at(double t) const {
        t = std::clamp(t, 0.0, 1.0);
        for (size_t i = 1; i < samples.size(); ++i) {
            if (t <= samples[i].first) {
                auto [t0, d0] = samples[i - 1];
                auto [t1, d1] = samples[i];
                double u = (t - t0) / (t1 - t0);
                return d0 + (d1 - d0) * u;
            }
        }
        return samples.back().second;
    }
};

/// Triangulated shell mid-surface in canonical CP coordinates.
struct SurfacePatch {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> boundary_loop;  // ordered boundary vertex indices

    /// Barycentric expression of a patch vertex over the CP corners
    /// (trilinear for the cuboid, barycentric for the simplices).
    std::vector<double> corner_weights(const cp::Polytope& p, int vi) const {
        const Vec3 q = vertices[vi];
        std::vector<double> w(p.corner_count(), 0.0);
        if (p.kind == cp::PolytopeKind::Cuboid) {
            for (int c = 0; c < 8; ++c) {
                const Vec3& cc = p.corner_pos[c];
                w[c] = (cc.x > 0.5 ? q.x : 1 - q.x) * (cc.y > 0.5 ? q.y : 1 - q.y) *
                       (cc.z > 0.5 ? q.z : 1 - q.z);
            }
        } else if (p.kind == cp::PolytopeKind::Tet) {
            // corners: BR=(1,0,0) BL=(0,0,0) TB=(1,1,1) BB=(1,1,0)
            double wTB = q.z, wBB = q.y - q.z, wBR = q.x - q.y, wBL = 1 - q.x;
            w = {wBR, wBL, wTB, wBB};
        } else {
            // prism: triangle barycentric in (x,z) times linear depth in y
            double b0 = 1 - q.x - q.z, b1 = q.z, b2 = q.x;
            w = {b0 * (1 - q.y), b1 * (1 - q.y), b2 * (1 - q.y),
                 b0 * q.y,       b1 * q.y,       b2 * q.y};
        }
        return w;
    }
};

/// One beam piece: segment with linearly varying radius.
struct BeamSegment {
    Vec3 a, b;
    double ra, rb;
};

/// Volumetric recipe for a skeleton: geometry in canonical CP coordinates,
/// radii/thicknesses in world units (applied after embedding).
struct LiftedSkeleton {
    SkeletonSpec skeleton;
    LiftKind kind;
    double thickness = 0.0;                    // diameter (beams), radius (spheres), shell thickness
    std::optional<ThicknessProfile> profile;   // SpatiallyVaryingBeams only
    std::vector<BeamSegment> beams;
    std::vector<std::pair<Vec3, double>> spheres;  // center, radius
    std::optional<SurfacePatch> surface_cache;     // shell kinds only
};

// ---------------------------------------------------------------------------
// Path sampling

/// Centripetal Catmull-Rom interpolating spline through the path vertices,
/// 16 samples per segment. Polylines are returned exact.
inline std::vector<Vec3> sample_path(const cp::PathSpec& path, const cp::Polytope& poly,
                                     int samples_per_segment = 16) {
    std::vector<Vec3> pts;
    for (auto& v : path.vertices) pts.push_back(v.position(poly));
    if (!path.smooth) {
        if (path.closed) pts.push_back(pts.front());
        return pts;
    }

    const int n = int(pts.size());
    auto at = [&](int i) -> Vec3 {
        if (path.closed) return pts[((i % n) + n) % n];
        return pts[std::clamp(i, 0, n - 1)];
    };
    auto knot = [&](const Vec3& a, const Vec3& b) {
        return std::sqrt(std::max(norm(b - a), 1e-12));  // centripetal alpha = 0.5
    };
    std::vector<Vec3> out;
    const int nseg = path.closed ? n : n - 1;
    for (int s = 0; s < nseg; ++s) {
        Vec3 p0 = at(s - 1), p1 = at(s), p2 = at(s + 1), p3 = at(s + 2);
        double t0 = 0, t1 = t0 + knot(p0, p1), t2 = t1 + knot(p1, p2), t3 = t2 + knot(p2, p3);
        for (int j = 0; j < samples_per_segment; ++j) {
            double t = t1 + (t2 - t1) * double(j) / samples_per_segment;
            auto lin = [&](const Vec3& a, const Vec3& b, double ta, double tb) {
                return (tb - ta) > 0 ? a * ((tb - t) / (tb - ta)) + b * ((t - ta) / (tb - ta)) : a;
            };
            Vec3 a1 = lin(p0, p1, t0, t1), a2 = lin(p1, p2, t1, t2), a3 = lin(p2, p3, t2, t3);
            Vec3 b1 = lin(a1, a2, t0, t2), b2 = lin(a2, a3, t1, t3);
            out.push_back(lin(b1, b2, t1, t2));
        }
    }
    out.push_back(path.closed ? out.front() : pts.back());
    return out;
}

// ---------------------------------------------------------------------------
// Beam and sphere lifts

inline LiftedSkeleton lift_uniform_beams(const SkeletonSpec& skel, double thickness) {
    cp::check_lift_compat(skel, LiftKind::UniformBeams);
    if (!(thickness > 0.0)) fail("NonPositiveThickness", "beam diameter must be positive");
    LiftedSkeleton lift{skel, LiftKind::UniformBeams, thickness, {}, {}, {}, {}};
    const auto& poly = cp::polytope(skel.polytope_kind);
    const double r = thickness / 2.0;
    for (const auto& path : skel.paths) {
        auto pts = sample_path(path, poly);
        for (size_t i = 0; i + 1 < pts.size(); ++i)
            lift.beams.push_back({pts[i], pts[i + 1], r, r});
    }
    return lift;
}

inline LiftedSkeleton lift_varying_beams(const SkeletonSpec& skel, const ThicknessProfile& profile) {
    cp::check_lift_compat(skel, LiftKind::SpatiallyVaryingBeams);
    profile.validate();
    LiftedSkeleton lift{skel, LiftKind::SpatiallyVaryingBeams, 0.0, profile, {}, {}, {}};
    const auto& poly = cp::polytope(skel.polytope_kind);
    for (const auto& path : skel.paths) {
        auto pts = sample_path(path, poly);
        std::vector<double> arc(pts.size(), 0.0);
        for (size_t i = 1; i < pts.size(); ++i) arc[i] = arc[i - 1] + norm(pts[i] - pts[i - 1]);
        double total = arc.back() > 0 ? arc.back() : 1.0;

        // Cut at the profile breakpoints; radius then varies linearly along
        // each piece, so the round-cone union is the exact field.
        std::vector<std::pair<double, Vec3>> samples;
        for (size_t i = 0; i < pts.size(); ++i) samples.emplace_back(arc[i] / total, pts[i]);
        for (auto& [tb, d] : profile.samples) {
            if (tb <= 0.0 || tb >= 1.0) continue;
            double target = tb * total;
            auto it = std::upper_bound(arc.begin(), arc.end(), target);
            if (it == arc.begin() || it == arc.end()) continue;
            size_t hi = size_t(it - arc.begin());
            if (std::abs(arc[hi] - target) < 1e-12 || std::abs(arc[hi - 1] - target) < 1e-12) continue;
            double u = (target - arc[hi - 1]) / (arc[hi] - arc[hi - 1]);
            samples.emplace_back(tb, lerp(pts[hi - 1], pts[hi], u));
        }
        std::sort(samples.begin(), samples.end(),
                  [](auto& a, auto& b) { return a.first < b.first; });
        for (size_t i = 0; i + 1 < samples.size(); ++i)
            lift.beams.push_back({samples[i].second, samples[i + 1].second,
                                  profile.diameter_at(samples[i].first) / 2.0,
                                  profile.diameter_at(samples[i + 1].first) / 2.0});
    }
    return lift;
}

inline LiftedSkeleton lift_spheres(const SkeletonSpec& skel, double radius) {
    cp::check_lift_compat(skel, LiftKind::Spheres);
    if (!(radius > 0.0)) fail("NonPositiveThickness", "sphere radius must be positive");
    LiftedSkeleton lift{skel, LiftKind::Spheres, radius, {}, {}, {}, {}};
    const auto& poly = cp::polytope(skel.polytope_kind);
    for (const auto& v : skel.points) lift.spheres.push_back({v.position(poly), radius});
    return lift;
}

/// Exact signed distance to the convex hull of two spheres (round cone).
inline double round_cone_distance(const Vec3& p, const BeamSegment& s) {
    const Vec3 ba = s.b - s.a;
    const double l2 = norm2(ba);
    const double rr = s.ra - s.rb;
    const double a2 = l2 - rr * rr;
    if (a2 <= 1e-18 || l2 <= 1e-18) {
        // One end sphere contains the cone (or degenerate segment).
        return std::min(norm(p - s.a) - s.ra, norm(p - s.b) - s.rb);
    }
    const double il2 = 1.0 / l2;
    const Vec3 pa = p - s.a;
    const double y = dot(pa, ba);
    const double z = y - l2;
    const double x2 = norm2(pa * l2 - ba * y);
    const double y2 = y * y * l2;
    const double z2 = z * z * l2;
    const double k = (rr < 0 ? -1.0 : 1.0) * rr * rr * x2;
    if ((z < 0 ? -1.0 : 1.0) * a2 * z2 > k) return std::sqrt(x2 + z2) * il2 - s.rb;
    if ((y < 0 ? -1.0 : 1.0) * a2 * y2 < k) return std::sqrt(x2 + y2) * il2 - s.ra;
    return (std::sqrt(x2 * a2 * il2) + y * rr) * il2 - s.ra;
}

inline double capsule_distance(const Vec3& p, const BeamSegment& s) {
    if (s.ra == s.rb) return segment_distance(p, s.a, s.b) - s.ra;
    return round_cone_distance(p, s);
}

// ---------------------------------------------------------------------------
// Triangle BVH (unsigned distance queries for shell fields)

inline Vec3 closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0 && d2 <= 0) return a;
    const Vec3 bp = p - b;
    double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0 && d4 <= d3) return b;
    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));
    const Vec3 cpv = p - c;
    double d5 = dot(ab, cpv), d6 = dot(ac, cpv);
    if (d6 >= 0 && d5 <= d6) return c;
    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));
    double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

class TriBvh {
  public:
    TriBvh() = default;
    TriBvh(std::vector<Vec3> verts, std::vector<std::array<int, 3>> tris)
        : verts_(std::move(verts)), tris_(std::move(tris)) {
        order_.resize(tris_.size());
        for (size_t i = 0; i < order_.size(); ++i) order_[i] = int(i);
        if (!tris_.empty()) build(0, int(tris_.size()));
    }

    bool empty() const { return tris_.empty(); }

    double distance(const Vec3& p) const {
        if (tris_.empty()) return std::numeric_limits<double>::infinity();
        double best = std::numeric_limits<double>::infinity();
        query(0, p, best);
        return std::sqrt(best);
    }

  private:
    struct Node {
        Vec3 lo, hi;
        int left = -1, right = -1;  // children, or leaf range below
        int start = 0, count = 0;
    };

    double box_dist2(const Node& n, const Vec3& p) const {
        double d2 = 0;
        for (int i = 0; i < 3; ++i) {
            double v = p[i];
            if (v < n.lo[i]) d2 += sqr(n.lo[i] - v);
            else if (v > n.hi[i]) d2 += sqr(v - n.hi[i]);
        }
        return d2;
    }

    int build(int start, int count) {
        Node node;
        node.lo = {1e30, 1e30, 1e30};
        node.hi = {-1e30, -1e30, -1e30};
        for (int i = start; i < start + count; ++i)
            for (int v : tris_[order_[i]]) {
                node.lo = vmin(node.lo, verts_[v]);
                node.hi = vmax(node.hi, verts_[v]);
            }
        int idx = int(nodes_.size());
        nodes_.push_back(node);
        if (count <= 4) {
            nodes_[idx].start = start;
            nodes_[idx].count = count;
            return idx;
        }
        Vec3 ext = node.hi - node.lo;
        int axis = ext.x >= ext.y && ext.x >= ext.z ? 0 : (ext.y >= ext.z ? 1 : 2);
        auto center = [&](int t) {
            return (verts_[tris_[t][0]][axis] + verts_[tris_[t][1]][axis] + verts_[tris_[t][2]][axis]) / 3.0;
        };
        std::nth_element(order_.begin() + start, order_.begin() + start + count / 2,
                         order_.begin() + start + count,
                         [&](int a, int b) { return center(a) < center(b); });
        int mid = count / 2;
        int l = build(start, mid);
        int r = build(start + mid, count - mid);
        nodes_[idx].left = l;
        nodes_[idx].right = r;
        return idx;
    }

    void query(int idx, const Vec3& p, double& best) const {
        const Node& n = nodes_[idx];
        if (box_dist2(n, p) >= best) return;
        if (n.left < 0) {
            for (int i = n.start; i < n.start + n.count; ++i) {
                const auto& t = tris_[order_[i]];
                Vec3 q = closest_point_triangle(p, verts_[t[0]], verts_[t[1]], verts_[t[2]]);
                best = std::min(best, norm2(p - q));
            }
            return;
        }
        double dl = box_dist2(nodes_[n.left], p), dr = box_dist2(nodes_[n.right], p);
        if (dl < dr) {
            query(n.left, p, best);
            query(n.right, p, best);
        } else {
            query(n.right, p, best);
            query(n.left, p, best);
        }
    }

    std::vector<Vec3> verts_;
    std::vector<std::array<int, 3>> tris_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

/// Signed shell solid value: unsigned distance to the mid-surface minus
/// half the thickness (negative inside the shell solid).
inline double shell_field(const TriBvh& surface, double thickness, const Vec3& p) {
    return surface.distance(p) - thickness / 2.0;
}

// ---------------------------------------------------------------------------
// Shell solvers

namespace detail {

/// Boundary vertex constraint during shell solves.
struct Constraint {
    enum Kind { Free, Pin, Plane, Line } kind = Free;
    Vec3 n;       // plane normal (Plane)
    double d = 0; // plane offset (Plane)
    Vec3 p0, dir; // line anchor/direction (Line)

    Vec3 apply(const Vec3& target, const Vec3& original) const {
        switch (kind) {
            case Free: return target;
            case Pin: return original;
            case Plane: return target - n * (dot(n, target) - d);
            case Line: return p0 + dir * dot(target - p0, dir);
        }
        return target;
    }

    /// Project a motion direction onto the constraint's tangent space.
    Vec3 project_dir(const Vec3& v) const {
        switch (kind) {
            case Free: return v;
            case Pin: return {0, 0, 0};
            case Plane: return v - n * dot(n, v);
            case Line: return dir * dot(dir, v);
        }
        return v;
    }
};

struct PatchMesh {
    std::vector<Vec3> V;
    std::vector<std::array<int, 3>> T;
    std::vector<Constraint> C;          // per vertex
    std::vector<int> boundary_loop;     // ordered cycle
    std::vector<int> boundary_arc;      // arc id per boundary-loop position

    SurfacePatch to_patch() const { return SurfacePatch{V, T, boundary_loop}; }
};

/// Fan-triangulate a closed boundary polygon from its centroid, then refine
/// `rounds` times (1:4). arc_of[i] labels boundary edge (i, i+1).
inline PatchMesh build_fan_patch(const std::vector<Vec3>& polygon,
                                 const std::vector<Constraint>& vertex_constraints,
                                 const std::vector<int>& arc_of,
                                 const std::vector<Constraint>& arc_constraints, int rounds = 3) {
    PatchMesh m;
    const int nb = int(polygon.size());
    m.V = polygon;
    m.C = vertex_constraints;
    Vec3 centroid{0, 0, 0};
    for (auto& p : polygon) centroid += p;
    centroid = centroid / double(nb);
    m.V.push_back(centroid);
    m.C.push_back({});
    for (int i = 0; i < nb; ++i) m.T.push_back({i, (i + 1) % nb, nb});

    // boundary edge -> arc id
    std::map<std::pair<int, int>, int> edge_arc;
    auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
    for (int i = 0; i < nb; ++i) edge_arc[key(i, (i + 1) % nb)] = arc_of[i];

    for (int r = 0; r < rounds; ++r) {
        std::map<std::pair<int, int>, int> midpoint;
        std::map<std::pair<int, int>, int> new_edge_arc;
        auto mid = [&](int a, int b) {
            auto k = key(a, b);
            auto it = midpoint.find(k);
            if (it != midpoint.end()) return it->second;
            int idx = int(m.V.size());
            m.V.push_back((m.V[a] + m.V[b]) * 0.5);
            auto ea = edge_arc.find(k);
            if (ea != edge_arc.end()) {
                m.C.push_back(arc_constraints[ea->second]);
                new_edge_arc[key(a, idx)] = ea->second;
                new_edge_arc[key(idx, b)] = ea->second;
            } else {
                m.C.push_back({});
            }
            midpoint[k] = idx;
            return idx;
        };
        std::vector<std::array<int, 3>> nt;
        nt.reserve(m.T.size() * 4);
        for (auto& t : m.T) {
            int ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
            nt.push_back({t[0], ab, ca});
            nt.push_back({t[1], bc, ab});
            nt.push_back({t[2], ca, bc});
            nt.push_back({ab, bc, ca});
        }
        m.T = std::move(nt);
        edge_arc = std::move(new_edge_arc);
    }

    // Recover the ordered boundary cycle: edges used by exactly one triangle.
    std::map<std::pair<int, int>, int> edge_count;
    std::map<int, std::vector<int>> badj;
    for (auto& t : m.T)
        for (int e = 0; e < 3; ++e) edge_count[key(t[e], t[(e + 1) % 3])]++;
    for (auto& [e, c] : edge_count)
        if (c == 1) {
            badj[e.first].push_back(e.second);
            badj[e.second].push_back(e.first);
        }
    m.boundary_loop.clear();
    int prev = -1, cur = 0;
    do {
        m.boundary_loop.push_back(cur);
        auto& nbrs = badj[cur];
        int nxt = (nbrs[0] != prev) ? nbrs[0] : nbrs[1];
        prev = cur;
        cur = nxt;
    } while (cur != 0);
    return m;
}

inline std::vector<std::vector<int>> vertex_neighbors(const PatchMesh& m) {
    std::vector<std::vector<int>> nbr(m.V.size());
    auto add = [&](int a, int b) {
        if (std::find(nbr[a].begin(), nbr[a].end(), b) == nbr[a].end()) nbr[a].push_back(b);
    };
    for (auto& t : m.T)
        for (int e = 0; e < 3; ++e) {
            add(t[e], t[(e + 1) % 3]);
            add(t[(e + 1) % 3], t[e]);
        }
    return nbr;
}

/// Solve the uniform-Laplacian (graph harmonic) interior with constrained
/// vertices fixed: the fixed point of iterated umbrella smoothing.
inline void solve_graph_harmonic(PatchMesh& m) {
    auto nbr = vertex_neighbors(m);
    std::vector<int> free_idx(m.V.size(), -1);
    int nfree = 0;
    for (size_t i = 0; i < m.V.size(); ++i)
        if (m.C[i].kind == Constraint::Free) free_idx[i] = nfree++;
    if (nfree == 0) return;

    Eigen::SparseMatrix<double> L(nfree, nfree);
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nfree, 3);
    for (size_t i = 0; i < m.V.size(); ++i) {
        if (free_idx[i] < 0) continue;
        int fi = free_idx[i];
        trip.emplace_back(fi, fi, double(nbr[i].size()));
        for (int j : nbr[i]) {
            if (free_idx[j] >= 0) {
                trip.emplace_back(fi, free_idx[j], -1.0);
            } else {
                rhs(fi, 0) += m.V[j].x;
                rhs(fi, 1) += m.V[j].y;
                rhs(fi, 2) += m.V[j].z;
            }
        }
    }
    L.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(L);
    if (solver.info() != Eigen::Success) fail("SolveDiverged", "harmonic factorization failed");
    Eigen::MatrixXd x = solver.solve(rhs);
    for (size_t i = 0; i < m.V.size(); ++i)
        if (free_idx[i] >= 0) m.V[i] = {x(free_idx[i], 0), x(free_idx[i], 1), x(free_idx[i], 2)};
}

inline double cotangent(const Vec3& a, const Vec3& b, const Vec3& c) {
    // angle at a between ab and ac
    Vec3 u = b - a, v = c - a;
    double cr = norm(cross(u, v));
    return cr > 1e-14 ? dot(u, v) / cr : 0.0;
}

/// One Pinkall-Polthier step: solve the cotan-harmonic problem on the
/// current metric. With `with_sliding`, plane/line-constrained boundary
/// vertices join the unknowns and are projected back onto their constraint
/// afterwards (free-boundary minimal surfaces on mirror planes).
/// Returns max vertex move.
inline double cotan_harmonic_step(PatchMesh& m, bool with_sliding = false) {
    std::vector<int> free_idx(m.V.size(), -1);
    int nfree = 0;
    for (size_t i = 0; i < m.V.size(); ++i) {
        bool unknown = m.C[i].kind == Constraint::Free ||
                       (with_sliding && (m.C[i].kind == Constraint::Plane ||
                                         m.C[i].kind == Constraint::Line));
        if (unknown) free_idx[i] = nfree++;
    }
    if (nfree == 0) return 0.0;

    std::map<std::pair<int, int>, double> w;
    auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
    for (auto& t : m.T) {
        for (int e = 0; e < 3; ++e) {
            int a = t[e], b = t[(e + 1) % 3], c = t[(e + 2) % 3];
            w[key(a, b)] += 0.5 * std::max(cotangent(m.V[c], m.V[a], m.V[b]), 0.0);
        }
    }
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nfree, 3);
    std::vector<double> diag(nfree, 0.0);
    for (auto& [e, wij] : w) {
        double wv = wij + 1e-12;
        int a = e.first, b = e.second;
        if (free_idx[a] >= 0) diag[free_idx[a]] += wv;
        if (free_idx[b] >= 0) diag[free_idx[b]] += wv;
        if (free_idx[a] >= 0 && free_idx[b] >= 0) {
            trip.emplace_back(free_idx[a], free_idx[b], -wv);
            trip.emplace_back(free_idx[b], free_idx[a], -wv);
        } else if (free_idx[a] >= 0) {
            for (int k = 0; k < 3; ++k) rhs(free_idx[a], k) += wv * m.V[b][k];
        } else if (free_idx[b] >= 0) {
            for (int k = 0; k < 3; ++k) rhs(free_idx[b], k) += wv * m.V[a][k];
        }
    }
    for (int i = 0; i < nfree; ++i) trip.emplace_back(i, i, diag[i]);
    Eigen::SparseMatrix<double> L(nfree, nfree);
    L.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(L);
    if (solver.info() != Eigen::Success) fail("SolveDiverged", "cotan factorization failed");
    Eigen::MatrixXd x = solver.solve(rhs);
    double max_move = 0.0;
    for (size_t i = 0; i < m.V.size(); ++i)
        if (free_idx[i] >= 0) {
            Vec3 nv{x(free_idx[i], 0), x(free_idx[i], 1), x(free_idx[i], 2)};
            nv = m.C[i].apply(nv, m.V[i]);
            max_move = std::max(max_move, norm(nv - m.V[i]));
            m.V[i] = nv;
        }
    return max_move;
}

/// Cotan mean-curvature vectors (Laplace-Beltrami of position / 2A) and the
/// per-vertex mean curvature magnitudes.
inline void mean_curvature(const PatchMesh& m, std::vector<Vec3>& hvec, std::vector<double>& hmag) {
    hvec.assign(m.V.size(), Vec3{0, 0, 0});
    std::vector<double> area(m.V.size(), 0.0);
    for (auto& t : m.T) {
        double a = 0.5 * norm(cross(m.V[t[1]] - m.V[t[0]], m.V[t[2]] - m.V[t[0]]));
        for (int e = 0; e < 3; ++e) {
            int i = t[e], j = t[(e + 1) % 3], k = t[(e + 2) % 3];
            double c = std::max(cotangent(m.V[k], m.V[i], m.V[j]), 0.0);
            hvec[i] += (m.V[j] - m.V[i]) * (0.5 * c);
            hvec[j] += (m.V[i] - m.V[j]) * (0.5 * c);
            area[i] += a / 3.0;
        }
    }
    hmag.assign(m.V.size(), 0.0);
    for (size_t i = 0; i < m.V.size(); ++i) {
        if (area[i] > 1e-14) hvec[i] = hvec[i] / (2.0 * area[i]);
        hmag[i] = 0.5 * norm(hvec[i]);
    }
}

/// Boundary polygon + constraints from the skeleton loop. Arc i covers the
/// samples of loop segment i; smooth segments slide in their shared face
/// plane during TPMS solves, polyline segments stay pinned.
struct LoopBoundary {
    std::vector<Vec3> polygon;
    std::vector<Constraint> vertex_constraints;
    std::vector<int> arc_of;                  // per boundary edge
    std::vector<Constraint> arc_constraints;  // per arc
};

/// Face plane with the normal oriented outward (away from the CP centroid).
inline Vec3 face_plane_normal(const cp::Polytope& p, const cp::FaceDef& f, double& d_out) {
    Vec3 a = p.corner_pos[f.cycle[0]], b = p.corner_pos[f.cycle[1]], c = p.corner_pos[f.cycle[2]];
    Vec3 n = normalized(cross(b - a, c - a));
    Vec3 centroid{0, 0, 0};
    for (int i = 0; i < p.corner_count(); ++i) centroid += p.corner_pos[i];
    centroid = centroid / double(p.corner_count());
    if (dot(n, centroid - a) > 0) n = -n;
    d_out = dot(n, a);
    return n;
}

inline LoopBoundary loop_boundary(const SkeletonSpec& skel, bool sliding) {
    const auto& poly = cp::polytope(skel.polytope_kind);
    auto cycle = skel.loop_cycle();
    const int n = int(cycle.size());

    // Per-segment smoothness: find the path containing each cycle edge.
    auto segment_smooth = [&](const cp::VertexSpec& a, const cp::VertexSpec& b) {
        for (const auto& path : skel.paths) {
            for (int s = 0; s < path.segment_count(); ++s) {
                auto [i, j] = path.segment(s);
                if ((cp::vertex_equal(path.vertices[i], a) && cp::vertex_equal(path.vertices[j], b)) ||
                    (cp::vertex_equal(path.vertices[i], b) && cp::vertex_equal(path.vertices[j], a)))
                    return path.smooth;
            }
        }
        return false;
    };

    LoopBoundary lb;
    std::vector<bool> smooth(n);
    std::vector<Constraint> seg_constraint(n);
    for (int s = 0; s < n; ++s) {
        const auto& a = cycle[s];
        const auto& b = cycle[(s + 1) % n];
        smooth[s] = segment_smooth(a, b);
        Constraint c;
        if (sliding && smooth[s]) {
            auto fname = cp::detail::shared_face(poly, a.support(), b.support());
            if (fname) {
                c.kind = Constraint::Plane;
                c.n = face_plane_normal(poly, poly.face(*fname), c.d);
            } else {
                c.kind = Constraint::Pin;
            }
        } else {
            c.kind = Constraint::Pin;
        }
        seg_constraint[s] = c;
    }

    for (int s = 0; s < n; ++s) {
        const auto& v = cycle[s];
        // Corner vertex: intersection of the adjacent segments' constraints.
        const Constraint& prev = seg_constraint[(s - 1 + n) % n];
        const Constraint& cur = seg_constraint[s];
        Constraint corner;
        Vec3 vp = v.position(poly);
        if (prev.kind == Constraint::Plane && cur.kind == Constraint::Plane) {
            Vec3 dir = cross(prev.n, cur.n);
            if (norm(dir) > 1e-9) {
                corner.kind = Constraint::Line;
                corner.p0 = vp;
                corner.dir = normalized(dir);
            } else {
                corner.kind = Constraint::Plane;
                corner.n = cur.n;
                corner.d = cur.d;
            }
        } else {
            corner.kind = Constraint::Pin;
        }
        lb.polygon.push_back(vp);
        lb.vertex_constraints.push_back(corner);
        lb.arc_of.push_back(s);

        // Interior samples of smooth segments (spline), exact for polylines.
        if (smooth[s]) {
            cp::PathSpec seg;
            // Local 4-point window for the spline so that the resampled loop
            // matches the full-path spline shape.
            std::vector<cp::VertexSpec> window = {cycle[(s - 1 + n) % n], cycle[s],
                                                  cycle[(s + 1) % n], cycle[(s + 2) % n]};
            std::vector<Vec3> wp;
            for (auto& w : window) wp.push_back(w.position(poly));
            auto knot = [&](const Vec3& a2, const Vec3& b2) {
                return std::sqrt(std::max(norm(b2 - a2), 1e-12));
            };
            double t0 = 0, t1 = knot(wp[0], wp[1]), t2 = t1 + knot(wp[1], wp[2]),
                   t3 = t2 + knot(wp[2], wp[3]);
            for (int j = 1; j < 16; ++j) {
                double t = t1 + (t2 - t1) * double(j) / 16.0;
                auto lin = [&](const Vec3& x, const Vec3& y, double ta, double tb) {
                    return (tb - ta) > 0 ? x * ((tb - t) / (tb - ta)) + y * ((t - ta) / (tb - ta)) : x;
                };
                Vec3 a1 = lin(wp[0], wp[1], t0, t1), a2v = lin(wp[1], wp[2], t1, t2),
                     a3 = lin(wp[2], wp[3], t2, t3);
                Vec3 b1 = lin(a1, a2v, t0, t2), b2 = lin(a2v, a3, t1, t3);
                lb.polygon.push_back(lin(b1, b2, t1, t2));
                lb.vertex_constraints.push_back(seg_constraint[s]);
                lb.arc_of.push_back(s);
            }
        }
    }
    lb.arc_constraints = seg_constraint;
    return lb;
}

}  // namespace detail

struct ShellSolveInfo {
    double monitor_initial = 0.0;
    double monitor_final = 0.0;
    double linf_final = 0.0;
    int steps = 0;
};

struct ShellConfig {
    int refine_rounds = 3;
    double direct_tol = 1e-6;
    int direct_cap = 2000;
    double mcf_linf_tol = 1e-4;
    int mcf_cap = 5000;
    double diverged_linf = 1e-2;
    double conj_boundary_tol = 1e-3;
};

/// Thin-shell mid-surface spanning a single closed loop: fan triangulation
/// smoothed to the uniform-Laplacian fixed point with the boundary fixed.
inline SurfacePatch solve_direct_shell(const SkeletonSpec& skel, const ShellConfig& cfg = {}) {
    cp::check_lift_compat(skel, LiftKind::UniformDirectShell);
    auto lb = detail::loop_boundary(skel, /*sliding=*/false);
    auto m = detail::build_fan_patch(lb.polygon, lb.vertex_constraints, lb.arc_of,
                                     lb.arc_constraints, cfg.refine_rounds);
    detail::solve_graph_harmonic(m);
    return m.to_patch();
}

/// TPMS patch by mean-curvature flow from the direct-shell initialization.
/// Polyline boundary stays pinned; curve boundary slides in its face plane.
inline SurfacePatch solve_tpms_mixed(const SkeletonSpec& skel, const ShellConfig& cfg = {},
                                     ShellSolveInfo* info = nullptr) {
    cp::check_lift_compat(skel, LiftKind::UniformTPMSShellViaMixedMinimal);
    auto lb = detail::loop_boundary(skel, /*sliding=*/true);
    auto m = detail::build_fan_patch(lb.polygon, lb.vertex_constraints, lb.arc_of,
                                     lb.arc_constraints, cfg.refine_rounds);
    detail::solve_graph_harmonic(m);

    // Monitor over interior vertices only: discrete mean curvature at a
    // boundary vertex mixes in the boundary's own curvature. At the solver
    // fixed point the interior cotan curvature vanishes identically.
    std::vector<Vec3> hvec;
    std::vector<double> hmag;
    auto monitor = [&](double& rms, double& linf) {
        detail::mean_curvature(m, hvec, hmag);
        double s2 = 0;
        linf = 0;
        int count = 0;
        for (size_t i = 0; i < m.V.size(); ++i) {
            if (m.C[i].kind != detail::Constraint::Free) continue;
            s2 += sqr(hmag[i]);
            linf = std::max(linf, hmag[i]);
            ++count;
        }
        rms = count ? std::sqrt(s2 / count) : 0.0;
    };

    double rms, linf;
    monitor(rms, linf);
    if (info) info->monitor_initial = rms;

    int it = 0;
    for (; it < cfg.mcf_cap && linf >= cfg.mcf_linf_tol; ++it) {
        // Flow target: the cotan-harmonic solution with sliding boundary.
        std::vector<Vec3> saved = m.V;
        detail::cotan_harmonic_step(m, /*with_sliding=*/true);
        std::vector<Vec3> target = m.V;

        // Line search keeps the curvature monitor non-increasing.
        double lambda = 1.0;
        bool accepted = false;
        for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
            for (size_t i = 0; i < m.V.size(); ++i) m.V[i] = lerp(saved[i], target[i], lambda);
            double nrms, nlinf;
            monitor(nrms, nlinf);
            if (nrms <= rms + 1e-9) {
                rms = nrms;
                linf = nlinf;
                accepted = true;
            } else {
                lambda *= 0.5;
            }
        }
        if (!accepted) {
            m.V = saved;
            monitor(rms, linf);
            break;  // stalled at the discrete optimum
        }
    }
    if (info) {
        info->monitor_final = rms;
        info->linf_final = linf;
        info->steps = it;
    }
    if (it >= cfg.mcf_cap && linf > cfg.diverged_linf)
        fail("SolveDiverged", "mean-curvature flow did not converge (Linf=" + format_double(linf) + ")");
    return m.to_patch();
}

/// TPMS patch via the conjugate surface construction: Plateau-solve the
/// polygon whose edges run along the shared-face normals, rotate the
/// gradient field by 90 degrees per face, integrate, and fit the result so
/// each boundary arc lands on the CP face it must meet orthogonally.
inline SurfacePatch solve_tpms_conjugate(const SkeletonSpec& skel, const ShellConfig& cfg = {}) {
    cp::check_lift_compat(skel, LiftKind::UniformTPMSShellViaConjugation);
    const auto& poly = cp::polytope(skel.polytope_kind);
    auto cycle = skel.loop_cycle();
    const int n = int(cycle.size());

    // Shared face (mirror plane) per loop segment.
    std::vector<const cp::FaceDef*> seg_face(n);
    Eigen::MatrixXd N(3, n);
    std::vector<double> face_offset(n);
    for (int s = 0; s < n; ++s) {
        auto fname = cp::detail::shared_face(poly, cycle[s].support(), cycle[(s + 1) % n].support());
        if (!fname) fail("IncompatibleLift", "adjacent vertices must have a shared face");
        seg_face[s] = &poly.face(*fname);
        double d;
        Vec3 nv = detail::face_plane_normal(poly, *seg_face[s], d);
        N(0, s) = nv.x;
        N(1, s) = nv.y;
        N(2, s) = nv.z;
        face_offset[s] = d;
    }

    // Closure: edge lengths x with N x = 0, as close to uniform as possible.
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    Eigen::Matrix3d NNt = (N * N.transpose());
    Eigen::VectorXd x = ones - N.transpose() * NNt.ldlt().solve(N * ones);
    if (x.cwiseAbs().maxCoeff() < 1e-9 || x.cwiseAbs().minCoeff() < 1e-6 * x.cwiseAbs().maxCoeff()) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(N, Eigen::ComputeFullV);
        x = svd.matrixV().col(n - 1);
    }
    if (x.cwiseAbs().minCoeff() < 1e-9)
        fail("SolveDiverged", "degenerate conjugate contour (closure has a zero edge)");

    // Conjugate polygon, each edge subdivided for a usable boundary.
    std::vector<Vec3> polygon;
    std::vector<detail::Constraint> vcon;
    std::vector<int> arc_of;
    Vec3 cur{0, 0, 0};
    const int sub = 8;
    for (int s = 0; s < n; ++s) {
        Vec3 dir{N(0, s), N(1, s), N(2, s)};
        Vec3 step = dir * (x[s] / sub);
        for (int j = 0; j < sub; ++j) {
            polygon.push_back(cur);
            vcon.push_back({detail::Constraint::Pin});
            arc_of.push_back(s);
            cur += step;
        }
    }
    std::vector<detail::Constraint> arc_con(n, {detail::Constraint::Pin});
    auto m = detail::build_fan_patch(polygon, vcon, arc_of, arc_con, cfg.refine_rounds);

    // Plateau: iterated cotan-harmonic maps (Pinkall-Polthier).
    detail::solve_graph_harmonic(m);
    for (int it = 0; it < 60; ++it)
        if (detail::cotan_harmonic_step(m) < 1e-9) break;

    // Discrete conjugation: rotate each face's edge vectors 90 degrees about
    // the face normal and integrate in least squares (pin vertex 0).
    const int nv = int(m.V.size());
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nv, 3);
    std::vector<double> diag(nv, 0.0);
    for (auto& t : m.T) {
        Vec3 fn = normalized(cross(m.V[t[1]] - m.V[t[0]], m.V[t[2]] - m.V[t[0]]));
        for (int e = 0; e < 3; ++e) {
            int i = t[e], j = t[(e + 1) % 3];
            Vec3 d = m.V[j] - m.V[i];
            Vec3 rd = cross(fn, d);
            diag[i] += 1.0;
            diag[j] += 1.0;
            if (i != 0 && j != 0) {
                trip.emplace_back(i, j, -1.0);
                trip.emplace_back(j, i, -1.0);
            }
            for (int k = 0; k < 3; ++k) {
                rhs(i, k) -= rd[k];
                rhs(j, k) += rd[k];
            }
        }
    }
    for (int i = 0; i < nv; ++i) trip.emplace_back(i, i, i == 0 ? diag[i] + 1e3 : diag[i]);
    Eigen::SparseMatrix<double> L(nv, nv);
    L.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(L);
    if (solver.info() != Eigen::Success) fail("SolveDiverged", "conjugation system failed");
    Eigen::MatrixXd Y = solver.solve(rhs);

    // Boundary vertex arc ids: nearest contour edge in the Plateau domain.
    const int nb = int(m.boundary_loop.size());
    std::vector<int> barc(nb, 0);
    {
        struct Edge { Vec3 p, d; double len; int arc; };
        std::vector<Edge> edges;
        Vec3 c2{0, 0, 0};
        for (int s = 0; s < n; ++s) {
            Vec3 dir{N(0, s), N(1, s), N(2, s)};
            edges.push_back({c2, dir, x[s], s});
            c2 += dir * x[s];
        }
        for (int i = 0; i < nb; ++i) {
            const Vec3& p = m.V[m.boundary_loop[i]];
            double best = 1e30;
            for (auto& e : edges) {
                // parametrize along the (possibly negated) edge direction
                double t = dot(p - e.p, e.d);
                t = e.len >= 0 ? std::clamp(t, 0.0, e.len) : std::clamp(t, e.len, 0.0);
                double d2 = norm2(p - (e.p + e.d * t));
                if (d2 < best) {
                    best = d2;
                    barc[i] = e.arc;
                }
            }
        }
    }

    // Fit similarity (uniform scale + small rotation + translation) so that
    // boundary arc s lies in face plane s, iterating the linearization.
    detail::PatchMesh out = m;
    for (int i = 0; i < nv; ++i) out.V[i] = Vec3{Y(i, 0), Y(i, 1), Y(i, 2)};
    for (int pass = 0; pass < 4; ++pass) {
        Eigen::Matrix<double, 7, 7> A = Eigen::Matrix<double, 7, 7>::Zero();
        Eigen::Matrix<double, 7, 1> b = Eigen::Matrix<double, 7, 1>::Zero();
        for (int i = 0; i < nb; ++i) {
            int s = barc[i];
            Vec3 nrm{N(0, s), N(1, s), N(2, s)};
            const Vec3& v = out.V[m.boundary_loop[i]];
            // n . (a*v + w x v + tau) = d, unknowns (a, w, tau)
            Vec3 nxv = cross(v, nrm);  // n . (w x v) = w . (v x n)
            Eigen::Matrix<double, 7, 1> row;
            row << dot(nrm, v), nxv.x, nxv.y, nxv.z, nrm.x, nrm.y, nrm.z;
            A += row * row.transpose();
            b += row * face_offset[s];
        }
        A += 1e-12 * Eigen::Matrix<double, 7, 7>::Identity();
        Eigen::Matrix<double, 7, 1> fit = A.ldlt().solve(b);
        double a = fit[0];
        Vec3 w{fit[1] / a, fit[2] / a, fit[3] / a};
        Vec3 tau{fit[4], fit[5], fit[6]};
        if (std::abs(a) < 1e-9) fail("SolveDiverged", "conjugate patch fit collapsed");
        // exact rotation from the linearized axis-angle
        double theta = norm(w);
        Vec3 axis = theta > 1e-15 ? w / theta : Vec3{0, 0, 1};
        auto rotate = [&](const Vec3& v) {
            Vec3 k = axis;
            return v * std::cos(theta) + cross(k, v) * std::sin(theta) +
                   k * dot(k, v) * (1 - std::cos(theta));
        };
        for (auto& v : out.V) v = rotate(v) * a + tau;
    }

    double worst_raw = 0.0;
    for (int i = 0; i < nb; ++i) {
        int s = barc[i];
        Vec3 nrm{N(0, s), N(1, s), N(2, s)};
        worst_raw = std::max(worst_raw, std::abs(dot(nrm, out.V[m.boundary_loop[i]]) - face_offset[s]));
    }
    if (worst_raw > 0.1)
        fail("ConjugationBoundaryMismatch",
             "conjugate boundary misses its mirror planes by " + format_double(worst_raw));

    // Seat each boundary arc exactly on its mirror plane and relax the
    // interior with the boundary pinned, so FullMirror images join without
    // cracks. (A sliding relaxation would admit the zero-area collapse.)
    for (int i = 0; i < nb; ++i) {
        int vi = m.boundary_loop[i];
        int s = barc[i];
        Vec3 nrm{N(0, s), N(1, s), N(2, s)};
        out.V[vi] -= nrm * (dot(nrm, out.V[vi]) - face_offset[s]);
        out.C[vi] = {detail::Constraint::Pin};
    }
    for (int it = 0; it < 20; ++it)
        if (detail::cotan_harmonic_step(out) < 1e-9) break;

    // The boundary must reach every face the loop was required to touch.
    double worst = 0.0;
    for (const auto& f : poly.faces) {
        double d;
        Vec3 nrm = detail::face_plane_normal(poly, f, d);
        double reach = 1e30;
        for (int i = 0; i < nb; ++i)
            reach = std::min(reach, std::abs(dot(nrm, out.V[m.boundary_loop[i]]) - d));
        worst = std::max(worst, reach);
    }
    if (worst > cfg.conj_boundary_tol)
        fail("ConjugationBoundaryMismatch",
             "conjugate boundary fails to reach a required CP face by " + format_double(worst));
    return out.to_patch();
}

inline LiftedSkeleton lift_shell(const SkeletonSpec& skel, LiftKind kind, double thickness,
                                 const ShellConfig& cfg = {}, ShellSolveInfo* info = nullptr) {
    if (!(thickness > 0.0)) fail("NonPositiveThickness", "shell thickness must be positive");
    LiftedSkeleton lift{skel, kind, thickness, {}, {}, {}, {}};
    switch (kind) {
        case LiftKind::UniformDirectShell:
            lift.surface_cache = solve_direct_shell(skel, cfg);
            break;
        case LiftKind::UniformTPMSShellViaMixedMinimal:
            lift.surface_cache = solve_tpms_mixed(skel, cfg, info);
            break;
        case LiftKind::UniformTPMSShellViaConjugation:
            lift.surface_cache = solve_tpms_conjugate(skel, cfg);
            break;
        default:
            fail("IncompatibleLift", "lift_shell called with a non-shell kind");
    }
    return lift;
}

}  // namespace metagen::lifting
