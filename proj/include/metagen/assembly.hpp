#pragma once

#include <memory>
#include <sstream>

#include "metagen/core.hpp"
#include "metagen/cp.hpp"
#include "metagen/errors.hpp"
#include "metagen/lifting.hpp"

namespace metagen::assembly {

using cp::EntityRef;
using cp::PolytopeKind;
using lifting::LiftedSkeleton;

// ---------------------------------------------------------------------------
// Embeddings

inline int pow2_reciprocal_exponent(double v) {
    for (int k = 0; k <= 6; ++k) {
        if (std::abs(v - std::ldexp(1.0, -k)) < 1e-12) return k;
    }
    fail("NotPowerOfTwoReciprocal",
         format_double(v) + " is not 1/2^k for k in [0,6]");
}

inline bool on_64th_grid(double v) {
    double scaled = v * 64.0;
    return v >= -1e-12 && v <= 1.0 + 1e-12 && std::abs(scaled - std::round(scaled)) < 1e-9;
}

/// Concrete placement of a CP in the unit cell: axis-aligned scaling of the
/// canonical polytope, with per-axis mirroring for the cuboid corner choice.
struct Embedding {
    PolytopeKind polytope;
    Vec3 min_pt{0, 0, 0};
    Vec3 size{1, 1, 1};
    std::array<bool, 3> flip{false, false, false};

    Vec3 to_world(const Vec3& canonical) const {
        Vec3 w;
        for (int a = 0; a < 3; ++a) {
            double p = canonical[a];
            w[a] = min_pt[a] + size[a] * (flip[a] ? 1.0 - p : p);
        }
        return w;
    }

    std::map<std::string, Vec3> corner_positions() const {
        const auto& p = cp::polytope(polytope);
        std::map<std::string, Vec3> out;
        for (int i = 0; i < p.corner_count(); ++i)
            out[p.corner_names[i]] = to_world(p.corner_pos[i]);
        return out;
    }

    Vec3 entity_center(const EntityRef& e) const {
        const auto& p = cp::polytope(polytope);
        switch (e.category) {
            case cp::EntityCategory::Corner:
                return to_world(p.corner_pos[p.corner_index(e.canonical_name)]);
            case cp::EntityCategory::Edge: {
                const auto& ed = p.edge(e.canonical_name);
                return to_world((p.corner_pos[ed.a] + p.corner_pos[ed.b]) * 0.5);
            }
            case cp::EntityCategory::Face: {
                const auto& f = p.face(e.canonical_name);
                Vec3 c{0, 0, 0};
                for (int i : f.cycle) c += p.corner_pos[i];
                return to_world(c / double(f.cycle.size()));
            }
        }
        return {};
    }
};

inline Embedding embed_cuboid(double width, double height, double depth,
                              const EntityRef& corner_at_min) {
    pow2_reciprocal_exponent(width);
    pow2_reciprocal_exponent(height);
    pow2_reciprocal_exponent(depth);
    if (corner_at_min.polytope != PolytopeKind::Cuboid ||
        corner_at_min.category != cp::EntityCategory::Corner)
        fail("UnknownCorner", "cornerAtAABBMin must be a cuboid corner");
    const auto& p = cp::polytope(PolytopeKind::Cuboid);
    Vec3 c = p.corner_pos[p.corner_index(corner_at_min.canonical_name)];
    Embedding e;
    e.polytope = PolytopeKind::Cuboid;
    e.min_pt = {0, 0, 0};
    e.size = {width, depth, height};  // width=x, depth=y, height=z
    e.flip = {c.x > 0.5, c.y > 0.5, c.z > 0.5};
    return e;
}

inline Embedding embed_via_minmax(const Vec3& min_pt, const Vec3& max_pt,
                                  const EntityRef& corner_at_min) {
    for (int a = 0; a < 3; ++a) {
        if (!(min_pt[a] < max_pt[a])) fail("InvertedBox", "min point must be below max point");
        if (!on_64th_grid(min_pt[a]) || !on_64th_grid(max_pt[a]))
            fail("NotPowerOfTwoReciprocal", "box coordinates must sit on the 1/64 grid in [0,1]");
    }
    Vec3 size = max_pt - min_pt;
    Embedding e = embed_cuboid(size.x, size.z, size.y, corner_at_min);
    e.min_pt = min_pt;
    return e;
}

inline Embedding embed_simplex(PolytopeKind kind, double bbox_side) {
    if (kind != PolytopeKind::Tet && kind != PolytopeKind::TriPrism)
        fail("UnknownEntity", "embed_simplex expects tet or triPrism");
    pow2_reciprocal_exponent(bbox_side);
    Embedding e;
    e.polytope = kind;
    e.min_pt = {0, 0, 0};
    e.size = {bbox_side, bbox_side, bbox_side};
    return e;
}

// ---------------------------------------------------------------------------
// Patterns

struct Isometry {
    std::array<std::array<double, 3>, 3> R{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    Vec3 t{0, 0, 0};

    static Isometry identity() { return {}; }

    Vec3 apply(const Vec3& p) const {
        return {R[0][0] * p.x + R[0][1] * p.y + R[0][2] * p.z + t.x,
                R[1][0] * p.x + R[1][1] * p.y + R[1][2] * p.z + t.y,
                R[2][0] * p.x + R[2][1] * p.y + R[2][2] * p.z + t.z};
    }

    /// Orthogonal linear part, so the inverse is the transpose.
    Vec3 apply_inverse(const Vec3& p) const {
        Vec3 q = p - t;
        return {R[0][0] * q.x + R[1][0] * q.y + R[2][0] * q.z,
                R[0][1] * q.x + R[1][1] * q.y + R[2][1] * q.z,
                R[0][2] * q.x + R[1][2] * q.y + R[2][2] * q.z};
    }

    static Isometry compose(const Isometry& a, const Isometry& b) {  // a after b
        Isometry c;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                c.R[i][j] = 0;
                for (int k = 0; k < 3; ++k) c.R[i][j] += a.R[i][k] * b.R[k][j];
            }
        c.t = a.apply(b.t);
        return c;
    }

    static Isometry reflection(const Vec3& n, double d) {
        Isometry m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m.R[i][j] = (i == j ? 1.0 : 0.0) - 2.0 * n[i] * n[j];
        m.t = n * (2.0 * d);
        return m;
    }

    static Isometry half_turn(const Vec3& p0, const Vec3& dir) {
        Isometry m;
        Vec3 d = normalized(dir);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m.R[i][j] = 2.0 * d[i] * d[j] - (i == j ? 1.0 : 0.0);
        // translation chosen so p0 is a fixed point
        m.t = p0 - Vec3{m.R[0][0] * p0.x + m.R[0][1] * p0.y + m.R[0][2] * p0.z,
                        m.R[1][0] * p0.x + m.R[1][1] * p0.y + m.R[1][2] * p0.z,
                        m.R[2][0] * p0.x + m.R[2][1] * p0.y + m.R[2][2] * p0.z};
        return m;
    }

    static Isometry translation(const Vec3& v) {
        Isometry m;
        m.t = v;
        return m;
    }
};

struct CustomOp {
    enum Kind { Mirror, Rotate180, Translate } kind;
    std::vector<EntityRef> entities;  // Mirror: face; Rotate180: 1 edge or 2 entities; Translate: from,to faces
    bool do_copy = true;
};

struct PatternOp {
    enum Kind { Identity, CuboidFullMirror, TriPrismFullMirror, TetFullMirror, Custom } kind =
        Identity;
    std::vector<CustomOp> chain;  // Custom only, applied head first

    const char* name() const {
        switch (kind) {
            case Identity: return "Identity";
            case CuboidFullMirror: return "CuboidFullMirror";
            case TriPrismFullMirror: return "TriPrismFullMirror";
            case TetFullMirror: return "TetFullMirror";
            case Custom: return "Custom";
        }
        return "?";
    }
};

struct TransformSet {
    std::vector<Isometry> isometries;
};

namespace detail {

inline void require_cell_aligned(const Embedding& e) {
    for (int a = 0; a < 3; ++a) {
        double ratio = e.min_pt[a] / e.size[a];
        if (std::abs(ratio - std::round(ratio)) > 1e-9)
            fail("IncompatiblePattern",
                 "mirror patterns need the embedding anchored on a multiple of its own size");
    }
}

/// Per-axis mirror-fold images of the box [m, m+s] tiling [0,1].
inline std::vector<std::pair<double, double>> axis_fold_images(double m, double s) {
    // returns (scale, offset): x' = scale*x + offset
    std::vector<std::pair<double, double>> out;
    int cells = int(std::round(1.0 / s));
    int j0 = int(std::round(m / s));
    for (int j = 0; j < cells; ++j) {
        if (((j - j0) % 2 + 2) % 2 == 0) {
            out.emplace_back(1.0, (j - j0) * s);
        } else {
            out.emplace_back(-1.0, (j + j0 + 1) * s);
        }
    }
    return out;
}

}  // namespace detail

inline TransformSet expand_pattern(const PatternOp& pattern, const Embedding& e) {
    TransformSet set;
    switch (pattern.kind) {
        case PatternOp::Identity: {
            set.isometries.push_back(Isometry::identity());
            break;
        }
        case PatternOp::CuboidFullMirror: {
            if (e.polytope != PolytopeKind::Cuboid)
                fail("IncompatiblePattern", "CuboidFullMirror needs a cuboid tile");
            detail::require_cell_aligned(e);
            auto xs = detail::axis_fold_images(e.min_pt.x, e.size.x);
            auto ys = detail::axis_fold_images(e.min_pt.y, e.size.y);
            auto zs = detail::axis_fold_images(e.min_pt.z, e.size.z);
            for (auto [sx, ox] : xs)
                for (auto [sy, oy] : ys)
                    for (auto [sz, oz] : zs) {
                        Isometry m;
                        m.R = {{{sx, 0, 0}, {0, sy, 0}, {0, 0, sz}}};
                        m.t = {ox, oy, oz};
                        set.isometries.push_back(m);
                    }
            break;
        }
        case PatternOp::TetFullMirror: {
            if (e.polytope != PolytopeKind::Tet)
                fail("IncompatiblePattern", "TetFullMirror needs a tet tile");
            double s = e.size.x;
            double cell = 2.0 * s;
            if (cell > 1.0 + 1e-12)
                fail("IncompatiblePattern",
                     "TetFullMirror needs bbox side <= 1/2 so its mirror cell fits the unit cube");
            int cells = int(std::round(1.0 / cell));
            static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                            {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
            for (int ci = 0; ci < cells; ++ci)
                for (int cj = 0; cj < cells; ++cj)
                    for (int ck = 0; ck < cells; ++ck)
                        for (auto& perm : perms)
                            for (int oct = 0; oct < 8; ++oct) {
                                // x_out[i] = fold(perm_apply(p)[i]) + cell origin
                                Isometry m;
                                Vec3 corner{cell * ci, cell * cj, cell * ck};
                                for (int i = 0; i < 3; ++i)
                                    for (int j = 0; j < 3; ++j) m.R[i][j] = 0;
                                Vec3 off{0, 0, 0};
                                for (int i = 0; i < 3; ++i) {
                                    bool mir = (oct >> i) & 1;
                                    m.R[i][perm[i]] = mir ? -1.0 : 1.0;
                                    off[i] = (mir ? cell : 0.0) + corner[i];
                                }
                                m.t = off;
                                set.isometries.push_back(m);
                            }
            break;
        }
        case PatternOp::TriPrismFullMirror: {
            if (e.polytope != PolytopeKind::TriPrism)
                fail("IncompatiblePattern", "TriPrismFullMirror needs a triPrism tile");
            double s = e.size.x;
            // Hypotenuse reflection inside the cell: (x,z) -> (s-z, s-x).
            Isometry hyp;
            hyp.R = {{{0, 0, -1}, {0, 1, 0}, {-1, 0, 0}}};
            hyp.t = {s, 0, s};
            auto folds = detail::axis_fold_images(0.0, s);
            for (auto [sx, ox] : folds)
                for (auto [sy, oy] : folds)
                    for (auto [sz, oz] : folds) {
                        Isometry cellmap;
                        cellmap.R = {{{sx, 0, 0}, {0, sy, 0}, {0, 0, sz}}};
                        cellmap.t = {ox, oy, oz};
                        set.isometries.push_back(cellmap);
                        set.isometries.push_back(Isometry::compose(cellmap, hyp));
                    }
            break;
        }
        case PatternOp::Custom: {
            if (e.polytope != PolytopeKind::Cuboid)
                fail("UnsupportedCustomPolytope",
                     "Custom patterns are currently only implemented for the cuboid CP");
            set.isometries.push_back(Isometry::identity());
            for (const auto& op : pattern.chain) {
                Isometry T;
                switch (op.kind) {
                    case CustomOp::Mirror: {
                        if (op.entities.size() != 1 ||
                            op.entities[0].category != cp::EntityCategory::Face)
                            fail("IncompatiblePattern", "Mirror needs a CP face");
                        const auto& p = cp::polytope(e.polytope);
                        const auto& f = p.face(op.entities[0].canonical_name);
                        // plane through the embedded face
                        Vec3 a = e.to_world(p.corner_pos[f.cycle[0]]);
                        Vec3 b = e.to_world(p.corner_pos[f.cycle[1]]);
                        Vec3 c = e.to_world(p.corner_pos[f.cycle[2]]);
                        Vec3 wn = normalized(cross(b - a, c - a));
                        T = Isometry::reflection(wn, dot(wn, a));
                        break;
                    }
                    case CustomOp::Rotate180: {
                        Vec3 p0, dir;
                        if (op.entities.size() == 1) {
                            if (op.entities[0].category != cp::EntityCategory::Edge)
                                fail("IncompatiblePattern", "Rotate180 with one entity needs a CP edge");
                            const auto& p = cp::polytope(e.polytope);
                            const auto& ed = p.edge(op.entities[0].canonical_name);
                            Vec3 a = e.to_world(p.corner_pos[ed.a]);
                            Vec3 b = e.to_world(p.corner_pos[ed.b]);
                            p0 = a;
                            dir = b - a;
                        } else if (op.entities.size() == 2) {
                            Vec3 a = e.entity_center(op.entities[0]);
                            Vec3 b = e.entity_center(op.entities[1]);
                            p0 = a;
                            dir = b - a;
                        } else {
                            fail("IncompatiblePattern", "Rotate180 needs one or two entities");
                        }
                        if (norm(dir) < 1e-12)
                            fail("IncompatiblePattern", "Rotate180 axis entities do not span a line");
                        T = Isometry::half_turn(p0, dir);
                        break;
                    }
                    case CustomOp::Translate: {
                        if (op.entities.size() != 2 ||
                            op.entities[0].category != cp::EntityCategory::Face ||
                            op.entities[1].category != cp::EntityCategory::Face)
                            fail("IncompatiblePattern", "Translate needs two CP faces");
                        T = Isometry::translation(e.entity_center(op.entities[1]) -
                                                  e.entity_center(op.entities[0]));
                        break;
                    }
                }
                std::vector<Isometry> mapped;
                mapped.reserve(set.isometries.size());
                for (const auto& s2 : set.isometries) mapped.push_back(Isometry::compose(T, s2));
                if (op.do_copy) {
                    for (auto& m2 : mapped) set.isometries.push_back(m2);
                } else {
                    set.isometries = std::move(mapped);
                }
            }
            break;
        }
    }

    // Every transformed copy must stay inside the unit cell.
    const auto& p = cp::polytope(e.polytope);
    for (const auto& iso : set.isometries)
        for (int c = 0; c < p.corner_count(); ++c) {
            Vec3 w = iso.apply(e.to_world(p.corner_pos[c]));
            for (int a = 0; a < 3; ++a)
                if (w[a] < -1e-9 || w[a] > 1.0 + 1e-9)
                    fail("IncompatiblePattern",
                         "pattern maps the tile outside the unit cell");
        }
    return set;
}

// ---------------------------------------------------------------------------
// Tiles and structures

struct Tile {
    std::vector<LiftedSkeleton> lifted;
    Embedding embedding;
};

inline Tile make_tile(std::vector<LiftedSkeleton> lifted, const Embedding& e) {
    if (lifted.empty()) fail("Empty", "a tile needs at least one lifted skeleton");
    for (const auto& l : lifted)
        if (l.skeleton.polytope_kind != e.polytope)
            fail("CpMismatch", "lifted skeletons and embedding must correspond to the same CP");
    return Tile{std::move(lifted), e};
}

/// World-space solid geometry of one embedded tile.
struct LeafGeometry {
    std::vector<lifting::BeamSegment> beams;
    std::vector<std::pair<Vec3, double>> spheres;
    struct Shell {
        lifting::TriBvh bvh;
        double thickness;
    };
    std::vector<std::shared_ptr<Shell>> shells;

    double field(const Vec3& p) const {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& b : beams) d = std::min(d, lifting::capsule_distance(p, b));
        for (const auto& [c, r] : spheres) d = std::min(d, norm(p - c) - r);
        for (const auto& s : shells) d = std::min(d, lifting::shell_field(s->bvh, s->thickness, p));
        return d;
    }
};

inline LeafGeometry embed_geometry(const Tile& tile) {
    LeafGeometry g;
    const Embedding& e = tile.embedding;
    for (const auto& lift : tile.lifted) {
        for (const auto& b : lift.beams)
            g.beams.push_back({e.to_world(b.a), e.to_world(b.b), b.ra, b.rb});
        for (const auto& [c, r] : lift.spheres) g.spheres.push_back({e.to_world(c), r});
        if (lift.surface_cache) {
            std::vector<Vec3> wv;
            wv.reserve(lift.surface_cache->vertices.size());
            for (const auto& v : lift.surface_cache->vertices) wv.push_back(e.to_world(v));
            auto shell = std::make_shared<LeafGeometry::Shell>();
            shell->bvh = lifting::TriBvh(std::move(wv), lift.surface_cache->triangles);
            shell->thickness = lift.thickness;
            g.shells.push_back(shell);
        }
    }
    return g;
}

struct StructureIR;
using StructurePtr = std::shared_ptr<const StructureIR>;

/// CSG tree over patterned, embedded, lifted skeletons. Immutable after
/// construction; field evaluation is pure.
struct StructureIR {
    enum Op { Leaf, Union, Subtract, Intersect } op = Leaf;
    StructurePtr left, right;

    // Leaf payload
    Tile tile;
    PatternOp pattern;
    TransformSet transforms;
    LeafGeometry geometry;

    static StructurePtr make_leaf(Tile t, PatternOp pat) {
        auto node = std::make_shared<StructureIR>();
        node->op = Leaf;
        node->transforms = expand_pattern(pat, t.embedding);
        node->geometry = embed_geometry(t);
        node->tile = std::move(t);
        node->pattern = std::move(pat);
        return node;
    }

    static StructurePtr make_csg(Op op, StructurePtr l, StructurePtr r) {
        auto node = std::make_shared<StructureIR>();
        node->op = op;
        node->left = std::move(l);
        node->right = std::move(r);
        return node;
    }
};

namespace detail {

inline double fold_leaf_field(const StructureIR& leaf, const Vec3& p);

inline double leaf_field_enumerated(const StructureIR& leaf, const Vec3& p) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& iso : leaf.transforms.isometries)
        best = std::min(best, leaf.geometry.field(iso.apply_inverse(p)));
    return best;
}

inline double fold_axis(double v, double m, double s) {
    double y = v - m;
    double period = 2.0 * s;
    y = y - period * std::floor(y / period);
    if (y > s) y = period - y;
    return m + y;
}

inline double fold_leaf_field(const StructureIR& leaf, const Vec3& p) {
    const Embedding& e = leaf.tile.embedding;
    switch (leaf.pattern.kind) {
        case PatternOp::CuboidFullMirror: {
            Vec3 q{fold_axis(p.x, e.min_pt.x, e.size.x), fold_axis(p.y, e.min_pt.y, e.size.y),
                   fold_axis(p.z, e.min_pt.z, e.size.z)};
            return leaf.geometry.field(q);
        }
        case PatternOp::TetFullMirror: {
            double s = e.size.x, cell = 2.0 * s;
            Vec3 q;
            for (int a = 0; a < 3; ++a) {
                double y = p[a] - cell * std::floor(p[a] / cell);
                if (y > s) y = cell - y;
                q[a] = y;
            }
            // canonical tet is {0 <= z <= y <= x <= s}
            if (q.x < q.y) std::swap(q.x, q.y);
            if (q.y < q.z) std::swap(q.y, q.z);
            if (q.x < q.y) std::swap(q.x, q.y);
            return leaf.geometry.field(q);
        }
        case PatternOp::TriPrismFullMirror: {
            double s = e.size.x;
            Vec3 q{fold_axis(p.x, 0.0, s), fold_axis(p.y, 0.0, s), fold_axis(p.z, 0.0, s)};
            if (q.x + q.z > s) {
                double nx = s - q.z, nz = s - q.x;
                q.x = nx;
                q.z = nz;
            }
            return leaf.geometry.field(q);
        }
        default:
            return leaf_field_enumerated(leaf, p);
    }
}

}  // namespace detail

/// Signed solid value of the structure at p: negative inside. `use_fold`
/// selects the O(1) mirror-folding path; enumeration is the oracle.
inline double structure_field(const StructureIR& ir, const Vec3& p, bool use_fold = true) {
    switch (ir.op) {
        case StructureIR::Leaf:
            return use_fold ? detail::fold_leaf_field(ir, p) : detail::leaf_field_enumerated(ir, p);
        case StructureIR::Union:
            return std::min(structure_field(*ir.left, p, use_fold),
                            structure_field(*ir.right, p, use_fold));
        case StructureIR::Intersect:
            return std::max(structure_field(*ir.left, p, use_fold),
                            structure_field(*ir.right, p, use_fold));
        case StructureIR::Subtract:
            return std::max(structure_field(*ir.left, p, use_fold),
                            -structure_field(*ir.right, p, use_fold));
    }
    return std::numeric_limits<double>::infinity();
}

inline double structure_field(const StructurePtr& ir, const Vec3& p, bool use_fold = true) {
    return structure_field(*ir, p, use_fold);
}

// ---------------------------------------------------------------------------
// Transpile report

namespace detail {

inline void report_node(const StructureIR& n, std::ostringstream& os, int depth) {
    std::string pad(size_t(depth) * 2, ' ');
    switch (n.op) {
        case StructureIR::Union:
        case StructureIR::Subtract:
        case StructureIR::Intersect: {
            const char* name = n.op == StructureIR::Union      ? "union"
                               : n.op == StructureIR::Subtract ? "subtract"
                                                               : "intersect";
            os << pad << name << "\n";
            report_node(*n.left, os, depth + 1);
            report_node(*n.right, os, depth + 1);
            break;
        }
        case StructureIR::Leaf: {
            const Embedding& e = n.tile.embedding;
            os << pad << "tile cp=" << cp::kind_name(e.polytope) << " min=["
               << format_double(e.min_pt.x, 9) << "," << format_double(e.min_pt.y, 9) << ","
               << format_double(e.min_pt.z, 9) << "] size=[" << format_double(e.size.x, 9) << ","
               << format_double(e.size.y, 9) << "," << format_double(e.size.z, 9)
               << "] pattern=" << n.pattern.name() << " transforms=" << n.transforms.isometries.size()
               << "\n";
            for (const auto& lift : n.tile.lifted) {
                os << pad << "  lift " << cp::lift_kind_name(lift.kind);
                if (lift.profile) {
                    os << " profile=[";
                    for (size_t i = 0; i < lift.profile->samples.size(); ++i) {
                        if (i) os << ",";
                        os << "[" << format_double(lift.profile->samples[i].first, 9) << ","
                           << format_double(lift.profile->samples[i].second, 9) << "]";
                    }
                    os << "]";
                } else {
                    os << " thickness=" << format_double(lift.thickness, 9);
                }
                os << " beams=" << lift.beams.size() << " spheres=" << lift.spheres.size();
                if (lift.surface_cache)
                    os << " patch_tris=" << lift.surface_cache->triangles.size();
                os << "\n";
            }
            break;
        }
    }
}

}  // namespace detail

/// Deterministic human-readable dump of the IR tree, used for golden-file
/// tests and as the seam for downstream kernel adapters.
inline std::string transpile_report(const StructureIR& ir) {
    std::ostringstream os;
    os << "structure\n";
    detail::report_node(ir, os, 1);
    return os.str();
}

}  // namespace metagen::assembly
