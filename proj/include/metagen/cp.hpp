#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "metagen/core.hpp"
#include "metagen/errors.hpp"

namespace metagen::cp {

enum class PolytopeKind { Cuboid, TriPrism, Tet };
enum class EntityCategory { Corner, Edge, Face };

inline const char* kind_name(PolytopeKind k) {
    switch (k) {
        case PolytopeKind::Cuboid: return "cuboid";
        case PolytopeKind::TriPrism: return "triPrism";
        case PolytopeKind::Tet: return "tet";
    }
    return "?";
}

inline const char* category_name(EntityCategory c) {
    switch (c) {
        case EntityCategory::Corner: return "corners";
        case EntityCategory::Edge: return "edges";
        case EntityCategory::Face: return "faces";
    }
    return "?";
}

struct EdgeDef {
    std::string name;
    int a, b;  // corner indices
};

struct FaceDef {
    std::string name;
    std::vector<int> cycle;  // ordered corner cycle, 3 or 4 entries
};

/// One of the three prebuilt convex polytopes at unit scale (bounding box
/// side 1, anchored at the origin). The corner coordinates double as the
/// canonical embedding; tile embeddings are affine images of these.
///
/// Axis convention throughout: x = right, y = back (depth), z = up.
struct Polytope {
    PolytopeKind kind;
    std::vector<std::string> corner_names;
    std::vector<Vec3> corner_pos;
    std::vector<EdgeDef> edges;
    std::vector<FaceDef> faces;

    int corner_count() const { return int(corner_names.size()); }

    int corner_index(const std::string& canonical) const {
        for (int i = 0; i < corner_count(); ++i)
            if (corner_names[i] == canonical) return i;
        return -1;
    }
    const EdgeDef& edge(const std::string& canonical) const {
        for (auto& e : edges)
            if (e.name == canonical) return e;
        fail("UnknownEntity", "no edge named " + canonical);
    }
    const FaceDef& face(const std::string& canonical) const {
        for (auto& f : faces)
            if (f.name == canonical) return f;
        fail("UnknownEntity", "no face named " + canonical);
    }
};

inline const Polytope& polytope(PolytopeKind kind) {
    // Cube characteristic orthoscheme for the tet: base is a right isoceles
    // triangle and the apex sits directly above one of its 45-degree corners.
    // 48 mirror images of it tile the cube of twice its bounding-box side.
    static const Polytope tet{
        PolytopeKind::Tet,
        {"BOTTOM_RIGHT", "BOTTOM_LEFT", "TOP_BACK", "BOTTOM_BACK"},
        {{1, 0, 0}, {0, 0, 0}, {1, 1, 1}, {1, 1, 0}},
        {
            {"BOTTOM_FRONT", 1, 0},
            {"TOP_LEFT", 1, 2},
            {"BACK", 3, 2},
            {"BOTTOM_RIGHT", 0, 3},
            {"TOP_RIGHT", 0, 2},
            {"BOTTOM_LEFT", 1, 3},
        },
        {
            {"BOTTOM", {1, 0, 3}},  // z = 0
            {"TOP", {1, 0, 2}},     // plane y = z
            {"RIGHT", {0, 3, 2}},   // x = 1
            {"LEFT", {1, 3, 2}},    // plane x = y
        },
    };

    // Right isoceles cross-section {(0,0),(1,0),(0,1)} in x-z, extruded in y.
    static const Polytope tri_prism{
        PolytopeKind::TriPrism,
        {"FRONT_BOTTOM_LEFT", "FRONT_TOP", "FRONT_BOTTOM_RIGHT",
         "BACK_BOTTOM_LEFT", "BACK_TOP", "BACK_BOTTOM_RIGHT"},
        {{0, 0, 0}, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}, {0, 1, 1}, {1, 1, 0}},
        {
            {"FRONT_LEFT", 0, 1},
            {"FRONT_RIGHT", 1, 2},
            {"FRONT_BOTTOM", 0, 2},
            {"BACK_LEFT", 3, 4},
            {"BACK_RIGHT", 4, 5},
            {"BACK_BOTTOM", 3, 5},
            {"BOTTOM_LEFT", 0, 3},
            {"TOP", 1, 4},
            {"BOTTOM_RIGHT", 2, 5},
        },
        {
            {"FRONT_TRI", {0, 2, 1}},
            {"BACK_TRI", {3, 5, 4}},
            {"LEFT_QUAD", {0, 3, 4, 1}},
            {"RIGHT_QUAD", {2, 5, 4, 1}},  // hypotenuse plane x + z = 1
            {"BOTTOM_QUAD", {0, 2, 5, 3}},
        },
    };

    static const Polytope cuboid{
        PolytopeKind::Cuboid,
        {"FRONT_BOTTOM_LEFT", "FRONT_BOTTOM_RIGHT", "FRONT_TOP_LEFT", "FRONT_TOP_RIGHT",
         "BACK_BOTTOM_LEFT", "BACK_BOTTOM_RIGHT", "BACK_TOP_LEFT", "BACK_TOP_RIGHT"},
        {{0, 0, 0}, {1, 0, 0}, {0, 0, 1}, {1, 0, 1}, {0, 1, 0}, {1, 1, 0}, {0, 1, 1}, {1, 1, 1}},
        {
            {"FRONT_BOTTOM", 0, 1},
            {"FRONT_LEFT", 0, 2},
            {"FRONT_TOP", 2, 3},
            {"FRONT_RIGHT", 1, 3},
            {"BACK_BOTTOM", 4, 5},
            {"BACK_LEFT", 4, 6},
            {"BACK_TOP", 6, 7},
            {"BACK_RIGHT", 5, 7},
            {"BOTTOM_LEFT", 0, 4},
            {"TOP_LEFT", 2, 6},
            {"TOP_RIGHT", 3, 7},
            {"BOTTOM_RIGHT", 1, 5},
        },
        {
            {"FRONT", {0, 1, 3, 2}},
            {"BACK", {4, 5, 7, 6}},
            {"TOP", {2, 3, 7, 6}},
            {"BOTTOM", {0, 1, 5, 4}},
            {"LEFT", {0, 4, 6, 2}},
            {"RIGHT", {1, 5, 7, 3}},
        },
    };

    switch (kind) {
        case PolytopeKind::Cuboid: return cuboid;
        case PolytopeKind::TriPrism: return tri_prism;
        case PolytopeKind::Tet: return tet;
    }
    return cuboid;
}

struct EntityRef {
    PolytopeKind polytope;
    EntityCategory category;
    std::string canonical_name;

    bool operator==(const EntityRef& o) const {
        return polytope == o.polytope && category == o.category &&
               canonical_name == o.canonical_name;
    }
};

namespace detail {

inline std::string upper(std::string s) {
    for (char& c : s) c = char(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

inline std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : s) {
        if (c == '_') {
            if (!cur.empty()) words.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

/// True when `a` is a word permutation of `b` (TOP_LEFT vs LEFT_TOP).
inline bool same_word_multiset(const std::string& a, const std::string& b) {
    auto wa = split_words(a), wb = split_words(b);
    if (wa.size() != wb.size()) return false;
    std::sort(wa.begin(), wa.end());
    std::sort(wb.begin(), wb.end());
    return wa == wb;
}

inline int edit_distance(const std::string& a, const std::string& b) {
    std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = int(j);
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = int(i);
        for (size_t j = 1; j <= b.size(); ++j) {
            int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace detail

inline std::vector<std::string> entity_names(const Polytope& p, EntityCategory cat) {
    std::vector<std::string> out;
    if (cat == EntityCategory::Corner) out = p.corner_names;
    if (cat == EntityCategory::Edge)
        for (auto& e : p.edges) out.push_back(e.name);
    if (cat == EntityCategory::Face)
        for (auto& f : p.faces) out.push_back(f.name);
    return out;
}

/// Synonym-hardened entity lookup: any word permutation of a canonical name
/// resolves to it, case-insensitively. Unknown names report the three
/// nearest canonical names by edit distance.
inline EntityRef resolve_entity(PolytopeKind kind, EntityCategory cat, const std::string& name) {
    const Polytope& p = polytope(kind);
    const std::string query = detail::upper(name);
    for (const auto& canonical : entity_names(p, cat)) {
        if (detail::same_word_multiset(query, canonical))
            return EntityRef{kind, cat, canonical};
    }
    std::vector<std::pair<int, std::string>> ranked;
    for (const auto& canonical : entity_names(p, cat))
        ranked.emplace_back(detail::edit_distance(query, canonical), canonical);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](auto& a, auto& b) { return a.first < b.first; });
    std::string suggestions;
    for (size_t i = 0; i < ranked.size() && i < 3; ++i) {
        if (i) suggestions += ", ";
        suggestions += ranked[i].second;
    }
    fail("UnknownEntity", std::string(kind_name(kind)) + "." + category_name(cat) + " has no entity '" +
                              name + "'; did you mean: " + suggestions);
}

constexpr double kWeightTol = 1e-9;

/// A vertex positioned on a CP entity, stored canonically as barycentric
/// weights over the full corner list.
struct VertexSpec {
    EntityRef entity;
    std::vector<double> t;  // as given; empty when omitted
    std::vector<double> corner_weights;

    Vec3 position(const Polytope& p) const {
        Vec3 pos{0, 0, 0};
        for (int i = 0; i < p.corner_count(); ++i) pos += p.corner_pos[i] * corner_weights[i];
        return pos;
    }

    /// Corner indices carrying nonzero weight.
    std::vector<int> support() const {
        std::vector<int> s;
        for (int i = 0; i < int(corner_weights.size()); ++i)
            if (corner_weights[i] > kWeightTol) s.push_back(i);
        return s;
    }
};

inline bool weights_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > kWeightTol) return false;
    return true;
}

inline bool vertex_equal(const VertexSpec& a, const VertexSpec& b) {
    return a.entity.polytope == b.entity.polytope && weights_equal(a.corner_weights, b.corner_weights);
}

inline VertexSpec make_vertex(const EntityRef& entity, const std::vector<double>& t = {}) {
    const Polytope& p = polytope(entity.polytope);
    std::vector<double> w(p.corner_count(), 0.0);
    for (double ti : t)
        if (!(ti >= 0.0 && ti <= 1.0))
            fail("InterpolantRange", "interpolant " + format_double(ti) + " outside [0,1]");

    switch (entity.category) {
        case EntityCategory::Corner: {
            // t is ignored for corners per the API.
            w[p.corner_index(entity.canonical_name)] = 1.0;
            break;
        }
        case EntityCategory::Edge: {
            if (!t.empty() && t.size() != 1)
                fail("InterpolantArity", "edge vertex takes exactly 1 interpolant, got " +
                                             std::to_string(t.size()));
            double ti = t.empty() ? 0.5 : t[0];
            const EdgeDef& e = p.edge(entity.canonical_name);
            w[e.a] = 1.0 - ti;
            w[e.b] = ti;
            break;
        }
        case EntityCategory::Face: {
            const FaceDef& f = p.face(entity.canonical_name);
            if (!t.empty() && t.size() != 2)
                fail("InterpolantArity", "face vertex takes exactly 2 interpolants, got " +
                                             std::to_string(t.size()));
            if (f.cycle.size() == 3) {
                double t0 = t.empty() ? 1.0 / 3.0 : t[0];
                double t1 = t.empty() ? 1.0 / 3.0 : t[1];
                if (t0 + t1 > 1.0 + kWeightTol)
                    fail("BarycentricOutOfSimplex",
                         "barycentric interpolants sum to " + format_double(t0 + t1) + " > 1");
                w[f.cycle[0]] = t0;
                w[f.cycle[1]] = t1;
                w[f.cycle[2]] = std::max(0.0, 1.0 - t0 - t1);
            } else {
                double u = t.empty() ? 0.5 : t[0];
                double v = t.empty() ? 0.5 : t[1];
                w[f.cycle[0]] = (1 - u) * (1 - v);
                w[f.cycle[1]] = u * (1 - v);
                w[f.cycle[2]] = u * v;
                w[f.cycle[3]] = (1 - u) * v;
            }
            break;
        }
    }
    return VertexSpec{entity, t, std::move(w)};
}

enum class SegmentIncidence { OnCpEdge, InCpFace, ThroughVolume };

/// Simple open or closed path over vertices of one CP. Curve paths are
/// smoothed by the lifting stage; Polylines stay exact.
struct PathSpec {
    std::vector<VertexSpec> vertices;  // unique cycle for closed paths
    bool smooth = false;               // Curve=true, Polyline=false
    bool closed = false;
    std::vector<SegmentIncidence> segment_incidence;

    int segment_count() const {
        return closed ? int(vertices.size()) : int(vertices.size()) - 1;
    }
    std::pair<int, int> segment(int s) const {
        return {s, (s + 1) % int(vertices.size())};
    }
};

namespace detail {

inline bool support_in_edge(const Polytope& p, const std::vector<int>& sup_a,
                            const std::vector<int>& sup_b) {
    for (const auto& e : p.edges) {
        auto in_edge = [&](const std::vector<int>& sup) {
            return std::all_of(sup.begin(), sup.end(),
                               [&](int c) { return c == e.a || c == e.b; });
        };
        if (in_edge(sup_a) && in_edge(sup_b)) return true;
    }
    return false;
}

inline std::optional<std::string> shared_face(const Polytope& p, const std::vector<int>& sup_a,
                                              const std::vector<int>& sup_b) {
    for (const auto& f : p.faces) {
        auto in_face = [&](const std::vector<int>& sup) {
            return std::all_of(sup.begin(), sup.end(), [&](int c) {
                return std::find(f.cycle.begin(), f.cycle.end(), c) != f.cycle.end();
            });
        };
        if (in_face(sup_a) && in_face(sup_b)) return f.name;
    }
    return std::nullopt;
}

}  // namespace detail

inline PathSpec make_path(std::vector<VertexSpec> vertices, bool smooth) {
    if (vertices.size() < 2) fail("TooShort", "a path needs at least 2 vertices");
    for (size_t i = 1; i < vertices.size(); ++i)
        if (vertices[i].entity.polytope != vertices[0].entity.polytope)
            fail("MixedPolytopes", "all path vertices must reference the same CP");

    bool closed = vertex_equal(vertices.front(), vertices.back());
    if (closed) vertices.pop_back();
    if (vertices.size() < 2)
        fail("TooShort", "a closed path needs at least 2 distinct vertices");
    for (size_t i = 0; i < vertices.size(); ++i)
        for (size_t j = i + 1; j < vertices.size(); ++j)
            if (vertex_equal(vertices[i], vertices[j]))
                fail("NotSimple", "path repeats a vertex; only simple paths are permitted");

    PathSpec path{std::move(vertices), smooth, closed, {}};
    const Polytope& p = polytope(path.vertices[0].entity.polytope);
    for (int s = 0; s < path.segment_count(); ++s) {
        auto [a, b] = path.segment(s);
        auto sup_a = path.vertices[a].support();
        auto sup_b = path.vertices[b].support();
        if (detail::support_in_edge(p, sup_a, sup_b))
            path.segment_incidence.push_back(SegmentIncidence::OnCpEdge);
        else if (detail::shared_face(p, sup_a, sup_b))
            path.segment_incidence.push_back(SegmentIncidence::InCpFace);
        else
            path.segment_incidence.push_back(SegmentIncidence::ThroughVolume);
    }
    return path;
}

enum class TopologyClass { PointSet, OpenPath, ClosedLoop, Branched };

/// Set of vertices OR paths over one CP, with connectivity analysis used by
/// the lifting compatibility checks.
struct SkeletonSpec {
    PolytopeKind polytope_kind;
    std::vector<VertexSpec> points;  // dimension 0 skeletons
    std::vector<PathSpec> paths;     // dimension 1 skeletons
    std::vector<std::vector<int>> components;  // item indices per component
    TopologyClass topology_class = TopologyClass::PointSet;
    std::set<std::string> face_touch_set;

    bool is_point_set() const { return paths.empty(); }

    /// Vertices of the single glued cycle, in traversal order. Only valid
    /// when the skeleton is a single closed loop.
    std::vector<VertexSpec> loop_cycle() const;
};

namespace detail {

struct GluedGraph {
    std::vector<std::vector<double>> nodes;          // unique endpoint weights
    std::vector<std::vector<std::pair<int, int>>> adj;  // node -> (other node, path idx)

    int node_of(const std::vector<double>& w) {
        for (int i = 0; i < int(nodes.size()); ++i)
            if (weights_equal(nodes[i], w)) return i;
        nodes.push_back(w);
        adj.emplace_back();
        return int(nodes.size()) - 1;
    }
};

}  // namespace detail

inline std::vector<VertexSpec> SkeletonSpec::loop_cycle() const {
    if (paths.size() == 1 && paths[0].closed) return paths[0].vertices;
    // Chain open paths end to end; orientation may flip per path.
    std::vector<const PathSpec*> remaining;
    for (auto& p : paths) remaining.push_back(&p);
    std::vector<VertexSpec> cycle = remaining.back()->vertices;
    remaining.pop_back();
    while (!remaining.empty()) {
        bool extended = false;
        for (size_t i = 0; i < remaining.size(); ++i) {
            std::vector<VertexSpec> vs = remaining[i]->vertices;
            if (vertex_equal(cycle.back(), vs.front())) {
                cycle.insert(cycle.end(), vs.begin() + 1, vs.end());
            } else if (vertex_equal(cycle.back(), vs.back())) {
                std::reverse(vs.begin(), vs.end());
                cycle.insert(cycle.end(), vs.begin() + 1, vs.end());
            } else {
                continue;
            }
            remaining.erase(remaining.begin() + i);
            extended = true;
            break;
        }
        if (!extended) fail("Internal", "loop_cycle called on a non-loop skeleton");
    }
    if (!cycle.empty() && vertex_equal(cycle.front(), cycle.back())) cycle.pop_back();
    return cycle;
}

struct SkeletonItem {
    // exactly one of these is set
    std::optional<VertexSpec> vertex;
    std::optional<PathSpec> path;
};

inline SkeletonSpec build_skeleton(const std::vector<SkeletonItem>& items) {
    if (items.empty()) fail("Empty", "skeleton needs at least one vertex or path");
    bool has_points = false, has_paths = false;
    for (auto& it : items) {
        has_points |= it.vertex.has_value();
        has_paths |= it.path.has_value();
    }
    if (has_points && has_paths)
        fail("MixedDimensions", "a skeleton must consist of all points or all paths");

    SkeletonSpec skel;
    if (has_points) {
        for (auto& it : items) skel.points.push_back(*it.vertex);
        skel.polytope_kind = skel.points[0].entity.polytope;
        for (auto& v : skel.points)
            if (v.entity.polytope != skel.polytope_kind)
                fail("MixedPolytopes", "all skeleton items must reference the same CP");
        for (int i = 0; i < int(skel.points.size()); ++i) skel.components.push_back({i});
        skel.topology_class = TopologyClass::PointSet;
    } else {
        for (auto& it : items) skel.paths.push_back(*it.path);
        skel.polytope_kind = skel.paths[0].vertices[0].entity.polytope;
        for (auto& p : skel.paths)
            if (p.vertices[0].entity.polytope != skel.polytope_kind)
                fail("MixedPolytopes", "all skeleton items must reference the same CP");

        // Glue paths at weight-identical endpoints and classify.
        detail::GluedGraph g;
        std::vector<std::pair<int, int>> path_ends(skel.paths.size(), {-1, -1});
        for (int pi = 0; pi < int(skel.paths.size()); ++pi) {
            const PathSpec& p = skel.paths[pi];
            if (p.closed) continue;
            int a = g.node_of(p.vertices.front().corner_weights);
            int b = g.node_of(p.vertices.back().corner_weights);
            g.adj[a].push_back({b, pi});
            g.adj[b].push_back({a, pi});
            path_ends[pi] = {a, b};
        }
        // Union paths into components.
        std::vector<int> comp(skel.paths.size(), -1);
        int ncomp = 0;
        for (int pi = 0; pi < int(skel.paths.size()); ++pi) {
            if (comp[pi] >= 0) continue;
            int c = ncomp++;
            std::vector<int> stack{pi};
            comp[pi] = c;
            while (!stack.empty()) {
                int cur = stack.back();
                stack.pop_back();
                if (skel.paths[cur].closed) continue;
                for (int end : {path_ends[cur].first, path_ends[cur].second})
                    for (auto [other, opath] : g.adj[end])
                        if (comp[opath] < 0) {
                            comp[opath] = c;
                            stack.push_back(opath);
                        }
            }
        }
        skel.components.assign(ncomp, {});
        for (int pi = 0; pi < int(skel.paths.size()); ++pi) skel.components[comp[pi]].push_back(pi);

        bool any_branch = false;
        for (auto& a : g.adj) any_branch |= a.size() > 2;
        bool all_cycles = true, any_open = false;
        for (auto& component : skel.components) {
            bool closed_comp = false;
            if (component.size() == 1 && skel.paths[component[0]].closed) {
                closed_comp = true;
            } else {
                // A chain of open paths is a cycle iff every glued endpoint
                // in the component has degree exactly 2.
                closed_comp = true;
                for (int pi : component) {
                    if (skel.paths[pi].closed) { closed_comp = false; break; }
                    for (int end : {path_ends[pi].first, path_ends[pi].second})
                        if (g.adj[end].size() != 2) closed_comp = false;
                }
            }
            all_cycles &= closed_comp;
            any_open |= !closed_comp;
        }
        if (any_branch)
            skel.topology_class = TopologyClass::Branched;
        else if (all_cycles)
            skel.topology_class = TopologyClass::ClosedLoop;
        else
            skel.topology_class = TopologyClass::OpenPath;
        (void)any_open;
    }

    const Polytope& p = polytope(skel.polytope_kind);
    auto touch = [&](const VertexSpec& v) {
        auto sup = v.support();
        for (const auto& f : p.faces) {
            bool in = std::all_of(sup.begin(), sup.end(), [&](int c) {
                return std::find(f.cycle.begin(), f.cycle.end(), c) != f.cycle.end();
            });
            if (in) skel.face_touch_set.insert(f.name);
        }
    };
    for (auto& v : skel.points) touch(v);
    for (auto& path : skel.paths)
        for (auto& v : path.vertices) touch(v);
    return skel;
}

enum class LiftKind {
    UniformBeams,
    SpatiallyVaryingBeams,
    Spheres,
    UniformDirectShell,
    UniformTPMSShellViaMixedMinimal,
    UniformTPMSShellViaConjugation,
};

inline const char* lift_kind_name(LiftKind k) {
    switch (k) {
        case LiftKind::UniformBeams: return "UniformBeams";
        case LiftKind::SpatiallyVaryingBeams: return "SpatiallyVaryingBeams";
        case LiftKind::Spheres: return "Spheres";
        case LiftKind::UniformDirectShell: return "UniformDirectShell";
        case LiftKind::UniformTPMSShellViaMixedMinimal: return "UniformTPMSShellViaMixedMinimal";
        case LiftKind::UniformTPMSShellViaConjugation: return "UniformTPMSShellViaConjugation";
    }
    return "?";
}

/// Enforce the per-procedure @requirements. Throws IncompatibleLift naming
/// the violated rule; returns normally when the skeleton is admissible.
inline void check_lift_compat(const SkeletonSpec& skel, LiftKind kind) {
    auto reject = [&](const std::string& rule) {
        fail("IncompatibleLift",
             std::string(lift_kind_name(kind)) + ": " + rule);
    };
    const Polytope& p = polytope(skel.polytope_kind);

    switch (kind) {
        case LiftKind::UniformBeams:
        case LiftKind::SpatiallyVaryingBeams:
            if (skel.is_point_set())
                reject("the skeleton must not contain any standalone vertices");
            return;
        case LiftKind::Spheres:
            if (!skel.is_point_set())
                reject("the skeleton must only contain standalone vertices");
            return;
        default:
            break;
    }

    // All shell procedures need a single closed loop of paths.
    if (skel.is_point_set()) reject("the skeleton must not contain any standalone vertices");
    if (skel.components.size() != 1 || skel.topology_class != TopologyClass::ClosedLoop)
        reject("the skeleton must contain a single closed loop");
    if (kind == LiftKind::UniformDirectShell) return;

    // TPMS procedures: every vertex on a CP edge, adjacent vertices share a face.
    auto cycle = skel.loop_cycle();
    for (const auto& v : cycle) {
        auto sup = v.support();
        bool on_edge = false;
        for (const auto& e : p.edges)
            on_edge |= std::all_of(sup.begin(), sup.end(),
                                   [&](int c) { return c == e.a || c == e.b; });
        if (!on_edge) reject("each vertex in the loop must live on a CP edge");
    }
    for (size_t i = 0; i < cycle.size(); ++i) {
        const auto& a = cycle[i];
        const auto& b = cycle[(i + 1) % cycle.size()];
        if (!detail::shared_face(p, a.support(), b.support()))
            reject("adjacent vertices must have a shared face");
    }
    if (kind == LiftKind::UniformTPMSShellViaMixedMinimal) return;

    // Conjugation additionally requires full face coverage and enough vertices.
    if (skel.face_touch_set.size() != p.faces.size())
        reject("the loop must touch every face of the CP at least once");
    if (cycle.size() < p.faces.size())
        reject("the loop must contain at least as many vertices as the CP has faces");
}

/// Compatible lift kinds for a skeleton (used by mutation).
inline std::vector<LiftKind> compatible_lifts(const SkeletonSpec& skel) {
    std::vector<LiftKind> out;
    for (LiftKind k :
         {LiftKind::UniformBeams, LiftKind::SpatiallyVaryingBeams, LiftKind::Spheres,
          LiftKind::UniformDirectShell, LiftKind::UniformTPMSShellViaMixedMinimal,
          LiftKind::UniformTPMSShellViaConjugation}) {
        try {
            check_lift_compat(skel, k);
            out.push_back(k);
        } catch (const Error&) {
        }
    }
    return out;
}

}  // namespace metagen::cp
