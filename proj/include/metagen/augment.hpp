#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "metagen/assembly.hpp"
#include "metagen/core.hpp"
#include "metagen/cp.hpp"
#include "metagen/frontend.hpp"
#include "metagen/lifting.hpp"

namespace metagen::augment {

using cp::LiftKind;

// ---------------------------------------------------------------------------
// Program decomposition: the editable form behind mutation and emission.

struct VertexNode {
    cp::EntityRef entity;
    std::vector<double> t;  // empty = entity midpoint/centroid
};

struct PathNode {
    std::vector<int> verts;  // indices into the skeleton vertex pool
    bool smooth = false;
    bool closed = false;
};

struct SkeletonNode {
    cp::PolytopeKind polytope;
    std::vector<VertexNode> pool;  // weight-identical vertices share a slot
    std::vector<PathNode> paths;   // empty for point sets
    bool point_set = false;

    cp::SkeletonSpec realize() const {
        std::vector<cp::VertexSpec> verts;
        for (const auto& v : pool) verts.push_back(cp::make_vertex(v.entity, v.t));
        std::vector<cp::SkeletonItem> items;
        if (point_set) {
            for (auto& v : verts) items.push_back({v, {}});
        } else {
            for (const auto& p : paths) {
                std::vector<cp::VertexSpec> pv;
                for (int i : p.verts) pv.push_back(verts[size_t(i)]);
                if (p.closed) pv.push_back(verts[size_t(p.verts.front())]);
                items.push_back({{}, cp::make_path(pv, p.smooth)});
            }
        }
        return cp::build_skeleton(items);
    }
};

struct LiftNode {
    SkeletonNode skeleton;
    LiftKind kind;
    double thickness = 0;  // diameter / radius / shell thickness
    std::optional<lifting::ThicknessProfile> profile;
};

struct LeafNode {
    std::vector<LiftNode> lifts;
    assembly::Embedding embedding;
    assembly::PatternOp pattern;
};

struct ProgramSpec {
    struct Node {
        assembly::StructureIR::Op op = assembly::StructureIR::Leaf;
        int left = -1, right = -1;  // indices into nodes
        std::optional<LeafNode> leaf;
    };
    std::vector<Node> nodes;  // root is nodes.back()
};

namespace detail {

inline SkeletonNode decompose_skeleton(const cp::SkeletonSpec& skel) {
    SkeletonNode node;
    node.polytope = skel.polytope_kind;
    node.point_set = skel.is_point_set();
    auto pool_index = [&](const cp::VertexSpec& v) {
        for (int i = 0; i < int(node.pool.size()); ++i) {
            auto existing = cp::make_vertex(node.pool[i].entity, node.pool[i].t);
            if (cp::vertex_equal(existing, v)) return i;
        }
        node.pool.push_back({v.entity, v.t});
        return int(node.pool.size()) - 1;
    };
    if (node.point_set) {
        for (const auto& v : skel.points) pool_index(v);
    } else {
        for (const auto& p : skel.paths) {
            PathNode pn;
            pn.smooth = p.smooth;
            pn.closed = p.closed;
            for (const auto& v : p.vertices) pn.verts.push_back(pool_index(v));
            node.paths.push_back(pn);
        }
    }
    return node;
}

inline int decompose_node(const assembly::StructureIR& ir, ProgramSpec& spec) {
    if (ir.op != assembly::StructureIR::Leaf) {
        int l = decompose_node(*ir.left, spec);
        int r = decompose_node(*ir.right, spec);
        ProgramSpec::Node node;
        node.op = ir.op;
        node.left = l;
        node.right = r;
        spec.nodes.push_back(node);
        return int(spec.nodes.size()) - 1;
    }
    LeafNode leaf;
    leaf.embedding = ir.tile.embedding;
    leaf.pattern = ir.pattern;
    for (const auto& lift : ir.tile.lifted) {
        LiftNode ln;
        ln.skeleton = decompose_skeleton(lift.skeleton);
        ln.kind = lift.kind;
        ln.thickness = lift.thickness;
        ln.profile = lift.profile;
        leaf.lifts.push_back(std::move(ln));
    }
    ProgramSpec::Node node;
    node.leaf = std::move(leaf);
    spec.nodes.push_back(std::move(node));
    return int(spec.nodes.size()) - 1;
}

}  // namespace detail

inline ProgramSpec decompose(const assembly::StructureIR& ir) {
    ProgramSpec spec;
    detail::decompose_node(ir, spec);
    return spec;
}

inline lifting::LiftedSkeleton realize_lift(const LiftNode& ln,
                                            const lifting::ShellConfig& shell = {}) {
    auto skel = ln.skeleton.realize();
    switch (ln.kind) {
        case LiftKind::UniformBeams: return lifting::lift_uniform_beams(skel, ln.thickness);
        case LiftKind::SpatiallyVaryingBeams: {
            if (!ln.profile) fail("ProfileRange", "varying beams need a profile");
            return lifting::lift_varying_beams(skel, *ln.profile);
        }
        case LiftKind::Spheres: return lifting::lift_spheres(skel, ln.thickness);
        default: return lifting::lift_shell(skel, ln.kind, ln.thickness, shell);
    }
}

inline assembly::StructurePtr rebuild(const ProgramSpec& spec,
                                      const lifting::ShellConfig& shell = {}) {
    std::vector<assembly::StructurePtr> built(spec.nodes.size());
    for (size_t i = 0; i < spec.nodes.size(); ++i) {
        const auto& node = spec.nodes[i];
        if (node.leaf) {
            std::vector<lifting::LiftedSkeleton> lifts;
            for (const auto& ln : node.leaf->lifts) lifts.push_back(realize_lift(ln, shell));
            built[i] = assembly::StructureIR::make_leaf(
                assembly::make_tile(std::move(lifts), node.leaf->embedding), node.leaf->pattern);
        } else {
            built[i] = assembly::StructureIR::make_csg(node.op, built[size_t(node.left)],
                                                       built[size_t(node.right)]);
        }
    }
    return built.back();
}

// ---------------------------------------------------------------------------
// Mutation

struct MutationConfig {
    double p_swap_pathkind = 0.7;
    double p_swap_lift = 0.7;
    double p_vertex = 0.9;
    double p_thickness = 0.98;
    uint64_t seed = 0;
    double thickness_cap = 0.25;
};

struct MutationTrace {
    struct Entry {
        std::string axis;
        std::string site;
        std::string before, after;
    };
    std::array<bool, 4> gates{false, false, false, false};  // pathkind, lift, vertex, thickness
    std::vector<Entry> applied;
};

namespace detail {

inline std::vector<double> resample_interpolants(const cp::EntityRef& entity, Rng& rng) {
    const auto& poly = cp::polytope(entity.polytope);
    switch (entity.category) {
        case cp::EntityCategory::Edge:
            return {rng.uniform()};
        case cp::EntityCategory::Face: {
            const auto& f = poly.face(entity.canonical_name);
            if (f.cycle.size() == 3) {
                double u = rng.uniform(), v = rng.uniform();
                if (u + v > 1.0) {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                return {u, v};
            }
            return {rng.uniform(), rng.uniform()};
        }
        default:
            return {};
    }
}

inline std::string fmt_t(const std::vector<double>& t) {
    if (t.empty()) return "default";
    std::string s = "[";
    for (size_t i = 0; i < t.size(); ++i) {
        if (i) s += ",";
        s += format_double(t[i], 6);
    }
    return s + "]";
}

}  // namespace detail

/// Apply the four mutation axes with two-level gating: each axis opens with
/// its probability, then every eligible site inside an open axis mutates
/// with the same probability. Deterministic given the seed.
inline std::pair<ProgramSpec, MutationTrace> mutate_spec(const ProgramSpec& input,
                                                         const MutationConfig& cfg) {
    ProgramSpec spec = input;
    MutationTrace trace;
    Rng rng(cfg.seed);

    const double probs[4] = {cfg.p_swap_pathkind, cfg.p_swap_lift, cfg.p_vertex, cfg.p_thickness};
    for (int axis = 0; axis < 4; ++axis) trace.gates[size_t(axis)] = rng.bernoulli(probs[axis]);

    auto for_each_lift = [&](auto&& fn) {
        for (size_t ni = 0; ni < spec.nodes.size(); ++ni) {
            if (!spec.nodes[ni].leaf) continue;
            auto& leaf = *spec.nodes[ni].leaf;
            for (size_t li = 0; li < leaf.lifts.size(); ++li)
                fn(leaf.lifts[li], "node" + std::to_string(ni) + ".lift" + std::to_string(li));
        }
    };

    // (1) Polyline <-> Curve
    if (trace.gates[0]) {
        for_each_lift([&](LiftNode& lift, const std::string& site) {
            for (size_t pi = 0; pi < lift.skeleton.paths.size(); ++pi) {
                if (!rng.bernoulli(cfg.p_swap_pathkind)) continue;
                auto& path = lift.skeleton.paths[pi];
                path.smooth = !path.smooth;
                trace.applied.push_back({"pathkind", site + ".path" + std::to_string(pi),
                                         path.smooth ? "Polyline" : "Curve",
                                         path.smooth ? "Curve" : "Polyline"});
            }
        });
    }

    // (2) lift kind within the compatible set
    if (trace.gates[1]) {
        for_each_lift([&](LiftNode& lift, const std::string& site) {
            auto skel = lift.skeleton.realize();
            auto candidates = cp::compatible_lifts(skel);
            candidates.erase(std::remove(candidates.begin(), candidates.end(), lift.kind),
                             candidates.end());
            if (candidates.empty()) return;  // not an eligible site
            if (!rng.bernoulli(cfg.p_swap_lift)) return;
            LiftKind chosen = candidates[size_t(rng.below(candidates.size()))];
            std::string before = cp::lift_kind_name(lift.kind);
            // carry the thickness parameter across representations
            if (lift.kind == LiftKind::SpatiallyVaryingBeams && lift.profile) {
                double mean = 0;
                for (auto& [t, d] : lift.profile->samples) mean += d;
                lift.thickness = mean / double(lift.profile->samples.size());
            }
            if (chosen == LiftKind::SpatiallyVaryingBeams) {
                double d = lift.thickness > 0 ? lift.thickness : 0.05;
                lift.profile = lifting::ThicknessProfile{{{0.0, d}, {1.0, d}}};
            } else {
                lift.profile.reset();
                if (lift.thickness <= 0) lift.thickness = 0.05;
            }
            lift.kind = chosen;
            trace.applied.push_back({"lift", site, before, cp::lift_kind_name(chosen)});
        });
    }

    // (3) vertex repositioning within the CP entity
    if (trace.gates[2]) {
        for_each_lift([&](LiftNode& lift, const std::string& site) {
            for (size_t vi = 0; vi < lift.skeleton.pool.size(); ++vi) {
                auto& v = lift.skeleton.pool[vi];
                if (v.entity.category == cp::EntityCategory::Corner) continue;
                if (!rng.bernoulli(cfg.p_vertex)) continue;
                auto fresh = detail::resample_interpolants(v.entity, rng);
                trace.applied.push_back({"vertex", site + ".v" + std::to_string(vi),
                                         detail::fmt_t(v.t), detail::fmt_t(fresh)});
                v.t = std::move(fresh);
            }
        });
    }

    // (4) thickness / profile resampling in [0.5x, 1.5x], clamped to (0, cap]
    if (trace.gates[3]) {
        auto clamp_cap = [&](double d) { return std::min(d, cfg.thickness_cap); };
        for_each_lift([&](LiftNode& lift, const std::string& site) {
            if (!rng.bernoulli(cfg.p_thickness)) return;
            if (lift.profile) {
                std::string before = "profile", after = "profile[";
                for (size_t i = 0; i < lift.profile->samples.size(); ++i) {
                    auto& [t, d] = lift.profile->samples[i];
                    d = clamp_cap(d * rng.uniform(0.5, 1.5));
                    if (i) after += ",";
                    after += format_double(d, 6);
                }
                trace.applied.push_back({"thickness", site, before, after + "]"});
            } else {
                double before = lift.thickness;
                lift.thickness = clamp_cap(lift.thickness * rng.uniform(0.5, 1.5));
                trace.applied.push_back({"thickness", site, format_double(before, 6),
                                         format_double(lift.thickness, 6)});
            }
        });
    }

    if (trace.applied.empty())
        fail("NoEligibleSites", "the drawn gates admit no mutation; reseed and retry");
    return {std::move(spec), std::move(trace)};
}

inline std::pair<assembly::StructurePtr, MutationTrace> mutate(const assembly::StructureIR& ir,
                                                               const MutationConfig& cfg,
                                                               const lifting::ShellConfig& shell = {}) {
    auto [spec, trace] = mutate_spec(decompose(ir), cfg);
    return {rebuild(spec, shell), std::move(trace)};
}

// ---------------------------------------------------------------------------
// Program emission (the dslTranslator)

namespace detail {

inline std::string entity_expr(const cp::EntityRef& e) {
    return std::string(cp::kind_name(e.polytope)) + "." + cp::category_name(e.category) + "." +
           e.canonical_name;
}

inline std::string number(double v) { return format_double(v); }

struct Emitter {
    std::ostringstream body;
    int vcount = 0, pcount = 0, scount = 0, lcount = 0, ecount = 0, tcount = 0, patcount = 0,
        ocount = 0;

    std::string emit_skeleton(const SkeletonNode& skel) {
        std::vector<std::string> vnames;
        for (const auto& v : skel.pool) {
            std::string name = "v" + std::to_string(vcount++);
            body << "    " << name << " = vertex(" << entity_expr(v.entity);
            if (!v.t.empty()) {
                body << ", [";
                for (size_t i = 0; i < v.t.size(); ++i) {
                    if (i) body << ", ";
                    body << number(v.t[i]);
                }
                body << "]";
            }
            body << ")\n";
            vnames.push_back(name);
        }
        std::string skel_name = "skel" + std::to_string(scount++);
        if (skel.point_set) {
            body << "    " << skel_name << " = skeleton([";
            for (size_t i = 0; i < vnames.size(); ++i) {
                if (i) body << ", ";
                body << vnames[i];
            }
            body << "])\n";
        } else {
            std::vector<std::string> pnames;
            for (const auto& path : skel.paths) {
                std::string pname = "p" + std::to_string(pcount++);
                body << "    " << pname << " = " << (path.smooth ? "Curve" : "Polyline") << "([";
                for (size_t i = 0; i < path.verts.size(); ++i) {
                    if (i) body << ", ";
                    body << vnames[size_t(path.verts[i])];
                }
                if (path.closed) body << ", " << vnames[size_t(path.verts.front())];
                body << "])\n";
                pnames.push_back(pname);
            }
            body << "    " << skel_name << " = skeleton([";
            for (size_t i = 0; i < pnames.size(); ++i) {
                if (i) body << ", ";
                body << pnames[i];
            }
            body << "])\n";
        }
        return skel_name;
    }

    std::string emit_lift(const LiftNode& lift) {
        std::string skel_name = emit_skeleton(lift.skeleton);
        std::string name = "lift" + std::to_string(lcount++);
        body << "    " << name << " = " << cp::lift_kind_name(lift.kind) << "(" << skel_name << ", ";
        if (lift.kind == LiftKind::SpatiallyVaryingBeams) {
            body << "[";
            const auto& samples = lift.profile->samples;
            for (size_t i = 0; i < samples.size(); ++i) {
                if (i) body << ", ";
                body << "[" << number(samples[i].first) << ", " << number(samples[i].second) << "]";
            }
            body << "]";
        } else {
            body << number(lift.thickness);
        }
        body << ")\n";
        return name;
    }

    std::string emit_embedding(const assembly::Embedding& e) {
        std::string name = "emb" + std::to_string(ecount++);
        if (e.polytope == cp::PolytopeKind::Cuboid) {
            const auto& poly = cp::polytope(e.polytope);
            Vec3 target{e.flip[0] ? 1.0 : 0.0, e.flip[1] ? 1.0 : 0.0, e.flip[2] ? 1.0 : 0.0};
            std::string corner;
            for (int c = 0; c < poly.corner_count(); ++c)
                if (norm(poly.corner_pos[c] - target) < 1e-9) corner = poly.corner_names[c];
            bool at_origin = norm(e.min_pt) < 1e-12;
            if (at_origin) {
                body << "    " << name << " = cuboid.embed(" << number(e.size.x) << ", "
                     << number(e.size.z) << ", " << number(e.size.y)
                     << ", cornerAtAABBMin=cuboid.corners." << corner << ")\n";
            } else {
                Vec3 mx = e.min_pt + e.size;
                body << "    " << name << " = cuboid.embed_via_minmax([" << number(e.min_pt.x)
                     << ", " << number(e.min_pt.y) << ", " << number(e.min_pt.z) << "], ["
                     << number(mx.x) << ", " << number(mx.y) << ", " << number(mx.z)
                     << "], cuboid.corners." << corner << ")\n";
            }
        } else {
            body << "    " << name << " = " << cp::kind_name(e.polytope) << ".embed("
                 << number(e.size.x) << ")\n";
        }
        return name;
    }

    std::string custom_chain(const std::vector<assembly::CustomOp>& ops, size_t idx) {
        const auto& op = ops[idx];
        std::string inner = idx + 1 < ops.size() ? ", " + custom_chain(ops, idx + 1) : "";
        std::string do_copy = op.do_copy ? "True" : "False";
        switch (op.kind) {
            case assembly::CustomOp::Mirror:
                return "Mirror(" + entity_expr(op.entities[0]) + ", " + do_copy + inner + ")";
            case assembly::CustomOp::Rotate180: {
                std::string ents = "[";
                for (size_t i = 0; i < op.entities.size(); ++i) {
                    if (i) ents += ", ";
                    ents += entity_expr(op.entities[i]);
                }
                ents += "]";
                return "Rotate180(" + ents + ", " + do_copy + inner + ")";
            }
            case assembly::CustomOp::Translate:
                return "Translate(" + entity_expr(op.entities[0]) + ", " +
                       entity_expr(op.entities[1]) + ", " + do_copy + inner + ")";
        }
        return "";
    }

    std::string emit_pattern(const assembly::PatternOp& pat) {
        std::string name = "pat" + std::to_string(patcount++);
        body << "    " << name << " = ";
        if (pat.kind == assembly::PatternOp::Custom)
            body << "Custom(" << custom_chain(pat.chain, 0) << ")";
        else
            body << pat.name() << "()";
        body << "\n";
        return name;
    }

    std::string emit_node(const ProgramSpec& spec, int idx) {
        const auto& node = spec.nodes[size_t(idx)];
        if (!node.leaf) {
            std::string l = emit_node(spec, node.left);
            std::string r = emit_node(spec, node.right);
            std::string name = "obj" + std::to_string(ocount++);
            const char* fn = node.op == assembly::StructureIR::Union      ? "Union"
                             : node.op == assembly::StructureIR::Subtract ? "Subtract"
                                                                          : "Intersect";
            body << "    " << name << " = " << fn << "(" << l << ", " << r << ")\n";
            return name;
        }
        std::vector<std::string> lift_names;
        for (const auto& lift : node.leaf->lifts) lift_names.push_back(emit_lift(lift));
        std::string emb = emit_embedding(node.leaf->embedding);
        std::string tile = "tile" + std::to_string(tcount++);
        body << "    " << tile << " = Tile([";
        for (size_t i = 0; i < lift_names.size(); ++i) {
            if (i) body << ", ";
            body << lift_names[i];
        }
        body << "], " << emb << ")\n";
        std::string pat = emit_pattern(node.leaf->pattern);
        std::string name = "obj" + std::to_string(ocount++);
        body << "    " << name << " = Structure(" << tile << ", " << pat << ")\n";
        return name;
    }
};

}  // namespace detail

/// Write a MetaDSL program that reconstructs the spec (stable naming,
/// dependency order). Optional parameters are echoed into the signature.
inline std::string emit_program(const ProgramSpec& spec,
                                const std::vector<frontend::ParamSpec>& params = {}) {
    detail::Emitter em;
    std::string result_name = em.emit_node(spec, int(spec.nodes.size()) - 1);
    std::ostringstream out;
    out << "from metagen import *\n\n";
    out << "def make_structure(";
    for (size_t i = 0; i < params.size(); ++i) {
        if (i) out << ", ";
        out << params[i].name << "=" << detail::number(params[i].default_value);
    }
    out << ") -> Structure:\n";
    out << em.body.str();
    out << "    return " << result_name << "\n";
    return out.str();
}

inline std::string emit_program(const assembly::StructureIR& ir,
                                const std::vector<frontend::ParamSpec>& params = {}) {
    return emit_program(decompose(ir), params);
}

// ---------------------------------------------------------------------------
// Hybridization prompt assembly

/// Fill the crossover prompt template. The template text is fixed; the
/// network call that would consume it is pluggable and out of scope.
inline std::string build_hybrid_prompt(const std::string& parent_a, const std::string& parent_b,
                                       const std::string& api_description) {
    std::string out;
    out += "You have access to a DSL whose specification is as follows:\n";
    out += api_description;
    out += "\n\nI want you to help discover unique new programs. Do this by genetic crossover "
           "based on these parent Metagen DSL programs:\n\n";
    out += "1)\n```python\n";
    out += parent_a;
    out += "\n```\n\n2)\n```python\n";
    out += parent_b;
    out += "\n\n\nCombine relevant structural/logical features from each sample into one coherent "
           "DSL program.\nBe sure to:\n- Respect the DSL syntax strictly. \n- Maintain correctness "
           "in the final structure definition.\n- Keep the final program well-formed and ready to "
           "be run as a standard Metagen DSL generator.\n- Provide minimal descriptive comments.\n\n"
           "Return only the resulting code in a single code block.";
    return out;
}

}  // namespace metagen::augment
