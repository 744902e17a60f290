#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "metagen/augment.hpp"
#include "metagen/benchkit.hpp"
#include "metagen/quality.hpp"

namespace metagen::db {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Header blocks

struct HeaderBlock {
    std::string yaml_text;
    YAML::Node parsed;

    bool empty() const { return yaml_text.empty(); }
};

/// Split a model file into its triple-single-quote YAML header (optional)
/// and the program body.
inline std::pair<HeaderBlock, std::string> parse_header(const std::string& text) {
    HeaderBlock header;
    if (text.rfind("'''", 0) != 0) return {header, text};
    size_t end = text.find("'''", 3);
    if (end == std::string::npos)
        fail("MalformedHeader", "header block opened at line 1 is never closed");
    header.yaml_text = text.substr(3, end - 3);
    try {
        header.parsed = YAML::Load(header.yaml_text);
    } catch (const YAML::Exception& e) {
        fail("MalformedHeader", std::string("header YAML: ") + e.what(),
             {e.mark.line + 2, e.mark.column + 1});
    }
    size_t body_start = end + 3;
    if (body_start < text.size() && text[body_start] == '\n') ++body_start;
    return {header, text.substr(body_start)};
}

namespace detail {

/// Deterministic YAML emission: map keys sorted, minimal quoting.
inline void emit_yaml(const YAML::Node& node, std::ostringstream& out, int indent) {
    std::string pad(size_t(indent) * 2, ' ');
    auto scalar = [](const YAML::Node& n) {
        std::string s = n.as<std::string>();
        bool needs_quotes = s.empty() || s.find(':') != std::string::npos ||
                            s.find('#') != std::string::npos || s.front() == ' ' || s.back() == ' ';
        if (!needs_quotes) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"' || c == '\\') q += '\\';
            if (c == '\n') {
                q += "\\n";
                continue;
            }
            q += c;
        }
        return q + "\"";
    };
    if (node.IsMap()) {
        std::vector<std::string> keys;
        for (auto it = node.begin(); it != node.end(); ++it)
            keys.push_back(it->first.as<std::string>());
        std::sort(keys.begin(), keys.end());
        for (const auto& key : keys) {
            const YAML::Node value = node[key];
            if (value.IsMap() || value.IsSequence()) {
                out << pad << key << ":\n";
                emit_yaml(value, out, indent + 1);
            } else {
                out << pad << key << ": " << scalar(value) << "\n";
            }
        }
    } else if (node.IsSequence()) {
        for (const auto& item : node) {
            if (item.IsMap() || item.IsSequence()) {
                out << pad << "-\n";
                emit_yaml(item, out, indent + 1);
            } else {
                out << pad << "- " << scalar(item) << "\n";
            }
        }
    } else if (node.IsScalar()) {
        out << pad << scalar(node) << "\n";
    }
}

}  // namespace detail

inline std::string emit_yaml_sorted(const YAML::Node& node) {
    std::ostringstream out;
    detail::emit_yaml(node, out, 0);
    return out.str();
}

inline std::string write_header(const HeaderBlock& header) {
    if (header.empty() && !header.parsed.IsDefined()) return "";
    return "'''\n" + emit_yaml_sorted(header.parsed) + "'''\n";
}

// ---------------------------------------------------------------------------
// Database paths

/// Resolve a database reference: absolute paths ("/literature/...") start at
/// the database root; relative paths resolve against the referring file.
inline fs::path resolve_path(const fs::path& db_root, const fs::path& referrer,
                             const std::string& ref) {
    fs::path combined;
    if (!ref.empty() && ref.front() == '/') {
        combined = db_root / ref.substr(1);
    } else {
        combined = referrer.has_parent_path() ? referrer.parent_path() / ref : db_root / ref;
    }
    fs::path normalized = combined.lexically_normal();
    fs::path root_normal = db_root.lexically_normal();
    auto rel = normalized.lexically_relative(root_normal);
    if (rel.empty() || rel.native().rfind("..", 0) == 0)
        fail("PathEscape", "'" + ref + "' escapes the database root");
    return normalized;
}

// ---------------------------------------------------------------------------
// Provenance

enum class ProvenanceKind { Authored, Generated, Mutated, Hybridized };

struct ProvenanceDetails {
    std::vector<std::pair<std::string, std::string>> sources;  // db path -> note
    std::string script;             // generator/mutator db path
    std::string arguments;          // invocation arguments
    std::string structure_details;  // per-instance details, e.g. a mutation trace
    std::string model_name;         // hybridized: the LLM used
    std::string prompt_hash;        // hybridized
};

/// Build the header-block fragment recording how a model came to be.
inline HeaderBlock record_provenance(ProvenanceKind kind, const ProvenanceDetails& details) {
    auto missing = [&](const std::string& field) {
        fail("MissingField", "provenance for this kind requires " + field);
    };
    switch (kind) {
        case ProvenanceKind::Authored:
            break;
        case ProvenanceKind::Generated:
            if (details.script.empty()) missing("script");
            if (details.arguments.empty()) missing("arguments");
            if (details.structure_details.empty()) missing("structure_details");
            break;
        case ProvenanceKind::Mutated:
            if (details.sources.empty()) missing("a parent source");
            if (details.structure_details.empty()) missing("the mutation trace");
            break;
        case ProvenanceKind::Hybridized:
            if (details.sources.size() < 2) missing("two parent sources");
            if (details.prompt_hash.empty()) missing("prompt_hash");
            if (details.model_name.empty()) missing("model_name");
            break;
    }

    YAML::Node node;
    const char* kind_name = kind == ProvenanceKind::Authored    ? "authored"
                            : kind == ProvenanceKind::Generated ? "generated"
                            : kind == ProvenanceKind::Mutated   ? "mutated"
                                                                : "hybridized";
    node["file_info"]["creation_kind"] = kind_name;
    for (const auto& [path, note] : details.sources)
        node["sources"][path] = note.empty() ? "source" : note;
    if (!details.script.empty()) node["file_info"]["generator_info"]["script"] = details.script;
    if (!details.arguments.empty())
        node["file_info"]["generator_info"]["arguments"] = details.arguments;
    if (!details.structure_details.empty())
        node["file_info"]["generator_info"]["structure_details"] = details.structure_details;
    if (!details.model_name.empty()) node["file_info"]["generator_info"]["model"] = details.model_name;
    if (!details.prompt_hash.empty())
        node["file_info"]["generator_info"]["prompt_hash"] = details.prompt_hash;

    HeaderBlock header;
    header.parsed = node;
    header.yaml_text = emit_yaml_sorted(node);
    return header;
}

// ---------------------------------------------------------------------------
// Ingest

struct ModelEntry {
    std::string id;
    fs::path directory;
    fs::path program;
    fs::path geometry;
    std::array<fs::path, 4> renders;  // top, front, right, angled
    fs::path properties;
    fs::path validation;
};

struct IngestResult {
    quality::ValidationReport report;
    std::optional<ModelEntry> entry;  // set on success
};

inline json properties_json(const homog::PropertyVector& props) {
    json j;
    for (auto& [key, value] : homog::property_items(props)) j[key] = value;
    return j;
}

inline json validation_json(const quality::ValidationReport& report, int resolution) {
    json j;
    j["compiled"] = report.compiled;
    if (!report.compile_diagnostics.empty()) j["compile_diagnostics"] = report.compile_diagnostics;
    j["tilable"] = report.tilable;
    if (!report.tilable_reason.empty()) j["tilable_reason"] = report.tilable_reason;
    j["physical"] = report.physical;
    if (!report.physical_reason.empty()) j["physical_reason"] = report.physical_reason;
    j["overall"] = report.overall;
    j["resolution"] = resolution;
    j["elapsed_seconds"] = report.elapsed_seconds;
    return j;
}

/// Validate and, on success, persist the model plus its derived artifacts
/// under models/<id>/ and append an index row. On failure nothing is
/// written and the report is returned.
inline IngestResult ingest_model(const fs::path& db_root, const std::string& program_text,
                                 const std::string& id, int resolution = 32,
                                 int render_size = 512) {
    fs::path dir = db_root / "models" / id;
    if (fs::exists(dir)) fail("DuplicateId", "model id '" + id + "' already exists");

    IngestResult result;
    result.report = quality::validate_model(program_text, resolution);
    if (!result.report.overall) return result;

    auto mesh = discretize::extract_mesh(*result.report.ir, resolution);
    auto views = discretize::render_views(mesh, render_size);

    fs::create_directories(dir);
    ModelEntry entry;
    entry.id = id;
    entry.directory = dir;
    entry.program = dir / "model.py";
    {
        std::ofstream out(entry.program, std::ios::binary);
        out << program_text;
    }
    entry.geometry = dir / "geometry.obj";
    discretize::export_obj(mesh, entry.geometry.string());
    static const std::array<const char*, 4> names = {"top", "front", "right", "angled"};
    // render_views order is front, top, right, angled
    static const std::array<int, 4> source = {1, 0, 2, 3};
    for (int v = 0; v < 4; ++v) {
        entry.renders[size_t(v)] = dir / ("render_" + std::string(names[size_t(v)]) + ".png");
        discretize::write_png(views[size_t(source[size_t(v)])], entry.renders[size_t(v)].string());
    }
    entry.properties = dir / "properties.json";
    {
        std::ofstream out(entry.properties, std::ios::binary);
        out << properties_json(*result.report.properties).dump(2) << "\n";
    }
    entry.validation = dir / "validation.json";
    {
        std::ofstream out(entry.validation, std::ios::binary);
        out << validation_json(result.report, resolution).dump(2) << "\n";
    }
    {
        std::ofstream index(db_root / "index.jsonl", std::ios::app | std::ios::binary);
        json row;
        row["id"] = id;
        row["path"] = "/models/" + id + "/model.py";
        row["E"] = result.report.properties->E;
        row["V"] = result.report.properties->V;
        index << row.dump() << "\n";
    }
    result.entry = entry;
    return result;
}

/// Database paths of one model's artifacts for the benchmark builders.
inline bench::ModelArtifacts model_artifacts(const fs::path& db_root, const std::string& id) {
    bench::ModelArtifacts art;
    art.id = id;
    art.source = "/models/" + id + "/model.py";
    art.renders = {"/models/" + id + "/render_top.png", "/models/" + id + "/render_front.png",
                   "/models/" + id + "/render_right.png", "/models/" + id + "/render_angled.png"};
    art.voxel_ref = "/models/" + id + "/geometry.obj";

    std::ifstream in(db_root / "models" / id / "model.py");
    if (!in.good()) fail("IoFailure", "model " + id + " has no program file");
    std::ostringstream ss;
    ss << in.rdbuf();
    auto [header, body] = parse_header(ss.str());
    art.code = body;

    std::ifstream pin(db_root / "models" / id / "properties.json");
    if (!pin.good()) fail("IoFailure", "model " + id + " has no properties.json");
    json props = json::parse(pin);
    auto& p = art.props;
    p.E = props.at("E");
    p.E1 = props.at("E_1");
    p.E2 = props.at("E_2");
    p.E3 = props.at("E_3");
    p.G = props.at("G");
    p.G23 = props.at("G_23");
    p.G13 = props.at("G_13");
    p.G12 = props.at("G_12");
    p.nu = props.at("nu");
    p.nu12 = props.at("nu_12");
    p.nu13 = props.at("nu_13");
    p.nu23 = props.at("nu_23");
    p.nu21 = props.at("nu_21");
    p.nu31 = props.at("nu_31");
    p.nu32 = props.at("nu_32");
    p.K = props.at("K");
    p.A = props.at("A");
    p.V = props.at("V");
    return art;
}

/// Walk the sources links of a model transitively; returns false when a
/// cycle revisits a model (the provenance graph must be acyclic).
inline bool provenance_acyclic(const fs::path& db_root, const std::string& model_ref,
                               std::set<std::string>* on_path = nullptr) {
    std::set<std::string> local;
    if (!on_path) on_path = &local;
    if (!on_path->insert(model_ref).second) return false;

    fs::path file;
    try {
        file = resolve_path(db_root, db_root, model_ref);
    } catch (const Error&) {
        on_path->erase(model_ref);
        return true;  // refs outside the root (or malformed) end the walk
    }
    if (!fs::exists(file) || file.extension() != ".py") {
        on_path->erase(model_ref);
        return true;  // literature and other leaves have no sources of their own
    }
    std::ifstream in(file, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    auto [header, body] = parse_header(ss.str());
    if (header.parsed.IsDefined() && header.parsed["sources"]) {
        for (auto it = header.parsed["sources"].begin(); it != header.parsed["sources"].end(); ++it) {
            if (!provenance_acyclic(db_root, it->first.as<std::string>(), on_path)) return false;
        }
    }
    on_path->erase(model_ref);
    return true;
}

// ---------------------------------------------------------------------------
// Generators

/// The bundled example generator: cube-edge frames at cell size 1/2^k with
/// the beam diameter left exposed as a program parameter.
inline std::string grid_frame_program(int k_subdiv, double beam_d) {
    double s = std::ldexp(1.0, -k_subdiv);
    std::ostringstream out;
    ProvenanceDetails det;
    det.script = "/generators/grid_frame";
    det.arguments = "k_subdiv=" + std::to_string(k_subdiv) + " beam_d=" + format_double(beam_d, 6);
    det.structure_details = "cell_size=" + format_double(s, 6);
    out << write_header(record_provenance(ProvenanceKind::Generated, det));
    out << "from metagen import *\n\n";
    out << "def make_structure(beam_d=" << format_double(beam_d) << ") -> Structure:\n";
    const char* corners[8] = {"FRONT_BOTTOM_LEFT", "FRONT_BOTTOM_RIGHT", "FRONT_TOP_LEFT",
                              "FRONT_TOP_RIGHT",   "BACK_BOTTOM_LEFT",   "BACK_BOTTOM_RIGHT",
                              "BACK_TOP_LEFT",     "BACK_TOP_RIGHT"};
    for (int c = 0; c < 8; ++c)
        out << "    c" << c << " = vertex(cuboid.corners." << corners[c] << ")\n";
    out << "    pairs = [[c0, c1], [c2, c3], [c4, c5], [c6, c7],\n"
           "             [c0, c2], [c1, c3], [c4, c6], [c5, c7],\n"
           "             [c0, c4], [c1, c5], [c2, c6], [c3, c7]]\n";
    out << "    paths = []\n";
    out << "    for pair in pairs:\n";
    out << "        paths.append(Polyline(pair))\n";
    out << "    skel = skeleton(paths)\n";
    out << "    beams = UniformBeams(skel, beam_d)\n";
    out << "    emb = cuboid.embed(" << format_double(s) << ", " << format_double(s) << ", "
        << format_double(s) << ", cornerAtAABBMin=cuboid.corners.FRONT_BOTTOM_LEFT)\n";
    out << "    tile = Tile([beams], emb)\n";
    out << "    return Structure(tile, CuboidFullMirror())\n";
    return out.str();
}

/// Run a registered generator. The bundled grid_frame generator is built in;
/// any executable under <db_root>/generators/<id> works as a user generator
/// (it must print one program on standard output).
inline std::vector<std::string> generate_family(const std::string& generator_id, const json& params,
                                                const fs::path& db_root = {}) {
    if (generator_id == "grid_frame") {
        double beam_d = params.contains("beam_d") ? params.at("beam_d").get<double>() : 0.06;
        std::vector<int> ks;
        if (params.contains("k_subdiv")) {
            if (params.at("k_subdiv").is_array())
                for (auto& k : params.at("k_subdiv")) ks.push_back(k.get<int>());
            else
                ks.push_back(params.at("k_subdiv").get<int>());
        } else {
            ks.push_back(1);
        }
        std::vector<std::string> programs;
        for (int k : ks) programs.push_back(grid_frame_program(k, beam_d));
        return programs;
    }

    fs::path exe = db_root / "generators" / generator_id;
    if (db_root.empty() || !fs::exists(exe))
        fail("UnknownGenerator", "no generator named '" + generator_id + "'");
    std::string cmd = exe.string();
    for (auto it = params.begin(); it != params.end(); ++it)
        cmd += " " + it.key() + "=" + it.value().dump();
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) fail("UnknownGenerator", "failed to run generator '" + generator_id + "'");
    std::string output;
    char buf[4096];
    size_t got;
    while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, got);
    pclose(pipe);
    return {output};
}

}  // namespace metagen::db
