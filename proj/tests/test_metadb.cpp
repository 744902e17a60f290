#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "metagen/metadb.hpp"

using namespace metagen;
using namespace metagen::db;
namespace fs = std::filesystem;

namespace {

struct TempDb {
    fs::path root;
    TempDb() {
        root = fs::temp_directory_path() /
               ("metagen_db_" + std::to_string(Rng(uint64_t(::getpid())).next_u64() % 100000));
        fs::create_directories(root / "models");
        fs::create_directories(root / "literature");
        fs::create_directories(root / "generators");
        fs::create_directories(root / "benchmark");
    }
    ~TempDb() { fs::remove_all(root); }
};

}  // namespace

TEST_CASE("parse_header extracts the yaml block and the body") {
    std::string text = "'''\nsources:\n  /literature/x.pdf: seed paper\n  /models/m1/model.py: parent\n'''\nfrom metagen import *\n";
    auto [header, body] = parse_header(text);
    REQUIRE_FALSE(header.empty());
    CHECK(header.parsed["sources"]["/literature/x.pdf"].as<std::string>() == "seed paper");
    CHECK(body == "from metagen import *\n");

    auto [none, whole] = parse_header("from metagen import *\n");
    CHECK(none.empty());
    CHECK(whole == "from metagen import *\n");
}

TEST_CASE("unterminated headers are malformed") {
    try {
        parse_header("'''\nsources:\n");
        FAIL("expected MalformedHeader");
    } catch (const Error& e) {
        CHECK(e.code() == "MalformedHeader");
    }
}

TEST_CASE("header write/parse round trip normalizes key order") {
    YAML::Node node;
    node["sources"]["/models/a/model.py"] = "parent";
    node["sources"]["/literature/b.pdf"] = "reference";
    node["file_info"]["version"] = "1";
    HeaderBlock h;
    h.parsed = node;
    std::string file = write_header(h) + "from metagen import *\n";
    auto [back, body] = parse_header(file);
    CHECK(body == "from metagen import *\n");
    CHECK(emit_yaml_sorted(back.parsed) == emit_yaml_sorted(node));
}

TEST_CASE("resolve_path handles absolute, relative, and escaping refs") {
    TempDb db;
    auto abs = resolve_path(db.root, db.root / "models" / "a" / "model.py", "/literature/x.pdf");
    CHECK(abs == (db.root / "literature" / "x.pdf").lexically_normal());

    auto rel = resolve_path(db.root, db.root / "models" / "a" / "model.py", "sibling.py");
    CHECK(rel == (db.root / "models" / "a" / "sibling.py").lexically_normal());

    try {
        resolve_path(db.root, db.root / "models" / "a" / "model.py", "/../etc");
        FAIL("expected PathEscape");
    } catch (const Error& e) {
        CHECK(e.code() == "PathEscape");
    }
}

TEST_CASE("provenance fragments carry sources and generator info") {
    ProvenanceDetails det;
    det.sources = {{"/models/m1/model.py", "parent"}};
    det.structure_details = "vertex v0 default -> [0.3]";
    auto header = record_provenance(ProvenanceKind::Mutated, det);
    CHECK(header.parsed["sources"]["/models/m1/model.py"].IsDefined());
    CHECK(header.parsed["file_info"]["generator_info"]["structure_details"].as<std::string>() ==
          det.structure_details);

    ProvenanceDetails hybrid;
    hybrid.sources = {{"/models/m1/model.py", "parent"}, {"/models/m2/model.py", "parent"}};
    hybrid.prompt_hash = "abc123";
    hybrid.model_name = "external-llm";
    auto h1 = record_provenance(ProvenanceKind::Hybridized, hybrid);
    auto h2 = record_provenance(ProvenanceKind::Hybridized, hybrid);
    CHECK(emit_yaml_sorted(h1.parsed) == emit_yaml_sorted(h2.parsed));

    ProvenanceDetails incomplete;
    incomplete.sources = {{"/models/m1/model.py", "parent"}};
    try {
        record_provenance(ProvenanceKind::Hybridized, incomplete);
        FAIL("expected MissingField");
    } catch (const Error& e) {
        CHECK(e.code() == "MissingField");
    }
}

TEST_CASE("generate_family produces compiling parameterized programs") {
    auto one = generate_family("grid_frame", {{"k_subdiv", 1}, {"beam_d", 0.06}});
    REQUIRE(one.size() == 1);
    CHECK(one[0].find("beam_d=0.06") != std::string::npos);

    auto two = generate_family("grid_frame", {{"k_subdiv", {1, 2}}, {"beam_d", 0.08}});
    REQUIRE(two.size() == 2);
    CHECK(two[0] != two[1]);
    CHECK(two[0].find("k_subdiv=1") != std::string::npos);
    CHECK(two[1].find("k_subdiv=2") != std::string::npos);

    for (auto& program : two) {
        auto [ok, diag] = quality::check_compiles(program);
        CHECK(ok);
        auto params = frontend::list_params(frontend::parse_program(program));
        REQUIRE(params.size() == 1);
        CHECK(params[0].name == "beam_d");
    }

    try {
        generate_family("no_such_generator", json::object());
        FAIL("expected UnknownGenerator");
    } catch (const Error& e) {
        CHECK(e.code() == "UnknownGenerator");
    }
}

TEST_CASE("ingest writes the artifact set and rejects duplicates") {
    TempDb db;
    auto program = generate_family("grid_frame", {{"k_subdiv", 1}, {"beam_d", 0.1}})[0];
    auto result = ingest_model(db.root, program, "frame1", 32, 64);
    REQUIRE(result.report.overall);
    REQUIRE(result.entry.has_value());

    // the six derived artifacts plus the program itself
    CHECK(fs::exists(result.entry->geometry));
    for (auto& r : result.entry->renders) CHECK(fs::exists(r));
    CHECK(fs::exists(result.entry->properties));
    CHECK(fs::exists(result.entry->program));
    CHECK(fs::exists(result.entry->validation));
    CHECK(fs::exists(db.root / "index.jsonl"));

    try {
        ingest_model(db.root, program, "frame1", 32, 64);
        FAIL("expected DuplicateId");
    } catch (const Error& e) {
        CHECK(e.code() == "DuplicateId");
    }
}

TEST_CASE("invalid programs leave no directory behind") {
    TempDb db;
    auto result = ingest_model(db.root, "def broken(:\n", "bad1", 16, 64);
    CHECK_FALSE(result.report.compiled);
    CHECK_FALSE(result.entry.has_value());
    CHECK_FALSE(fs::exists(db.root / "models" / "bad1"));
}

TEST_CASE("provenance walks detect cycles") {
    TempDb db;
    auto write_model = [&](const std::string& id, const std::vector<std::string>& parents) {
        fs::create_directories(db.root / "models" / id);
        YAML::Node node;
        for (const auto& p : parents) node["sources"][p] = "parent";
        HeaderBlock h;
        h.parsed = node;
        std::ofstream out(db.root / "models" / id / "model.py");
        out << (parents.empty() ? "" : write_header(h)) << "from metagen import *\n";
    };
    write_model("root", {});
    write_model("child", {"/models/root/model.py", "/literature/paper.pdf"});
    write_model("grandchild", {"/models/child/model.py"});
    CHECK(provenance_acyclic(db.root, "/models/grandchild/model.py"));

    write_model("loop_a", {"/models/loop_b/model.py"});
    write_model("loop_b", {"/models/loop_a/model.py"});
    CHECK_FALSE(provenance_acyclic(db.root, "/models/loop_a/model.py"));
}

TEST_CASE("properties regenerate bit-identically from the program") {
    TempDb db;
    auto program = generate_family("grid_frame", {{"k_subdiv", 1}, {"beam_d", 0.1}})[0];
    auto r1 = ingest_model(db.root, program, "a", 32, 64);
    auto r2 = ingest_model(db.root, program, "b", 32, 64);
    REQUIRE(r1.entry.has_value());
    REQUIRE(r2.entry.has_value());
    auto read = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    CHECK(read(r1.entry->properties) == read(r2.entry->properties));
    CHECK(read(r1.entry->geometry) == read(r2.entry->geometry));
    CHECK(read(r1.entry->renders[0]) == read(r2.entry->renders[0]));

    auto art = model_artifacts(db.root, "a");
    CHECK(art.source == "/models/a/model.py");
    CHECK(art.code.find("make_structure") != std::string::npos);
    CHECK(art.code.rfind("'''", 0) == std::string::npos);  // header stripped
    CHECK(art.props.V > 0);
}
