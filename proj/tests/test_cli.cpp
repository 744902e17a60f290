// End-to-end exercise of the command line interface: compile, simulate,
// mutate, ingest, bench build, and bench eval against a scratch database.
// Arguments: <metagen binary> <models dir>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

int failures = 0;

#define CHECK_MSG(cond, msg)                                        \
    do {                                                            \
        if (!(cond)) {                                              \
            std::printf("FAIL %s:%d: %s\n", __FILE__, __LINE__, msg); \
            ++failures;                                             \
        }                                                           \
    } while (0)

struct RunResult {
    int exit_code;
    std::string out;
};

RunResult run(const std::string& cmd) {
    std::string full = cmd + " 2>&1";
    FILE* pipe = popen(full.c_str(), "r");
    if (!pipe) return {127, ""};
    std::string out;
    char buf[4096];
    size_t got;
    while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, got);
    int status = pclose(pipe);
    return {WEXITSTATUS(status), out};
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string strip_code_fence(const std::string& response) {
    const std::string open = "```python\n";
    auto start = response.find(open);
    if (start == std::string::npos) return response;
    start += open.size();
    auto end = response.rfind("\n```");
    return response.substr(start, end - start);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::printf("usage: test_cli <metagen binary> <models dir>\n");
        return 2;
    }
    const std::string bin = argv[1];
    const fs::path models = argv[2];
    const fs::path scratch =
        fs::temp_directory_path() / ("metagen_cli_" + std::to_string(::getpid()));
    fs::create_directories(scratch);

    // compile: report on stdout, exit 0
    {
        auto r = run(bin + " compile " + (models / "schwarz_p.py").string());
        CHECK_MSG(r.exit_code == 0, "compile schwarz_p should exit 0");
        CHECK_MSG(r.out.find("TetFullMirror") != std::string::npos, "report names the pattern");
        CHECK_MSG(r.out.find("transforms=48") != std::string::npos, "48 tet transforms");
    }
    // compile with overrides
    {
        auto r = run(bin + " compile " + (models / "schwarz_p.py").string() +
                     " --param shell_thickness=0.05");
        CHECK_MSG(r.exit_code == 0, "override compile exits 0");
        CHECK_MSG(r.out.find("thickness=0.05") != std::string::npos, "override reaches the lift");
    }
    // compile failure: diagnostics, exit 1
    {
        fs::path broken = scratch / "broken.py";
        std::ofstream(broken) << "from metagen import *\ndef make_structure(:\n";
        auto r = run(bin + " compile " + broken.string());
        CHECK_MSG(r.exit_code == 1, "broken program exits 1");
        CHECK_MSG(r.out.find("error:") != std::string::npos, "diagnostic printed");
        CHECK_MSG(r.out.find(broken.string()) != std::string::npos, "diagnostic names the file");
    }
    // simulate solid cube: E within 1% of 1
    {
        auto r = run(bin + " simulate " + (models / "solid_cube.py").string() + " --res 16");
        CHECK_MSG(r.exit_code == 0, "simulate solid exits 0");
        auto body = r.out.substr(r.out.find('{'));
        auto props = json::parse(body);
        double E = props.at("E").get<double>();
        CHECK_MSG(std::abs(E - 1.0) < 0.01, "solid cube E within 1% of 1.0");
    }
    // simulate a non-load-bearing structure: exit 2
    {
        fs::path floating = scratch / "floating.py";
        std::ofstream(floating) << R"(from metagen import *

def make_structure() -> Structure:
    v0 = vertex(cuboid.faces.TOP, [0.5, 0.5])
    skel = skeleton([v0])
    lifted = Spheres(skel, 0.1)
    e = cuboid.embed(1.0, 1.0, 1.0, cornerAtAABBMin=cuboid.corners.FRONT_BOTTOM_LEFT)
    return Structure(Tile([lifted], e), Identity())
)";
        auto r = run(bin + " simulate " + floating.string() + " --res 16");
        CHECK_MSG(r.exit_code == 2, "non-spanning structure exits 2");
        CHECK_MSG(r.out.find("SingularSystem") != std::string::npos, "reason printed");
    }
    // validate exit codes
    {
        auto good = run(bin + " validate " + (models / "grid_frame.py").string() + " --res 32");
        CHECK_MSG(good.exit_code == 0, "valid model exits 0");
        auto bad = run(bin + " validate " + (scratch / "floating.py").string() + " --res 16");
        CHECK_MSG(bad.exit_code == 1, "invalid model exits 1");
    }
    // mutate determinism
    {
        auto a = run(bin + " mutate " + (models / "pentamode.py").string() + " --seed 7");
        auto b = run(bin + " mutate " + (models / "pentamode.py").string() + " --seed 7");
        CHECK_MSG(a.exit_code == 0, "mutate exits 0");
        CHECK_MSG(a.out == b.out, "mutate --seed 7 twice gives identical output");
        CHECK_MSG(a.out.find("'''") == 0, "mutated program carries a provenance header");
        auto c = run(bin + " mutate " + (models / "pentamode.py").string() + " --seed 8");
        CHECK_MSG(a.out != c.out, "different seeds differ");
    }
    // geom and render write deterministic artifacts
    {
        fs::path obj1 = scratch / "a.obj", obj2 = scratch / "b.obj";
        run(bin + " geom " + (models / "grid_frame.py").string() + " --res 24 --out " + obj1.string());
        run(bin + " geom " + (models / "grid_frame.py").string() + " --res 24 --out " + obj2.string());
        CHECK_MSG(fs::exists(obj1) && read_file(obj1) == read_file(obj2), "geom deterministic");

        auto r = run(bin + " render " + (models / "grid_frame.py").string() + " --res 24 --size 64" +
                     " --out-prefix " + (scratch / "view").string());
        CHECK_MSG(r.exit_code == 0, "render exits 0");
        for (const char* v : {"top", "front", "right", "angled"})
            CHECK_MSG(fs::exists(scratch / ("view_" + std::string(v) + ".png")),
                      "render file exists");
    }
    // hybrid prompt
    {
        fs::path api = scratch / "api.txt";
        std::ofstream(api) << "THE API";
        auto r = run(bin + " hybrid-prompt " + (models / "schwarz_p.py").string() + " " +
                     (models / "pentamode.py").string() + " --api " + api.string());
        CHECK_MSG(r.exit_code == 0, "hybrid-prompt exits 0");
        CHECK_MSG(r.out.find("I want you to help discover unique new programs.") != std::string::npos,
                  "prompt body present");

        // the gateway hook pipes the prompt into an arbitrary executable
        auto hooked = run(bin + " hybrid-prompt " + (models / "schwarz_p.py").string() + " " +
                          (models / "pentamode.py").string() + " --api " + api.string() +
                          " --exec 'wc -l'");
        CHECK_MSG(hooked.exit_code == 0, "hybrid-prompt --exec exits 0");
        CHECK_MSG(std::stoi(hooked.out) > 10, "hook received the prompt lines");
    }
    // simulate output is stable across --threads
    {
        auto t1 = run(bin + " simulate " + (models / "solid_cube.py").string() +
                      " --res 16 --threads 1");
        auto t4 = run(bin + " simulate " + (models / "solid_cube.py").string() +
                      " --res 16 --threads 4");
        CHECK_MSG(t1.out == t4.out, "simulate output identical across --threads");
    }
    // generate programs
    {
        auto r = run(bin + " generate --generator grid_frame --params '{\"k_subdiv\": [1, 2], "
                     "\"beam_d\": 0.1}'");
        CHECK_MSG(r.exit_code == 0, "generate exits 0");
        CHECK_MSG(r.out.find("beam_d=0.1") != std::string::npos, "program parameter exposed");
    }

    // database flow: ingest models, build the benchmark, evaluate ground truth
    fs::path dbroot = scratch / "db";
    fs::create_directories(dbroot / "models");
    {
        struct Seed {
            const char* id;
            std::string text;
        };
        auto frame = [&](double d) {
            auto r = run(bin + " generate --generator grid_frame --params '{\"k_subdiv\": 1, "
                         "\"beam_d\": " + std::to_string(d) + "}'");
            return r.out;
        };
        std::vector<Seed> seeds = {
            {"frame10", frame(0.10)},
            {"frame12", frame(0.12)},
            {"frame14", frame(0.14)},
            {"solid", read_file(models / "solid_cube.py")},
            {"schwarz", read_file(models / "schwarz_p.py")},
        };
        for (auto& seed : seeds) {
            fs::path src = scratch / (std::string(seed.id) + ".py");
            std::ofstream(src) << seed.text;
            auto r = run(bin + " ingest " + src.string() + " " + seed.id + " --db " +
                         dbroot.string() + " --res 32 --render-size 64");
            CHECK_MSG(r.exit_code == 0, (std::string("ingest ") + seed.id + " succeeds").c_str());
        }
        CHECK_MSG(fs::exists(dbroot / "models" / "schwarz" / "render_angled.png"),
                  "render artifact written");
        auto dup = run(bin + " ingest " + (scratch / "solid.py").string() + " solid --db " +
                       dbroot.string() + " --res 16");
        CHECK_MSG(dup.exit_code == 1, "duplicate id rejected");
    }
    {
        auto r = run(bin + " bench build --db " + dbroot.string() + " --seed 5 --test-size 1 "
                     "--val-size 1");
        CHECK_MSG(r.exit_code == 0, "bench build exits 0");
        CHECK_MSG(fs::exists(dbroot / "benchmark" / "ranges.json"), "ranges written");
        CHECK_MSG(fs::exists(dbroot / "benchmark" / "manifest.json"), "manifest written");

        // 15 + 2 + 6 records per model across the dataset files
        long total = 0;
        for (const auto& entry : fs::directory_iterator(dbroot / "benchmark")) {
            auto name = entry.path().filename().string();
            if (name.rfind("omnitask", 0) != 0 || entry.path().extension() != ".jsonl") continue;
            std::ifstream in(entry.path());
            std::string line;
            while (std::getline(in, line))
                if (!line.empty()) ++total;
        }
        CHECK_MSG(total == 5 * (15 + 2 + 6), "23 records per model in the omnitask split");
    }
    {
        // ground-truth predictions reproduce perfect scores
        std::vector<json> tasks;
        for (const char* split : {"train", "validate", "test"}) {
            fs::path f = dbroot / "benchmark" / ("omnitask_" + std::string(split) + ".jsonl");
            std::ifstream in(f);
            std::string line;
            while (std::getline(in, line))
                if (!line.empty()) tasks.push_back(json::parse(line));
        }
        fs::path pred_path = scratch / "predictions.jsonl";
        {
            std::ofstream pred(pred_path);
            for (const auto& task : tasks) {
                json p;
                p["label"] = task.at("label");
                if (task.at("task_type") == "material_understanding")
                    p["properties"] = task.at("data").at("properties");
                else
                    p["code"] = strip_code_fence(task.at("response").get<std::string>());
                pred << p.dump() << "\n";
            }
        }
        fs::path task_path = scratch / "all_tasks.jsonl";
        {
            std::ofstream out(task_path);
            for (const auto& task : tasks) out << task.dump() << "\n";
        }
        auto r = run(bin + " bench eval --db " + dbroot.string() + " --tasks " + task_path.string() +
                     " --pred " + pred_path.string() + " --res 32");
        CHECK_MSG(r.exit_code == 0, "bench eval exits 0");
        auto report = json::parse(r.out.substr(r.out.find('{')));
        CHECK_MSG(report.at("reconstruction").at("iou").get<double>() == 1.0,
                  "ground truth IoU is 1.0");
        CHECK_MSG(report.at("reconstruction").at("cd").get<double>() == 0.0,
                  "ground truth chamfer is 0.0");
        CHECK_MSG(report.at("reconstruction").at("valid").get<double>() == 1.0,
                  "all reconstructions valid");
        CHECK_MSG(report.at("material_understanding").at("error").get<double>() == 0.0,
                  "understanding error 0");
        CHECK_MSG(report.at("material_understanding").at("valid").get<double>() == 1.0,
                  "all understanding valid");
        CHECK_MSG(report.at("inverse_design").at("error").get<double>() == 0.0,
                  "inverse error 0");
        CHECK_MSG(report.at("inverse_design").at("valid").get<double>() == 1.0,
                  "all inverse valid");
    }

    fs::remove_all(scratch);
    std::printf("%s (%d failure%s)\n", failures == 0 ? "CLI TESTS PASSED" : "CLI TESTS FAILED",
                failures, failures == 1 ? "" : "s");
    return failures == 0 ? 0 : 1;
}
