// metagen: MetaDSL compiler, simulator, and benchmark toolchain.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "metagen/augment.hpp"
#include "metagen/benchkit.hpp"
#include "metagen/discretize.hpp"
#include "metagen/frontend.hpp"
#include "metagen/homogenize.hpp"
#include "metagen/metadb.hpp"
#include "metagen/quality.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace metagen;

namespace {

frontend::EvalConfig g_eval_cfg;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) fail("IoFailure", "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, double> parse_params(const std::vector<std::string>& kvs) {
    std::map<std::string, double> out;
    for (const auto& kv : kvs) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) fail("TypeError", "--param expects name=value, got " + kv);
        out[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    }
    return out;
}

assembly::StructurePtr compile_file(const std::string& path,
                                    const std::map<std::string, double>& params) {
    auto text = read_file(path);
    auto ast = frontend::parse_program(text);
    return frontend::evaluate(ast, params, g_eval_cfg);
}

int fail_with_diagnostic(const Error& e, const std::string& file, int code = 1) {
    std::cerr << e.diagnostic(file) << "\n";
    return code;
}

json simulate_to_json(const assembly::StructurePtr& ir, int res, int threads, int supersample) {
    auto grid = discretize::voxelize(*ir, res, threads, supersample);
    auto C = homog::homogenize(grid);
    auto props = homog::extract_properties(C, grid.volume_fraction());
    return db::properties_json(props);
}

struct BenchPaths {
    fs::path db_root;
    fs::path out_dir;
};

std::vector<std::string> list_model_ids(const fs::path& db_root) {
    std::vector<std::string> ids;
    fs::path models = db_root / "models";
    if (fs::exists(models))
        for (const auto& entry : fs::directory_iterator(models))
            if (entry.is_directory() && fs::exists(entry.path() / "model.py"))
                ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());
    return ids;
}

int cmd_bench_build(const fs::path& db_root, const fs::path& out_dir, uint64_t seed, int test_size,
                    int val_size) {
    auto ids = list_model_ids(db_root);
    if (ids.empty()) {
        std::cerr << "error: no models under " << (db_root / "models") << "\n";
        return 1;
    }
    // defaults proportional to the 500/50/12732 split of the core set
    if (test_size < 0) test_size = std::max(1, int(std::llround(double(ids.size()) * 500 / 13282)));
    if (val_size < 0) val_size = std::max(1, int(std::llround(double(ids.size()) * 50 / 13282)));
    auto splits = bench::make_splits(ids, seed, test_size, val_size);

    std::vector<homog::PropertyVector> corpus;
    std::map<std::string, bench::ModelArtifacts> artifacts;
    for (const auto& id : ids) {
        artifacts[id] = db::model_artifacts(db_root, id);
        corpus.push_back(artifacts[id].props);
    }
    auto ranges = bench::compute_ranges(corpus);
    auto reference = bench::default_reference();

    fs::create_directories(out_dir);
    {
        std::ofstream out(out_dir / "ranges.json", std::ios::binary);
        out << ranges.to_json().dump(2) << "\n";
    }
    {
        json manifest;
        manifest["seed"] = seed;
        manifest["test_size"] = test_size;
        manifest["val_size"] = val_size;
        manifest["heuristic_weights"] = {{"isotropy_reward", 10},
                                         {"directional_gap_weight", 5},
                                         {"stiffness_to_weight_reward", 3},
                                         {"extremity_weight", 2},
                                         {"rarity_weight", 1},
                                         {"random_break_probability", 0.10},
                                         {"anisotropy_threshold", bench::kIsotropyThreshold}};
        std::ofstream out(out_dir / "manifest.json", std::ios::binary);
        out << manifest.dump(2) << "\n";
    }

    std::map<std::string, std::vector<bench::TaskRecord>> files;
    auto split_of = [&](const std::string& id) {
        for (auto& t : splits.test)
            if (t == id) return std::string("test");
        for (auto& v : splits.validate)
            if (v == id) return std::string("validate");
        return std::string("train");
    };
    Rng base(seed);
    for (const auto& id : ids) {
        const auto& art = artifacts[id];
        std::string split = split_of(id);
        uint64_t model_seed = base.derive(std::hash<std::string>{}(id)).next_u64();
        for (int n = 1; n <= 4; ++n) {
            auto records = bench::build_reconstruction_tasks(art, n);
            auto& bucket = files["reconstruction_" + std::to_string(n) + "view_" + split];
            bucket.insert(bucket.end(), records.begin(), records.end());
            auto& omni = files["omnitask_" + split];
            omni.insert(omni.end(), records.begin(), records.end());
        }
        auto understanding = bench::build_understanding_tasks(art);
        files["understanding_single_image_" + split].push_back(understanding[0]);
        files["understanding_multiview_and_code_" + split].push_back(understanding[1]);
        files["omnitask_" + split].insert(files["omnitask_" + split].end(), understanding.begin(),
                                          understanding.end());
        auto inverse = bench::build_inverse_tasks(art, ranges, reference, model_seed);
        for (size_t n = 0; n < inverse.size(); ++n) {
            files["inverse_design_" + std::to_string(n + 1) + "targets_" + split].push_back(
                inverse[n]);
            files["omnitask_" + split].push_back(inverse[n]);
        }
    }
    for (const auto& [name, records] : files)
        bench::write_jsonl(records, (out_dir / (name + ".jsonl")).string());
    std::cout << "wrote " << files.size() << " dataset files to " << out_dir << "\n";
    return 0;
}

int cmd_bench_eval(const fs::path& db_root, const std::string& tasks_path,
                   const std::string& pred_path, const std::string& out_path, int res,
                   int threads) {
    auto tasks = bench::read_jsonl(tasks_path);

    std::map<std::string, json> predictions;
    {
        std::ifstream in(pred_path, std::ios::binary);
        if (!in.good()) fail("IoFailure", "cannot open " + pred_path);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded())
                fail("MalformedLine", "line " + std::to_string(lineno) + " of " + pred_path);
            predictions[j.at("label").get<std::string>()] = j;
        }
    }

    fs::path ranges_path = db_root / "benchmark" / "ranges.json";
    bench::PropertyRanges ranges;
    if (fs::exists(ranges_path)) {
        ranges = bench::PropertyRanges::from_json(json::parse(read_file(ranges_path.string())));
    } else {
        ranges = bench::compute_ranges({});
    }

    std::map<std::string, discretize::VoxelGrid> truth_cache;
    auto truth_grid = [&](const std::string& source) -> const discretize::VoxelGrid& {
        auto it = truth_cache.find(source);
        if (it != truth_cache.end()) return it->second;
        auto path = db::resolve_path(db_root, db_root, source);
        auto ir = compile_file(path.string(), {});
        truth_cache[source] = discretize::voxelize(ir, res, threads);
        return truth_cache[source];
    };

    // Predictions repeat one program across a model's records; validate once.
    std::map<std::string, std::shared_ptr<quality::ValidationReport>> report_cache;
    auto validated = [&](const std::string& code) {
        auto it = report_cache.find(code);
        if (it != report_cache.end()) return it->second;
        auto report = std::make_shared<quality::ValidationReport>(quality::validate_model(code, res));
        report_cache[code] = report;
        return report;
    };

    struct Group {
        double error_sum = 0, iou_sum = 0, cd_sum = 0;
        int valid = 0, total = 0;
    };
    std::map<std::string, Group> groups;

    for (const auto& task : tasks) {
        Group& g = groups[task.task_type];
        ++g.total;
        auto pit = predictions.find(task.label);
        if (pit == predictions.end()) continue;
        const json& pred = pit->second;
        try {
            if (task.task_type == "material_understanding") {
                if (!pred.contains("properties")) continue;
                std::map<std::string, double> pm, tm;
                for (auto it = pred.at("properties").begin(); it != pred.at("properties").end(); ++it)
                    pm[it.key()] = it.value().get<double>();
                for (auto it = task.data.at("properties").begin();
                     it != task.data.at("properties").end(); ++it)
                    tm[it.key()] = it.value().get<double>();
                double err = bench::eval_understanding(pm, tm, ranges);
                g.error_sum += err;
                ++g.valid;
            } else if (task.task_type == "reconstruction") {
                if (!pred.contains("code")) continue;
                auto report = validated(pred.at("code").get<std::string>());
                if (!report->overall) continue;
                auto score = bench::eval_reconstruction(*report->grid, truth_grid(task.source));
                if (!std::isfinite(score.chamfer)) continue;
                g.iou_sum += score.iou;
                g.cd_sum += score.chamfer;
                ++g.valid;
            } else if (task.task_type == "inverse_design") {
                if (!pred.contains("code")) continue;
                auto report = validated(pred.at("code").get<std::string>());
                if (!report->overall) continue;
                auto profile = bench::TargetProfile::from_json(task.data.at("targets"));
                double err = bench::eval_inverse(profile, *report->properties, ranges);
                g.error_sum += err;
                ++g.valid;
            }
        } catch (const Error&) {
            // invalid prediction; counted in total only
        }
    }

    json report;
    for (const auto& [type, g] : groups) {
        json row;
        if (type == "reconstruction") {
            row["iou"] = g.valid ? g.iou_sum / g.valid : 0.0;
            row["cd"] = g.valid ? g.cd_sum / g.valid : 0.0;
        } else {
            row["error"] = g.valid ? g.error_sum / g.valid : 0.0;
        }
        row["valid"] = g.total ? double(g.valid) / g.total : 0.0;
        row["count"] = g.total;
        report[type] = row;
    }
    if (out_path.empty()) {
        std::cout << report.dump(2) << "\n";
    } else {
        std::ofstream out(out_path, std::ios::binary);
        out << report.dump(2) << "\n";
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MetaDSL metamaterial toolchain"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string db_env = std::getenv("METADB_ROOT") ? std::getenv("METADB_ROOT") : "";
    std::string db_root = db_env;
    int res = 32;
    uint64_t seed = 0;
    int threads = 1;
    int supersample = 1;
    app.add_option("--db", db_root, "database root (or METADB_ROOT)")->capture_default_str();
    app.add_option("--res", res, "voxel resolution")->check(CLI::Range(2, 512))
        ->capture_default_str();
    app.add_option("--seed", seed, "random seed")->capture_default_str();
    app.add_option("--threads", threads, "worker threads for voxelization (0 = auto)")
        ->capture_default_str();
    app.add_option("--supersample", supersample, "occupancy samples per voxel axis")
        ->check(CLI::Range(1, 5))->capture_default_str();
    app.add_option("--step-limit", g_eval_cfg.step_limit, "interpreter step budget")
        ->capture_default_str();
    app.add_option("--depth-limit", g_eval_cfg.depth_limit, "interpreter call depth budget")
        ->capture_default_str();

    // compile
    auto* compile = app.add_subcommand("compile", "parse and evaluate a program, print its IR");
    std::string compile_file_path;
    std::vector<std::string> compile_params;
    compile->add_option("file", compile_file_path)->required();
    compile->add_option("--param", compile_params, "parameter override name=value");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "voxelize, homogenize, and report properties");
    std::string sim_file, sim_out;
    std::vector<std::string> sim_params;
    simulate->add_option("file", sim_file)->required();
    simulate->add_option("--out", sim_out, "output JSON path (default stdout)");
    simulate->add_option("--param", sim_params, "parameter override name=value");

    // geom
    auto* geom = app.add_subcommand("geom", "extract the surface mesh as OBJ");
    std::string geom_file, geom_out = "geometry.obj";
    geom->add_option("file", geom_file)->required();
    geom->add_option("--out", geom_out)->capture_default_str();

    // render
    auto* render = app.add_subcommand("render", "render the four orthographic views");
    std::string render_file, render_prefix = "render";
    int render_size = 512;
    bool render_ppm = false;
    render->add_option("file", render_file)->required();
    render->add_option("--out-prefix", render_prefix)->capture_default_str();
    render->add_option("--size", render_size)->capture_default_str();
    render->add_flag("--ppm", render_ppm, "write PPM instead of PNG");

    // validate
    auto* validate = app.add_subcommand("validate", "run the three MetaDB admission checks");
    std::string validate_file;
    validate->add_option("file", validate_file)->required();

    // mutate
    auto* mutate = app.add_subcommand("mutate", "apply a seeded type-safe mutation");
    std::string mutate_file, mutate_out;
    mutate->add_option("file", mutate_file)->required();
    mutate->add_option("--out", mutate_out, "output program path (default stdout)");

    // hybrid-prompt
    auto* hybrid = app.add_subcommand("hybrid-prompt", "assemble the crossover prompt");
    std::string hybrid_a, hybrid_b, hybrid_api, hybrid_exec;
    hybrid->add_option("parent_a", hybrid_a)->required();
    hybrid->add_option("parent_b", hybrid_b)->required();
    hybrid->add_option("--api", hybrid_api, "API description file")->required();
    hybrid->add_option("--exec", hybrid_exec,
                       "pipe the prompt into this command's standard input and print its output");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate a program and add it to the database");
    std::string ingest_file, ingest_id;
    int ingest_render_size = 512;
    ingest->add_option("file", ingest_file)->required();
    ingest->add_option("id", ingest_id)->required();
    ingest->add_option("--render-size", ingest_render_size)->capture_default_str();

    // generate
    auto* generate = app.add_subcommand("generate", "run a model-family generator");
    std::string generator_id = "grid_frame", generator_params = "{}", generate_out_dir;
    generate->add_option("--generator", generator_id)->capture_default_str();
    generate->add_option("--params", generator_params, "JSON parameter object");
    generate->add_option("--out-dir", generate_out_dir, "write programs here instead of stdout");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "build or evaluate benchmark datasets");
    bench_cmd->require_subcommand(1);
    auto* bench_build = bench_cmd->add_subcommand("build", "write the task JSONL splits");
    std::string bench_out;
    int bench_test = -1, bench_val = -1;
    bench_build->add_option("--out-dir", bench_out, "output directory (default <db>/benchmark)");
    bench_build->add_option("--test-size", bench_test, "test split size");
    bench_build->add_option("--val-size", bench_val, "validation split size");
    auto* bench_eval = bench_cmd->add_subcommand("eval", "score a predictions file");
    std::string eval_tasks, eval_pred, eval_out;
    bench_eval->add_option("--tasks", eval_tasks)->required();
    bench_eval->add_option("--pred", eval_pred)->required();
    bench_eval->add_option("--out", eval_out, "report path (default stdout)");

    CLI11_PARSE(app, argc, argv);
    if (threads <= 0) threads = int(std::thread::hardware_concurrency());

    try {
        if (*compile) {
            try {
                auto ir = compile_file(compile_file_path, parse_params(compile_params));
                std::cout << assembly::transpile_report(*ir);
                return 0;
            } catch (const Error& e) {
                return fail_with_diagnostic(e, compile_file_path);
            }
        }
        if (*simulate) {
            try {
                auto ir = compile_file(sim_file, parse_params(sim_params));
                json props = simulate_to_json(ir, res, threads, supersample);
                if (sim_out.empty()) {
                    std::cout << props.dump(2) << "\n";
                } else {
                    std::ofstream out(sim_out, std::ios::binary);
                    out << props.dump(2) << "\n";
                }
                return 0;
            } catch (const Error& e) {
                int code = e.code() == "SingularSystem" || e.code() == "SolverNoConvergence" ? 2 : 1;
                return fail_with_diagnostic(e, sim_file, code);
            }
        }
        if (*geom) {
            try {
                auto ir = compile_file(geom_file, {});
                auto mesh = discretize::extract_mesh(ir, res);
                discretize::export_obj(mesh, geom_out);
                std::cout << "wrote " << geom_out << " (" << mesh.triangles.size()
                          << " triangles)\n";
                return 0;
            } catch (const Error& e) {
                return fail_with_diagnostic(e, geom_file);
            }
        }
        if (*render) {
            try {
                auto ir = compile_file(render_file, {});
                auto mesh = discretize::extract_mesh(ir, res);
                auto views = discretize::render_views(mesh, render_size);
                static const std::array<int, 4> source = {1, 0, 2, 3};  // top front right angled
                static const std::array<const char*, 4> names = {"top", "front", "right", "angled"};
                for (int v = 0; v < 4; ++v) {
                    std::string path = render_prefix + "_" + names[size_t(v)] +
                                       (render_ppm ? ".ppm" : ".png");
                    if (render_ppm)
                        discretize::write_ppm(views[size_t(source[size_t(v)])], path);
                    else
                        discretize::write_png(views[size_t(source[size_t(v)])], path);
                    std::cout << "wrote " << path << "\n";
                }
                return 0;
            } catch (const Error& e) {
                return fail_with_diagnostic(e, render_file);
            }
        }
        if (*validate) {
            auto report = quality::validate_model(read_file(validate_file), res);
            std::cout << db::validation_json(report, res).dump(2) << "\n";
            return report.overall ? 0 : 1;
        }
        if (*mutate) {
            try {
                auto text = read_file(mutate_file);
                auto ir = frontend::evaluate(frontend::parse_program(text));
                augment::MutationConfig cfg;
                cfg.seed = seed;
                auto [spec, trace] = augment::mutate_spec(augment::decompose(*ir), cfg);
                auto params = frontend::list_params(frontend::parse_program(text));
                std::string program = augment::emit_program(spec, {});

                db::ProvenanceDetails det;
                det.sources = {{mutate_file, "parent"}};
                det.script = "/generators/mutate";
                det.arguments = "seed=" + std::to_string(seed);
                std::string details;
                for (const auto& entry : trace.applied)
                    details += entry.axis + " " + entry.site + " " + entry.before + " -> " +
                               entry.after + "; ";
                det.structure_details = details;
                std::string out_text =
                    db::write_header(db::record_provenance(db::ProvenanceKind::Mutated, det)) +
                    program;
                if (mutate_out.empty()) {
                    std::cout << out_text;
                } else {
                    std::ofstream out(mutate_out, std::ios::binary);
                    out << out_text;
                }
                return 0;
            } catch (const Error& e) {
                return fail_with_diagnostic(e, mutate_file);
            }
        }
        if (*hybrid) {
            auto [ha, ba] = db::parse_header(read_file(hybrid_a));
            auto [hb, bb] = db::parse_header(read_file(hybrid_b));
            auto prompt = augment::build_hybrid_prompt(ba, bb, read_file(hybrid_api));
            if (hybrid_exec.empty()) {
                std::cout << prompt;
                return 0;
            }
            // the model gateway is pluggable: any executable reading the
            // prompt on stdin and writing the hybrid program to stdout
            FILE* pipe = popen(hybrid_exec.c_str(), "w");
            if (!pipe) {
                std::cerr << "error: cannot run " << hybrid_exec << "\n";
                return 1;
            }
            fwrite(prompt.data(), 1, prompt.size(), pipe);
            int status = pclose(pipe);
            return WEXITSTATUS(status);
        }
        if (*ingest) {
            if (db_root.empty()) {
                std::cerr << "error: ingest needs --db or METADB_ROOT\n";
                return 1;
            }
            auto result =
                db::ingest_model(db_root, read_file(ingest_file), ingest_id, res, ingest_render_size);
            std::cout << db::validation_json(result.report, res).dump(2) << "\n";
            return result.entry ? 0 : 1;
        }
        if (*generate) {
            auto programs =
                db::generate_family(generator_id, json::parse(generator_params), db_root);
            if (generate_out_dir.empty()) {
                for (const auto& p : programs) std::cout << p << "\n";
            } else {
                fs::create_directories(generate_out_dir);
                int i = 0;
                for (const auto& p : programs) {
                    std::string path = generate_out_dir + "/" + generator_id + "_" +
                                       std::to_string(i++) + ".py";
                    std::ofstream out(path, std::ios::binary);
                    out << p;
                    std::cout << "wrote " << path << "\n";
                }
            }
            return 0;
        }
        if (*bench_cmd) {
            if (db_root.empty()) {
                std::cerr << "error: bench needs --db or METADB_ROOT\n";
                return 1;
            }
            if (*bench_build) {
                fs::path out_dir = bench_out.empty() ? fs::path(db_root) / "benchmark"
                                                     : fs::path(bench_out);
                return cmd_bench_build(db_root, out_dir, seed, bench_test, bench_val);
            }
            if (*bench_eval)
                return cmd_bench_eval(db_root, eval_tasks, eval_pred, eval_out, res, threads);
        }
    } catch (const Error& e) {
        std::cerr << e.diagnostic() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
