#include "depthpatch/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "depthpatch/config.hpp"
#include "depthpatch/defense.hpp"
#include "depthpatch/errors.hpp"
#include "depthpatch/image_io.hpp"
#include "depthpatch/metrics.hpp"
#include "depthpatch/report.hpp"
#include "depthpatch/rng.hpp"
#include "depthpatch/toy_model.hpp"
#include "depthpatch/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace depthpatch {

namespace {

fs::path resolve_output_dir(const RunConfig& cfg) {
    fs::path out(cfg.output_dir);
    const char* root = std::getenv("DEPTHPATCH_ARTIFACT_ROOT");
    if (root && *root && out.is_relative()) out = fs::path(root) / out;
    fs::create_directories(out);
    return out;
}

void write_manifest(const RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& artifacts, const fs::path& out_dir) {
    json j;
    j["command"] = command;
    j["config_hash"] = hash_hex(config_hash(cfg));
    j["seed"] = cfg.seed;
    j["artifacts"] = artifacts;
    j["config"] = json::parse(run_config_to_json(cfg));
    std::ofstream f(out_dir / "manifest.json");
    f << j.dump(2) << "\n";
}

DatasetSplit obtain_dataset(const RunConfig& cfg) {
    if (!cfg.dataset.root.empty()) {
        SplitSpec spec;
        spec.train_fraction = cfg.dataset.train_fraction;
        const fs::path manifest = fs::path(cfg.dataset.root) / "manifest.json";
        if (fs::exists(manifest)) {
            std::ifstream f(manifest);
            json j;
            f >> j;
            spec.train_ids = j.value("train", std::vector<std::string>{});
            spec.test_ids = j.value("test", std::vector<std::string>{});
        }
        return load_dataset(cfg.dataset.root, spec);
    }
    SceneSpec spec = cfg.dataset.scene_spec;
    spec.train_fraction = cfg.dataset.train_fraction;
    return generate_synthetic_scenes(cfg.dataset.n_scenes, cfg.seed, spec);
}

std::unique_ptr<DepthModel> obtain_model(const RunConfig& cfg, const DatasetSplit& data,
                                         const fs::path& out_dir,
                                         std::vector<std::string>* artifacts) {
    if (cfg.model.kind == "analytic") return std::make_unique<AnalyticDepthModel>();
    if (!cfg.model.path.empty())
        return std::make_unique<ToyDepthModel>(ToyDepthModel::load(cfg.model.path));

    auto model = std::make_unique<ToyDepthModel>(cfg.model.toy, cfg.seed);
    std::cerr << "pretraining toy depth model (" << cfg.model.pretrain_epochs
              << " epochs)...\n";
    const auto report = model->pretrain(data, cfg.model.pretrain_epochs, cfg.seed);
    std::cerr << "pretrain done; held-out MAE " << report.held_out_mae << "\n";
    const std::string path = (out_dir / "toy_model.bin").string();
    model->save(path);
    if (artifacts) artifacts->push_back(path);
    return model;
}

Patch do_load_patch(const std::string& path) {
    if (!fs::exists(path)) throw DataError("patch file not found: " + path);
    if (fs::path(path).extension() == ".json") {
        const TrainerState state = resume(path);
        return state.patch;
    }
    const Image img = read_png(path);
    if (img.h != img.w) throw DataError("patch PNG must be square: " + path);
    Patch p(img.h);
    p.pixels = img;
    return p;
}

void emit_table(const std::vector<std::string>& headers,
                const std::vector<std::vector<std::string>>& rows, const json& rows_json,
                const fs::path& json_path) {
    std::cout << render_table(headers, rows);
    json j;
    j["rows"] = rows_json;
    std::ofstream f(json_path);
    f << j.dump(2) << "\n";
    std::cout << "wrote " << json_path.string() << "\n";
}

EvalOptions eval_options(const RunConfig& cfg) {
    EvalOptions opts;
    opts.patch_scale = cfg.attack.patch_scale;
    opts.scale_mode = cfg.attack.scale_mode;
    opts.detector = cfg.attack.detector;
    return opts;
}

int cmd_gen_scenes(const RunConfig& cfg, const std::string& out_override) {
    RunConfig local = cfg;
    if (!out_override.empty()) local.dataset.root = out_override;
    if (local.dataset.root.empty())
        local.dataset.root = (resolve_output_dir(local) / "scenes").string();

    SceneSpec spec = local.dataset.scene_spec;
    spec.train_fraction = local.dataset.train_fraction;
    const DatasetSplit split =
        generate_synthetic_scenes(local.dataset.n_scenes, local.seed, spec);
    save_dataset(split, local.dataset.root);
    std::cout << "wrote " << split.train.size() << " train / " << split.test.size()
              << " test scenes to " << local.dataset.root << "\n";
    write_manifest(local, "gen-scenes", {local.dataset.root}, resolve_output_dir(local));
    return 0;
}

int cmd_pretrain(const RunConfig& cfg, const std::string& out_override) {
    const fs::path out_dir = resolve_output_dir(cfg);
    const DatasetSplit data = obtain_dataset(cfg);

    ToyDepthModel model(cfg.model.toy, cfg.seed);
    const auto report = model.pretrain(data, cfg.model.pretrain_epochs, cfg.seed);
    const std::string path =
        out_override.empty() ? (out_dir / "toy_model.bin").string() : out_override;
    model.save(path);

    std::cout << "held-out MAE " << format_double(report.held_out_mae) << " after "
              << report.epochs << " epochs\n";
    std::cout << "wrote " << path << "\n";
    write_manifest(cfg, "pretrain-model", {path}, out_dir);
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& resume_path) {
    const fs::path out_dir = resolve_output_dir(cfg);
    const DatasetSplit data = obtain_dataset(cfg);
    std::vector<std::string> artifacts;
    const auto model = obtain_model(cfg, data, out_dir, &artifacts);

    const std::string ckpt_dir = (out_dir / "checkpoints").string();
    TrainerState start_state;
    const TrainerState* start = nullptr;
    if (!resume_path.empty()) {
        start_state = resume(resume_path);
        start = &start_state;
    }

    const TrainResult result = train_patch(data, *model, cfg.attack, ckpt_dir, start);

    const std::string patch_png = (out_dir / "patch.png").string();
    write_png(result.patch.pixels, patch_png);
    const std::string log_path = (out_dir / "training_log.json").string();
    std::ofstream(log_path) << result.log.to_json_string() << "\n";

    artifacts.insert(artifacts.begin(), {patch_png, ckpt_dir, log_path});
    write_manifest(cfg, "train", artifacts, out_dir);
    std::cout << "trained patch over " << cfg.attack.epochs << " epochs; artifacts in "
              << out_dir.string() << "\n";
    if (!result.log.entries.empty())
        std::cout << "final mean loss " << format_double(result.log.entries.back().mean_total)
                  << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& patch_path,
             const std::string& reference) {
    const fs::path out_dir = resolve_output_dir(cfg);
    const DatasetSplit data = obtain_dataset(cfg);
    const auto model = obtain_model(cfg, data, out_dir, nullptr);
    const Patch patch = do_load_patch(patch_path);

    const MetricsReport report = evaluate_patch(*model, data.test, patch, eval_options(cfg));
    std::cout << report.to_text_table();

    const std::string report_path = (out_dir / "eval_report.json").string();
    std::ofstream(report_path) << report.to_json_string() << "\n";
    std::cout << "wrote " << report_path << "\n";

    if (!reference.empty()) {
        const auto& targets = reference_targets();
        const auto it = targets.find(reference);
        if (it == targets.end()) throw ConfigError("unknown reference model: " + reference);
        std::cout << render_table(
            {"model", "MSE(ref)", "E_d(ref)", "R_a(ref)", "MSE", "E_d", "R_a"},
            {{reference, format_double(it->second.mse, 2), format_double(it->second.e_d, 2),
              format_double(it->second.r_a, 2), format_double(report.mse),
              format_double(report.e_d), format_double(report.r_a)}});
    }
    write_manifest(cfg, "eval", {report_path}, out_dir);
    return 0;
}

int cmd_ablate(const RunConfig& cfg) {
    const fs::path out_dir = resolve_output_dir(cfg);
    const DatasetSplit data = obtain_dataset(cfg);
    const auto model = obtain_model(cfg, data, out_dir, nullptr);

    struct Combo {
        const char* name;
        bool d1, d2;
    };
    const Combo combos[] = {{"d2+tv", false, true}, {"d1+tv", true, false},
                            {"d1+d2+tv", true, true}};

    std::vector<std::vector<std::string>> rows;
    json rows_json = json::array();
    for (const Combo& combo : combos) {
        RunConfig local = cfg;
        local.attack.loss.use_d1 = combo.d1;
        local.attack.loss.use_d2 = combo.d2;
        local.attack.loss.use_tv = true;
        const TrainResult result = train_patch(data, *model, local.attack);
        const MetricsReport report =
            evaluate_patch(*model, data.test, result.patch, eval_options(local));
        rows.push_back({combo.name, format_double(report.e_d), format_double(report.r_a)});
        rows_json.push_back(
            {{"losses", combo.name}, {"e_d", report.e_d}, {"r_a", report.r_a}});
        std::cout << "combo " << combo.name << " done\n";
    }
    emit_table({"losses", "E_d", "R_a"}, rows, rows_json, out_dir / "ablation.json");
    write_manifest(cfg, "ablate", {(out_dir / "ablation.json").string()}, out_dir);
    return 0;
}

int cmd_sweep_scale(const RunConfig& cfg) {
    const fs::path out_dir = resolve_output_dir(cfg);
    const DatasetSplit data = obtain_dataset(cfg);
    const auto model = obtain_model(cfg, data, out_dir, nullptr);

    std::vector<std::vector<std::string>> rows;
    json rows_json = json::array();
    for (double scale : cfg.sweep_scales) {
        RunConfig local = cfg;
        local.attack.patch_scale = scale;
        const TrainResult result = train_patch(data, *model, local.attack);
        const MetricsReport report =
            evaluate_patch(*model, data.test, result.patch, eval_options(local));
        rows.push_back(
            {format_double(scale, 2), format_double(report.e_d), format_double(report.r_a)});
        rows_json.push_back({{"scale", scale}, {"e_d", report.e_d}, {"r_a", report.r_a}});
        std::cout << "scale " << scale << " done\n";
    }
    emit_table({"scale", "E_d", "R_a"}, rows, rows_json, out_dir / "scale_sweep.json");
    write_manifest(cfg, "sweep-scale", {(out_dir / "scale_sweep.json").string()}, out_dir);
    return 0;
}

int cmd_defend(const RunConfig& cfg, const std::string& patch_path,
               const std::string& single_defense) {
    const fs::path out_dir = resolve_output_dir(cfg);
    const DatasetSplit data = obtain_dataset(cfg);
    const auto model = obtain_model(cfg, data, out_dir, nullptr);
    const Patch patch = do_load_patch(patch_path);

    std::vector<DefenseSpec> specs;
    if (!single_defense.empty()) {
        specs.push_back(DefenseSpec::parse(single_defense));
    } else {
        for (int q : cfg.jpeg_qualities)
            specs.push_back({DefenseSpec::Kind::jpeg, static_cast<double>(q), cfg.seed});
        for (int k : cfg.median_kernels)
            specs.push_back({DefenseSpec::Kind::median_blur, static_cast<double>(k), cfg.seed});
        for (double s : cfg.noise_sigmas)
            specs.push_back({DefenseSpec::Kind::gaussian_noise, s, cfg.seed});
    }

    std::vector<std::vector<std::string>> rows;
    json rows_json = json::array();
    for (const DefenseSpec& spec : specs) {
        const DefendedMetrics m =
            evaluate_defended(*model, data.test, patch, spec, eval_options(cfg));
        rows.push_back({spec.name(), format_double(spec.parameter, 3),
                        format_double(m.e_d), format_double(m.e_d_benign)});
        rows_json.push_back({{"kind", spec.name()},
                             {"parameter", spec.parameter},
                             {"e_d", m.e_d},
                             {"e_d_benign", m.e_d_benign}});
    }
    emit_table({"defense", "param", "E_d", "E_dB"}, rows, rows_json,
               out_dir / "defense.json");
    write_manifest(cfg, "defend", {(out_dir / "defense.json").string()}, out_dir);
    return 0;
}

int cmd_render(const RunConfig& cfg, const std::string& patch_path,
               const std::string& scene_id, const std::string& out_override) {
    const fs::path out_dir =
        out_override.empty() ? resolve_output_dir(cfg) : fs::path(out_override);
    fs::create_directories(out_dir);
    const DatasetSplit data = obtain_dataset(cfg);
    const auto model = obtain_model(cfg, data, resolve_output_dir(cfg), nullptr);

    Patch patch;
    const bool have_patch = !patch_path.empty();
    if (have_patch) patch = do_load_patch(patch_path);

    std::vector<const SceneSample*> scenes;
    for (const auto& s : data.train)
        if (scene_id.empty() || s.id == scene_id) scenes.push_back(&s);
    for (const auto& s : data.test)
        if (scene_id.empty() || s.id == scene_id) scenes.push_back(&s);
    if (scenes.empty()) throw DataError("scene not found: " + scene_id);
    if (scene_id.empty() && scenes.size() > 4) scenes.resize(4);

    std::vector<std::string> artifacts;
    for (const SceneSample* scene : scenes) {
        const std::string path = (out_dir / (scene->id + "_panels.png")).string();
        render_triptych(*scene, have_patch ? &patch : nullptr, *model,
                        cfg.attack.patch_scale, cfg.attack.scale_mode,
                        cfg.attack.detector, path);
        artifacts.push_back(path);
        std::cout << "wrote " << path << "\n";
    }
    write_manifest(cfg, "render", artifacts, resolve_output_dir(cfg));
    return 0;
}

void apply_loss_terms_flag(RunConfig& cfg, const std::string& terms) {
    cfg.attack.loss.use_d1 = terms.find("d1") != std::string::npos;
    cfg.attack.loss.use_d2 = terms.find("d2") != std::string::npos;
    cfg.attack.loss.use_tv = terms.find("tv") != std::string::npos;
}

}  // namespace

Patch load_patch_file(const std::string& path) { return do_load_patch(path); }

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"adversarial patches against monocular depth estimation"};
    app.require_subcommand(1);

    std::string config_path, patch_path, defense, reference, scene_id, out_path,
        resume_path, loss_terms;
    int epochs = -1;
    double scale = -1.0;
    long long seed = -1;
    int n_scenes = -1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run configuration");
        cmd->add_option("--seed", seed, "override config seed");
    };

    CLI::App* gen = app.add_subcommand("gen-scenes", "generate synthetic scenes");
    add_common(gen);
    gen->add_option("--out", out_path, "dataset directory");
    gen->add_option("--n", n_scenes, "number of scenes");

    CLI::App* pre = app.add_subcommand("pretrain-model", "pretrain the toy depth model");
    add_common(pre);
    pre->add_option("--out", out_path, "model output path");
    pre->add_option("--epochs", epochs, "pretrain epochs");

    CLI::App* train = app.add_subcommand("train", "optimize an adversarial patch");
    add_common(train);
    train->add_option("--epochs", epochs, "override attack epochs");
    train->add_option("--scale", scale, "override patch scale");
    train->add_option("--loss-terms", loss_terms, "comma list from {d1,d2,tv}");
    train->add_option("--resume", resume_path, "checkpoint to resume from");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a patch on the test split");
    add_common(eval);
    eval->add_option("--patch", patch_path, "patch PNG or checkpoint JSON")->required();
    eval->add_option("--reference", reference, "compare against a published target");

    CLI::App* ablate = app.add_subcommand("ablate", "loss-term ablation");
    add_common(ablate);
    ablate->add_option("--epochs", epochs, "override attack epochs");

    CLI::App* sweep = app.add_subcommand("sweep-scale", "patch-scale sweep");
    add_common(sweep);
    sweep->add_option("--epochs", epochs, "override attack epochs");

    CLI::App* defend = app.add_subcommand("defend", "input-transformation defenses");
    add_common(defend);
    defend->add_option("--patch", patch_path, "patch PNG or checkpoint JSON")->required();
    defend->add_option("--defense", defense, "single kind:param instead of the sweep");

    CLI::App* render = app.add_subcommand("render", "write input/depth/adv-depth panels");
    add_common(render);
    render->add_option("--patch", patch_path, "patch PNG or checkpoint JSON");
    render->add_option("--scene", scene_id, "scene id (default: first few)");
    render->add_option("--out", out_path, "output directory");

    std::vector<std::string> argv_like = args;
    std::reverse(argv_like.begin(), argv_like.end());
    try {
        app.parse(argv_like);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (epochs >= 0) {
            cfg.attack.epochs = epochs;
            cfg.model.pretrain_epochs = pre->parsed() ? epochs : cfg.model.pretrain_epochs;
        }
        if (scale > 0.0) cfg.attack.patch_scale = scale;
        if (n_scenes > 0) cfg.dataset.n_scenes = n_scenes;
        if (!loss_terms.empty()) apply_loss_terms_flag(cfg, loss_terms);
        cfg.attack.seed = cfg.seed;
        cfg.validate();
        cfg.attack.config_hash = config_hash(cfg);

        if (gen->parsed()) return cmd_gen_scenes(cfg, out_path);
        if (pre->parsed()) return cmd_pretrain(cfg, out_path);
        if (train->parsed()) return cmd_train(cfg, resume_path);
        if (eval->parsed()) return cmd_eval(cfg, patch_path, reference);
        if (ablate->parsed()) return cmd_ablate(cfg);
        if (sweep->parsed()) return cmd_sweep_scale(cfg);
        if (defend->parsed()) return cmd_defend(cfg, patch_path, defense);
        if (render->parsed()) return cmd_render(cfg, patch_path, scene_id, out_path);
        throw ConfigError("no subcommand selected");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace depthpatch
