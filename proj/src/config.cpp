#include "depthpatch/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "depthpatch/errors.hpp"
#include "depthpatch/rng.hpp"

using json = nlohmann::json;

namespace depthpatch {

namespace {

// Field-by-field extraction so bad values name the offending key.
template <typename T>
void get_field(const json& j, const char* key, T& out, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config field '" + section + key + "' has the wrong type");
    }
}

void check_known_keys(const json& j, std::initializer_list<const char*> known,
                      const std::string& section) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("unknown config field '" + section + key + "'");
    }
}

void parse_loss(const json& j, LossConfig& loss) {
    check_known_keys(j,
                     {"alpha", "beta", "use_d1", "use_d2", "use_tv", "square_mode",
                      "target_depth"},
                     "loss.");
    get_field(j, "alpha", loss.alpha, "loss.");
    get_field(j, "beta", loss.beta, "loss.");
    get_field(j, "use_d1", loss.use_d1, "loss.");
    get_field(j, "use_d2", loss.use_d2, "loss.");
    get_field(j, "use_tv", loss.use_tv, "loss.");
    if (j.contains("square_mode")) {
        const std::string mode = j.at("square_mode").get<std::string>();
        if (mode == "scalar_then_square")
            loss.square_mode = LossConfig::SquareMode::scalar_then_square;
        else if (mode == "per_pixel_square")
            loss.square_mode = LossConfig::SquareMode::per_pixel_square;
        else
            throw ConfigError(
                "config field 'loss.square_mode' must be scalar_then_square or "
                "per_pixel_square");
    }
    if (j.contains("target_depth")) {
        const json& t = j.at("target_depth");
        check_known_keys(t, {"mode", "constant_value", "scale_factor"}, "loss.target_depth.");
        if (t.contains("mode")) {
            const std::string mode = t.at("mode").get<std::string>();
            if (mode == "constant")
                loss.target_depth.mode = TargetDepthSpec::Mode::constant;
            else if (mode == "scaled_baseline")
                loss.target_depth.mode = TargetDepthSpec::Mode::scaled_baseline;
            else
                throw ConfigError(
                    "config field 'loss.target_depth.mode' must be constant or "
                    "scaled_baseline");
        }
        get_field(t, "constant_value", loss.target_depth.constant_value, "loss.target_depth.");
        get_field(t, "scale_factor", loss.target_depth.scale_factor, "loss.target_depth.");
    }
}

void parse_transforms(const json& j, TransformRanges& tr) {
    check_known_keys(j,
                     {"rotation_deg", "scale_jitter", "noise_amplitude", "contrast_min",
                      "contrast_max", "brightness", "occlusion_enabled",
                      "occlusion_area_frac", "contrast_mean_anchored"},
                     "transforms.");
    get_field(j, "rotation_deg", tr.rotation_deg, "transforms.");
    get_field(j, "scale_jitter", tr.scale_jitter, "transforms.");
    get_field(j, "noise_amplitude", tr.noise_amplitude, "transforms.");
    get_field(j, "contrast_min", tr.contrast_min, "transforms.");
    get_field(j, "contrast_max", tr.contrast_max, "transforms.");
    get_field(j, "brightness", tr.brightness, "transforms.");
    get_field(j, "occlusion_enabled", tr.occlusion_enabled, "transforms.");
    get_field(j, "occlusion_area_frac", tr.occlusion_area_frac, "transforms.");
    get_field(j, "contrast_mean_anchored", tr.contrast_mean_anchored, "transforms.");
}

void parse_detector(const json& j, DetectorConfig& det) {
    check_known_keys(j,
                     {"objectness_threshold", "nms_iou_threshold", "max_detections",
                      "target_classes", "oracle_backend"},
                     "detector.");
    get_field(j, "objectness_threshold", det.objectness_threshold, "detector.");
    get_field(j, "nms_iou_threshold", det.nms_iou_threshold, "detector.");
    get_field(j, "max_detections", det.max_detections, "detector.");
    get_field(j, "oracle_backend", det.oracle_backend, "detector.");
    if (j.contains("target_classes")) {
        det.target_classes.clear();
        for (int c : j.at("target_classes").get<std::vector<int>>())
            det.target_classes.insert(c);
    }
}

void parse_attack(const json& j, AttackConfig& atk) {
    check_known_keys(j,
                     {"epochs", "learning_rate", "patch_scale", "patch_side", "batch_size",
                      "scale_mode", "adam_beta1", "adam_beta2", "adam_eps",
                      "checkpoint_interval", "loss", "transforms", "detector"},
                     "attack.");
    get_field(j, "epochs", atk.epochs, "attack.");
    get_field(j, "learning_rate", atk.learning_rate, "attack.");
    get_field(j, "patch_scale", atk.patch_scale, "attack.");
    get_field(j, "patch_side", atk.patch_side, "attack.");
    get_field(j, "batch_size", atk.batch_size, "attack.");
    get_field(j, "adam_beta1", atk.adam_beta1, "attack.");
    get_field(j, "adam_beta2", atk.adam_beta2, "attack.");
    get_field(j, "adam_eps", atk.adam_eps, "attack.");
    get_field(j, "checkpoint_interval", atk.checkpoint_interval, "attack.");
    if (j.contains("scale_mode")) {
        const std::string mode = j.at("scale_mode").get<std::string>();
        if (mode == "side")
            atk.scale_mode = PatchScaleMode::side;
        else if (mode == "area")
            atk.scale_mode = PatchScaleMode::area;
        else
            throw ConfigError("config field 'attack.scale_mode' must be side or area");
    }
    if (j.contains("loss")) parse_loss(j.at("loss"), atk.loss);
    if (j.contains("transforms")) parse_transforms(j.at("transforms"), atk.transforms);
    if (j.contains("detector")) parse_detector(j.at("detector"), atk.detector);
}

}  // namespace

void RunConfig::validate() const {
    attack.validate();
    if (dataset.n_scenes < 1) throw ConfigError("dataset.n_scenes must be >= 1");
    if (dataset.train_fraction < 0.0 || dataset.train_fraction > 1.0)
        throw ConfigError("dataset.train_fraction must be in [0,1]");
    if (model.kind != "toy" && model.kind != "analytic")
        throw ConfigError("model.kind must be toy or analytic");
    if (model.pretrain_epochs < 0) throw ConfigError("model.pretrain_epochs must be >= 0");
    for (int q : jpeg_qualities)
        if (q < 1 || q > 100) throw ConfigError("jpeg_qualities entries must be in [1,100]");
    for (int k : median_kernels)
        if (k < 1) throw ConfigError("median_kernels entries must be >= 1");
    for (double s : noise_sigmas)
        if (s < 0.0) throw ConfigError("noise_sigmas entries must be >= 0");
    for (double s : sweep_scales)
        if (s <= 0.0 || s > 1.0) throw ConfigError("sweep_scales entries must be in (0,1]");
}

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    check_known_keys(j,
                     {"seed", "output_dir", "dataset", "model", "attack", "jpeg_qualities",
                      "median_kernels", "noise_sigmas", "sweep_scales"},
                     "");
    RunConfig cfg;
    get_field(j, "seed", cfg.seed, "");
    get_field(j, "output_dir", cfg.output_dir, "");
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        check_known_keys(d,
                         {"root", "train_fraction", "n_scenes", "width", "height",
                          "min_objects", "max_objects", "min_object_size",
                          "max_object_size"},
                         "dataset.");
        get_field(d, "root", cfg.dataset.root, "dataset.");
        get_field(d, "train_fraction", cfg.dataset.train_fraction, "dataset.");
        get_field(d, "n_scenes", cfg.dataset.n_scenes, "dataset.");
        get_field(d, "width", cfg.dataset.scene_spec.width, "dataset.");
        get_field(d, "height", cfg.dataset.scene_spec.height, "dataset.");
        get_field(d, "min_objects", cfg.dataset.scene_spec.min_objects, "dataset.");
        get_field(d, "max_objects", cfg.dataset.scene_spec.max_objects, "dataset.");
        get_field(d, "min_object_size", cfg.dataset.scene_spec.min_object_size, "dataset.");
        get_field(d, "max_object_size", cfg.dataset.scene_spec.max_object_size, "dataset.");
        cfg.dataset.scene_spec.train_fraction = cfg.dataset.train_fraction;
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        check_known_keys(m,
                         {"kind", "path", "channels", "learning_rate", "batch_size",
                          "pretrain_epochs", "augment", "augment_pixel_noise",
                          "augment_max_squares"},
                         "model.");
        get_field(m, "kind", cfg.model.kind, "model.");
        get_field(m, "path", cfg.model.path, "model.");
        get_field(m, "pretrain_epochs", cfg.model.pretrain_epochs, "model.");
        get_field(m, "learning_rate", cfg.model.toy.learning_rate, "model.");
        get_field(m, "batch_size", cfg.model.toy.batch_size, "model.");
        get_field(m, "augment", cfg.model.toy.augment, "model.");
        get_field(m, "augment_pixel_noise", cfg.model.toy.augment_pixel_noise, "model.");
        get_field(m, "augment_max_squares", cfg.model.toy.augment_max_squares, "model.");
        if (m.contains("channels")) {
            const auto ch = m.at("channels").get<std::vector<int>>();
            if (ch.size() != cfg.model.toy.channels.size())
                throw ConfigError("config field 'model.channels' must have 5 entries");
            std::copy(ch.begin(), ch.end(), cfg.model.toy.channels.begin());
        }
    }
    if (j.contains("attack")) parse_attack(j.at("attack"), cfg.attack);
    get_field(j, "jpeg_qualities", cfg.jpeg_qualities, "");
    get_field(j, "median_kernels", cfg.median_kernels, "");
    get_field(j, "noise_sigmas", cfg.noise_sigmas, "");
    get_field(j, "sweep_scales", cfg.sweep_scales, "");

    cfg.attack.seed = cfg.seed;
    cfg.validate();
    cfg.attack.config_hash = config_hash(cfg);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream buffer;
    buffer << f.rdbuf();
    return parse_run_config(buffer.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    j["dataset"] = {{"root", cfg.dataset.root},
                    {"train_fraction", cfg.dataset.train_fraction},
                    {"n_scenes", cfg.dataset.n_scenes},
                    {"width", cfg.dataset.scene_spec.width},
                    {"height", cfg.dataset.scene_spec.height},
                    {"min_objects", cfg.dataset.scene_spec.min_objects},
                    {"max_objects", cfg.dataset.scene_spec.max_objects},
                    {"min_object_size", cfg.dataset.scene_spec.min_object_size},
                    {"max_object_size", cfg.dataset.scene_spec.max_object_size}};
    j["model"] = {{"kind", cfg.model.kind},
                  {"path", cfg.model.path},
                  {"channels", cfg.model.toy.channels},
                  {"learning_rate", cfg.model.toy.learning_rate},
                  {"batch_size", cfg.model.toy.batch_size},
                  {"augment", cfg.model.toy.augment},
                  {"augment_pixel_noise", cfg.model.toy.augment_pixel_noise},
                  {"augment_max_squares", cfg.model.toy.augment_max_squares},
                  {"pretrain_epochs", cfg.model.pretrain_epochs}};
    const AttackConfig& a = cfg.attack;
    j["attack"] = {
        {"epochs", a.epochs},
        {"learning_rate", a.learning_rate},
        {"patch_scale", a.patch_scale},
        {"patch_side", a.patch_side},
        {"batch_size", a.batch_size},
        {"scale_mode", a.scale_mode == PatchScaleMode::side ? "side" : "area"},
        {"adam_beta1", a.adam_beta1},
        {"adam_beta2", a.adam_beta2},
        {"adam_eps", a.adam_eps},
        {"checkpoint_interval", a.checkpoint_interval},
        {"loss",
         {{"alpha", a.loss.alpha},
          {"beta", a.loss.beta},
          {"use_d1", a.loss.use_d1},
          {"use_d2", a.loss.use_d2},
          {"use_tv", a.loss.use_tv},
          {"square_mode",
           a.loss.square_mode == LossConfig::SquareMode::scalar_then_square
               ? "scalar_then_square"
               : "per_pixel_square"},
          {"target_depth",
           {{"mode",
             a.loss.target_depth.mode == TargetDepthSpec::Mode::constant
                 ? "constant"
                 : "scaled_baseline"},
            {"constant_value", a.loss.target_depth.constant_value},
            {"scale_factor", a.loss.target_depth.scale_factor}}}}},
        {"transforms",
         {{"rotation_deg", a.transforms.rotation_deg},
          {"scale_jitter", a.transforms.scale_jitter},
          {"noise_amplitude", a.transforms.noise_amplitude},
          {"contrast_min", a.transforms.contrast_min},
          {"contrast_max", a.transforms.contrast_max},
          {"brightness", a.transforms.brightness},
          {"occlusion_enabled", a.transforms.occlusion_enabled},
          {"occlusion_area_frac", a.transforms.occlusion_area_frac},
          {"contrast_mean_anchored", a.transforms.contrast_mean_anchored}}},
        {"detector",
         {{"objectness_threshold", a.detector.objectness_threshold},
          {"nms_iou_threshold", a.detector.nms_iou_threshold},
          {"max_detections", a.detector.max_detections},
          {"target_classes",
           std::vector<int>(a.detector.target_classes.begin(),
                            a.detector.target_classes.end())},
          {"oracle_backend", a.detector.oracle_backend}}}};
    j["jpeg_qualities"] = cfg.jpeg_qualities;
    j["median_kernels"] = cfg.median_kernels;
    j["noise_sigmas"] = cfg.noise_sigmas;
    j["sweep_scales"] = cfg.sweep_scales;
    return j.dump(2);
}

std::uint64_t config_hash(const RunConfig& cfg) {
    // nlohmann::json orders keys, so the dump is canonical.
    return hash_str(run_config_to_json(cfg));
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace depthpatch
