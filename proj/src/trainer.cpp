#include "depthpatch/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include <json.hpp>

#include "depthpatch/applier.hpp"
#include "depthpatch/base64.hpp"
#include "depthpatch/errors.hpp"
#include "depthpatch/image_io.hpp"
#include "depthpatch/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace depthpatch {

void AttackConfig::validate() const {
    if (epochs < 0) throw ConfigError("attack.epochs must be >= 0");
    if (learning_rate <= 0.0) throw ConfigError("attack.learning_rate must be > 0");
    if (patch_scale <= 0.0 || patch_scale > 1.0)
        throw ConfigError("attack.patch_scale must be in (0,1]");
    if (patch_side < 2) throw ConfigError("attack.patch_side must be >= 2");
    if (batch_size < 1) throw ConfigError("attack.batch_size must be >= 1");
    if (checkpoint_interval < 0) throw ConfigError("attack.checkpoint_interval must be >= 0");
    loss.validate();
    transforms.validate();
    detector.validate();
}

std::string TrainingLog::to_json_string() const {
    json j;
    j["entries"] = json::array();
    for (const auto& e : entries)
        j["entries"].push_back({{"epoch", e.epoch},
                                {"mean_total", e.mean_total},
                                {"mean_depth", e.mean_depth},
                                {"mean_tv", e.mean_tv},
                                {"wall_seconds", e.wall_seconds}});
    j["checkpoints"] = json::object();
    for (const auto& [epoch, path] : checkpoints)
        j["checkpoints"][std::to_string(epoch)] = path;
    return j.dump(2);
}

void save_checkpoint(const TrainerState& state, const std::string& json_path) {
    json j;
    j["format"] = "depthpatch-checkpoint";
    j["version"] = 1;
    j["epoch"] = state.next_epoch;
    j["config_hash"] = state.config_hash;
    j["patch"] = {{"side", state.patch.side},
                  {"pixels_b64", doubles_to_base64(state.patch.pixels.v)}};
    j["adam"] = {{"t", state.adam.t},
                 {"lr", state.adam.lr},
                 {"beta1", state.adam.beta1},
                 {"beta2", state.adam.beta2},
                 {"eps", state.adam.eps},
                 {"m_b64", doubles_to_base64(state.adam.m)},
                 {"v_b64", doubles_to_base64(state.adam.v)}};

    std::ofstream f(json_path);
    if (!f) throw DataError("save_checkpoint: cannot open " + json_path);
    f << j.dump() << "\n";

    // Human-viewable preview next to the sidecar.
    fs::path png = fs::path(json_path);
    png.replace_extension(".png");
    write_png(state.patch.pixels, png.string());
}

namespace {

TrainerState parse_checkpoint(const std::string& json_path) {
    std::ifstream f(json_path);
    if (!f) throw DataError("resume: cannot open checkpoint " + json_path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw DataError(std::string("resume: invalid checkpoint JSON: ") + e.what());
    }
    if (j.value("format", "") != "depthpatch-checkpoint" || j.value("version", 0) != 1)
        throw DataError("resume: unsupported checkpoint format");

    TrainerState state;
    state.next_epoch = j.at("epoch").get<int>();
    state.config_hash = j.value("config_hash", 0ULL);
    state.patch.side = j.at("patch").at("side").get<int>();
    state.patch.pixels = Tensor(3, state.patch.side, state.patch.side);
    state.patch.pixels.v = base64_to_doubles(j.at("patch").at("pixels_b64").get<std::string>());
    if (state.patch.pixels.v.size() !=
        static_cast<size_t>(3) * state.patch.side * state.patch.side)
        throw DataError("resume: patch payload size mismatch");

    const auto& a = j.at("adam");
    state.adam.t = a.at("t").get<long long>();
    state.adam.lr = a.at("lr").get<double>();
    state.adam.beta1 = a.at("beta1").get<double>();
    state.adam.beta2 = a.at("beta2").get<double>();
    state.adam.eps = a.at("eps").get<double>();
    state.adam.m = base64_to_doubles(a.at("m_b64").get<std::string>());
    state.adam.v = base64_to_doubles(a.at("v_b64").get<std::string>());
    if (state.adam.m.size() != state.patch.pixels.v.size() ||
        state.adam.v.size() != state.patch.pixels.v.size())
        throw DataError("resume: optimizer moment size mismatch");
    return state;
}

}  // namespace

TrainerState resume(const std::string& json_path) {
    try {
        return parse_checkpoint(json_path);
    } catch (const DataError& e) {
        // Point the caller at the newest snapshot that still parses.
        int best_epoch = -1;
        std::string best_path;
        const fs::path dir = fs::path(json_path).parent_path();
        if (fs::is_directory(dir)) {
            for (const auto& entry : fs::directory_iterator(dir)) {
                if (entry.path().extension() != ".json") continue;
                if (entry.path().string() == json_path) continue;
                try {
                    TrainerState s = parse_checkpoint(entry.path().string());
                    if (s.next_epoch > best_epoch) {
                        best_epoch = s.next_epoch;
                        best_path = entry.path().string();
                    }
                } catch (const DataError&) {
                }
            }
        }
        std::string msg = e.what();
        if (best_epoch >= 0)
            msg += "; last valid snapshot: epoch " + std::to_string(best_epoch) + " at " +
                   best_path;
        else
            msg += "; no valid snapshot found alongside it";
        throw DataError(msg);
    }
}

PatchGradient patch_gradient_for_scene(const Image& image, const Patch& patch,
                                       const std::vector<Detection>& detections,
                                       const std::vector<PlacementRect>& placements,
                                       const std::vector<TransformParams>& params,
                                       const DisparityMap& target, const DepthModel& model,
                                       const LossConfig& loss, double detection_weight) {
    const size_t n_det = detections.size();
    if (placements.size() != n_det || params.size() != n_det)
        throw DataError("patch_gradient_for_scene: per-detection input size mismatch");

    PatchGradient out;
    out.g_patch = Tensor(3, patch.side, patch.side);

    std::vector<Mask> footprints(n_det);
    Image adv = image;
    for (size_t k = 0; k < n_det; ++k) {
        WarpResult warp = transform_patch(patch, params[k], placements[k], image.h, image.w);
        adv = apply_patch(adv, warp.warped, warp.footprint);
        footprints[k] = std::move(warp.footprint);
    }

    const auto tape = model.forward_with_tape(adv);
    const DisparityMap& d_adv = tape->output();

    DisparityMap g_d_adv(image.h, image.w);
    out.terms.reserve(n_det);
    for (size_t k = 0; k < n_det; ++k) {
        MaskPair mp = build_masks(image.h, image.w, detections[k], placements[k],
                                  &footprints[k]);
        mp.detection_index = static_cast<int>(k);
        out.terms.push_back(
            depth_loss_with_grad(target, d_adv, mp, loss, detection_weight, &g_d_adv));
    }

    Image g_adv = tape->backward(g_d_adv);

    // Reverse the sequential compositing: detection k only keeps gradient
    // where no later footprint overwrote it.
    for (size_t kk = n_det; kk-- > 0;) {
        Image g_warped(3, image.h, image.w);
        for (int y = 0; y < image.h; ++y)
            for (int x = 0; x < image.w; ++x) {
                if (!footprints[kk].at(y, x)) continue;
                for (int ch = 0; ch < 3; ++ch) {
                    g_warped.at(ch, y, x) = g_adv.at(ch, y, x);
                    g_adv.at(ch, y, x) = 0.0;
                }
            }
        transform_patch_vjp(patch, params[kk], placements[kk], g_warped, out.g_patch);
    }
    return out;
}

namespace {

struct TrainItem {
    const SceneSample* sample = nullptr;
    std::vector<Detection> detections;
    std::vector<PlacementRect> placements;
    DisparityMap baseline;
    DisparityMap target;
    std::uint64_t id_hash = 0;
};

PatchGradient scene_gradient(const TrainItem& item, const Patch& patch,
                             const DepthModel& model, const AttackConfig& cfg, int epoch,
                             double detection_weight) {
    const size_t n_det = item.detections.size();
    std::vector<TransformParams> params(n_det);
    for (size_t k = 0; k < n_det; ++k) {
        const std::uint64_t tseed =
            hash_combine(cfg.seed, hash_str("transform"), static_cast<std::uint64_t>(epoch),
                         item.id_hash, static_cast<std::uint64_t>(k));
        params[k] = sample_params(tseed, cfg.transforms, patch.side);
    }
    return patch_gradient_for_scene(item.sample->image, patch, item.detections,
                                    item.placements, params, item.target, model, cfg.loss,
                                    detection_weight);
}

}  // namespace

TrainResult train_patch(const DatasetSplit& data, const DepthModel& model,
                        const AttackConfig& cfg, const std::string& checkpoint_dir,
                        const TrainerState* start, const StepObserver& observer) {
    cfg.validate();
    if (data.train.empty()) throw DataError("train_patch: empty training split");

    // Baselines are cached: the model is frozen and the clean image constant.
    std::vector<TrainItem> items;
    for (const auto& sample : data.train) {
        TrainItem item;
        item.sample = &sample;
        item.detections = detect(sample, cfg.detector);
        bool usable = !item.detections.empty();
        if (usable) {
            try {
                for (const auto& det : item.detections)
                    item.placements.push_back(place_patch_geometry(
                        det, cfg.patch_scale, sample.image.h, sample.image.w, cfg.scale_mode));
            } catch (const DataError&) {
                usable = false;
            }
        }
        if (!usable) {
            std::cerr << "warning: scene " << sample.id
                      << " has no trainable detections; skipped\n";
            continue;
        }
        item.baseline = model.predict(sample.image);
        item.target = make_target_depth(cfg.loss.target_depth, item.baseline);
        item.id_hash = hash_str(sample.id);
        items.push_back(std::move(item));
    }
    if (items.empty()) throw DataError("no trainable detections");

    TrainerState state;
    if (start) {
        state = *start;
        if (state.patch.side != cfg.patch_side)
            throw ConfigError("resume: checkpoint patch side differs from config");
        if (state.config_hash != 0 && cfg.config_hash != 0 &&
            state.config_hash != cfg.config_hash)
            throw ConfigError("resume: checkpoint config hash differs from config");
    } else {
        state.patch = random_patch(cfg.patch_side, cfg.seed);
        state.adam = Adam(cfg.learning_rate);
        state.adam.beta1 = cfg.adam_beta1;
        state.adam.beta2 = cfg.adam_beta2;
        state.adam.eps = cfg.adam_eps;
        state.adam.init(state.patch.pixels.size());
        state.next_epoch = 0;
        state.config_hash = cfg.config_hash;
    }

    TrainResult result;
    result.log.checkpoints = {};

    auto write_snapshot = [&](int next_epoch) {
        if (checkpoint_dir.empty()) return;
        fs::create_directories(checkpoint_dir);
        char name[64];
        std::snprintf(name, sizeof(name), "ckpt_epoch%05d.json", next_epoch);
        const std::string path = (fs::path(checkpoint_dir) / name).string();
        TrainerState snap = state;
        snap.next_epoch = next_epoch;
        save_checkpoint(snap, path);
        result.log.checkpoints[next_epoch] = path;
    };

    if (!start) write_snapshot(0);

    std::vector<size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = state.next_epoch; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();

        // The order is a pure function of (seed, epoch) so resumed runs see
        // exactly the sequence an uninterrupted run would.
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(
            hash_combine(cfg.seed, hash_str("order"), static_cast<std::uint64_t>(epoch)));
        for (size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.uniform_int(0, static_cast<int>(i))]);

        double sum_total = 0.0, sum_depth = 0.0, sum_tv = 0.0;
        int n_batches = 0;
        size_t done = 0;
        int step = 0;
        while (done < order.size()) {
            const size_t bsz = std::min<size_t>(cfg.batch_size, order.size() - done);
            size_t batch_detections = 0;
            for (size_t bi = 0; bi < bsz; ++bi)
                batch_detections += items[order[done + bi]].detections.size();
            const double detection_weight =
                cfg.loss.alpha / static_cast<double>(batch_detections);

            std::vector<PatchGradient> outputs(bsz);
            std::exception_ptr batch_error;
#pragma omp parallel for schedule(static)
            for (size_t bi = 0; bi < bsz; ++bi) {
                try {
                    outputs[bi] = scene_gradient(items[order[done + bi]], state.patch, model,
                                                 cfg, epoch, detection_weight);
                } catch (...) {
#pragma omp critical
                    batch_error = std::current_exception();
                }
            }
            if (batch_error) std::rethrow_exception(batch_error);

            // Fixed-order reduction keeps runs bit-identical.
            Tensor g_total(3, cfg.patch_side, cfg.patch_side);
            std::vector<double> depth_terms;
            for (size_t bi = 0; bi < bsz; ++bi) {
                for (size_t i = 0; i < g_total.v.size(); ++i)
                    g_total.v[i] += outputs[bi].g_patch.v[i];
                for (const auto& t : outputs[bi].terms) depth_terms.push_back(t.depth);
            }
            const double tv = cfg.loss.use_tv ? loss_tv(state.patch) : 0.0;
            if (cfg.loss.use_tv) loss_tv_grad(state.patch, cfg.loss.beta, g_total);

            const double total = loss_total(depth_terms, state.patch, cfg.loss);
            if (!std::isfinite(total))
                throw NumericError("train_patch: non-finite loss at epoch " +
                                   std::to_string(epoch));
            double mean_depth = 0.0;
            for (double d : depth_terms) mean_depth += d;
            mean_depth /= static_cast<double>(depth_terms.size());
            sum_total += total;
            sum_depth += mean_depth;
            sum_tv += tv;
            ++n_batches;

            state.adam.step(state.patch.pixels.v, g_total.v);
            state.patch.pixels.clamp01();
            if (observer) observer(epoch, step, state.patch);
            ++step;
            done += bsz;
        }

        const auto t1 = std::chrono::steady_clock::now();
        TrainingLog::Entry entry;
        entry.epoch = epoch;
        entry.mean_total = sum_total / n_batches;
        entry.mean_depth = sum_depth / n_batches;
        entry.mean_tv = sum_tv / n_batches;
        entry.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
        result.log.entries.push_back(entry);

        const int next_epoch = epoch + 1;
        if (cfg.checkpoint_interval > 0 && next_epoch % cfg.checkpoint_interval == 0 &&
            next_epoch != cfg.epochs)
            write_snapshot(next_epoch);
    }

    write_snapshot(cfg.epochs);
    result.patch = state.patch;
    return result;
}

}  // namespace depthpatch
