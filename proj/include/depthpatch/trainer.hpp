#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "depthpatch/adam.hpp"
#include "depthpatch/depth_model.hpp"
#include "depthpatch/losses.hpp"
#include "depthpatch/scene.hpp"
#include "depthpatch/transform.hpp"

namespace depthpatch {

struct AttackConfig {
    int epochs = 400;
    double learning_rate = 0.01;
    double patch_scale = 0.2;
    int patch_side = 100;
    int batch_size = 4;
    std::uint64_t seed = 0;
    LossConfig loss;
    TransformRanges transforms;
    DetectorConfig detector;
    PatchScaleMode scale_mode = PatchScaleMode::side;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int checkpoint_interval = 0;  // epochs between snapshots; 0 = final only
    std::uint64_t config_hash = 0;

    void validate() const;
};

struct TrainingLog {
    struct Entry {
        int epoch = 0;
        double mean_total = 0.0;
        double mean_depth = 0.0;
        double mean_tv = 0.0;
        double wall_seconds = 0.0;
    };
    std::vector<Entry> entries;
    std::map<int, std::string> checkpoints;  // epoch -> snapshot path

    std::string to_json_string() const;
};

// Checkpoint payload; resuming from it and continuing is bit-identical to an
// uninterrupted run, so the optimizer moments and exact float64 patch pixels
// travel in the JSON sidecar (the PNG next to it is just a preview).
struct TrainerState {
    Patch patch;
    Adam adam;
    int next_epoch = 0;
    std::uint64_t config_hash = 0;
};

void save_checkpoint(const TrainerState& state, const std::string& json_path);
TrainerState resume(const std::string& json_path);

struct TrainResult {
    Patch patch;
    TrainingLog log;
};

// One scene's contribution to dL/dP: composite the transformed patch on each
// detection, run the model, backpropagate the penalized depth loss. Each
// detection's depth term enters with `detection_weight` (the trainer passes
// alpha / detections-in-batch). The TV term is not included here; it is
// patch-local and added once per batch.
struct PatchGradient {
    Tensor g_patch;
    std::vector<DepthLossTerms> terms;
};
PatchGradient patch_gradient_for_scene(const Image& image, const Patch& patch,
                                       const std::vector<Detection>& detections,
                                       const std::vector<PlacementRect>& placements,
                                       const std::vector<TransformParams>& params,
                                       const DisparityMap& target, const DepthModel& model,
                                       const LossConfig& loss, double detection_weight);

// Called after every optimizer step with the freshly clamped patch.
using StepObserver = std::function<void(int epoch, int step, const Patch&)>;

// Iterative gradient optimization of the patch over the training split:
// per scene, composite the transformed patch on every filtered detection,
// run the frozen model, compute the penalized depth loss plus TV, take an
// Adam step averaged over the mini-batch, clamp to [0,1]. Deterministic in
// cfg.seed. Scenes without usable detections are skipped with a warning;
// if none remain this throws DataError("no trainable detections").
TrainResult train_patch(const DatasetSplit& data, const DepthModel& model,
                        const AttackConfig& cfg, const std::string& checkpoint_dir = "",
                        const TrainerState* start = nullptr,
                        const StepObserver& observer = nullptr);

}  // namespace depthpatch
