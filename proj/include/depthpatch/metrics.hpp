#pragma once

#include <string>
#include <vector>

#include "depthpatch/applier.hpp"
#include "depthpatch/depth_model.hpp"
#include "depthpatch/scene.hpp"
#include "depthpatch/transform.hpp"

namespace depthpatch {

// Mean |d - d_adv| over the focus mask. Throws DataError on an empty mask.
double compute_ed(const DisparityMap& d, const DisparityMap& d_adv, const Mask& m_f);

// Fraction of focus pixels whose absolute disparity change strictly exceeds
// the threshold (ties count as unaffected).
double compute_ra(const DisparityMap& d, const DisparityMap& d_adv, const Mask& m_f,
                  double threshold = 0.1);

// Full-image mean squared disparity change.
double compute_mse(const DisparityMap& d, const DisparityMap& d_adv);

struct SceneMetrics {
    std::string scene_id;
    double e_d = 0.0;
    double r_a = 0.0;
    double mse = 0.0;
    double e_d_ring = 0.0;  // focus minus patch pixels, reported for analysis
    int n_detections = 0;
};

struct MetricsReport {
    double e_d = 0.0;
    double r_a = 0.0;
    double mse = 0.0;
    double e_d_ring = 0.0;
    int n_scenes = 0;
    std::vector<SceneMetrics> per_scene;

    std::string to_json_string() const;
    std::string to_text_table() const;
};

struct EvalOptions {
    double patch_scale = 0.2;
    PatchScaleMode scale_mode = PatchScaleMode::side;
    DetectorConfig detector;
    // Evaluation composites the patch deterministically (identity transform);
    // the EOT jitter is a training-time device.
};

// Filtered detections that can actually carry a patch at the configured
// scale; objects too small for a 2-pixel placement are dropped.
std::vector<Detection> placeable_detections(const SceneSample& scene,
                                            const EvalOptions& opts);

// Clean-vs-adversarial comparison per scene: predictions on the clean image
// are the reference; metrics are averaged per detection, then per scene,
// then unweighted over scenes. Scenes without placeable detections are
// skipped.
MetricsReport evaluate_patch(const DepthModel& model,
                             const std::vector<SceneSample>& scenes, const Patch& patch,
                             const EvalOptions& opts);

}  // namespace depthpatch
