#pragma once

#include <optional>
#include <set>
#include <vector>

#include "depthpatch/scene.hpp"
#include "depthpatch/tensor.hpp"

namespace depthpatch {

struct DetectorConfig {
    double objectness_threshold = 0.5;
    double nms_iou_threshold = 0.4;
    int max_detections = 14;
    std::set<int> target_classes;  // empty = accept every class
    // "annotation" uses stored objectness as-is; "oracle" treats the stored
    // boxes as ground truth and forces objectness to 1.
    bool oracle_backend = false;

    void validate() const;
};

// Objectness filter (keep >= threshold), class filter, greedy NMS, cap at
// max_detections. Output is sorted by objectness descending and idempotent.
std::vector<Detection> filter_detections(const std::vector<Detection>& raw,
                                         const DetectorConfig& cfg);

// Applies the configured backend to a scene's stored detections, then filters.
std::vector<Detection> detect(const SceneSample& sample, const DetectorConfig& cfg);

// Square patch placement centered on a detection. The clipped rect is what
// lands in the image; center/side keep the unclipped geometry for warping.
struct PlacementRect {
    double center_x = 0.0, center_y = 0.0;
    int side = 0;          // unclipped square side in pixels
    Box rect;              // placement square clipped to image bounds
};

enum class PatchScaleMode { side, area };

// side mode: side = round(scale * min(box_w, box_h)).
// area mode additionally multiplies by sqrt(1/scale), making patch area a
// `scale` fraction of the short-dimension square.
PlacementRect place_patch_geometry(const Detection& det, double patch_scale,
                                   int img_h, int img_w,
                                   PatchScaleMode mode = PatchScaleMode::side);

// Per-detection loss masks. patch_mask is always a subset of focus_mask.
struct MaskPair {
    Mask patch_mask;  // where patch content counts toward the overlap loss
    Mask focus_mask;  // detection box interior, the attacked region
    int detection_index = 0;
};

// focus_mask = box interior. patch_mask = (footprint or placement rect)
// intersected with focus_mask; a warped patch may render outside the box but
// those pixels never enter the loss accounting.
MaskPair build_masks(int img_h, int img_w, const Detection& det,
                     const PlacementRect& placement,
                     const Mask* footprint = nullptr);

}  // namespace depthpatch
