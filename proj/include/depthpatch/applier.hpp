#pragma once

#include <cstdint>
#include <vector>

#include "depthpatch/detection.hpp"
#include "depthpatch/transform.hpp"

namespace depthpatch {

// out = (1 - mask) * image + mask * warped, channelwise. Hard binary mask,
// no feathering. Shapes must agree.
Image apply_patch(const Image& image, const Image& warped, const Mask& mask);

struct ApplyOptions {
    double patch_scale = 0.2;
    PatchScaleMode scale_mode = PatchScaleMode::side;
    TransformRanges transforms = TransformRanges::identity();
    // Per-detection transform seeds; when empty every detection uses
    // identity params (the deterministic evaluation path).
    std::vector<std::uint64_t> transform_seeds;
};

struct ApplyResult {
    Image adv_image;
    std::vector<MaskPair> masks;          // loss masks, footprint-accurate
    std::vector<PlacementRect> placements;
    std::vector<TransformParams> params;  // per detection, for replay/backprop
    std::vector<Mask> footprints;         // raw render masks per detection
};

// Sequential compositing over the (already filtered, objectness-descending)
// detections; a later patch overwrites earlier ones where footprints overlap.
ApplyResult apply_all(const Image& image, const Patch& patch,
                      const std::vector<Detection>& detections,
                      const ApplyOptions& opts);

}  // namespace depthpatch
