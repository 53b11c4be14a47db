#include "depthpatch/detection.hpp"

#include <algorithm>
#include <cmath>

#include "depthpatch/errors.hpp"

namespace depthpatch {

void DetectorConfig::validate() const {
    if (objectness_threshold <= 0.0 || objectness_threshold >= 1.0)
        throw ConfigError("detector.objectness_threshold must be in (0,1)");
    if (nms_iou_threshold <= 0.0 || nms_iou_threshold >= 1.0)
        throw ConfigError("detector.nms_iou_threshold must be in (0,1)");
    if (max_detections < 1) throw ConfigError("detector.max_detections must be >= 1");
}

std::vector<Detection> filter_detections(const std::vector<Detection>& raw,
                                         const DetectorConfig& cfg) {
    cfg.validate();

    std::vector<Detection> kept;
    for (const auto& det : raw) {
        if (det.objectness < cfg.objectness_threshold) continue;
        if (!cfg.target_classes.empty() && !cfg.target_classes.count(det.class_id)) continue;
        kept.push_back(det);
    }
    std::stable_sort(kept.begin(), kept.end(), [](const Detection& a, const Detection& b) {
        return a.objectness > b.objectness;
    });

    std::vector<Detection> out;
    for (const auto& cand : kept) {
        bool suppressed = false;
        for (const auto& sel : out)
            if (box_iou(cand.box, sel.box) > cfg.nms_iou_threshold) {
                suppressed = true;
                break;
            }
        if (!suppressed) {
            out.push_back(cand);
            if (static_cast<int>(out.size()) == cfg.max_detections) break;
        }
    }
    return out;
}

std::vector<Detection> detect(const SceneSample& sample, const DetectorConfig& cfg) {
    std::vector<Detection> raw = sample.detections;
    if (cfg.oracle_backend)
        for (auto& det : raw) det.objectness = 1.0;
    return filter_detections(raw, cfg);
}

PlacementRect place_patch_geometry(const Detection& det, double patch_scale,
                                   int img_h, int img_w, PatchScaleMode mode) {
    if (patch_scale <= 0.0 || patch_scale > 1.0)
        throw ConfigError("patch_scale must be in (0,1]");

    const int short_dim = std::min(det.box.width(), det.box.height());
    double side = std::lround(patch_scale * short_dim);
    if (mode == PatchScaleMode::area) side = std::lround(side * std::sqrt(1.0 / patch_scale));
    const int side_px = static_cast<int>(side);
    if (side_px < 2) throw DataError("patch too small for object");

    PlacementRect pr;
    pr.center_x = 0.5 * (det.box.x_min + det.box.x_max);
    pr.center_y = 0.5 * (det.box.y_min + det.box.y_max);
    pr.side = side_px;

    const int x0 = static_cast<int>(std::lround(pr.center_x - side / 2.0));
    const int y0 = static_cast<int>(std::lround(pr.center_y - side / 2.0));
    pr.rect.x_min = std::clamp(x0, 0, img_w);
    pr.rect.y_min = std::clamp(y0, 0, img_h);
    pr.rect.x_max = std::clamp(x0 + side_px, 0, img_w);
    pr.rect.y_max = std::clamp(y0 + side_px, 0, img_h);
    return pr;
}

MaskPair build_masks(int img_h, int img_w, const Detection& det,
                     const PlacementRect& placement, const Mask* footprint) {
    MaskPair mp;
    mp.focus_mask = Mask(img_h, img_w);
    mp.patch_mask = Mask(img_h, img_w);

    for (int y = det.box.y_min; y < det.box.y_max; ++y)
        for (int x = det.box.x_min; x < det.box.x_max; ++x) mp.focus_mask.at(y, x) = 1;

    if (footprint) {
        if (footprint->h != img_h || footprint->w != img_w)
            throw DataError("build_masks: footprint shape mismatch");
        for (int y = 0; y < img_h; ++y)
            for (int x = 0; x < img_w; ++x)
                mp.patch_mask.at(y, x) = footprint->at(y, x) & mp.focus_mask.at(y, x);
    } else {
        const Box& r = placement.rect;
        for (int y = r.y_min; y < r.y_max; ++y)
            for (int x = r.x_min; x < r.x_max; ++x)
                mp.patch_mask.at(y, x) = mp.focus_mask.at(y, x);
    }
    return mp;
}

}  // namespace depthpatch
