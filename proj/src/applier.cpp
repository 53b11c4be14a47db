#include "depthpatch/applier.hpp"

#include "depthpatch/errors.hpp"

namespace depthpatch {

Image apply_patch(const Image& image, const Image& warped, const Mask& mask) {
    if (!image.same_shape(warped) || mask.h != image.h || mask.w != image.w)
        throw DataError("apply_patch: shape mismatch");

    Image out = image;
    for (int y = 0; y < image.h; ++y)
        for (int x = 0; x < image.w; ++x) {
            if (!mask.at(y, x)) continue;
            for (int ch = 0; ch < 3; ++ch) out.at(ch, y, x) = warped.at(ch, y, x);
        }
    return out;
}

ApplyResult apply_all(const Image& image, const Patch& patch,
                      const std::vector<Detection>& detections,
                      const ApplyOptions& opts) {
    ApplyResult res;
    res.adv_image = image;

    for (size_t k = 0; k < detections.size(); ++k) {
        const Detection& det = detections[k];
        const PlacementRect placement =
            place_patch_geometry(det, opts.patch_scale, image.h, image.w, opts.scale_mode);

        TransformParams params =
            k < opts.transform_seeds.size()
                ? sample_params(opts.transform_seeds[k], opts.transforms, patch.side)
                : identity_params(patch.side);

        WarpResult warp = transform_patch(patch, params, placement, image.h, image.w);
        res.adv_image = apply_patch(res.adv_image, warp.warped, warp.footprint);

        MaskPair mp = build_masks(image.h, image.w, det, placement, &warp.footprint);
        mp.detection_index = static_cast<int>(k);
        res.masks.push_back(std::move(mp));
        res.placements.push_back(placement);
        res.params.push_back(std::move(params));
        res.footprints.push_back(std::move(warp.footprint));
    }
    return res;
}

}  // namespace depthpatch
