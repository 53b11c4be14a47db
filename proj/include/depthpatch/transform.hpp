#pragma once

#include <cstdint>
#include <optional>

#include "depthpatch/detection.hpp"
#include "depthpatch/tensor.hpp"

namespace depthpatch {

// Trainable RGB pixel grid, the optimization variable. Values stay in [0,1];
// the trainer re-clamps after every optimizer step.
struct Patch {
    int side = 100;
    Tensor pixels;  // 3 x side x side

    Patch() = default;
    explicit Patch(int side_, double fill = 0.0) : side(side_), pixels(3, side_, side_, fill) {}
};

Patch random_patch(int side, std::uint64_t seed);

struct TransformRanges {
    double rotation_deg = 20.0;      // rotation sampled in [-r, r]
    double scale_jitter = 0.1;       // scale sampled in [1-j, 1+j]
    double noise_amplitude = 0.1;    // per-pixel noise in [-a, a]
    double contrast_min = 0.8;
    double contrast_max = 1.2;
    double brightness = 0.1;         // brightness sampled in [-b, b]
    bool occlusion_enabled = false;  // cutout rectangle, off by default
    double occlusion_area_frac = 0.1;
    bool contrast_mean_anchored = false;

    void validate() const;
    static TransformRanges identity();
};

// Occlusion rectangle as fractions of the placement square, so params stay a
// pure function of the seed regardless of where the patch lands.
struct OcclusionRect {
    double fx = 0.0, fy = 0.0, fw = 0.0, fh = 0.0;
};

struct TransformParams {
    double rotation_deg = 0.0;
    double scale_jitter = 1.0;
    double contrast = 1.0;
    double brightness = 0.0;
    Tensor noise;  // 3 x S x S, entries in [-amp, amp]
    std::optional<OcclusionRect> occlusion;
    bool contrast_mean_anchored = false;
    std::uint64_t seed = 0;
};

// Uniform sampling in each configured range; deterministic per seed.
TransformParams sample_params(std::uint64_t seed, const TransformRanges& ranges,
                              int patch_side);
TransformParams identity_params(int patch_side);

struct WarpResult {
    Image warped;    // H x W x 3, zero outside the footprint
    Mask footprint;  // pixels receiving patch content
};

// Color ops on the patch (contrast, then brightness, then noise, then clamp
// to [0,1]), then one bilinear resample realizing scale-to-placement x jitter,
// rotation about the placement center, and the paste, then the optional
// occlusion cutout (mid-gray 0.5). Differentiable w.r.t. patch pixels except
// on the measure-zero clamp boundaries and bilinear cell edges. Throws
// NumericError when the footprint is fully clipped away.
WarpResult transform_patch(const Patch& patch, const TransformParams& params,
                           const PlacementRect& placement, int img_h, int img_w);

// Accumulates d(sum(g_warped * warped))/dP into g_patch (same shape as
// patch.pixels). g_warped must match the warped image shape.
void transform_patch_vjp(const Patch& patch, const TransformParams& params,
                         const PlacementRect& placement, const Image& g_warped,
                         Tensor& g_patch);

}  // namespace depthpatch
