#pragma once

#include <vector>

#include "depthpatch/detection.hpp"
#include "depthpatch/tensor.hpp"
#include "depthpatch/transform.hpp"

namespace depthpatch {

// Target disparity d_t. The default constant 0 drives objects to the farthest
// plane (disappearance); scaled_baseline shifts the clean prediction instead
// (distance distortion).
struct TargetDepthSpec {
    enum class Mode { constant, scaled_baseline };
    Mode mode = Mode::constant;
    double constant_value = 0.0;
    double scale_factor = 0.5;

    void validate() const;
};

DisparityMap make_target_depth(const TargetDepthSpec& spec, const DisparityMap& baseline);

struct LossConfig {
    double alpha = 1.0;
    double beta = 1.5;
    bool use_d1 = true;
    bool use_d2 = true;
    bool use_tv = true;
    // Eq-level choice for the squared overlap term: square the scalar masked
    // mean (default) or average per-pixel squared differences.
    enum class SquareMode { scalar_then_square, per_pixel_square };
    SquareMode square_mode = SquareMode::scalar_then_square;
    TargetDepthSpec target_depth;

    void validate() const;
};

// Masked mean |d_t - d_adv| over the patch mask; empty masks give 0 via the
// max(sum, 1) denominator.
double loss_d1(const DisparityMap& d_t, const DisparityMap& d_adv, const Mask& m_p);

// Masked mean over the ring m_f \ m_p; throws DataError when m_p is not a
// subset of m_f.
double loss_d2(const DisparityMap& d_t, const DisparityMap& d_adv, const Mask& m_f,
               const Mask& m_p);

// Penalized combination: l1^2 + l2 (term toggles respected).
double loss_depth(double l1, double l2, const LossConfig& cfg);

// Anisotropic total variation, forward differences with missing neighbor
// terms treated as zero at the last row/column, summed over channels,
// divided by the pixel count (side^2).
double loss_tv(const Patch& patch);

// Accumulates weight * d(loss_tv)/dP into g_patch.
void loss_tv_grad(const Patch& patch, double weight, Tensor& g_patch);

// alpha * mean(depth_terms) + beta * loss_tv(P); depth_terms is the flat list
// of per-detection penalized depth losses in the batch.
double loss_total(const std::vector<double>& depth_terms_per_detection, const Patch& patch,
                  const LossConfig& cfg);

// Per-detection depth loss with its gradient w.r.t. the adversarial
// disparity. Adds upstream_weight * dL_depth/dd_adv into g_d_adv when given.
struct DepthLossTerms {
    double l1 = 0.0;
    double l2 = 0.0;
    double depth = 0.0;
};
DepthLossTerms depth_loss_with_grad(const DisparityMap& d_t, const DisparityMap& d_adv,
                                    const MaskPair& masks, const LossConfig& cfg,
                                    double upstream_weight, DisparityMap* g_d_adv);

}  // namespace depthpatch
