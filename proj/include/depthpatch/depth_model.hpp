#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "depthpatch/tensor.hpp"

namespace depthpatch {

// Differentiable monocular depth estimator contract. Parameters are frozen
// during an attack; only the input gradient is ever exposed. Outputs are
// normalized disparity in [0,1], 0 being the farthest point, and prediction
// is deterministic.
class DepthModel {
public:
    virtual ~DepthModel() = default;

    virtual DisparityMap predict(const Image& image) const = 0;

    // Vector-Jacobian product of predict at `image` against `upstream` (H x W).
    virtual Image gradient_wrt_image(const Image& image,
                                     const DisparityMap& upstream) const = 0;

    virtual std::string kind() const = 0;

    // Stable digest of the parameters; used to verify the freeze contract.
    virtual std::uint64_t weights_checksum() const = 0;

    // One forward pass whose result can be backpropagated through without
    // re-running the network. The default falls back to predict +
    // gradient_wrt_image; models with stored activations override it.
    class Tape {
    public:
        virtual ~Tape() = default;
        virtual const DisparityMap& output() const = 0;
        virtual Image backward(const DisparityMap& upstream) const = 0;
    };
    virtual std::unique_ptr<Tape> forward_with_tape(const Image& image) const;
};

// Linear reference model: disparity = 5x5 box blur of luminance with
// symmetric (reflective) border padding. Every gradient has a closed form,
// which makes it the oracle for the autodiff path.
class AnalyticDepthModel final : public DepthModel {
public:
    DisparityMap predict(const Image& image) const override;
    Image gradient_wrt_image(const Image& image,
                             const DisparityMap& upstream) const override;
    std::string kind() const override { return "analytic"; }
    std::uint64_t weights_checksum() const override { return 0x616e616c79746963ULL; }

    static constexpr int kKernel = 5;
    static constexpr double kLumR = 0.299, kLumG = 0.587, kLumB = 0.114;
};

}  // namespace depthpatch
