#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "depthpatch/depth_model.hpp"
#include "depthpatch/scene.hpp"

namespace depthpatch {

// Small convolutional encoder-decoder with skip connections and a sigmoid
// disparity head; the desk-scale attack target. Four stride-2 levels put the
// bottleneck receptive field across the whole 64x64 image, so patch gradients
// reach focus pixels the patch does not cover.
//
// enc0   conv3x3           in -> c[0]          full res
// enc1-4 conv3x3 stride 2  c[i-1] -> c[i]      /2 each
// dec3-0 nearest-x2 upsample, concat skip, conv3x3
// head   conv3x3 c[0] -> 1, sigmoid
class ToyDepthModel final : public DepthModel {
public:
    struct Options {
        std::array<int, 5> channels{4, 8, 12, 16, 24};
        double learning_rate = 1e-3;
        int batch_size = 1;  // per-scene steps; larger batches average gradients
        // Noise augmentation during pretraining: unstructured pixel noise and
        // random noise squares pasted with the ground truth unchanged. Makes
        // the victim texture-robust the way full-scale depth networks are,
        // so unoptimized noise patches stop registering as depth changes.
        bool augment = true;
        double augment_pixel_noise = 0.03;
        int augment_max_squares = 1;
    };

    ToyDepthModel() = default;
    ToyDepthModel(const Options& opts, std::uint64_t seed);

    DisparityMap predict(const Image& image) const override;
    Image gradient_wrt_image(const Image& image,
                             const DisparityMap& upstream) const override;
    std::unique_ptr<DepthModel::Tape> forward_with_tape(const Image& image) const override;
    std::string kind() const override { return "toy"; }
    std::uint64_t weights_checksum() const override;

    // Trains on split.train with per-batch Adam steps of mean L1 disparity
    // error against the emitted ground truth; evaluates mean absolute error
    // on split.test. Throws NumericError when the held-out error stays above
    // 0.15 after the final epoch. Deterministic in (opts, seed, epochs).
    struct PretrainReport {
        double held_out_mae = 0.0;
        int epochs = 0;
        std::vector<double> train_loss_per_epoch;
    };
    PretrainReport pretrain(const DatasetSplit& split, int epochs, std::uint64_t seed);

    double mean_abs_error(const std::vector<SceneSample>& scenes) const;

    // Versioned binary container: magic, JSON header, raw little-endian
    // float64 parameters.
    void save(const std::string& path) const;
    static ToyDepthModel load(const std::string& path);

    const Options& options() const { return opts_; }
    std::uint64_t init_seed() const { return seed_; }

private:
    struct Conv {
        int in_c = 0, out_c = 0, stride = 1;
        std::vector<double> w;  // [out][in][3][3]
        std::vector<double> b;  // [out]
    };

    struct Activations;  // forward intermediates, defined in the .cpp
    friend class ToyForwardTape;

    void init_weights();
    void augment_input(Image& input, std::uint64_t seed) const;
    void forward(const Image& image, Activations& acts) const;
    // Gradient w.r.t. the input image; when `grads` is non-null also
    // accumulates parameter gradients (pretraining path).
    Image backward(const Activations& acts, const DisparityMap& upstream,
                   std::vector<double>* grads) const;

    size_t param_count() const;
    void pack_params(std::vector<double>& out) const;
    void unpack_params(const std::vector<double>& in);

    Options opts_;
    std::uint64_t seed_ = 0;
    std::vector<Conv> enc_;  // 5 layers
    std::vector<Conv> dec_;  // 4 layers
    Conv head_;
};

}  // namespace depthpatch
