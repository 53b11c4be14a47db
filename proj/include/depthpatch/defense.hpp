#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "depthpatch/depth_model.hpp"
#include "depthpatch/metrics.hpp"
#include "depthpatch/scene.hpp"

namespace depthpatch {

// Input-transformation defenses applied before the depth model.
struct DefenseSpec {
    enum class Kind { jpeg, median_blur, gaussian_noise };
    Kind kind = Kind::gaussian_noise;
    // jpeg: quality in [1,100]; median_blur: kernel size >= 1;
    // gaussian_noise: sigma >= 0.
    double parameter = 0.0;
    std::uint64_t seed = 0;  // gaussian only

    void validate() const;
    static DefenseSpec parse(const std::string& text);  // "kind:param"
    std::string name() const;
};

// jpeg: round trip through a baseline libjpeg codec (4:2:0 chroma) at the
//   given quality.
// median_blur: per-channel k x k median with symmetric padding. Even k uses
//   the window [i - k/2, i - k/2 + k - 1] on each axis (one extra row/column
//   above-left of the anchor) and the lower median of the k^2 samples.
// gaussian_noise: adds N(0, sigma^2) per sample, seeded, then clamps to [0,1].
Image apply_defense(const Image& image, const DefenseSpec& spec);

struct DefendedMetrics {
    double e_d = 0.0;        // defense applied to the adversarial image
    double e_d_benign = 0.0; // defense applied to the clean image
    int n_scenes = 0;
};

// Both errors are measured against the undefended clean-image prediction,
// so e_d_benign isolates the degradation the defense itself causes.
DefendedMetrics evaluate_defended(const DepthModel& model,
                                  const std::vector<SceneSample>& scenes,
                                  const Patch& patch, const DefenseSpec& spec,
                                  const EvalOptions& opts);

}  // namespace depthpatch
