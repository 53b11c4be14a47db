#pragma once

#include <cstdint>

#include "depthpatch/scene.hpp"

namespace depthpatch {

// Controls the deterministic desk-scale scene generator: textured background
// with 1-3 non-overlapping solid-color rectangles standing in for objects.
struct SceneSpec {
    int width = 64;
    int height = 64;
    int min_objects = 1;
    int max_objects = 3;
    int min_object_size = 12;
    int max_object_size = 40;
    double train_fraction = 0.8;
};

// Deterministic in (n, seed, spec). Every sample carries ground-truth
// disparity: 0.1 on the background and clamp(0.2 + 0.6 * area / max_area, 0, 1)
// inside each object, so larger objects read as closer.
DatasetSplit generate_synthetic_scenes(int n, std::uint64_t seed, const SceneSpec& spec);

}  // namespace depthpatch
