#include "depthpatch/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "depthpatch/errors.hpp"
#include "depthpatch/rng.hpp"

namespace depthpatch {

namespace {

// Saturated palette; objects in one scene draw distinct entries.
constexpr double kPalette[8][3] = {
    {0.85, 0.15, 0.15}, {0.15, 0.65, 0.20}, {0.15, 0.25, 0.85}, {0.85, 0.75, 0.10},
    {0.75, 0.15, 0.75}, {0.10, 0.70, 0.75}, {0.90, 0.45, 0.10}, {0.55, 0.30, 0.10},
};

SceneSample make_scene(std::uint64_t scene_seed, int index, const SceneSpec& spec) {
    Rng rng(scene_seed);
    SceneSample sample;
    {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "syn%05d", index);
        sample.id = buf;
    }

    const int H = spec.height, W = spec.width;
    sample.image = Image(3, H, W);
    sample.gt_disparity = DisparityMap(H, W, 0.1);

    // Low-frequency wavy background, kept away from the clamp boundaries.
    const double base = rng.uniform(0.35, 0.55);
    const double fx = rng.uniform(0.05, 0.20), fy = rng.uniform(0.05, 0.20);
    const double phase = rng.uniform(0.0, 6.28);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double wave = 0.08 * std::sin(fx * x + phase) * std::cos(fy * y - phase);
            for (int ch = 0; ch < 3; ++ch) {
                const double grain = 0.02 * (rng.next_double() - 0.5);
                sample.image.at(ch, y, x) = std::clamp(base + wave + grain, 0.05, 0.95);
            }
        }

    const int n_objects = rng.uniform_int(spec.min_objects, spec.max_objects);
    const double max_area =
        static_cast<double>(spec.max_object_size) * spec.max_object_size;

    int palette_order[8] = {0, 1, 2, 3, 4, 5, 6, 7};
    for (int i = 7; i > 0; --i) std::swap(palette_order[i], palette_order[rng.uniform_int(0, i)]);

    for (int k = 0; k < n_objects; ++k) {
        const int ow = rng.uniform_int(spec.min_object_size, spec.max_object_size);
        const int oh = rng.uniform_int(spec.min_object_size, spec.max_object_size);
        if (ow > W || oh > H)
            throw DataError("synthetic object size exceeds image dimensions");

        // Rejection-sample a non-overlapping placement; give up after a while
        // and keep whatever already fit (>= 1 object always fits).
        Box box;
        bool placed = false;
        for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
            box.x_min = rng.uniform_int(0, W - ow);
            box.y_min = rng.uniform_int(0, H - oh);
            box.x_max = box.x_min + ow;
            box.y_max = box.y_min + oh;
            placed = true;
            for (const auto& det : sample.detections)
                if (box_iou(box, det.box) > 0.0) {
                    placed = false;
                    break;
                }
        }
        if (!placed) continue;

        const double* color = kPalette[palette_order[k]];
        const double shade = rng.uniform(0.9, 1.1);
        const double disp =
            std::clamp(0.2 + 0.6 * (static_cast<double>(box.area()) / max_area), 0.0, 1.0);
        for (int y = box.y_min; y < box.y_max; ++y)
            for (int x = box.x_min; x < box.x_max; ++x) {
                for (int ch = 0; ch < 3; ++ch)
                    sample.image.at(ch, y, x) = std::clamp(color[ch] * shade, 0.0, 1.0);
                sample.gt_disparity->at(y, x) = disp;
            }

        sample.detections.push_back({box, 0, 1.0});
    }

    validate_scene(sample);
    return sample;
}

}  // namespace

DatasetSplit generate_synthetic_scenes(int n, std::uint64_t seed, const SceneSpec& spec) {
    if (n <= 0) throw ConfigError("generate_synthetic_scenes: n must be positive");
    if (spec.min_object_size > spec.width || spec.min_object_size > spec.height ||
        spec.max_object_size > spec.width || spec.max_object_size > spec.height)
        throw ConfigError("generate_synthetic_scenes: object size range exceeds image size");
    if (spec.min_objects < 1 || spec.max_objects < spec.min_objects)
        throw ConfigError("generate_synthetic_scenes: bad object count range");
    if (spec.width < 64 || spec.height < 64)
        throw ConfigError("generate_synthetic_scenes: image must be at least 64x64");

    DatasetSplit split;
    const int n_train = static_cast<int>(std::lround(spec.train_fraction * n));
    for (int i = 0; i < n; ++i) {
        SceneSample s = make_scene(hash_combine(seed, static_cast<std::uint64_t>(i)), i, spec);
        (i < n_train ? split.train : split.test).push_back(std::move(s));
    }
    return split;
}

}  // namespace depthpatch
