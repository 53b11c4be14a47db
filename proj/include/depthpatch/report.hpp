#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "depthpatch/depth_model.hpp"
#include "depthpatch/scene.hpp"
#include "depthpatch/transform.hpp"

namespace depthpatch {

// Aligned text table; every command prints one of these next to its JSON.
std::string render_table(const std::vector<std::string>& headers,
                         const std::vector<std::vector<std::string>>& rows);

std::string format_double(double value, int precision = 4);

// Monotone dark-to-bright color ramp for disparity panels.
std::array<double, 3> disparity_colormap(double t);
Image colormap_image(const DisparityMap& map);

// Writes <out_path>: [input | clean disparity | adversarial disparity],
// 3W x H. Without a patch the last two panels are identical.
void render_triptych(const SceneSample& scene, const Patch* patch,
                     const DepthModel& model, double patch_scale,
                     PatchScaleMode scale_mode, const DetectorConfig& detector,
                     const std::string& out_path);

// Published full-scale results for common victim models; regression targets
// for external models plugged in through the DepthModel adapter. Not
// reachable with the built-in desk-scale stack.
struct ReferenceTarget {
    double mse = 0.0;
    double e_d = 0.0;
    double r_a = 0.0;
};
const std::map<std::string, ReferenceTarget>& reference_targets();

}  // namespace depthpatch
