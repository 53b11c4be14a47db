#include "depthpatch/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "depthpatch/applier.hpp"
#include "depthpatch/detection.hpp"
#include "depthpatch/errors.hpp"
#include "depthpatch/image_io.hpp"
#include "depthpatch/metrics.hpp"

namespace depthpatch {

std::string render_table(const std::vector<std::string>& headers,
                         const std::vector<std::vector<std::string>>& rows) {
    std::vector<size_t> widths(headers.size());
    for (size_t c = 0; c < headers.size(); ++c) widths[c] = headers[c].size();
    for (const auto& row : rows)
        for (size_t c = 0; c < row.size() && c < widths.size(); ++c)
            widths[c] = std::max(widths[c], row[c].size());

    std::ostringstream os;
    auto emit_row = [&](const std::vector<std::string>& row) {
        for (size_t c = 0; c < widths.size(); ++c) {
            const std::string& cell = c < row.size() ? row[c] : "";
            os << cell << std::string(widths[c] - cell.size(), ' ');
            os << (c + 1 < widths.size() ? "  " : "");
        }
        os << "\n";
    };
    emit_row(headers);
    size_t total = 0;
    for (size_t c = 0; c < widths.size(); ++c) total += widths[c] + (c + 1 < widths.size() ? 2 : 0);
    os << std::string(total, '-') << "\n";
    for (const auto& row : rows) emit_row(row);
    return os.str();
}

std::string format_double(double value, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
    return buf;
}

namespace {

// Hand-picked ramp with strictly increasing luminance.
constexpr double kStops[7][3] = {
    {0.02, 0.02, 0.10}, {0.16, 0.09, 0.42}, {0.46, 0.15, 0.52}, {0.74, 0.28, 0.38},
    {0.92, 0.50, 0.18}, {0.98, 0.79, 0.25}, {0.99, 0.98, 0.85},
};

}  // namespace

std::array<double, 3> disparity_colormap(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const double pos = t * 6.0;
    const int i = std::min(5, static_cast<int>(pos));
    const double f = pos - i;
    return {kStops[i][0] + f * (kStops[i + 1][0] - kStops[i][0]),
            kStops[i][1] + f * (kStops[i + 1][1] - kStops[i][1]),
            kStops[i][2] + f * (kStops[i + 1][2] - kStops[i][2])};
}

Image colormap_image(const DisparityMap& map) {
    Image out(3, map.h, map.w);
    for (int y = 0; y < map.h; ++y)
        for (int x = 0; x < map.w; ++x) {
            const auto rgb = disparity_colormap(map.at(y, x));
            for (int ch = 0; ch < 3; ++ch) out.at(ch, y, x) = rgb[ch];
        }
    return out;
}

void render_triptych(const SceneSample& scene, const Patch* patch,
                     const DepthModel& model, double patch_scale,
                     PatchScaleMode scale_mode, const DetectorConfig& detector,
                     const std::string& out_path) {
    const Image& clean = scene.image;
    const DisparityMap d = model.predict(clean);

    Image adv = clean;
    if (patch) {
        EvalOptions eval_opts;
        eval_opts.patch_scale = patch_scale;
        eval_opts.scale_mode = scale_mode;
        eval_opts.detector = detector;
        const std::vector<Detection> detections = placeable_detections(scene, eval_opts);
        if (!detections.empty()) {
            ApplyOptions opts;
            opts.patch_scale = patch_scale;
            opts.scale_mode = scale_mode;
            adv = apply_all(clean, *patch, detections, opts).adv_image;
        }
    }
    const DisparityMap d_adv = patch ? model.predict(adv) : d;

    const Image clean_panel = clean;
    const Image d_panel = colormap_image(d);
    const Image adv_panel = colormap_image(d_adv);

    Image out(3, clean.h, clean.w * 3);
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < clean.h; ++y)
            for (int x = 0; x < clean.w; ++x) {
                out.at(ch, y, x) = clean_panel.at(ch, y, x);
                out.at(ch, y, x + clean.w) = d_panel.at(ch, y, x);
                out.at(ch, y, x + 2 * clean.w) = adv_panel.at(ch, y, x);
            }
    write_png(out, out_path);
}

const std::map<std::string, ReferenceTarget>& reference_targets() {
    static const std::map<std::string, ReferenceTarget> targets = {
        {"monodepth2", {0.49, 0.55, 0.99}},
        {"depthhints", {0.47, 0.53, 0.98}},
        {"manydepth", {0.46, 0.53, 0.98}},
        {"mimdepth", {0.34, 0.39, 0.94}},
    };
    return targets;
}

}  // namespace depthpatch
