#include "depthpatch/metrics.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "depthpatch/errors.hpp"

using json = nlohmann::json;

namespace depthpatch {

namespace {

void check_shapes(const DisparityMap& a, const DisparityMap& b, const char* who) {
    if (a.h != b.h || a.w != b.w) throw DataError(std::string(who) + ": shape mismatch");
}

}  // namespace

double compute_ed(const DisparityMap& d, const DisparityMap& d_adv, const Mask& m_f) {
    check_shapes(d, d_adv, "compute_ed");
    if (m_f.h != d.h || m_f.w != d.w) throw DataError("compute_ed: mask shape mismatch");
    double acc = 0.0;
    long long count = 0;
    for (size_t i = 0; i < d.v.size(); ++i)
        if (m_f.v[i]) {
            acc += std::abs(d.v[i] - d_adv.v[i]);
            ++count;
        }
    if (count == 0) throw DataError("compute_ed: empty focus mask");
    return acc / static_cast<double>(count);
}

double compute_ra(const DisparityMap& d, const DisparityMap& d_adv, const Mask& m_f,
                  double threshold) {
    check_shapes(d, d_adv, "compute_ra");
    if (m_f.h != d.h || m_f.w != d.w) throw DataError("compute_ra: mask shape mismatch");
    long long affected = 0, count = 0;
    for (size_t i = 0; i < d.v.size(); ++i)
        if (m_f.v[i]) {
            if (std::abs(d.v[i] - d_adv.v[i]) > threshold) ++affected;
            ++count;
        }
    if (count == 0) throw DataError("compute_ra: empty focus mask");
    return static_cast<double>(affected) / static_cast<double>(count);
}

double compute_mse(const DisparityMap& d, const DisparityMap& d_adv) {
    check_shapes(d, d_adv, "compute_mse");
    double acc = 0.0;
    for (size_t i = 0; i < d.v.size(); ++i) {
        const double diff = d_adv.v[i] - d.v[i];
        acc += diff * diff;
    }
    return acc / static_cast<double>(d.v.size());
}

std::string MetricsReport::to_json_string() const {
    json j;
    j["e_d"] = e_d;
    j["r_a"] = r_a;
    j["mse"] = mse;
    j["e_d_ring"] = e_d_ring;
    j["n_scenes"] = n_scenes;
    j["per_scene"] = json::array();
    for (const auto& s : per_scene)
        j["per_scene"].push_back({{"scene_id", s.scene_id},
                                  {"e_d", s.e_d},
                                  {"r_a", s.r_a},
                                  {"mse", s.mse},
                                  {"e_d_ring", s.e_d_ring},
                                  {"n_detections", s.n_detections}});
    return j.dump(2);
}

std::string MetricsReport::to_text_table() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "scenes  MSE     E_d     R_a     E_d(ring)\n";
    os << n_scenes << "      " << mse << "  " << e_d << "  " << r_a << "  " << e_d_ring
       << "\n";
    return os.str();
}

std::vector<Detection> placeable_detections(const SceneSample& scene,
                                            const EvalOptions& opts) {
    std::vector<Detection> out;
    for (const auto& det : detect(scene, opts.detector)) {
        try {
            place_patch_geometry(det, opts.patch_scale, scene.image.h, scene.image.w,
                                 opts.scale_mode);
            out.push_back(det);
        } catch (const DataError&) {
            // Patch too small for this object; it cannot carry the attack.
        }
    }
    return out;
}

MetricsReport evaluate_patch(const DepthModel& model,
                             const std::vector<SceneSample>& scenes, const Patch& patch,
                             const EvalOptions& opts) {
    MetricsReport report;
    for (const auto& scene : scenes) {
        const std::vector<Detection> detections = placeable_detections(scene, opts);
        if (detections.empty()) continue;

        ApplyOptions apply_opts;
        apply_opts.patch_scale = opts.patch_scale;
        apply_opts.scale_mode = opts.scale_mode;
        const ApplyResult applied = apply_all(scene.image, patch, detections, apply_opts);

        const DisparityMap d = model.predict(scene.image);
        const DisparityMap d_adv = model.predict(applied.adv_image);

        SceneMetrics sm;
        sm.scene_id = scene.id;
        sm.mse = compute_mse(d, d_adv);
        sm.n_detections = static_cast<int>(detections.size());
        for (const auto& mp : applied.masks) {
            sm.e_d += compute_ed(d, d_adv, mp.focus_mask);
            sm.r_a += compute_ra(d, d_adv, mp.focus_mask);
            // Ring-only variant: exclude the trivially changed patch pixels.
            Mask ring(mp.focus_mask.h, mp.focus_mask.w);
            for (size_t i = 0; i < ring.v.size(); ++i)
                ring.v[i] = mp.focus_mask.v[i] && !mp.patch_mask.v[i];
            sm.e_d_ring += ring.sum() > 0 ? compute_ed(d, d_adv, ring) : 0.0;
        }
        sm.e_d /= sm.n_detections;
        sm.r_a /= sm.n_detections;
        sm.e_d_ring /= sm.n_detections;
        report.per_scene.push_back(sm);
    }

    report.n_scenes = static_cast<int>(report.per_scene.size());
    if (report.n_scenes == 0) throw DataError("evaluate_patch: no scenes with detections");
    for (const auto& s : report.per_scene) {
        report.e_d += s.e_d;
        report.r_a += s.r_a;
        report.mse += s.mse;
        report.e_d_ring += s.e_d_ring;
    }
    report.e_d /= report.n_scenes;
    report.r_a /= report.n_scenes;
    report.mse /= report.n_scenes;
    report.e_d_ring /= report.n_scenes;
    return report;
}

}  // namespace depthpatch
