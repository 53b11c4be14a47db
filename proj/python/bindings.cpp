#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "depthpatch/applier.hpp"
#include "depthpatch/defense.hpp"
#include "depthpatch/depth_model.hpp"
#include "depthpatch/detection.hpp"
#include "depthpatch/errors.hpp"
#include "depthpatch/image_io.hpp"
#include "depthpatch/losses.hpp"
#include "depthpatch/metrics.hpp"
#include "depthpatch/report.hpp"
#include "depthpatch/scene.hpp"
#include "depthpatch/synthetic.hpp"
#include "depthpatch/toy_model.hpp"
#include "depthpatch/trainer.hpp"

namespace py = pybind11;
using namespace depthpatch;

namespace {

// numpy (H, W, 3) float64 <-> planar CHW Image
Image image_from_numpy(const py::array_t<double>& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 3 || buf.shape[2] != 3)
        throw DataError("expected an (H, W, 3) float64 array");
    Image img(3, static_cast<int>(buf.shape[0]), static_cast<int>(buf.shape[1]));
    auto view = arr.unchecked<3>();
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = view(y, x, ch);
    return img;
}

py::array_t<double> image_to_numpy(const Image& img) {
    py::array_t<double> arr({img.h, img.w, img.c});
    auto view = arr.mutable_unchecked<3>();
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < img.c; ++ch) view(y, x, ch) = img.at(ch, y, x);
    return arr;
}

DisparityMap map_from_numpy(const py::array_t<double>& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 2) throw DataError("expected an (H, W) float64 array");
    DisparityMap m(static_cast<int>(buf.shape[0]), static_cast<int>(buf.shape[1]));
    auto view = arr.unchecked<2>();
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) m.at(y, x) = view(y, x);
    return m;
}

py::array_t<double> map_to_numpy(const DisparityMap& m) {
    py::array_t<double> arr({m.h, m.w});
    auto view = arr.mutable_unchecked<2>();
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) view(y, x) = m.at(y, x);
    return arr;
}

Mask mask_from_numpy(const py::array_t<std::uint8_t>& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 2) throw DataError("expected an (H, W) uint8 array");
    Mask m(static_cast<int>(buf.shape[0]), static_cast<int>(buf.shape[1]));
    auto view = arr.unchecked<2>();
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) m.at(y, x) = view(y, x) ? 1 : 0;
    return m;
}

py::array_t<std::uint8_t> mask_to_numpy(const Mask& m) {
    py::array_t<std::uint8_t> arr({m.h, m.w});
    auto view = arr.mutable_unchecked<2>();
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) view(y, x) = m.at(y, x);
    return arr;
}

Patch patch_from_numpy(const py::array_t<double>& arr) {
    const Image img = image_from_numpy(arr);
    if (img.h != img.w) throw DataError("patch array must be square");
    Patch p(img.h);
    p.pixels = img;
    return p;
}

}  // namespace

PYBIND11_MODULE(_depthpatch, m) {
    m.doc() = "adversarial patches against monocular depth estimation";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<Box>(m, "Box")
        .def(py::init<>())
        .def(py::init([](int x0, int y0, int x1, int y1) {
                 return Box{x0, y0, x1, y1};
             }),
             py::arg("x_min"), py::arg("y_min"), py::arg("x_max"), py::arg("y_max"))
        .def_readwrite("x_min", &Box::x_min)
        .def_readwrite("y_min", &Box::y_min)
        .def_readwrite("x_max", &Box::x_max)
        .def_readwrite("y_max", &Box::y_max)
        .def("area", &Box::area);

    py::class_<Detection>(m, "Detection")
        .def(py::init<>())
        .def(py::init([](const Box& box, int class_id, double objectness) {
                 return Detection{box, class_id, objectness};
             }),
             py::arg("box"), py::arg("class_id") = 0, py::arg("objectness") = 1.0)
        .def_readwrite("box", &Detection::box)
        .def_readwrite("class_id", &Detection::class_id)
        .def_readwrite("objectness", &Detection::objectness);

    py::class_<SceneSample>(m, "SceneSample")
        .def(py::init<>())
        .def_readwrite("id", &SceneSample::id)
        .def_readwrite("detections", &SceneSample::detections)
        .def_property(
            "image", [](const SceneSample& s) { return image_to_numpy(s.image); },
            [](SceneSample& s, const py::array_t<double>& a) { s.image = image_from_numpy(a); })
        .def_property_readonly("gt_disparity", [](const SceneSample& s) -> py::object {
            if (!s.gt_disparity) return py::none();
            return map_to_numpy(*s.gt_disparity);
        });

    py::class_<DatasetSplit>(m, "DatasetSplit")
        .def(py::init<>())
        .def_readwrite("train", &DatasetSplit::train)
        .def_readwrite("test", &DatasetSplit::test);

    py::class_<SceneSpec>(m, "SceneSpec")
        .def(py::init<>())
        .def_readwrite("width", &SceneSpec::width)
        .def_readwrite("height", &SceneSpec::height)
        .def_readwrite("min_objects", &SceneSpec::min_objects)
        .def_readwrite("max_objects", &SceneSpec::max_objects)
        .def_readwrite("min_object_size", &SceneSpec::min_object_size)
        .def_readwrite("max_object_size", &SceneSpec::max_object_size)
        .def_readwrite("train_fraction", &SceneSpec::train_fraction);

    m.def("generate_synthetic_scenes", &generate_synthetic_scenes, py::arg("n"),
          py::arg("seed"), py::arg("spec") = SceneSpec{});
    m.def("save_dataset", &save_dataset, py::arg("split"), py::arg("root"));
    m.def(
        "load_dataset",
        [](const std::string& root, double train_fraction) {
            SplitSpec spec;
            spec.train_fraction = train_fraction;
            return load_dataset(root, spec);
        },
        py::arg("root"), py::arg("train_fraction") = 0.8);

    m.def("write_png", [](const py::array_t<double>& img, const std::string& path) {
        write_png(image_from_numpy(img), path);
    });
    m.def("read_png", [](const std::string& path) { return image_to_numpy(read_png(path)); });
    m.def("write_disparity", [](const py::array_t<double>& map, const std::string& path) {
        write_disparity(map_from_numpy(map), path);
    });
    m.def("read_disparity",
          [](const std::string& path) { return map_to_numpy(read_disparity(path)); });

    py::class_<DetectorConfig>(m, "DetectorConfig")
        .def(py::init<>())
        .def_readwrite("objectness_threshold", &DetectorConfig::objectness_threshold)
        .def_readwrite("nms_iou_threshold", &DetectorConfig::nms_iou_threshold)
        .def_readwrite("max_detections", &DetectorConfig::max_detections)
        .def_readwrite("oracle_backend", &DetectorConfig::oracle_backend);

    m.def("filter_detections", &filter_detections, py::arg("raw"), py::arg("config"));

    py::enum_<PatchScaleMode>(m, "PatchScaleMode")
        .value("side", PatchScaleMode::side)
        .value("area", PatchScaleMode::area);

    py::class_<PlacementRect>(m, "PlacementRect")
        .def_readonly("center_x", &PlacementRect::center_x)
        .def_readonly("center_y", &PlacementRect::center_y)
        .def_readonly("side", &PlacementRect::side)
        .def_readonly("rect", &PlacementRect::rect);

    m.def("place_patch_geometry", &place_patch_geometry, py::arg("detection"),
          py::arg("patch_scale"), py::arg("img_h"), py::arg("img_w"),
          py::arg("mode") = PatchScaleMode::side);

    py::class_<MaskPair>(m, "MaskPair")
        .def_property_readonly(
            "patch_mask", [](const MaskPair& mp) { return mask_to_numpy(mp.patch_mask); })
        .def_property_readonly(
            "focus_mask", [](const MaskPair& mp) { return mask_to_numpy(mp.focus_mask); })
        .def_readonly("detection_index", &MaskPair::detection_index);

    m.def(
        "build_masks",
        [](int img_h, int img_w, const Detection& det, const PlacementRect& placement,
           py::object footprint) {
            if (footprint.is_none()) return build_masks(img_h, img_w, det, placement);
            const Mask fp = mask_from_numpy(footprint.cast<py::array_t<std::uint8_t>>());
            return build_masks(img_h, img_w, det, placement, &fp);
        },
        py::arg("img_h"), py::arg("img_w"), py::arg("detection"), py::arg("placement"),
        py::arg("footprint") = py::none());

    py::class_<Patch>(m, "Patch")
        .def(py::init([](int side, double fill) { return Patch(side, fill); }),
             py::arg("side"), py::arg("fill") = 0.0)
        .def_static("random", &random_patch, py::arg("side"), py::arg("seed"))
        .def_static("from_array", &patch_from_numpy, py::arg("pixels"))
        .def_readonly("side", &Patch::side)
        .def_property(
            "pixels", [](const Patch& p) { return image_to_numpy(p.pixels); },
            [](Patch& p, const py::array_t<double>& a) {
                const Patch q = patch_from_numpy(a);
                p.side = q.side;
                p.pixels = q.pixels;
            });

    py::class_<TransformRanges>(m, "TransformRanges")
        .def(py::init<>())
        .def_static("identity", &TransformRanges::identity)
        .def_readwrite("rotation_deg", &TransformRanges::rotation_deg)
        .def_readwrite("scale_jitter", &TransformRanges::scale_jitter)
        .def_readwrite("noise_amplitude", &TransformRanges::noise_amplitude)
        .def_readwrite("contrast_min", &TransformRanges::contrast_min)
        .def_readwrite("contrast_max", &TransformRanges::contrast_max)
        .def_readwrite("brightness", &TransformRanges::brightness)
        .def_readwrite("occlusion_enabled", &TransformRanges::occlusion_enabled)
        .def_readwrite("contrast_mean_anchored", &TransformRanges::contrast_mean_anchored);

    py::class_<TransformParams>(m, "TransformParams")
        .def_readonly("rotation_deg", &TransformParams::rotation_deg)
        .def_readonly("scale_jitter", &TransformParams::scale_jitter)
        .def_readonly("contrast", &TransformParams::contrast)
        .def_readonly("brightness", &TransformParams::brightness)
        .def_readonly("seed", &TransformParams::seed);

    m.def("sample_params", &sample_params, py::arg("seed"), py::arg("ranges"),
          py::arg("patch_side"));
    m.def("identity_params", &identity_params, py::arg("patch_side"));
    m.def(
        "transform_patch",
        [](const Patch& patch, const TransformParams& params, const PlacementRect& placement,
           int img_h, int img_w) {
            const WarpResult res = transform_patch(patch, params, placement, img_h, img_w);
            return py::make_tuple(image_to_numpy(res.warped), mask_to_numpy(res.footprint));
        },
        py::arg("patch"), py::arg("params"), py::arg("placement"), py::arg("img_h"),
        py::arg("img_w"));

    m.def(
        "apply_patch",
        [](const py::array_t<double>& image, const py::array_t<double>& warped,
           const py::array_t<std::uint8_t>& mask) {
            return image_to_numpy(
                apply_patch(image_from_numpy(image), image_from_numpy(warped),
                            mask_from_numpy(mask)));
        },
        py::arg("image"), py::arg("warped"), py::arg("mask"));

    py::class_<ApplyOptions>(m, "ApplyOptions")
        .def(py::init<>())
        .def_readwrite("patch_scale", &ApplyOptions::patch_scale)
        .def_readwrite("scale_mode", &ApplyOptions::scale_mode)
        .def_readwrite("transforms", &ApplyOptions::transforms)
        .def_readwrite("transform_seeds", &ApplyOptions::transform_seeds);

    py::class_<ApplyResult>(m, "ApplyResult")
        .def_property_readonly(
            "adv_image", [](const ApplyResult& r) { return image_to_numpy(r.adv_image); })
        .def_readonly("masks", &ApplyResult::masks)
        .def_readonly("placements", &ApplyResult::placements);

    m.def(
        "apply_all",
        [](const py::array_t<double>& image, const Patch& patch,
           const std::vector<Detection>& detections, const ApplyOptions& opts) {
            return apply_all(image_from_numpy(image), patch, detections, opts);
        },
        py::arg("image"), py::arg("patch"), py::arg("detections"),
        py::arg("options") = ApplyOptions{});

    py::class_<DepthModel, std::shared_ptr<DepthModel>>(m, "DepthModel")
        .def("predict",
             [](const DepthModel& model, const py::array_t<double>& image) {
                 return map_to_numpy(model.predict(image_from_numpy(image)));
             })
        .def("gradient_wrt_image",
             [](const DepthModel& model, const py::array_t<double>& image,
                const py::array_t<double>& upstream) {
                 return image_to_numpy(model.gradient_wrt_image(image_from_numpy(image),
                                                                map_from_numpy(upstream)));
             })
        .def("kind", &DepthModel::kind)
        .def("weights_checksum", &DepthModel::weights_checksum);

    py::class_<AnalyticDepthModel, DepthModel, std::shared_ptr<AnalyticDepthModel>>(
        m, "AnalyticDepthModel")
        .def(py::init<>());

    py::class_<ToyDepthModel::Options>(m, "ToyModelOptions")
        .def(py::init<>())
        .def_readwrite("learning_rate", &ToyDepthModel::Options::learning_rate)
        .def_readwrite("batch_size", &ToyDepthModel::Options::batch_size)
        .def_readwrite("augment", &ToyDepthModel::Options::augment)
        .def_readwrite("augment_pixel_noise", &ToyDepthModel::Options::augment_pixel_noise)
        .def_readwrite("augment_max_squares", &ToyDepthModel::Options::augment_max_squares)
        .def_property(
            "channels",
            [](const ToyDepthModel::Options& o) {
                return std::vector<int>(o.channels.begin(), o.channels.end());
            },
            [](ToyDepthModel::Options& o, const std::vector<int>& ch) {
                if (ch.size() != o.channels.size())
                    throw ConfigError("channels must have 5 entries");
                std::copy(ch.begin(), ch.end(), o.channels.begin());
            });

    py::class_<ToyDepthModel::PretrainReport>(m, "PretrainReport")
        .def_readonly("held_out_mae", &ToyDepthModel::PretrainReport::held_out_mae)
        .def_readonly("epochs", &ToyDepthModel::PretrainReport::epochs)
        .def_readonly("train_loss_per_epoch",
                      &ToyDepthModel::PretrainReport::train_loss_per_epoch);

    py::class_<ToyDepthModel, DepthModel, std::shared_ptr<ToyDepthModel>>(m, "ToyDepthModel")
        .def(py::init<const ToyDepthModel::Options&, std::uint64_t>(), py::arg("options"),
             py::arg("seed"))
        .def("pretrain", &ToyDepthModel::pretrain, py::arg("split"), py::arg("epochs"),
             py::arg("seed"))
        .def("mean_abs_error", &ToyDepthModel::mean_abs_error)
        .def("save", &ToyDepthModel::save)
        .def_static("load", &ToyDepthModel::load);

    py::class_<TargetDepthSpec>(m, "TargetDepthSpec")
        .def(py::init<>())
        .def_readwrite("constant_value", &TargetDepthSpec::constant_value)
        .def_readwrite("scale_factor", &TargetDepthSpec::scale_factor);

    py::class_<LossConfig>(m, "LossConfig")
        .def(py::init<>())
        .def_readwrite("alpha", &LossConfig::alpha)
        .def_readwrite("beta", &LossConfig::beta)
        .def_readwrite("use_d1", &LossConfig::use_d1)
        .def_readwrite("use_d2", &LossConfig::use_d2)
        .def_readwrite("use_tv", &LossConfig::use_tv)
        .def_readwrite("target_depth", &LossConfig::target_depth);

    m.def("loss_d1", [](const py::array_t<double>& d_t, const py::array_t<double>& d_adv,
                        const py::array_t<std::uint8_t>& m_p) {
        return loss_d1(map_from_numpy(d_t), map_from_numpy(d_adv), mask_from_numpy(m_p));
    });
    m.def("loss_d2", [](const py::array_t<double>& d_t, const py::array_t<double>& d_adv,
                        const py::array_t<std::uint8_t>& m_f,
                        const py::array_t<std::uint8_t>& m_p) {
        return loss_d2(map_from_numpy(d_t), map_from_numpy(d_adv), mask_from_numpy(m_f),
                       mask_from_numpy(m_p));
    });
    m.def("loss_depth",
          [](double l1, double l2, const LossConfig& cfg) { return loss_depth(l1, l2, cfg); },
          py::arg("l1"), py::arg("l2"), py::arg("config") = LossConfig{});
    m.def("loss_tv", &loss_tv, py::arg("patch"));
    m.def("loss_total", &loss_total, py::arg("depth_terms"), py::arg("patch"),
          py::arg("config") = LossConfig{});

    py::class_<AttackConfig>(m, "AttackConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &AttackConfig::epochs)
        .def_readwrite("learning_rate", &AttackConfig::learning_rate)
        .def_readwrite("patch_scale", &AttackConfig::patch_scale)
        .def_readwrite("patch_side", &AttackConfig::patch_side)
        .def_readwrite("batch_size", &AttackConfig::batch_size)
        .def_readwrite("seed", &AttackConfig::seed)
        .def_readwrite("loss", &AttackConfig::loss)
        .def_readwrite("transforms", &AttackConfig::transforms)
        .def_readwrite("detector", &AttackConfig::detector)
        .def_readwrite("scale_mode", &AttackConfig::scale_mode)
        .def_readwrite("checkpoint_interval", &AttackConfig::checkpoint_interval);

    py::class_<TrainingLog>(m, "TrainingLog")
        .def("to_json", &TrainingLog::to_json_string)
        .def_property_readonly("n_epochs", [](const TrainingLog& log) {
            return log.entries.size();
        });

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("patch", &TrainResult::patch)
        .def_readonly("log", &TrainResult::log);

    m.def(
        "train_patch",
        [](const DatasetSplit& data, const DepthModel& model, const AttackConfig& cfg,
           const std::string& checkpoint_dir) {
            return train_patch(data, model, cfg, checkpoint_dir);
        },
        py::arg("data"), py::arg("model"), py::arg("config"),
        py::arg("checkpoint_dir") = std::string());

    m.def("compute_ed", [](const py::array_t<double>& d, const py::array_t<double>& d_adv,
                           const py::array_t<std::uint8_t>& m_f) {
        return compute_ed(map_from_numpy(d), map_from_numpy(d_adv), mask_from_numpy(m_f));
    });
    m.def(
        "compute_ra",
        [](const py::array_t<double>& d, const py::array_t<double>& d_adv,
           const py::array_t<std::uint8_t>& m_f, double threshold) {
            return compute_ra(map_from_numpy(d), map_from_numpy(d_adv), mask_from_numpy(m_f),
                              threshold);
        },
        py::arg("d"), py::arg("d_adv"), py::arg("m_f"), py::arg("threshold") = 0.1);
    m.def("compute_mse", [](const py::array_t<double>& d, const py::array_t<double>& d_adv) {
        return compute_mse(map_from_numpy(d), map_from_numpy(d_adv));
    });

    py::class_<EvalOptions>(m, "EvalOptions")
        .def(py::init<>())
        .def_readwrite("patch_scale", &EvalOptions::patch_scale)
        .def_readwrite("scale_mode", &EvalOptions::scale_mode)
        .def_readwrite("detector", &EvalOptions::detector);

    py::class_<SceneMetrics>(m, "SceneMetrics")
        .def_readonly("scene_id", &SceneMetrics::scene_id)
        .def_readonly("e_d", &SceneMetrics::e_d)
        .def_readonly("r_a", &SceneMetrics::r_a)
        .def_readonly("mse", &SceneMetrics::mse)
        .def_readonly("e_d_ring", &SceneMetrics::e_d_ring);

    py::class_<MetricsReport>(m, "MetricsReport")
        .def_readonly("e_d", &MetricsReport::e_d)
        .def_readonly("r_a", &MetricsReport::r_a)
        .def_readonly("mse", &MetricsReport::mse)
        .def_readonly("e_d_ring", &MetricsReport::e_d_ring)
        .def_readonly("n_scenes", &MetricsReport::n_scenes)
        .def_readonly("per_scene", &MetricsReport::per_scene)
        .def("to_json", &MetricsReport::to_json_string)
        .def("to_text", &MetricsReport::to_text_table);

    m.def("evaluate_patch", &evaluate_patch, py::arg("model"), py::arg("scenes"),
          py::arg("patch"), py::arg("options") = EvalOptions{});

    py::enum_<DefenseSpec::Kind>(m, "DefenseKind")
        .value("jpeg", DefenseSpec::Kind::jpeg)
        .value("median_blur", DefenseSpec::Kind::median_blur)
        .value("gaussian_noise", DefenseSpec::Kind::gaussian_noise);

    py::class_<DefenseSpec>(m, "DefenseSpec")
        .def(py::init([](DefenseSpec::Kind kind, double parameter, std::uint64_t seed) {
                 DefenseSpec spec{kind, parameter, seed};
                 spec.validate();
                 return spec;
             }),
             py::arg("kind"), py::arg("parameter"), py::arg("seed") = 0)
        .def_static("parse", &DefenseSpec::parse)
        .def_readwrite("kind", &DefenseSpec::kind)
        .def_readwrite("parameter", &DefenseSpec::parameter)
        .def_readwrite("seed", &DefenseSpec::seed);

    m.def("apply_defense", [](const py::array_t<double>& image, const DefenseSpec& spec) {
        return image_to_numpy(apply_defense(image_from_numpy(image), spec));
    });

    py::class_<DefendedMetrics>(m, "DefendedMetrics")
        .def_readonly("e_d", &DefendedMetrics::e_d)
        .def_readonly("e_d_benign", &DefendedMetrics::e_d_benign)
        .def_readonly("n_scenes", &DefendedMetrics::n_scenes);

    m.def("evaluate_defended", &evaluate_defended, py::arg("model"), py::arg("scenes"),
          py::arg("patch"), py::arg("spec"), py::arg("options") = EvalOptions{});

    m.def("disparity_colormap", &disparity_colormap, py::arg("t"));

    m.attr("__version__") = "0.1.0";
}
