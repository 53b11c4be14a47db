#include "depthpatch/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "depthpatch/errors.hpp"
#include "depthpatch/image_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace depthpatch {

double box_iou(const Box& a, const Box& b) {
    const int ix0 = std::max(a.x_min, b.x_min);
    const int iy0 = std::max(a.y_min, b.y_min);
    const int ix1 = std::min(a.x_max, b.x_max);
    const int iy1 = std::min(a.y_max, b.y_max);
    const long long inter =
        static_cast<long long>(std::max(0, ix1 - ix0)) * std::max(0, iy1 - iy0);
    const long long uni = a.area() + b.area() - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

void validate_detection(const Detection& det, int img_h, int img_w,
                        const std::string& context) {
    const Box& b = det.box;
    if (b.x_max <= b.x_min || b.y_max <= b.y_min)
        throw DataError("degenerate box in " + context);
    if (b.x_min < 0 || b.y_min < 0 || b.x_max > img_w || b.y_max > img_h)
        throw DataError("box outside image bounds in " + context);
    if (det.objectness < 0.0 || det.objectness > 1.0)
        throw DataError("objectness outside [0,1] in " + context);
}

void validate_scene(const SceneSample& sample) {
    if (sample.image.c != 3 || sample.image.h < 64 || sample.image.w < 64)
        throw DataError("scene " + sample.id + ": image must be RGB with H,W >= 64");
    for (double x : sample.image.v)
        if (x < 0.0 || x > 1.0)
            throw DataError("scene " + sample.id + ": pixel values outside [0,1]");
    for (const auto& det : sample.detections)
        validate_detection(det, sample.image.h, sample.image.w, "scene " + sample.id);
}

namespace {

Detection parse_annotation_line(const std::string& line, const std::string& context) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError("malformed annotation line in " + context + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("box") || !j["box"].is_array() || j["box"].size() != 4)
        throw DataError("malformed annotation line in " + context +
                        ": expected {\"box\":[x0,y0,x1,y1],...}");
    Detection det;
    det.box.x_min = j["box"][0].get<int>();
    det.box.y_min = j["box"][1].get<int>();
    det.box.x_max = j["box"][2].get<int>();
    det.box.y_max = j["box"][3].get<int>();
    det.class_id = j.value("class_id", 0);
    det.objectness = j.value("objectness", 1.0);
    return det;
}

SceneSample load_scene(const fs::path& root, const std::string& id) {
    SceneSample sample;
    sample.id = id;

    const fs::path png_path = root / (id + ".png");
    const fs::path ann_path = root / (id + ".jsonl");
    if (!fs::exists(ann_path))
        throw DataError("missing annotation file for image: " + id);
    sample.image = read_png(png_path.string());

    std::ifstream ann(ann_path);
    std::string line;
    int line_no = 0;
    while (std::getline(ann, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::ostringstream ctx;
        ctx << id << ".jsonl:" << line_no;
        Detection det = parse_annotation_line(line, ctx.str());
        validate_detection(det, sample.image.h, sample.image.w, ctx.str());
        sample.detections.push_back(det);
    }

    const fs::path gt_path = root / (id + "_gt.pfm");
    if (fs::exists(gt_path)) sample.gt_disparity = read_disparity(gt_path.string());

    validate_scene(sample);
    return sample;
}

}  // namespace

DatasetSplit load_dataset(const std::string& root_str, const SplitSpec& spec) {
    const fs::path root(root_str);
    if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root_str);

    DatasetSplit split;
    if (!spec.train_ids.empty() || !spec.test_ids.empty()) {
        std::set<std::string> seen;
        for (const auto& id : spec.train_ids) {
            if (!seen.insert(id).second)
                throw DataError("duplicate id across splits: " + id);
            split.train.push_back(load_scene(root, id));
        }
        for (const auto& id : spec.test_ids) {
            if (!seen.insert(id).second)
                throw DataError("duplicate id across splits: " + id);
            split.test.push_back(load_scene(root, id));
        }
        return split;
    }

    if (spec.train_fraction < 0.0 || spec.train_fraction > 1.0)
        throw ConfigError("train_fraction must be in [0,1]");

    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.path().extension() == ".png")
            ids.push_back(entry.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw DataError("no PNG images under " + root_str);

    const size_t n_train =
        static_cast<size_t>(std::lround(spec.train_fraction * static_cast<double>(ids.size())));
    for (size_t i = 0; i < ids.size(); ++i) {
        SceneSample sample = load_scene(root, ids[i]);
        (i < n_train ? split.train : split.test).push_back(std::move(sample));
    }
    return split;
}

namespace {

void save_scene(const SceneSample& sample, const fs::path& root) {
    write_png(sample.image, (root / (sample.id + ".png")).string());
    std::ofstream ann(root / (sample.id + ".jsonl"));
    for (const auto& det : sample.detections) {
        json j;
        j["box"] = {det.box.x_min, det.box.y_min, det.box.x_max, det.box.y_max};
        j["class_id"] = det.class_id;
        j["objectness"] = det.objectness;
        ann << j.dump() << "\n";
    }
    if (sample.gt_disparity)
        write_disparity(*sample.gt_disparity, (root / (sample.id + "_gt.pfm")).string());
}

}  // namespace

void save_dataset(const DatasetSplit& split, const std::string& root_str) {
    const fs::path root(root_str);
    fs::create_directories(root);

    json manifest;
    manifest["train"] = json::array();
    manifest["test"] = json::array();
    for (const auto& s : split.train) {
        save_scene(s, root);
        manifest["train"].push_back(s.id);
    }
    for (const auto& s : split.test) {
        save_scene(s, root);
        manifest["test"].push_back(s.id);
    }
    std::ofstream mf(root / "manifest.json");
    mf << manifest.dump(2) << "\n";
}

}  // namespace depthpatch
