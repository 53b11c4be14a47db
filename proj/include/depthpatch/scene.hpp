#pragma once

#include <optional>
#include <string>
#include <vector>

#include "depthpatch/tensor.hpp"

namespace depthpatch {

// Axis-aligned box in integer pixels, half-open on neither side:
// the interior covers columns [x_min, x_max) and rows [y_min, y_max).
struct Box {
    int x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    int width() const { return x_max - x_min; }
    int height() const { return y_max - y_min; }
    long long area() const { return static_cast<long long>(width()) * height(); }
};

double box_iou(const Box& a, const Box& b);

struct Detection {
    Box box;
    int class_id = 0;
    double objectness = 1.0;
};

// Validates a detection against an image of the given size; throws DataError.
void validate_detection(const Detection& det, int img_h, int img_w,
                        const std::string& context);

struct SceneSample {
    std::string id;
    Image image;  // [0,1], H and W >= 64
    std::vector<Detection> detections;
    // Present for synthetic scenes; used to pretrain the toy depth model.
    std::optional<DisparityMap> gt_disparity;
};

void validate_scene(const SceneSample& sample);

struct DatasetSplit {
    std::vector<SceneSample> train;
    std::vector<SceneSample> test;
};

// Either a train fraction or explicit id lists.
struct SplitSpec {
    double train_fraction = 0.8;
    std::vector<std::string> train_ids;  // when non-empty, id lists win
    std::vector<std::string> test_ids;
};

// On-disk layout: <root>/<id>.png, <root>/<id>.jsonl (one detection per
// line: {"box":[x_min,y_min,x_max,y_max],"class_id":..,"objectness":..}),
// optional <root>/<id>_gt.pfm, optional <root>/manifest.json with id lists.
DatasetSplit load_dataset(const std::string& root, const SplitSpec& spec);
void save_dataset(const DatasetSplit& split, const std::string& root);

}  // namespace depthpatch
