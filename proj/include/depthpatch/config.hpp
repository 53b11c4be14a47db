#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "depthpatch/synthetic.hpp"
#include "depthpatch/toy_model.hpp"
#include "depthpatch/trainer.hpp"

namespace depthpatch {

struct DatasetConfig {
    std::string root;  // load from disk when set; otherwise generate
    double train_fraction = 0.8;
    int n_scenes = 250;
    SceneSpec scene_spec;
};

struct ModelConfig {
    std::string kind = "toy";  // "toy" or "analytic"
    std::string path;          // trained weights; empty = pretrain on the fly
    ToyDepthModel::Options toy;
    int pretrain_epochs = 80;
};

// One JSON file drives every command; CLI flags override single fields.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "runs/out";
    DatasetConfig dataset;
    ModelConfig model;
    AttackConfig attack;

    std::vector<int> jpeg_qualities = {90, 70, 50, 30};
    std::vector<int> median_kernels = {5, 10, 15, 20};
    std::vector<double> noise_sigmas = {0.01, 0.02, 0.05, 0.1};
    std::vector<double> sweep_scales = {0.1, 0.2, 0.3};

    void validate() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text);
std::string run_config_to_json(const RunConfig& cfg);

// FNV-1a of the canonical serialized config; recorded in every artifact.
std::uint64_t config_hash(const RunConfig& cfg);
std::string hash_hex(std::uint64_t h);

}  // namespace depthpatch
