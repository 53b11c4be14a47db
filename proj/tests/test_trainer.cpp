#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "depthpatch/depth_model.hpp"
#include "depthpatch/errors.hpp"
#include "depthpatch/synthetic.hpp"
#include "depthpatch/toy_model.hpp"
#include "depthpatch/trainer.hpp"

using namespace depthpatch;
namespace fs = std::filesystem;

namespace {

DatasetSplit tiny_dataset(int n, std::uint64_t seed) {
    SceneSpec spec;
    spec.min_objects = 1;
    spec.max_objects = 2;
    return generate_synthetic_scenes(n, seed, spec);
}

AttackConfig tiny_config() {
    AttackConfig cfg;
    cfg.epochs = 3;
    cfg.patch_side = 8;
    cfg.patch_scale = 0.2;
    cfg.batch_size = 2;
    cfg.seed = 31337;
    return cfg;
}

}  // namespace

TEST_CASE("epochs=0 returns the seeded random init unchanged") {
    const DatasetSplit data = tiny_dataset(4, 1);
    const AnalyticDepthModel model;
    AttackConfig cfg = tiny_config();
    cfg.epochs = 0;

    const TrainResult res = train_patch(data, model, cfg);
    const Patch expected = random_patch(cfg.patch_side, cfg.seed);
    CHECK(res.patch.pixels.v == expected.pixels.v);
    CHECK(res.log.entries.empty());
}

TEST_CASE("training is deterministic in the config") {
    const DatasetSplit data = tiny_dataset(6, 2);
    const AnalyticDepthModel model;
    const AttackConfig cfg = tiny_config();

    const TrainResult a = train_patch(data, model, cfg);
    const TrainResult b = train_patch(data, model, cfg);
    CHECK(a.patch.pixels.v == b.patch.pixels.v);
    REQUIRE(a.log.entries.size() == b.log.entries.size());
    for (size_t i = 0; i < a.log.entries.size(); ++i)
        CHECK(a.log.entries[i].mean_total == b.log.entries[i].mean_total);
}

TEST_CASE("patch stays clamped after every optimizer step") {
    const DatasetSplit data = tiny_dataset(4, 3);
    const AnalyticDepthModel model;
    AttackConfig cfg = tiny_config();
    cfg.epochs = 4;

    int observed = 0;
    const TrainResult res = train_patch(
        data, model, cfg, "", nullptr,
        [&](int, int, const Patch& p) {
            CHECK(p.pixels.min() >= 0.0);
            CHECK(p.pixels.max() <= 1.0);
            ++observed;
        });
    CHECK(observed > 0);
    CHECK(res.patch.pixels.min() >= 0.0);
    CHECK(res.patch.pixels.max() <= 1.0);
}

TEST_CASE("model weights are untouched by training") {
    const DatasetSplit data = tiny_dataset(4, 4);
    ToyDepthModel::Options opts;
    const ToyDepthModel model(opts, 5);
    const std::uint64_t before = model.weights_checksum();

    AttackConfig cfg = tiny_config();
    cfg.epochs = 1;
    train_patch(data, model, cfg);
    CHECK(model.weights_checksum() == before);
}

TEST_CASE("scenes without detections are skipped; all skipped is an error") {
    DatasetSplit data = tiny_dataset(3, 5);
    const AnalyticDepthModel model;
    AttackConfig cfg = tiny_config();
    cfg.epochs = 1;

    SUBCASE("partial skip still trains") {
        data.train[0].detections.clear();
        const TrainResult res = train_patch(data, model, cfg);
        CHECK_FALSE(res.log.entries.empty());
    }

    SUBCASE("all skipped throws") {
        for (auto& s : data.train) s.detections.clear();
        try {
            train_patch(data, model, cfg);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("no trainable detections") !=
                  std::string::npos);
        }
    }

    SUBCASE("class filter can exclude everything") {
        cfg.detector.target_classes = {42};
        CHECK_THROWS_AS(train_patch(data, model, cfg), DataError);
    }
}

TEST_CASE("checkpointing and resume") {
    const DatasetSplit data = tiny_dataset(5, 6);
    const AnalyticDepthModel model;
    const fs::path dir = fs::temp_directory_path() / "depthpatch_ckpt_test";
    fs::remove_all(dir);

    AttackConfig cfg = tiny_config();
    cfg.epochs = 6;
    cfg.checkpoint_interval = 3;

    const TrainResult full = train_patch(data, model, cfg, dir.string());
    REQUIRE(full.log.checkpoints.count(0) == 1);
    REQUIRE(full.log.checkpoints.count(3) == 1);
    REQUIRE(full.log.checkpoints.count(6) == 1);

    SUBCASE("checkpoint at epoch 0 equals the initialization") {
        const TrainerState init = resume(full.log.checkpoints.at(0));
        const Patch expected = random_patch(cfg.patch_side, cfg.seed);
        CHECK(init.patch.pixels.v == expected.pixels.v);
        CHECK(init.next_epoch == 0);
        CHECK(init.adam.t == 0);
    }

    SUBCASE("resume at epoch 3 and continue matches the straight run") {
        const TrainerState mid = resume(full.log.checkpoints.at(3));
        CHECK(mid.next_epoch == 3);
        const TrainResult continued = train_patch(data, model, cfg, "", &mid);
        CHECK(continued.patch.pixels.v == full.patch.pixels.v);
    }

    SUBCASE("resume restores the optimizer moments exactly") {
        const TrainerState mid = resume(full.log.checkpoints.at(3));
        TrainerState reparsed = resume(full.log.checkpoints.at(3));
        CHECK(mid.adam.m == reparsed.adam.m);
        CHECK(mid.adam.v == reparsed.adam.v);
        CHECK(mid.adam.t == reparsed.adam.t);
        CHECK(mid.adam.t > 0);
    }

    SUBCASE("resume from a missing file throws") {
        CHECK_THROWS_AS(resume((dir / "nope.json").string()), DataError);
    }

    SUBCASE("corrupt checkpoint names the last valid snapshot") {
        const fs::path corrupt = dir / "ckpt_epoch99999.json";
        std::ofstream(corrupt) << "{ not json";
        try {
            resume(corrupt.string());
            FAIL("expected DataError");
        } catch (const DataError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("last valid snapshot: epoch 6") != std::string::npos);
        }
    }
}

TEST_CASE("training log records one entry per epoch") {
    const DatasetSplit data = tiny_dataset(4, 7);
    const AnalyticDepthModel model;
    AttackConfig cfg = tiny_config();
    cfg.epochs = 5;
    const TrainResult res = train_patch(data, model, cfg);
    REQUIRE(res.log.entries.size() == 5);
    for (int e = 0; e < 5; ++e) {
        CHECK(res.log.entries[e].epoch == e);
        CHECK(res.log.entries[e].mean_total >= 0.0);
        CHECK(res.log.entries[e].wall_seconds >= 0.0);
    }
    const std::string json_text = res.log.to_json_string();
    CHECK(json_text.find("mean_total") != std::string::npos);
}

TEST_CASE("invalid attack configs are rejected with the field named") {
    AttackConfig cfg = tiny_config();
    cfg.learning_rate = 0.0;
    try {
        cfg.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
    }

    cfg = tiny_config();
    cfg.patch_scale = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.epochs = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
