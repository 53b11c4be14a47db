#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "depthpatch/errors.hpp"
#include "depthpatch/image_io.hpp"
#include "depthpatch/rng.hpp"
#include "depthpatch/scene.hpp"
#include "depthpatch/synthetic.hpp"

using namespace depthpatch;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("depthpatch_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("pfm round trip is exact") {
    const fs::path dir = temp_dir("pfm");

    SUBCASE("constant map") {
        DisparityMap m(16, 16, 0.5);
        write_disparity(m, (dir / "c.pfm").string());
        const DisparityMap back = read_disparity((dir / "c.pfm").string());
        REQUIRE(back.h == 16);
        REQUIRE(back.w == 16);
        for (size_t i = 0; i < m.v.size(); ++i) CHECK(back.v[i] == m.v[i]);
    }

    SUBCASE("1x1 zero map") {
        DisparityMap m(1, 1, 0.0);
        write_disparity(m, (dir / "z.pfm").string());
        CHECK(read_disparity((dir / "z.pfm").string()).at(0, 0) == 0.0);
    }

    SUBCASE("random float32-valued 64x64 map") {
        Rng rng(7);
        DisparityMap m(64, 64);
        for (double& x : m.v) x = static_cast<float>(rng.next_double());
        write_disparity(m, (dir / "r.pfm").string());
        const DisparityMap back = read_disparity((dir / "r.pfm").string());
        double max_diff = 0.0;
        for (size_t i = 0; i < m.v.size(); ++i)
            max_diff = std::max(max_diff, std::abs(back.v[i] - m.v[i]));
        CHECK(max_diff == 0.0);
    }

    SUBCASE("NaN and Inf are rejected") {
        DisparityMap m(4, 4, 0.1);
        m.at(1, 1) = std::nan("");
        CHECK_THROWS_AS(write_disparity(m, (dir / "bad.pfm").string()), DataError);
        m.at(1, 1) = INFINITY;
        CHECK_THROWS_AS(write_disparity(m, (dir / "bad.pfm").string()), DataError);
    }
}

TEST_CASE("png round trip is exact to within 1/255") {
    const fs::path dir = temp_dir("png");
    Rng rng(11);
    Image img(3, 64, 64);
    for (double& x : img.v) x = rng.next_double();
    write_png(img, (dir / "img.png").string());
    const Image back = read_png((dir / "img.png").string());
    REQUIRE(back.h == 64);
    REQUIRE(back.w == 64);
    double max_diff = 0.0;
    for (size_t i = 0; i < img.v.size(); ++i)
        max_diff = std::max(max_diff, std::abs(back.v[i] - img.v[i]));
    CHECK(max_diff <= 1.0 / 255.0);
}

TEST_CASE("dataset split arithmetic and round trip") {
    SceneSpec spec;
    spec.train_fraction = 0.8;
    const DatasetSplit split = generate_synthetic_scenes(10, 42, spec);
    CHECK(split.train.size() == 8);
    CHECK(split.test.size() == 2);

    const fs::path dir = temp_dir("dataset");
    save_dataset(split, dir.string());

    SplitSpec load_spec;
    load_spec.train_fraction = 0.8;
    const DatasetSplit back = load_dataset(dir.string(), load_spec);
    REQUIRE(back.train.size() == 8);
    REQUIRE(back.test.size() == 2);

    // Pixels survive the 8-bit container to within one quantization step.
    double max_diff = 0.0;
    for (size_t s = 0; s < split.train.size(); ++s)
        for (size_t i = 0; i < split.train[s].image.v.size(); ++i)
            max_diff = std::max(max_diff, std::abs(split.train[s].image.v[i] -
                                                   back.train[s].image.v[i]));
    CHECK(max_diff <= 1.0 / 255.0);

    // Detections and ground truth round trip exactly.
    for (size_t s = 0; s < split.train.size(); ++s) {
        REQUIRE(back.train[s].detections.size() == split.train[s].detections.size());
        for (size_t k = 0; k < split.train[s].detections.size(); ++k) {
            CHECK(back.train[s].detections[k].box.x_min ==
                  split.train[s].detections[k].box.x_min);
            CHECK(back.train[s].detections[k].objectness ==
                  split.train[s].detections[k].objectness);
        }
        REQUIRE(back.train[s].gt_disparity.has_value());
        for (size_t i = 0; i < split.train[s].gt_disparity->v.size(); ++i)
            CHECK(back.train[s].gt_disparity->v[i] ==
                  static_cast<float>(split.train[s].gt_disparity->v[i]));
    }
}

TEST_CASE("load_dataset rejects bad annotations") {
    const fs::path dir = temp_dir("badann");
    Image img(3, 64, 64, 0.5);
    write_png(img, (dir / "a.png").string());

    SUBCASE("missing annotation file names the image") {
        try {
            load_dataset(dir.string(), SplitSpec{});
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find('a') != std::string::npos);
        }
    }

    SUBCASE("degenerate box") {
        std::ofstream(dir / "a.jsonl")
            << R"({"box":[10,10,10,20],"class_id":0,"objectness":1.0})" << "\n";
        try {
            load_dataset(dir.string(), SplitSpec{});
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("degenerate box") != std::string::npos);
        }
    }

    SUBCASE("box outside bounds") {
        std::ofstream(dir / "a.jsonl")
            << R"({"box":[10,10,90,20],"class_id":0,"objectness":1.0})" << "\n";
        CHECK_THROWS_AS(load_dataset(dir.string(), SplitSpec{}), DataError);
    }

    SUBCASE("malformed JSON line") {
        std::ofstream(dir / "a.jsonl") << "not json\n";
        CHECK_THROWS_AS(load_dataset(dir.string(), SplitSpec{}), DataError);
    }
}

TEST_CASE("synthetic generation is deterministic in (n, seed, spec)") {
    SceneSpec spec;
    const DatasetSplit a = generate_synthetic_scenes(20, 123, spec);
    const DatasetSplit b = generate_synthetic_scenes(20, 123, spec);
    REQUIRE(a.train.size() == b.train.size());
    for (size_t s = 0; s < a.train.size(); ++s) {
        CHECK(a.train[s].image.v == b.train[s].image.v);
        CHECK(a.train[s].gt_disparity->v == b.train[s].gt_disparity->v);
    }

    const DatasetSplit c = generate_synthetic_scenes(20, 124, spec);
    bool any_diff = false;
    for (size_t s = 0; s < a.train.size() && !any_diff; ++s)
        any_diff = a.train[s].image.v != c.train[s].image.v;
    CHECK(any_diff);
}

TEST_CASE("every synthetic sample has at least one valid detection") {
    SceneSpec spec;
    const DatasetSplit split = generate_synthetic_scenes(100, 9, spec);
    auto check_scene = [&](const SceneSample& s) {
        CHECK(s.detections.size() >= 1);
        for (const auto& det : s.detections) {
            CHECK(det.box.x_min >= 0);
            CHECK(det.box.y_min >= 0);
            CHECK(det.box.x_max <= s.image.w);
            CHECK(det.box.y_max <= s.image.h);
            CHECK(det.box.x_min < det.box.x_max);
            CHECK(det.box.y_min < det.box.y_max);
        }
        for (double x : s.image.v) {
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
        }
    };
    for (const auto& s : split.train) check_scene(s);
    for (const auto& s : split.test) check_scene(s);
}

TEST_CASE("synthetic disparity grows with object size") {
    SceneSpec spec;
    spec.min_object_size = 10;
    spec.max_object_size = 40;
    const DatasetSplit split = generate_synthetic_scenes(60, 5, spec);

    // Every object pixel follows the documented area rule, and in particular
    // a 40x40 object reads closer than a 10x10 one.
    const double max_area = 40.0 * 40.0;
    double disp_smallest = 2.0, disp_largest = -1.0;
    long long area_smallest = 1 << 30, area_largest = 0;
    for (const auto& scene : split.train)
        for (const auto& det : scene.detections) {
            const double disp = scene.gt_disparity->at(det.box.y_min, det.box.x_min);
            const double expected = 0.2 + 0.6 * (static_cast<double>(det.box.area()) / max_area);
            CHECK(disp == doctest::Approx(expected).epsilon(1e-12));
            if (det.box.area() < area_smallest) {
                area_smallest = det.box.area();
                disp_smallest = disp;
            }
            if (det.box.area() > area_largest) {
                area_largest = det.box.area();
                disp_largest = disp;
            }
        }
    REQUIRE(area_largest > area_smallest);
    CHECK(disp_largest > disp_smallest);
}

TEST_CASE("synthetic generator rejects oversized objects") {
    SceneSpec spec;
    spec.max_object_size = 100;  // image is 64
    CHECK_THROWS_AS(generate_synthetic_scenes(2, 1, spec), ConfigError);
}
