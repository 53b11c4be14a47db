#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "depthpatch/depth_model.hpp"
#include "depthpatch/errors.hpp"
#include "depthpatch/rng.hpp"
#include "depthpatch/synthetic.hpp"
#include "depthpatch/toy_model.hpp"

using namespace depthpatch;

namespace {

Image random_image(int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    Image img(3, h, w);
    Rng rng(seed);
    for (double& x : img.v) x = rng.uniform(lo, hi);
    return img;
}

// Independent 5x5 mean filter with symmetric padding, written as plain loops.
DisparityMap naive_blur_lum(const Image& img) {
    const int H = img.h, W = img.w;
    auto reflect = [](int i, int n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
        return i;
    };
    DisparityMap out(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int dy = -2; dy <= 2; ++dy)
                for (int dx = -2; dx <= 2; ++dx) {
                    const int yy = reflect(y + dy, H), xx = reflect(x + dx, W);
                    acc += 0.299 * img.at(0, yy, xx) + 0.587 * img.at(1, yy, xx) +
                           0.114 * img.at(2, yy, xx);
                }
            out.at(y, x) = acc / 25.0;
        }
    return out;
}

}  // namespace

TEST_CASE("analytic model") {
    AnalyticDepthModel model;

    SUBCASE("constant gray maps to itself") {
        Image img(3, 32, 32, 0.37);
        const DisparityMap d = model.predict(img);
        for (double x : d.v) CHECK(x == doctest::Approx(0.37).epsilon(1e-12));
    }

    SUBCASE("pure red gives the red luminance weight") {
        Image img(3, 32, 32, 0.0);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) img.at(0, y, x) = 1.0;
        const DisparityMap d = model.predict(img);
        for (double x : d.v) CHECK(x == doctest::Approx(0.299).epsilon(1e-12));
    }

    SUBCASE("random image matches the naive convolution oracle") {
        const Image img = random_image(64, 64, 21);
        const DisparityMap d = model.predict(img);
        const DisparityMap oracle = naive_blur_lum(img);
        double max_diff = 0.0;
        for (size_t i = 0; i < d.v.size(); ++i)
            max_diff = std::max(max_diff, std::abs(d.v[i] - oracle.v[i]));
        CHECK(max_diff < 1e-6);
    }

    SUBCASE("single-pixel upstream reproduces the kernel row") {
        const Image img = random_image(32, 32, 22);
        DisparityMap upstream(32, 32, 0.0);
        upstream.at(16, 16) = 1.0;
        const Image grad = model.gradient_wrt_image(img, upstream);
        for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx) {
                CHECK(grad.at(0, 16 + dy, 16 + dx) ==
                      doctest::Approx(0.299 / 25.0).epsilon(1e-12));
                CHECK(grad.at(1, 16 + dy, 16 + dx) ==
                      doctest::Approx(0.587 / 25.0).epsilon(1e-12));
            }
        CHECK(grad.at(0, 10, 10) == 0.0);
    }

    SUBCASE("zero upstream gives zero gradient") {
        const Image img = random_image(32, 32, 23);
        const DisparityMap upstream(32, 32, 0.0);
        const Image grad = model.gradient_wrt_image(img, upstream);
        for (double g : grad.v) CHECK(g == 0.0);
    }

    SUBCASE("vjp matches finite differences of a weighted sum") {
        const Image img = random_image(32, 32, 24, 0.1, 0.9);
        DisparityMap upstream(32, 32);
        Rng rng(25);
        for (double& u : upstream.v) u = rng.uniform(-1.0, 1.0);
        const Image grad = model.gradient_wrt_image(img, upstream);

        auto probe = [&](const Image& im) {
            const DisparityMap d = model.predict(im);
            double s = 0.0;
            for (size_t i = 0; i < d.v.size(); ++i) s += d.v[i] * upstream.v[i];
            return s;
        };
        const double eps = 1e-3;
        for (int trial = 0; trial < 20; ++trial) {
            const int ch = rng.uniform_int(0, 2);
            const int y = rng.uniform_int(0, 31);
            const int x = rng.uniform_int(0, 31);
            Image plus = img, minus = img;
            plus.at(ch, y, x) += eps;
            minus.at(ch, y, x) -= eps;
            const double fd = (probe(plus) - probe(minus)) / (2.0 * eps);
            const double an = grad.at(ch, y, x);
            const double rel =
                std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-9});
            CHECK(rel < 1e-3);
        }
    }
}

TEST_CASE("toy model basics") {
    ToyDepthModel::Options opts;
    const ToyDepthModel model(opts, 77);

    SUBCASE("untrained output stays in (0,1)") {
        const Image img = random_image(64, 64, 31);
        const DisparityMap d = model.predict(img);
        REQUIRE(d.h == 64);
        REQUIRE(d.w == 64);
        for (double x : d.v) {
            CHECK(x > 0.0);
            CHECK(x < 1.0);
        }
    }

    SUBCASE("same seed gives identical weights, different seed differs") {
        const ToyDepthModel again(opts, 77);
        CHECK(again.weights_checksum() == model.weights_checksum());
        const ToyDepthModel other(opts, 78);
        CHECK(other.weights_checksum() != model.weights_checksum());
    }

    SUBCASE("prediction is deterministic and repeatable") {
        const Image img = random_image(64, 64, 32);
        const DisparityMap a = model.predict(img);
        const DisparityMap b = model.predict(img);
        CHECK(a.v == b.v);
    }

    SUBCASE("input gradient matches finite differences") {
        const Image img = random_image(64, 64, 33, 0.1, 0.9);
        DisparityMap upstream(64, 64);
        Rng rng(34);
        for (double& u : upstream.v) u = rng.uniform(-1.0, 1.0);
        const Image grad = model.gradient_wrt_image(img, upstream);

        auto probe = [&](const Image& im) {
            const DisparityMap d = model.predict(im);
            double s = 0.0;
            for (size_t i = 0; i < d.v.size(); ++i) s += d.v[i] * upstream.v[i];
            return s;
        };
        // The net is nonlinear enough that a 1e-3 step leaves the central
        // difference's own validity range; 1e-5 keeps the oracle honest.
        const double eps = 1e-5;
        int bad = 0;
        for (int trial = 0; trial < 20; ++trial) {
            const int ch = rng.uniform_int(0, 2);
            const int y = rng.uniform_int(0, 63);
            const int x = rng.uniform_int(0, 63);
            Image plus = img, minus = img;
            plus.at(ch, y, x) += eps;
            minus.at(ch, y, x) -= eps;
            const double fd = (probe(plus) - probe(minus)) / (2.0 * eps);
            const double an = grad.at(ch, y, x);
            const double rel =
                std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-9});
            if (rel >= 1e-3) ++bad;
        }
        CHECK(bad == 0);
    }

    SUBCASE("forward_with_tape agrees with predict and gradient_wrt_image") {
        const Image img = random_image(64, 64, 35);
        const auto tape = model.forward_with_tape(img);
        CHECK(tape->output().v == model.predict(img).v);
        DisparityMap upstream(64, 64, 1.0);
        CHECK(tape->backward(upstream).v == model.gradient_wrt_image(img, upstream).v);
    }
}

TEST_CASE("toy model output responds to inputs far outside the local window") {
    // Focus-ring pixels sit tens of pixels from the patch; their gradients
    // must reach the patch through the strided bottleneck path. Probe an
    // output 30 px away from the input block.
    ToyDepthModel::Options opts;
    const ToyDepthModel model(opts, 123);
    const Image img = random_image(64, 64, 7, 0.2, 0.8);
    DisparityMap upstream(64, 64, 0.0);
    upstream.at(50, 50) = 1.0;
    const Image grad = model.gradient_wrt_image(img, upstream);
    double far_mass = 0.0;
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 12; y < 22; ++y)
            for (int x = 12; x < 22; ++x) far_mass += std::abs(grad.at(ch, y, x));
    CHECK(far_mass > 0.0);
}

TEST_CASE("toy model pretraining learns the synthetic size-depth rule") {
    SceneSpec spec;
    const DatasetSplit split = generate_synthetic_scenes(60, 2024, spec);

    ToyDepthModel::Options opts;
    opts.augment = false;  // clean pretraining converges fastest at unit scale
    ToyDepthModel model(opts, 5);
    const auto report = model.pretrain(split, 30, 5);
    CHECK(report.held_out_mae <= 0.15);

    // Larger objects must read closer than small ones after training.
    double large_sum = 0.0, small_sum = 0.0;
    int large_n = 0, small_n = 0;
    for (const auto& scene : split.test) {
        const DisparityMap d = model.predict(scene.image);
        for (const auto& det : scene.detections) {
            double mean_disp = 0.0;
            int n = 0;
            for (int y = det.box.y_min; y < det.box.y_max; ++y)
                for (int x = det.box.x_min; x < det.box.x_max; ++x) {
                    mean_disp += d.at(y, x);
                    ++n;
                }
            mean_disp /= n;
            if (det.box.area() >= 30 * 30) {
                large_sum += mean_disp;
                ++large_n;
            } else if (det.box.area() <= 18 * 18) {
                small_sum += mean_disp;
                ++small_n;
            }
        }
    }
    if (large_n > 0 && small_n > 0)
        CHECK(large_sum / large_n > small_sum / small_n);

    SUBCASE("weights survive a save/load round trip") {
        const std::string path =
            (std::filesystem::temp_directory_path() / "depthpatch_toy.bin").string();
        model.save(path);
        const ToyDepthModel back = ToyDepthModel::load(path);
        CHECK(back.weights_checksum() == model.weights_checksum());
        const Image img = random_image(64, 64, 40);
        CHECK(back.predict(img).v == model.predict(img).v);
    }
}

TEST_CASE("pretraining is deterministic in the seed") {
    SceneSpec spec;
    const DatasetSplit split = generate_synthetic_scenes(16, 88, spec);
    ToyDepthModel::Options opts;
    opts.augment = false;

    // Three epochs may legitimately end above the convergence gate; the
    // weights are still fully updated when that throws.
    auto run = [&](ToyDepthModel& m) {
        try {
            m.pretrain(split, 3, 9);
        } catch (const NumericError&) {
        }
    };
    ToyDepthModel a(opts, 9), b(opts, 9);
    run(a);
    run(b);
    CHECK(a.weights_checksum() == b.weights_checksum());
}
