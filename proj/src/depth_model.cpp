#include "depthpatch/depth_model.hpp"

#include "depthpatch/errors.hpp"

namespace depthpatch {

namespace {

// Symmetric reflection: ..., 1, 0 | 0, 1, ... (edge pixel repeated).
inline int reflect(int i, int n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
    return i;
}

class GenericTape final : public DepthModel::Tape {
public:
    GenericTape(const DepthModel& model, Image image)
        : model_(model), image_(std::move(image)), out_(model.predict(image_)) {}
    const DisparityMap& output() const override { return out_; }
    Image backward(const DisparityMap& upstream) const override {
        return model_.gradient_wrt_image(image_, upstream);
    }

private:
    const DepthModel& model_;
    Image image_;
    DisparityMap out_;
};

}  // namespace

std::unique_ptr<DepthModel::Tape> DepthModel::forward_with_tape(const Image& image) const {
    return std::make_unique<GenericTape>(*this, image);
}

DisparityMap AnalyticDepthModel::predict(const Image& image) const {
    if (image.c != 3) throw DataError("analytic model: expected RGB image");
    const int H = image.h, W = image.w;
    const int r = kKernel / 2;
    const double inv_area = 1.0 / (kKernel * kKernel);

    DisparityMap lum(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            lum.at(y, x) = kLumR * image.at(0, y, x) + kLumG * image.at(1, y, x) +
                           kLumB * image.at(2, y, x);

    DisparityMap out(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    acc += lum.at(reflect(y + dy, H), reflect(x + dx, W));
            out.at(y, x) = acc * inv_area;
        }
    return out;
}

Image AnalyticDepthModel::gradient_wrt_image(const Image& image,
                                             const DisparityMap& upstream) const {
    if (upstream.h != image.h || upstream.w != image.w)
        throw DataError("analytic model: upstream shape mismatch");
    const int H = image.h, W = image.w;
    const int r = kKernel / 2;
    const double inv_area = 1.0 / (kKernel * kKernel);

    // Scatter through the blur (its own transpose up to the reflection map),
    // then split by the luminance weights.
    DisparityMap g_lum(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double u = upstream.at(y, x) * inv_area;
            if (u == 0.0) continue;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    g_lum.at(reflect(y + dy, H), reflect(x + dx, W)) += u;
        }

    Image grad(3, H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double g = g_lum.at(y, x);
            grad.at(0, y, x) = kLumR * g;
            grad.at(1, y, x) = kLumG * g;
            grad.at(2, y, x) = kLumB * g;
        }
    return grad;
}

}  // namespace depthpatch
