#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <vector>

namespace depthpatch {

// Planar CHW container of doubles. Images are c=3, single-channel fields c=1.
// All in-memory pixel math runs in double; 8-bit / float32 conversions happen
// only at the file-format boundary.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_, double fill = 0.0)
        : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, fill) {}

    double& at(int ch, int y, int x) {
        assert(ch >= 0 && ch < c && y >= 0 && y < h && x >= 0 && x < w);
        return v[(static_cast<size_t>(ch) * h + y) * w + x];
    }
    const double& at(int ch, int y, int x) const {
        assert(ch >= 0 && ch < c && y >= 0 && y < h && x >= 0 && x < w);
        return v[(static_cast<size_t>(ch) * h + y) * w + x];
    }

    size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }
    void clamp01() {
        for (double& x : v) x = std::clamp(x, 0.0, 1.0);
    }
    double min() const { return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end()); }
    double max() const { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }
};

using Image = Tensor;  // c == 3, values in [0,1]

// Normalized disparity field in [0,1]; 0 is the farthest point.
struct DisparityMap {
    int h = 0, w = 0;
    std::vector<double> v;

    DisparityMap() = default;
    DisparityMap(int h_, int w_, double fill = 0.0)
        : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, fill) {}

    double& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    size_t size() const { return v.size(); }
};

// Binary H×W mask.
struct Mask {
    int h = 0, w = 0;
    std::vector<std::uint8_t> v;

    Mask() = default;
    Mask(int h_, int w_, std::uint8_t fill = 0)
        : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, fill) {}

    std::uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    std::uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    size_t size() const { return v.size(); }

    long long sum() const {
        long long s = 0;
        for (auto b : v) s += b;
        return s;
    }
};

}  // namespace depthpatch
