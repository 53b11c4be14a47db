#include "depthpatch/transform.hpp"

#include <algorithm>
#include <cmath>

#include "depthpatch/errors.hpp"
#include "depthpatch/rng.hpp"

namespace depthpatch {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Patch random_patch(int side, std::uint64_t seed) {
    if (side < 2) throw ConfigError("patch side must be >= 2");
    Patch p(side);
    Rng rng(hash_combine(seed, hash_str("patch-init")));
    for (double& x : p.pixels.v) x = rng.next_double();
    return p;
}

void TransformRanges::validate() const {
    if (rotation_deg < 0.0 || rotation_deg > 20.0)
        throw ConfigError("transforms.rotation_deg must be in [0,20]");
    if (scale_jitter < 0.0 || scale_jitter > 0.1)
        throw ConfigError("transforms.scale_jitter must be in [0,0.1]");
    if (noise_amplitude < 0.0 || noise_amplitude > 0.1)
        throw ConfigError("transforms.noise_amplitude must be in [0,0.1]");
    if (contrast_min < 0.8 || contrast_max > 1.2 || contrast_min > contrast_max)
        throw ConfigError("transforms.contrast range must lie within [0.8,1.2]");
    if (brightness < 0.0 || brightness > 0.1)
        throw ConfigError("transforms.brightness must be in [0,0.1]");
    if (occlusion_area_frac < 0.0 || occlusion_area_frac > 0.1)
        throw ConfigError("transforms.occlusion_area_frac must be in [0,0.1]");
}

TransformRanges TransformRanges::identity() {
    TransformRanges r;
    r.rotation_deg = 0.0;
    r.scale_jitter = 0.0;
    r.noise_amplitude = 0.0;
    r.contrast_min = r.contrast_max = 1.0;
    r.brightness = 0.0;
    r.occlusion_enabled = false;
    return r;
}

TransformParams sample_params(std::uint64_t seed, const TransformRanges& ranges,
                              int patch_side) {
    ranges.validate();
    Rng rng(seed);
    TransformParams p;
    p.seed = seed;
    p.rotation_deg = rng.uniform(-ranges.rotation_deg, ranges.rotation_deg);
    p.scale_jitter = rng.uniform(1.0 - ranges.scale_jitter, 1.0 + ranges.scale_jitter);
    p.contrast = rng.uniform(ranges.contrast_min, ranges.contrast_max);
    p.brightness = rng.uniform(-ranges.brightness, ranges.brightness);
    p.contrast_mean_anchored = ranges.contrast_mean_anchored;
    p.noise = Tensor(3, patch_side, patch_side);
    if (ranges.noise_amplitude > 0.0)
        for (double& x : p.noise.v)
            x = rng.uniform(-ranges.noise_amplitude, ranges.noise_amplitude);
    if (ranges.occlusion_enabled) {
        OcclusionRect occ;
        occ.fw = rng.uniform(0.05, 0.32);
        occ.fh = rng.uniform(0.05, 0.32);
        const double area = occ.fw * occ.fh;
        if (area > ranges.occlusion_area_frac) {
            const double s = std::sqrt(ranges.occlusion_area_frac / area);
            occ.fw *= s;
            occ.fh *= s;
        }
        occ.fx = rng.uniform(0.0, 1.0 - occ.fw);
        occ.fy = rng.uniform(0.0, 1.0 - occ.fh);
        p.occlusion = occ;
    }
    return p;
}

TransformParams identity_params(int patch_side) {
    TransformParams p;
    p.noise = Tensor(3, patch_side, patch_side);
    return p;
}

namespace {

// Color chain shared by forward and VJP: contrast, brightness, noise, clamp.
Tensor color_adjust(const Patch& patch, const TransformParams& params, Tensor* pre_clamp) {
    const int S = patch.side;
    Tensor out(3, S, S);
    double means[3] = {0.0, 0.0, 0.0};
    if (params.contrast_mean_anchored) {
        for (int ch = 0; ch < 3; ++ch) {
            double acc = 0.0;
            for (int vy = 0; vy < S; ++vy)
                for (int vx = 0; vx < S; ++vx) acc += patch.pixels.at(ch, vy, vx);
            means[ch] = acc / (static_cast<double>(S) * S);
        }
    }
    for (int ch = 0; ch < 3; ++ch)
        for (int vy = 0; vy < S; ++vy)
            for (int vx = 0; vx < S; ++vx) {
                const double p = patch.pixels.at(ch, vy, vx);
                const double contrasted =
                    params.contrast_mean_anchored
                        ? means[ch] + params.contrast * (p - means[ch])
                        : params.contrast * p;
                const double raw = contrasted + params.brightness + params.noise.at(ch, vy, vx);
                if (pre_clamp) pre_clamp->at(ch, vy, vx) = raw;
                out.at(ch, vy, vx) = std::clamp(raw, 0.0, 1.0);
            }
    return out;
}

struct WarpGeometry {
    double cx, cy;      // placement center in image coords
    double inv_sigma;   // patch pixels per image pixel
    double cos_t, sin_t;
    double S;           // patch side
    int x_lo, x_hi, y_lo, y_hi;  // clipped iteration bounds
    bool empty;
};

WarpGeometry make_geometry(const Patch& patch, const TransformParams& params,
                           const PlacementRect& placement, int img_h, int img_w) {
    WarpGeometry g;
    g.cx = placement.center_x;
    g.cy = placement.center_y;
    g.S = patch.side;
    const double display_side = placement.side * params.scale_jitter;
    if (display_side <= 0.0) throw ConfigError("non-positive patch display size");
    g.inv_sigma = patch.side / display_side;
    const double theta = params.rotation_deg * kPi / 180.0;
    g.cos_t = std::cos(theta);
    g.sin_t = std::sin(theta);

    const double radius = 0.5 * display_side * (std::abs(g.cos_t) + std::abs(g.sin_t));
    g.x_lo = std::max(0, static_cast<int>(std::floor(g.cx - radius)) - 1);
    g.x_hi = std::min(img_w - 1, static_cast<int>(std::ceil(g.cx + radius)) + 1);
    g.y_lo = std::max(0, static_cast<int>(std::floor(g.cy - radius)) - 1);
    g.y_hi = std::min(img_h - 1, static_cast<int>(std::ceil(g.cy + radius)) + 1);
    g.empty = g.x_lo > g.x_hi || g.y_lo > g.y_hi;
    return g;
}

// Maps an image pixel center to patch-domain coordinates [0,S)^2.
inline bool to_patch_coords(const WarpGeometry& g, int x, int y, double& tu, double& tv) {
    const double rx = x + 0.5 - g.cx;
    const double ry = y + 0.5 - g.cy;
    const double qx = g.cos_t * rx + g.sin_t * ry;   // inverse rotation
    const double qy = -g.sin_t * rx + g.cos_t * ry;
    tu = qx * g.inv_sigma + 0.5 * g.S;
    tv = qy * g.inv_sigma + 0.5 * g.S;
    return tu >= 0.0 && tu < g.S && tv >= 0.0 && tv < g.S;
}

struct BilinearTaps {
    int u0, u1, v0, v1;
    double w00, w01, w10, w11;  // [v][u] order
};

inline BilinearTaps bilinear_taps(double tu, double tv, int S) {
    const double pu = tu - 0.5, pv = tv - 0.5;
    const double fu = std::floor(pu), fv = std::floor(pv);
    const double au = pu - fu, av = pv - fv;
    BilinearTaps t;
    t.u0 = std::clamp(static_cast<int>(fu), 0, S - 1);
    t.u1 = std::clamp(static_cast<int>(fu) + 1, 0, S - 1);
    t.v0 = std::clamp(static_cast<int>(fv), 0, S - 1);
    t.v1 = std::clamp(static_cast<int>(fv) + 1, 0, S - 1);
    t.w00 = (1.0 - av) * (1.0 - au);
    t.w01 = (1.0 - av) * au;
    t.w10 = av * (1.0 - au);
    t.w11 = av * au;
    return t;
}

// Occlusion cutout in image coordinates, derived from the fractional rect.
Box occlusion_box(const OcclusionRect& occ, const PlacementRect& placement,
                  double scale_jitter, int img_h, int img_w) {
    const double L = placement.side * scale_jitter;
    const double ox = placement.center_x - 0.5 * L + occ.fx * L;
    const double oy = placement.center_y - 0.5 * L + occ.fy * L;
    Box b;
    b.x_min = std::clamp(static_cast<int>(std::floor(ox)), 0, img_w);
    b.y_min = std::clamp(static_cast<int>(std::floor(oy)), 0, img_h);
    b.x_max = std::clamp(static_cast<int>(std::ceil(ox + occ.fw * L)), 0, img_w);
    b.y_max = std::clamp(static_cast<int>(std::ceil(oy + occ.fh * L)), 0, img_h);
    return b;
}

inline bool in_box(const Box& b, int x, int y) {
    return x >= b.x_min && x < b.x_max && y >= b.y_min && y < b.y_max;
}

}  // namespace

WarpResult transform_patch(const Patch& patch, const TransformParams& params,
                           const PlacementRect& placement, int img_h, int img_w) {
    if (params.noise.c != 3 || params.noise.h != patch.side || params.noise.w != patch.side)
        throw ConfigError("transform params noise shape does not match patch side");

    const Tensor colored = color_adjust(patch, params, nullptr);
    const WarpGeometry g = make_geometry(patch, params, placement, img_h, img_w);

    WarpResult res;
    res.warped = Image(3, img_h, img_w);
    res.footprint = Mask(img_h, img_w);
    if (g.empty) throw NumericError("transform_patch: patch footprint fully clipped");

    Box occ_box{0, 0, 0, 0};
    if (params.occlusion)
        occ_box = occlusion_box(*params.occlusion, placement, params.scale_jitter, img_h, img_w);

    long long covered = 0;
    for (int y = g.y_lo; y <= g.y_hi; ++y)
        for (int x = g.x_lo; x <= g.x_hi; ++x) {
            double tu, tv;
            if (!to_patch_coords(g, x, y, tu, tv)) continue;
            res.footprint.at(y, x) = 1;
            ++covered;
            if (params.occlusion && in_box(occ_box, x, y)) {
                for (int ch = 0; ch < 3; ++ch) res.warped.at(ch, y, x) = 0.5;
                continue;
            }
            const BilinearTaps t = bilinear_taps(tu, tv, patch.side);
            for (int ch = 0; ch < 3; ++ch) {
                res.warped.at(ch, y, x) = t.w00 * colored.at(ch, t.v0, t.u0) +
                                          t.w01 * colored.at(ch, t.v0, t.u1) +
                                          t.w10 * colored.at(ch, t.v1, t.u0) +
                                          t.w11 * colored.at(ch, t.v1, t.u1);
            }
        }
    if (covered == 0) throw NumericError("transform_patch: patch footprint fully clipped");
    return res;
}

void transform_patch_vjp(const Patch& patch, const TransformParams& params,
                         const PlacementRect& placement, const Image& g_warped,
                         Tensor& g_patch) {
    const int S = patch.side;
    if (g_patch.c != 3 || g_patch.h != S || g_patch.w != S)
        throw ConfigError("transform_patch_vjp: g_patch shape mismatch");

    Tensor pre_clamp(3, S, S);
    (void)color_adjust(patch, params, &pre_clamp);
    const WarpGeometry g = make_geometry(patch, params, placement, g_warped.h, g_warped.w);
    if (g.empty) return;

    Box occ_box{0, 0, 0, 0};
    if (params.occlusion)
        occ_box = occlusion_box(*params.occlusion, placement, params.scale_jitter,
                                g_warped.h, g_warped.w);

    // Gradient w.r.t. the color-adjusted patch, then through the color chain.
    Tensor g_colored(3, S, S);
    for (int y = g.y_lo; y <= g.y_hi; ++y)
        for (int x = g.x_lo; x <= g.x_hi; ++x) {
            double tu, tv;
            if (!to_patch_coords(g, x, y, tu, tv)) continue;
            if (params.occlusion && in_box(occ_box, x, y)) continue;
            const BilinearTaps t = bilinear_taps(tu, tv, S);
            for (int ch = 0; ch < 3; ++ch) {
                const double u = g_warped.at(ch, y, x);
                if (u == 0.0) continue;
                g_colored.at(ch, t.v0, t.u0) += t.w00 * u;
                g_colored.at(ch, t.v0, t.u1) += t.w01 * u;
                g_colored.at(ch, t.v1, t.u0) += t.w10 * u;
                g_colored.at(ch, t.v1, t.u1) += t.w11 * u;
            }
        }

    // clamp passes gradient on [0,1] inclusive so boundary pixels can re-enter.
    for (int ch = 0; ch < 3; ++ch) {
        double mean_term = 0.0;
        if (params.contrast_mean_anchored) {
            double acc = 0.0;
            for (int vy = 0; vy < S; ++vy)
                for (int vx = 0; vx < S; ++vx) {
                    const double raw = pre_clamp.at(ch, vy, vx);
                    if (raw >= 0.0 && raw <= 1.0) acc += g_colored.at(ch, vy, vx);
                }
            mean_term = (1.0 - params.contrast) * acc / (static_cast<double>(S) * S);
        }
        for (int vy = 0; vy < S; ++vy)
            for (int vx = 0; vx < S; ++vx) {
                const double raw = pre_clamp.at(ch, vy, vx);
                const double gate = (raw >= 0.0 && raw <= 1.0) ? 1.0 : 0.0;
                g_patch.at(ch, vy, vx) +=
                    params.contrast * gate * g_colored.at(ch, vy, vx) + mean_term;
            }
    }
}

}  // namespace depthpatch
