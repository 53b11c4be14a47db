#include "depthpatch/losses.hpp"

#include <algorithm>
#include <cmath>

#include "depthpatch/errors.hpp"

namespace depthpatch {

void TargetDepthSpec::validate() const {
    if (constant_value < 0.0 || constant_value > 1.0)
        throw ConfigError("target_depth.constant_value must be in [0,1]");
    if (scale_factor < 0.0) throw ConfigError("target_depth.scale_factor must be >= 0");
}

void LossConfig::validate() const {
    if (alpha < 0.0 || beta < 0.0) throw ConfigError("loss.alpha and loss.beta must be >= 0");
    if (!use_d1 && !use_d2)
        throw ConfigError("loss: at least one depth term (d1 or d2) must be enabled");
    target_depth.validate();
}

DisparityMap make_target_depth(const TargetDepthSpec& spec, const DisparityMap& baseline) {
    spec.validate();
    DisparityMap d_t(baseline.h, baseline.w);
    if (spec.mode == TargetDepthSpec::Mode::constant) {
        std::fill(d_t.v.begin(), d_t.v.end(), spec.constant_value);
    } else {
        for (size_t i = 0; i < d_t.v.size(); ++i)
            d_t.v[i] = std::clamp(spec.scale_factor * baseline.v[i], 0.0, 1.0);
    }
    return d_t;
}

namespace {

void check_shapes(const DisparityMap& a, const DisparityMap& b, const Mask& m,
                  const char* who) {
    if (a.h != b.h || a.w != b.w || m.h != a.h || m.w != a.w)
        throw DataError(std::string(who) + ": shape mismatch");
}

}  // namespace

double loss_d1(const DisparityMap& d_t, const DisparityMap& d_adv, const Mask& m_p) {
    check_shapes(d_t, d_adv, m_p, "loss_d1");
    double acc = 0.0;
    long long count = 0;
    for (size_t i = 0; i < d_adv.v.size(); ++i)
        if (m_p.v[i]) {
            acc += std::abs(d_t.v[i] - d_adv.v[i]);
            ++count;
        }
    return acc / static_cast<double>(std::max<long long>(count, 1));
}

double loss_d2(const DisparityMap& d_t, const DisparityMap& d_adv, const Mask& m_f,
               const Mask& m_p) {
    check_shapes(d_t, d_adv, m_f, "loss_d2");
    if (m_p.h != m_f.h || m_p.w != m_f.w) throw DataError("loss_d2: mask shape mismatch");
    double acc = 0.0;
    long long count = 0;
    for (size_t i = 0; i < d_adv.v.size(); ++i) {
        if (m_p.v[i] && !m_f.v[i])
            throw DataError("loss_d2: patch mask is not a subset of the focus mask");
        if (m_f.v[i] && !m_p.v[i]) {
            acc += std::abs(d_t.v[i] - d_adv.v[i]);
            ++count;
        }
    }
    return acc / static_cast<double>(std::max<long long>(count, 1));
}

double loss_depth(double l1, double l2, const LossConfig& cfg) {
    double total = 0.0;
    if (cfg.use_d1) total += l1 * l1;
    if (cfg.use_d2) total += l2;
    return total;
}

double loss_tv(const Patch& patch) {
    const int S = patch.side;
    if (S < 2) throw ConfigError("loss_tv: patch side must be >= 2");
    double acc = 0.0;
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < S; ++y)
            for (int x = 0; x < S; ++x) {
                const double p = patch.pixels.at(ch, y, x);
                const double dv = (y + 1 < S) ? patch.pixels.at(ch, y + 1, x) - p : 0.0;
                const double dh = (x + 1 < S) ? patch.pixels.at(ch, y, x + 1) - p : 0.0;
                acc += std::sqrt(dv * dv + dh * dh);
            }
    return acc / (static_cast<double>(S) * S);
}

void loss_tv_grad(const Patch& patch, double weight, Tensor& g_patch) {
    const int S = patch.side;
    const double inv_n = weight / (static_cast<double>(S) * S);
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < S; ++y)
            for (int x = 0; x < S; ++x) {
                const double p = patch.pixels.at(ch, y, x);
                const double dv = (y + 1 < S) ? patch.pixels.at(ch, y + 1, x) - p : 0.0;
                const double dh = (x + 1 < S) ? patch.pixels.at(ch, y, x + 1) - p : 0.0;
                const double r = std::sqrt(dv * dv + dh * dh);
                if (r == 0.0) continue;  // subgradient 0 at flat points
                const double inv_r = inv_n / r;
                g_patch.at(ch, y, x) += (-dv - dh) * inv_r;
                if (y + 1 < S) g_patch.at(ch, y + 1, x) += dv * inv_r;
                if (x + 1 < S) g_patch.at(ch, y, x + 1) += dh * inv_r;
            }
}

double loss_total(const std::vector<double>& depth_terms_per_detection, const Patch& patch,
                  const LossConfig& cfg) {
    cfg.validate();
    if (depth_terms_per_detection.empty())
        throw DataError("loss_total: at least one detection required");
    double mean_depth = 0.0;
    for (double d : depth_terms_per_detection) mean_depth += d;
    mean_depth /= static_cast<double>(depth_terms_per_detection.size());
    double total = cfg.alpha * mean_depth;
    if (cfg.use_tv) total += cfg.beta * loss_tv(patch);
    return total;
}

DepthLossTerms depth_loss_with_grad(const DisparityMap& d_t, const DisparityMap& d_adv,
                                    const MaskPair& masks, const LossConfig& cfg,
                                    double upstream_weight, DisparityMap* g_d_adv) {
    check_shapes(d_t, d_adv, masks.patch_mask, "depth_loss_with_grad");
    const Mask& m_p = masks.patch_mask;
    const Mask& m_f = masks.focus_mask;

    long long n_p = 0, n_ring = 0;
    for (size_t i = 0; i < d_adv.v.size(); ++i) {
        if (m_p.v[i] && !m_f.v[i])
            throw DataError("depth_loss_with_grad: patch mask not a subset of focus mask");
        if (m_p.v[i]) ++n_p;
        if (m_f.v[i] && !m_p.v[i]) ++n_ring;
    }
    const double denom_p = static_cast<double>(std::max<long long>(n_p, 1));
    const double denom_ring = static_cast<double>(std::max<long long>(n_ring, 1));

    DepthLossTerms terms;
    double sq_mean = 0.0;  // per-pixel mode accumulator
    for (size_t i = 0; i < d_adv.v.size(); ++i) {
        const double diff = d_adv.v[i] - d_t.v[i];
        if (m_p.v[i]) {
            terms.l1 += std::abs(diff) / denom_p;
            sq_mean += diff * diff / denom_p;
        } else if (m_f.v[i]) {
            terms.l2 += std::abs(diff) / denom_ring;
        }
    }
    const bool per_pixel = cfg.square_mode == LossConfig::SquareMode::per_pixel_square;
    terms.depth = 0.0;
    if (cfg.use_d1) terms.depth += per_pixel ? sq_mean : terms.l1 * terms.l1;
    if (cfg.use_d2) terms.depth += terms.l2;

    if (g_d_adv) {
        if (g_d_adv->h != d_adv.h || g_d_adv->w != d_adv.w)
            throw DataError("depth_loss_with_grad: gradient shape mismatch");
        for (size_t i = 0; i < d_adv.v.size(); ++i) {
            const double diff = d_adv.v[i] - d_t.v[i];
            double g = 0.0;
            if (cfg.use_d1 && m_p.v[i]) {
                g += per_pixel ? 2.0 * diff / denom_p
                               : 2.0 * terms.l1 * ((diff > 0.0) - (diff < 0.0)) / denom_p;
            }
            if (cfg.use_d2 && m_f.v[i] && !m_p.v[i])
                g += ((diff > 0.0) - (diff < 0.0)) / denom_ring;
            g_d_adv->v[i] += upstream_weight * g;
        }
    }
    return terms;
}

}  // namespace depthpatch
