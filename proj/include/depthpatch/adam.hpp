#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace depthpatch {

// Plain Adam with bias correction. The moment buffers are part of checkpoint
// state, so they are public and serialized as-is.
struct Adam {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    std::vector<double> m, v;
    long long t = 0;

    explicit Adam(double lr_ = 0.01) : lr(lr_) {}

    void init(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        t = 0;
    }

    void step(std::vector<double>& params, const std::vector<double>& grad) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
};

}  // namespace depthpatch
