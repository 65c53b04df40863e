#pragma once

#include <cmath>

#include "ikan/tensor.hpp"

namespace ikan {

struct AdamConfig {
    double learning_rate = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// One bias-corrected Adam update; the gradient is zeroed afterwards.
inline void adam_step(Parameter& param, const AdamConfig& cfg) {
    ++param.step_count;
    const double t = static_cast<double>(param.step_count);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    double* w = param.value.data();
    double* g = param.grad.data();
    double* m = param.adam_m.data();
    double* v = param.adam_v.data();
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        g[i] = 0.0;
    }
}

inline void adam_step(const ParamRefs& params, const AdamConfig& cfg) {
    for (auto* p : params) adam_step(*p, cfg);
}

inline void zero_grads(const ParamRefs& params) {
    for (auto* p : params) p->zero_grad();
}

inline void reset_optimizer(const ParamRefs& params) {
    for (auto* p : params) p->reset_optimizer_state();
}

}  // namespace ikan
