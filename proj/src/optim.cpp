#include "mhc/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mhc {

double scheduled_learning_rate(const AdamWConfig& config, std::size_t step) {
    if (config.warmup_steps == 0 || step >= config.warmup_steps) return config.learning_rate;
    return config.learning_rate * static_cast<double>(step) / static_cast<double>(config.warmup_steps);
}

void AdamW::step(Parameters& params, const Parameters& grads, const AdamWConfig& config, std::size_t step) {
    if (params.count() != m_.size() || grads.count() != m_.size())
        throw ValidationError("adamw: parameter count mismatch");
    if (step == 0) throw ValidationError("adamw: step index is 1-based");

    for (std::size_t b = 0; b < grads.block_count(); ++b) {
        const ParamBlock& info = grads.block_info(b);
        const auto g = grads.values().subspan(info.offset, info.size());
        if (!std::all_of(g.begin(), g.end(), [](double x) { return std::isfinite(x); }))
            throw DivergenceError("non-finite gradient in block '" + info.name + "' at step " + std::to_string(step),
                                  step - 1, info.name);
    }

    const double lr = scheduled_learning_rate(config, step);
    const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    const double decay = 1.0 - lr * config.weight_decay;

    std::span<double> w = params.values();
    std::span<const double> g = grads.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
        m_[i] = config.beta1 * m_[i] + (1.0 - config.beta1) * g[i];
        v_[i] = config.beta2 * v_[i] + (1.0 - config.beta2) * g[i] * g[i];
        const double m_hat = m_[i] / bias1;
        const double v_hat = v_[i] / bias2;
        w[i] = w[i] * decay - lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
}

}  // namespace mhc
