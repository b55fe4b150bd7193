#pragma once

#include <cstddef>
#include <vector>

#include "mhc/model.hpp"

namespace mhc {

struct AdamWConfig {
    double learning_rate = 1e-3;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t warmup_steps = 100;
};

// Linear warmup to learning_rate over warmup_steps, then constant. `step` is 1-based.
double scheduled_learning_rate(const AdamWConfig& config, std::size_t step);

// Decoupled weight decay (w <- w * (1 - lr * wd)) followed by the
// bias-corrected Adam update.
class AdamW {
public:
    explicit AdamW(std::size_t parameter_count) : m_(parameter_count, 0.0), v_(parameter_count, 0.0) {}

    // Throws DivergenceError naming the first block with a non-finite gradient;
    // params are untouched in that case.
    void step(Parameters& params, const Parameters& grads, const AdamWConfig& config, std::size_t step);

    const std::vector<double>& first_moment() const noexcept { return m_; }
    const std::vector<double>& second_moment() const noexcept { return v_; }

private:
    std::vector<double> m_;
    std::vector<double> v_;
};

}  // namespace mhc
