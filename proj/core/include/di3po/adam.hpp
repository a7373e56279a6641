#pragma once

#include <cstddef>
#include <vector>

namespace di3po {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Plain Adam with bias correction; state buffers sized on first step.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    long step_count() const { return t_; }

    void step(std::vector<double>& params, const std::vector<double>& grad);

private:
    AdamConfig cfg_;
    std::vector<double> m_;
    std::vector<double> v_;
    long t_ = 0;
};

}  // namespace di3po
