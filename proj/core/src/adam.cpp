#include "di3po/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace di3po {

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != grad.size()) throw std::invalid_argument("Adam: parameter/gradient size mismatch");
    if (m_.empty()) {
        m_.assign(params.size(), 0.0);
        v_.assign(params.size(), 0.0);
    } else if (m_.size() != params.size()) {
        throw std::invalid_argument("Adam: parameter count changed between steps");
    }
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
        double m_hat = m_[i] / bc1;
        double v_hat = v_[i] / bc2;
        params[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
}

}  // namespace di3po
