#include "di3po/dpo.hpp"

#include <cmath>
#include <stdexcept>

namespace di3po {

namespace {
double log_sigmoid(double z) {
    // Numerically stable -softplus(-z).
    if (z >= 0.0) return -std::log1p(std::exp(-z));
    return z - std::log1p(std::exp(z));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace

double delta(const Denoiser& model, const Denoiser& reference, const Grid& x, int t, const Grid& eps,
             const Condition& c, const NoiseSchedule& schedule) {
    return ddpm_loss(reference, x, t, eps, c, schedule) - ddpm_loss(model, x, t, eps, c, schedule);
}

double dpo_loss(const Denoiser& model, const Denoiser& reference, const DpoConfig& cfg, const PreferencePair& pair,
                int t, const Grid& eps, const NoiseSchedule& schedule) {
    require_same_shape(pair.x_w, pair.x_l, "dpo_loss pair");
    double dw = delta(model, reference, pair.x_w, t, eps, pair.condition, schedule);
    double dl = delta(model, reference, pair.x_l, t, eps, pair.condition, schedule);
    double loss = -log_sigmoid(cfg.beta * (dw - dl));
    if (!std::isfinite(loss)) throw std::runtime_error("dpo_loss diverged (non-finite)");
    return loss;
}

DpoGradResult dpo_grad(const Denoiser& model, const Denoiser& reference, const DpoConfig& cfg,
                       const PreferencePair& pair, int t, const Grid& eps, const NoiseSchedule& schedule) {
    require_same_shape(pair.x_w, pair.x_l, "dpo_grad pair");
    double dw = delta(model, reference, pair.x_w, t, eps, pair.condition, schedule);
    double dl = delta(model, reference, pair.x_l, t, eps, pair.condition, schedule);
    double z = cfg.beta * (dw - dl);

    DpoGradResult r;
    r.loss = -log_sigmoid(z);
    if (!std::isfinite(r.loss)) throw std::runtime_error("dpo_grad diverged (non-finite)");
    r.weight = sigmoid(-z) * cfg.beta;

    // d/dtheta [-log sigma(z)] = -sigma(-z) * beta * d(dw - dl)/dtheta and
    // d delta / dtheta = -d ||eps - eps_theta||^2 / dtheta, so the total is
    // weight * (grad_w - grad_l) with grad_* the residual-norm gradients.
    NoisySample sw = forward_noise(pair.x_w, t, eps, schedule);
    NoisySample sl = forward_noise(pair.x_l, t, eps, schedule);
    GradientVector gw = model.residual_grad(sw.x_t, t, eps, pair.condition);
    GradientVector gl = model.residual_grad(sl.x_t, t, eps, pair.condition);
    r.grad.resize(gw.size());
    for (size_t i = 0; i < gw.size(); ++i) r.grad[i] = r.weight * (gw[i] - gl[i]);
    return r;
}

CancellationDiagnostic background_cancellation_diagnostic(const Denoiser& model, const PreferencePair& pair, int t,
                                                          const Grid& eps, const NoiseSchedule& schedule,
                                                          int halo_radius) {
    const Grid& xw = pair.x_w;
    const Grid& xl = pair.x_l;
    require_same_shape(xw, xl, "diagnostic pair");
    if (pair.mask.width() != xw.width || pair.mask.height() != xw.height)
        throw std::invalid_argument("mask shape mismatch in diagnostic");

    NoisySample sw = forward_noise(xw, t, eps, schedule);
    NoisySample sl = forward_noise(xl, t, eps, schedule);

    std::vector<uint8_t> target_mask(xw.size(), 0), bg_mask(xw.size(), 0), far_bg_mask(xw.size(), 0);
    for (int y = 0; y < xw.height; ++y)
        for (int x = 0; x < xw.width; ++x) {
            size_t i = static_cast<size_t>(y) * xw.width + x;
            if (pair.mask.is_target(x, y)) {
                target_mask[i] = 1;
            } else {
                bg_mask[i] = 1;
                if (pair.mask.distance_to_target(x, y) > halo_radius) far_bg_mask[i] = 1;
            }
        }

    // Grouped contributions equal the sum of the per-pixel contributions by
    // linearity of the backward pass in the output gradient.
    auto diff_norm = [&](const std::vector<uint8_t>& mask) {
        GradientVector gw = model.masked_grad_contribution(sw.x_t, t, eps, pair.condition, mask);
        GradientVector gl = model.masked_grad_contribution(sl.x_t, t, eps, pair.condition, mask);
        double s = 0.0;
        for (size_t i = 0; i < gw.size(); ++i) {
            double d = gw[i] - gl[i];
            s += d * d;
        }
        return std::sqrt(s);
    };

    CancellationDiagnostic d;
    d.far_bg_residual = diff_norm(far_bg_mask);
    double bg_norm = diff_norm(bg_mask);
    double target_norm = diff_norm(target_mask);
    double total = bg_norm + target_norm;
    if (total > 0.0) {
        d.bg_fraction = bg_norm / total;
        d.target_fraction = target_norm / total;
    }
    return d;
}

}  // namespace di3po
