#include "di3po/diffusion.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "di3po/denoiser.hpp"
#include "di3po/rng.hpp"

namespace di3po {

NoisySample forward_noise(const Grid& x0, int t, const Grid& eps, const NoiseSchedule& schedule) {
    require_same_shape(x0, eps, "forward_noise");
    if (t < 1 || t > schedule.num_timesteps) throw std::invalid_argument("timestep out of range");
    double ab = schedule.alpha_bar(t);
    double s_sig = std::sqrt(ab);
    double s_noise = std::sqrt(1.0 - ab);
    NoisySample out;
    out.t = t;
    out.eps = eps;
    out.x_t = Grid(x0.width, x0.height);
    for (size_t i = 0; i < x0.size(); ++i) out.x_t.values[i] = s_sig * x0.values[i] + s_noise * eps.values[i];
    return out;
}

double ddpm_loss(const Denoiser& model, const Grid& x0, int t, const Grid& eps, const Condition& c,
                 const NoiseSchedule& schedule) {
    NoisySample s = forward_noise(x0, t, eps, schedule);
    Grid pred = model.predict_eps(s.x_t, t, c);
    double loss = 0.0;
    for (size_t i = 0; i < eps.size(); ++i) {
        double r = eps.values[i] - pred.values[i];
        loss += r * r;
    }
    return loss;
}

Grid combine_guidance(const Grid& eps_uncond, const Grid& eps_cond, double guidance_scale) {
    require_same_shape(eps_uncond, eps_cond, "combine_guidance");
    Grid out(eps_cond.width, eps_cond.height);
    for (size_t i = 0; i < out.size(); ++i)
        out.values[i] = eps_uncond.values[i] + guidance_scale * (eps_cond.values[i] - eps_uncond.values[i]);
    return out;
}

Grid ancestral_sample(const Denoiser& model, const Condition& c, const SamplerConfig& cfg,
                      const NoiseSchedule& schedule, uint64_t rng_seed) {
    const int T = schedule.num_timesteps;
    if (cfg.num_inference_steps < 1 || cfg.num_inference_steps > T)
        throw std::invalid_argument("num_inference_steps must be in [1, T]");
    if (cfg.guidance_scale < 0.0) throw std::invalid_argument("guidance_scale must be nonnegative");

    const int W = model.shape().width, H = model.shape().height;
    std::mt19937_64 eng(rng_seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Evenly strided descending timestep subsequence ending at t = 1.
    std::vector<int> steps(cfg.num_inference_steps);
    for (int i = 0; i < cfg.num_inference_steps; ++i) {
        double frac = cfg.num_inference_steps == 1 ? 1.0 : static_cast<double>(i) / (cfg.num_inference_steps - 1);
        steps[i] = 1 + static_cast<int>(std::lround(frac * (T - 1)));
    }

    Grid x(W, H);
    for (auto& v : x.values) v = normal(eng);

    for (int i = cfg.num_inference_steps - 1; i >= 0; --i) {
        int t = steps[i];
        int t_prev = i > 0 ? steps[i - 1] : 0;
        double ab_t = schedule.alpha_bar(t);
        double ab_prev = t_prev >= 1 ? schedule.alpha_bar(t_prev) : 1.0;

        Grid eps_hat = model.predict_eps(x, t, c);
        if (cfg.guidance_scale != 1.0) {
            Grid eps_uncond = model.predict_eps(x, t, Condition::null_token());
            eps_hat = combine_guidance(eps_uncond, eps_hat, cfg.guidance_scale);
        }

        // DDPM posterior over the strided subsequence: treat the jump
        // t -> t_prev as one step with effective alpha = ab_t / ab_prev.
        double alpha_eff = ab_t / ab_prev;
        double beta_eff = 1.0 - alpha_eff;
        double c_x0 = std::sqrt(ab_prev) * beta_eff / (1.0 - ab_t);
        double c_xt = std::sqrt(alpha_eff) * (1.0 - ab_prev) / (1.0 - ab_t);
        double var = beta_eff * (1.0 - ab_prev) / (1.0 - ab_t);
        double sigma = i > 0 ? std::sqrt(var) : 0.0;

        double inv_sab = 1.0 / std::sqrt(ab_t);
        double noise_coef = std::sqrt(1.0 - ab_t);
        for (size_t j = 0; j < x.size(); ++j) {
            double x0_pred = inv_sab * (x.values[j] - noise_coef * eps_hat.values[j]);
            double mean = c_x0 * x0_pred + c_xt * x.values[j];
            x.values[j] = mean + (sigma > 0.0 ? sigma * normal(eng) : 0.0);
        }
    }
    return x;
}

}  // namespace di3po
