#pragma once

#include <cstdint>

#include "di3po/grid.hpp"
#include "di3po/schedule.hpp"

namespace di3po {

class Denoiser;

/// Conditioning token. `null_token` marks the learned unconditional
/// embedding used by classifier-free guidance.
struct Condition {
    int token = 0;
    bool is_null = false;

    static Condition null_token() { return Condition{0, true}; }
};

struct NoisySample {
    Grid x_t;
    int t = 1;
    Grid eps;
};

struct SamplerConfig {
    int num_inference_steps = 50;
    double guidance_scale = 7.5;
};

/// Closed-form forward process: x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
NoisySample forward_noise(const Grid& x0, int t, const Grid& eps, const NoiseSchedule& schedule);

/// Denoising MSE, reduced as a *sum* of squared per-pixel residuals so that
/// per-pixel gradient contributions decompose exactly.
double ddpm_loss(const Denoiser& model, const Grid& x0, int t, const Grid& eps, const Condition& c,
                 const NoiseSchedule& schedule);

/// Ancestral sampler over an evenly strided timestep subsequence, with
/// classifier-free guidance: eps_hat = eps_u + s * (eps_c - eps_u).
/// guidance_scale == 1 uses the conditional prediction alone.
Grid ancestral_sample(const Denoiser& model, const Condition& c, const SamplerConfig& cfg,
                      const NoiseSchedule& schedule, uint64_t rng_seed);

/// Single guidance combination step, exposed for direct checking.
Grid combine_guidance(const Grid& eps_uncond, const Grid& eps_cond, double guidance_scale);

}  // namespace di3po
