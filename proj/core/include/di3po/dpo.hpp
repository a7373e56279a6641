#pragma once

#include "di3po/denoiser.hpp"
#include "di3po/diffusion.hpp"
#include "di3po/grid.hpp"

namespace di3po {

/// Winner/loser latent pair with the mask of where they are allowed to
/// differ. For diptych-constructed pairs the two grids are bitwise equal on
/// mask background.
struct PreferencePair {
    Grid x_w;
    Grid x_l;
    RegionMask mask;
    Condition condition;
};

struct DpoConfig {
    double beta = 5.0;
};

/// Relative improvement of the policy over the frozen reference on x:
/// ||eps - eps_ref(x_t)||^2 - ||eps - eps_theta(x_t)||^2.
double delta(const Denoiser& model, const Denoiser& reference, const Grid& x, int t, const Grid& eps,
             const Condition& c, const NoiseSchedule& schedule);

/// -log sigmoid(beta * (delta(x_w) - delta(x_l))), with one shared t and eps
/// applied to both pair members.
double dpo_loss(const Denoiser& model, const Denoiser& reference, const DpoConfig& cfg, const PreferencePair& pair,
                int t, const Grid& eps, const NoiseSchedule& schedule);

struct DpoGradResult {
    double loss = 0.0;
    GradientVector grad;
    /// Scalar multiplying the inner gradient difference:
    /// sigma(-beta * (delta_w - delta_l)) * beta. The full gradient is
    /// weight * (grad ||eps - eps_theta(x_w,t)||^2 - grad ||.(x_l,t)||^2),
    /// i.e. the exact derivative of the loss above (chain rule through the
    /// two delta terms; the reference terms are constants).
    double weight = 0.0;
};

DpoGradResult dpo_grad(const Denoiser& model, const Denoiser& reference, const DpoConfig& cfg,
                       const PreferencePair& pair, int t, const Grid& eps, const NoiseSchedule& schedule);

struct CancellationDiagnostic {
    /// Norm of the summed winner-minus-loser per-pixel contributions over
    /// background pixels farther than the halo radius from the target.
    double far_bg_residual = 0.0;
    /// Norm shares of the winner-minus-loser contribution difference
    /// attributable to background vs target pixels. Shares sum to 1 when
    /// either side is nonzero.
    double bg_fraction = 0.0;
    double target_fraction = 0.0;
};

/// Measures how much of the DPO gradient difference lives in the background:
/// group per-pixel contributions of grad ||eps - eps_theta||^2 for winner and
/// loser by mask region and compare Euclidean norms of the differences.
CancellationDiagnostic background_cancellation_diagnostic(const Denoiser& model, const PreferencePair& pair, int t,
                                                          const Grid& eps, const NoiseSchedule& schedule,
                                                          int halo_radius);

}  // namespace di3po
