#pragma once

#include <vector>

namespace di3po {

/// Forward-process tables: beta_t, alpha_t = 1 - beta_t and the cumulative
/// product alpha_bar_t. Timesteps are 1-based in the API; index t-1 here.
struct NoiseSchedule {
    int num_timesteps = 0;
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;

    double beta(int t) const { return betas[t - 1]; }
    double alpha(int t) const { return alphas[t - 1]; }
    double alpha_bar(int t) const { return alpha_bars[t - 1]; }
};

enum class ScheduleKind { Linear };

/// Linear beta schedule between beta_start and beta_end inclusive.
/// Throws std::invalid_argument unless 0 < beta_start <= beta_end < 1 and T >= 1.
NoiseSchedule make_schedule(ScheduleKind kind, int num_timesteps, double beta_start, double beta_end);

}  // namespace di3po
