#include "di3po/schedule.hpp"

#include <stdexcept>

namespace di3po {

NoiseSchedule make_schedule(ScheduleKind kind, int num_timesteps, double beta_start, double beta_end) {
    if (kind != ScheduleKind::Linear) throw std::invalid_argument("unknown schedule kind");
    if (num_timesteps < 1) throw std::invalid_argument("num_timesteps must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("require 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.num_timesteps = num_timesteps;
    s.betas.resize(num_timesteps);
    s.alphas.resize(num_timesteps);
    s.alpha_bars.resize(num_timesteps);
    double bar = 1.0;
    for (int i = 0; i < num_timesteps; ++i) {
        double b = num_timesteps == 1
                       ? beta_start
                       : beta_start + (beta_end - beta_start) * static_cast<double>(i) / (num_timesteps - 1);
        s.betas[i] = b;
        s.alphas[i] = 1.0 - b;
        bar *= s.alphas[i];
        s.alpha_bars[i] = bar;
    }
    return s;
}

}  // namespace di3po
