#pragma once

#include <functional>
#include <string>
#include <vector>

#include "di3po/adam.hpp"
#include "di3po/dpo.hpp"
#include "di3po/schedule.hpp"

namespace di3po {

/// Small binary motif rendered into a fixed target region of a procedural
/// background; the per-glyph corruption rule flips a few motif pixels to
/// produce the losing image.
struct SyntheticTask {
    int image_width = 16;
    int image_height = 16;
    int motif_size = 4;
    int motif_x = 6;  // top-left of the target region
    int motif_y = 6;
    int vocab = 4;
    uint64_t task_seed = 0;

    /// Binary motif pattern of glyph `id` (row-major, motif_size^2 entries).
    std::vector<uint8_t> glyph_motif(int id) const;
    /// Corrupted variant: flips max(1, round(0.2 * area)) seeded pixels.
    std::vector<uint8_t> corrupted_motif(int id) const;
};

enum class TrainVariant { Di3po, SftWinners, DpoBackgroundVaried };

const char* train_variant_name(TrainVariant v);
TrainVariant parse_train_variant(const std::string& name);

struct TrainConfig {
    int steps = 900;
    double learning_rate = 1e-3;
    int batch_size = 16;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double dpo_beta = 5.0;
    uint64_t seed = 0;
    TrainVariant variant = TrainVariant::Di3po;
    int diagnostic_every = 50;  // DPO variants: log cancellation diagnostic
    int halo_radius = 3;
    int pretrain_steps = 300;  // base-model DDPM steps before fine-tuning
};

struct TraceEntry {
    int step = 0;
    double loss = 0.0;
    bool has_diagnostic = false;
    double far_bg_residual = 0.0;
    double bg_fraction = 0.0;
    double target_fraction = 0.0;
};

struct TrainResult {
    Denoiser model;
    Denoiser reference;
    std::vector<TraceEntry> trace;
};

/// Diptych pair (shared background) or background-varied pair for glyph id.
PreferencePair gen_synthetic_pair(const SyntheticTask& task, uint64_t bg_seed, int glyph_id, TrainVariant variant);

/// Winner-only view used by the SFT variant; the loser never enters its
/// data path.
struct WinnerSample {
    Grid x_w;
    Condition condition;
};

/// Deterministic training loop; the reference is a frozen copy of the
/// initial model. Throws on divergence, reporting the offending step.
TrainResult train(TrainVariant variant, const std::vector<PreferencePair>& dataset, const TrainConfig& config,
                  const NoiseSchedule& schedule, const Denoiser& init);

/// DDPM pretraining over winner and loser images alike, with 0.1
/// null-condition dropout so classifier-free guidance is well defined.
/// Produces the base model that preference fine-tuning starts from.
Denoiser pretrain_base(const std::vector<PreferencePair>& dataset, const TrainConfig& config,
                       const NoiseSchedule& schedule, const Denoiser& init, int steps);

/// Fraction of sampled images whose target region is closer in L2 to the
/// correct motif than to the corrupted one; reported per glyph and overall.
struct TargetAccuracy {
    double overall = 0.0;
    std::vector<double> per_glyph;
    std::vector<double> per_sample;  // 0/1 outcomes, for bootstrap reuse
};

TargetAccuracy evaluate_target_accuracy(const Denoiser& model, const SyntheticTask& task, const SamplerConfig& sampler,
                                        const NoiseSchedule& schedule, int n_samples, uint64_t rng_seed);

struct VariantReport {
    std::string variant;
    double accuracy = 0.0;
    double accuracy_half_width = 0.0;
    double mean_bg_fraction = 0.0;
    double mean_far_bg_residual = 0.0;
};

struct ComparisonReport {
    std::vector<VariantReport> variants;
    double untrained_accuracy = 0.0;
    double untrained_half_width = 0.0;
};

/// Trains each variant with a shared task, seed set and step budget, then
/// evaluates all of them (and the untrained initialization) on identical
/// sampler seeds.
ComparisonReport compare_variants(const SyntheticTask& task, const std::vector<TrainVariant>& variants,
                                  const TrainConfig& base_config, const NoiseSchedule& schedule, int n_pairs,
                                  int eval_samples, const SamplerConfig& sampler, uint64_t master_seed);

std::string comparison_to_json(const ComparisonReport& report);
ComparisonReport comparison_from_json(const std::string& json_text);

}  // namespace di3po
