#include "di3po/experiments.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "di3po/metrics.hpp"
#include "di3po/rng.hpp"

namespace di3po {

namespace {

constexpr double kMotifOn = 0.8;
constexpr double kMotifOff = -0.8;

/// Smooth seeded background field in [-0.9, 0.9]: a sum of three seeded
/// sinusoidal components.
Grid synthetic_background(int w, int h, uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> freq(0.2, 1.2), phase(0.0, 6.283185307179586);
    double fx[3], fy[3], ph[3];
    for (int k = 0; k < 3; ++k) {
        fx[k] = freq(eng);
        fy[k] = freq(eng);
        ph[k] = phase(eng);
    }
    Grid g(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double v = 0.0;
            for (int k = 0; k < 3; ++k) v += std::sin(fx[k] * x + fy[k] * y + ph[k]);
            g.at(x, y) = 0.3 * v;  // |v| <= 3, so the field stays in [-0.9, 0.9]
        }
    return g;
}

void stamp_motif(Grid& img, const SyntheticTask& task, const std::vector<uint8_t>& motif) {
    for (int dy = 0; dy < task.motif_size; ++dy)
        for (int dx = 0; dx < task.motif_size; ++dx)
            img.at(task.motif_x + dx, task.motif_y + dy) =
                motif[static_cast<size_t>(dy) * task.motif_size + dx] ? kMotifOn : kMotifOff;
}

double region_l2(const Grid& img, const SyntheticTask& task, const std::vector<uint8_t>& motif) {
    double s = 0.0;
    for (int dy = 0; dy < task.motif_size; ++dy)
        for (int dx = 0; dx < task.motif_size; ++dx) {
            double want = motif[static_cast<size_t>(dy) * task.motif_size + dx] ? kMotifOn : kMotifOff;
            double d = img.at(task.motif_x + dx, task.motif_y + dy) - want;
            s += d * d;
        }
    return s;
}

}  // namespace

std::vector<uint8_t> SyntheticTask::glyph_motif(int id) const {
    if (id < 0 || id >= vocab) throw std::invalid_argument("unknown glyph id");
    std::mt19937_64 eng(derive_seed(task_seed, 0x9110 + static_cast<uint64_t>(id)));
    size_t area = static_cast<size_t>(motif_size) * motif_size;
    std::vector<uint8_t> m(area);
    for (;;) {
        int ones = 0;
        for (auto& b : m) {
            b = static_cast<uint8_t>(eng() & 1);
            ones += b;
        }
        if (ones > 0 && ones < static_cast<int>(area)) return m;
    }
}

std::vector<uint8_t> SyntheticTask::corrupted_motif(int id) const {
    std::vector<uint8_t> m = glyph_motif(id);
    std::mt19937_64 eng(derive_seed(task_seed, 0xC0DE + static_cast<uint64_t>(id)));
    size_t area = m.size();
    int flips = std::max(1, static_cast<int>(std::lround(0.2 * static_cast<double>(area))));
    std::vector<size_t> idx(area);
    for (size_t i = 0; i < area; ++i) idx[i] = i;
    for (int f = 0; f < flips; ++f) {
        size_t pick = f + eng() % (area - f);
        std::swap(idx[f], idx[pick]);
        m[idx[f]] ^= 1;
    }
    return m;
}

const char* train_variant_name(TrainVariant v) {
    switch (v) {
        case TrainVariant::Di3po: return "di3po";
        case TrainVariant::SftWinners: return "sft_winners";
        case TrainVariant::DpoBackgroundVaried: return "dpo_background_varied";
    }
    return "unknown";
}

TrainVariant parse_train_variant(const std::string& name) {
    if (name == "di3po") return TrainVariant::Di3po;
    if (name == "sft_winners") return TrainVariant::SftWinners;
    if (name == "dpo_background_varied") return TrainVariant::DpoBackgroundVaried;
    throw std::invalid_argument("unknown train variant: " + name);
}

PreferencePair gen_synthetic_pair(const SyntheticTask& task, uint64_t bg_seed, int glyph_id, TrainVariant variant) {
    if (glyph_id < 0 || glyph_id >= task.vocab) throw std::invalid_argument("unknown glyph id");
    const int W = task.image_width, H = task.image_height;

    Grid bg_w, bg_l;
    if (variant == TrainVariant::DpoBackgroundVaried) {
        bg_w = synthetic_background(W, H, derive_seed(bg_seed, 1));
        bg_l = synthetic_background(W, H, derive_seed(bg_seed, 2));
    } else {
        bg_w = synthetic_background(W, H, derive_seed(bg_seed, 0));
        bg_l = bg_w;
    }

    PreferencePair pair{std::move(bg_w), std::move(bg_l),
                        RegionMask::from_box(W, H, task.motif_x, task.motif_y, task.motif_size, task.motif_size),
                        Condition{glyph_id, false}};
    stamp_motif(pair.x_w, task, task.glyph_motif(glyph_id));
    stamp_motif(pair.x_l, task, task.corrupted_motif(glyph_id));
    return pair;
}

Denoiser pretrain_base(const std::vector<PreferencePair>& dataset, const TrainConfig& config,
                       const NoiseSchedule& schedule, const Denoiser& init, int steps) {
    if (dataset.empty()) throw std::invalid_argument("pretrain_base: empty dataset");
    Denoiser model = init;
    Adam opt({config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps});
    const size_t n_params = model.param_count();
    const int W = model.shape().width, H = model.shape().height;

    for (int step = 0; step < steps; ++step) {
        std::mt19937_64 eng(derive_seed(config.seed, 0xBA5E0000ULL + static_cast<uint64_t>(step)));
        std::uniform_int_distribution<size_t> pick(0, dataset.size() * 2 - 1);
        std::uniform_int_distribution<int> pick_t(1, schedule.num_timesteps);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        GradientVector acc(n_params, 0.0);
        for (int b = 0; b < config.batch_size; ++b) {
            size_t slot = pick(eng);
            const PreferencePair& pair = dataset[slot / 2];
            const Grid& x0 = slot % 2 == 0 ? pair.x_w : pair.x_l;
            int t = pick_t(eng);
            Grid eps = gaussian_grid(W, H, eng());
            Condition c = unit(eng) < 0.1 ? Condition::null_token() : pair.condition;
            auto [loss, grad] = model.loss_grad(x0, t, eps, c, schedule);
            if (!std::isfinite(loss)) throw std::runtime_error("pretrain diverged at step " + std::to_string(step));
            for (size_t i = 0; i < n_params; ++i) acc[i] += grad[i];
        }
        for (auto& g : acc) g /= config.batch_size;
        opt.step(model.params(), acc);
    }
    return model;
}

TrainResult train(TrainVariant variant, const std::vector<PreferencePair>& dataset, const TrainConfig& config,
                  const NoiseSchedule& schedule, const Denoiser& init) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    if (config.steps < 1 || config.learning_rate < 0.0) throw std::invalid_argument("train: bad config");

    TrainResult result{init, init, {}};
    Denoiser& model = result.model;
    const Denoiser& reference = result.reference;  // frozen copy of the initialization
    Adam opt({config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps});
    DpoConfig dpo_cfg{config.dpo_beta};
    const size_t n_params = model.param_count();
    const int W = model.shape().width, H = model.shape().height;

    // The SFT variant operates on a winner-only view; the loser images are
    // withheld from its data path by construction.
    std::vector<WinnerSample> winners;
    if (variant == TrainVariant::SftWinners) {
        winners.reserve(dataset.size());
        for (const auto& p : dataset) winners.push_back({p.x_w, p.condition});
    }

    for (int step = 0; step < config.steps; ++step) {
        std::mt19937_64 eng(derive_seed(config.seed, static_cast<uint64_t>(step)));
        std::uniform_int_distribution<size_t> pick(0, dataset.size() - 1);
        std::uniform_int_distribution<int> pick_t(1, schedule.num_timesteps);

        GradientVector acc(n_params, 0.0);
        double batch_loss = 0.0;
        TraceEntry entry;
        entry.step = step;

        for (int b = 0; b < config.batch_size; ++b) {
            size_t idx = pick(eng);
            int t = pick_t(eng);
            Grid eps = gaussian_grid(W, H, eng());

            if (variant == TrainVariant::SftWinners) {
                const WinnerSample& s = winners[idx];
                auto [loss, grad] = model.loss_grad(s.x_w, t, eps, s.condition, schedule);
                if (!std::isfinite(loss))
                    throw std::runtime_error("training diverged at step " + std::to_string(step));
                batch_loss += loss;
                for (size_t i = 0; i < n_params; ++i) acc[i] += grad[i];
            } else {
                const PreferencePair& pair = dataset[idx];
                DpoGradResult r = dpo_grad(model, reference, dpo_cfg, pair, t, eps, schedule);
                batch_loss += r.loss;
                for (size_t i = 0; i < n_params; ++i) acc[i] += r.grad[i];
                if (b == 0 && variant != TrainVariant::SftWinners && config.diagnostic_every > 0 &&
                    step % config.diagnostic_every == 0) {
                    CancellationDiagnostic d =
                        background_cancellation_diagnostic(model, pair, t, eps, schedule, config.halo_radius);
                    entry.has_diagnostic = true;
                    entry.far_bg_residual = d.far_bg_residual;
                    entry.bg_fraction = d.bg_fraction;
                    entry.target_fraction = d.target_fraction;
                }
            }
        }
        for (auto& g : acc) g /= config.batch_size;
        opt.step(model.params(), acc);

        entry.loss = batch_loss / config.batch_size;
        result.trace.push_back(entry);
    }
    return result;
}

TargetAccuracy evaluate_target_accuracy(const Denoiser& model, const SyntheticTask& task, const SamplerConfig& sampler,
                                        const NoiseSchedule& schedule, int n_samples, uint64_t rng_seed) {
    TargetAccuracy acc;
    acc.per_glyph.assign(task.vocab, 0.0);
    std::vector<int> per_glyph_n(task.vocab, 0);

    for (int i = 0; i < n_samples; ++i) {
        int glyph = i % task.vocab;
        Grid x = ancestral_sample(model, Condition{glyph, false}, sampler, schedule, derive_seed(rng_seed, i));
        double d_correct = region_l2(x, task, task.glyph_motif(glyph));
        double d_corrupt = region_l2(x, task, task.corrupted_motif(glyph));
        double hit = d_correct < d_corrupt ? 1.0 : 0.0;
        acc.per_sample.push_back(hit);
        acc.per_glyph[glyph] += hit;
        ++per_glyph_n[glyph];
    }
    double total = 0.0;
    for (double v : acc.per_sample) total += v;
    acc.overall = acc.per_sample.empty() ? 0.0 : total / static_cast<double>(acc.per_sample.size());
    for (int g = 0; g < task.vocab; ++g)
        if (per_glyph_n[g] > 0) acc.per_glyph[g] /= per_glyph_n[g];
    return acc;
}

ComparisonReport compare_variants(const SyntheticTask& task, const std::vector<TrainVariant>& variants,
                                  const TrainConfig& base_config, const NoiseSchedule& schedule, int n_pairs,
                                  int eval_samples, const SamplerConfig& sampler, uint64_t master_seed) {
    DenoiserShape shape;
    shape.width = task.image_width;
    shape.height = task.image_height;
    shape.num_timesteps = schedule.num_timesteps;
    shape.vocab = task.vocab;

    // Shared seeds: every variant sees the same backgrounds, glyph order,
    // training seed and sampler seeds.
    auto make_dataset = [&](TrainVariant v) {
        std::vector<PreferencePair> data;
        data.reserve(n_pairs);
        for (int i = 0; i < n_pairs; ++i)
            data.push_back(gen_synthetic_pair(task, derive_seed(master_seed, 100 + i), i % task.vocab, v));
        return data;
    };
    std::vector<PreferencePair> diptych_data = make_dataset(TrainVariant::Di3po);

    Denoiser init = Denoiser::random_init(shape, derive_seed(master_seed, 1));
    Denoiser base = base_config.pretrain_steps > 0
                        ? pretrain_base(diptych_data, base_config, schedule, init, base_config.pretrain_steps)
                        : init;

    uint64_t eval_seed = derive_seed(master_seed, 2);
    ComparisonReport report;
    {
        TargetAccuracy a = evaluate_target_accuracy(base, task, sampler, schedule, eval_samples, eval_seed);
        report.untrained_accuracy = a.overall;
        report.untrained_half_width = bootstrap_ci(a.per_sample, 1000, derive_seed(master_seed, 3)).half_width;
    }

    for (TrainVariant v : variants) {
        std::vector<PreferencePair> varied;
        if (v == TrainVariant::DpoBackgroundVaried) varied = make_dataset(v);
        const std::vector<PreferencePair>& data = v == TrainVariant::DpoBackgroundVaried ? varied : diptych_data;
        TrainResult tr = train(v, data, base_config, schedule, base);
        TargetAccuracy a = evaluate_target_accuracy(tr.model, task, sampler, schedule, eval_samples, eval_seed);

        VariantReport vr;
        vr.variant = train_variant_name(v);
        vr.accuracy = a.overall;
        vr.accuracy_half_width = bootstrap_ci(a.per_sample, 1000, derive_seed(master_seed, 4)).half_width;
        int n_diag = 0;
        for (const auto& e : tr.trace)
            if (e.has_diagnostic) {
                vr.mean_bg_fraction += e.bg_fraction;
                vr.mean_far_bg_residual += e.far_bg_residual;
                ++n_diag;
            }
        if (n_diag > 0) {
            vr.mean_bg_fraction /= n_diag;
            vr.mean_far_bg_residual /= n_diag;
        }
        report.variants.push_back(vr);
    }
    return report;
}

std::string comparison_to_json(const ComparisonReport& report) {
    nlohmann::ordered_json j;
    j["untrained_accuracy"] = report.untrained_accuracy;
    j["untrained_half_width"] = report.untrained_half_width;
    j["variants"] = nlohmann::ordered_json::array();
    for (const auto& v : report.variants) {
        j["variants"].push_back({{"variant", v.variant},
                                 {"accuracy", v.accuracy},
                                 {"accuracy_half_width", v.accuracy_half_width},
                                 {"mean_bg_fraction", v.mean_bg_fraction},
                                 {"mean_far_bg_residual", v.mean_far_bg_residual}});
    }
    return j.dump(2);
}

ComparisonReport comparison_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    ComparisonReport r;
    r.untrained_accuracy = j.at("untrained_accuracy").get<double>();
    r.untrained_half_width = j.at("untrained_half_width").get<double>();
    for (const auto& vj : j.at("variants")) {
        VariantReport v;
        v.variant = vj.at("variant").get<std::string>();
        v.accuracy = vj.at("accuracy").get<double>();
        v.accuracy_half_width = vj.at("accuracy_half_width").get<double>();
        v.mean_bg_fraction = vj.at("mean_bg_fraction").get<double>();
        v.mean_far_bg_residual = vj.at("mean_far_bg_residual").get<double>();
        r.variants.push_back(v);
    }
    return r;
}

}  // namespace di3po
