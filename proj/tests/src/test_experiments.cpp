#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "di3po/adam.hpp"
#include "di3po/experiments.hpp"
#include "di3po/rng.hpp"

using namespace di3po;

namespace {

SyntheticTask small_task() {
    SyntheticTask t;
    t.image_width = 12;
    t.image_height = 12;
    t.motif_size = 4;
    t.motif_x = 4;
    t.motif_y = 4;
    t.vocab = 3;
    t.task_seed = 11;
    return t;
}

DenoiserShape shape_for(const SyntheticTask& t, int timesteps) {
    DenoiserShape s;
    s.width = t.image_width;
    s.height = t.image_height;
    s.hidden = 4;
    s.num_timesteps = timesteps;
    s.vocab = t.vocab;
    return s;
}

TrainConfig quick_config(TrainVariant v, int steps) {
    TrainConfig cfg;
    cfg.variant = v;
    cfg.steps = steps;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-3;
    cfg.diagnostic_every = 5;
    cfg.pretrain_steps = 0;
    cfg.seed = 77;
    return cfg;
}

bool inside_motif(const SyntheticTask& t, int x, int y) {
    return x >= t.motif_x && x < t.motif_x + t.motif_size && y >= t.motif_y && y < t.motif_y + t.motif_size;
}

}  // namespace

TEST_CASE("glyph motifs are binary, distinct and deterministically corrupted") {
    SyntheticTask t = small_task();
    const int area = t.motif_size * t.motif_size;
    for (int id = 0; id < t.vocab; ++id) {
        auto motif = t.glyph_motif(id);
        REQUIRE(static_cast<int>(motif.size()) == area);
        int on = 0;
        for (uint8_t p : motif) {
            CHECK((p == 0 || p == 1));
            on += p;
        }
        CHECK(on > 0);        // never blank
        CHECK(on < area);     // never solid
        CHECK(motif == t.glyph_motif(id));

        auto corrupted = t.corrupted_motif(id);
        REQUIRE(corrupted.size() == motif.size());
        int flips = 0;
        for (int i = 0; i < area; ++i) flips += corrupted[i] != motif[i];
        CHECK(flips == std::max(1, static_cast<int>(std::lround(0.2 * area))));
        CHECK(corrupted == t.corrupted_motif(id));
    }
    CHECK(t.glyph_motif(0) != t.glyph_motif(1));
}

TEST_CASE("synthetic pairs share the background bitwise; background-varied pairs do not") {
    SyntheticTask t = small_task();
    PreferencePair shared = gen_synthetic_pair(t, 123, 1, TrainVariant::Di3po);
    CHECK(shared.condition.token == 1);
    CHECK(!shared.condition.is_null);
    bool target_differs = false;
    for (int y = 0; y < t.image_height; ++y)
        for (int x = 0; x < t.image_width; ++x) {
            if (inside_motif(t, x, y)) {
                target_differs = target_differs || shared.x_w.at(x, y) != shared.x_l.at(x, y);
            } else {
                CHECK(shared.x_w.at(x, y) == shared.x_l.at(x, y));  // bitwise
            }
        }
    CHECK(target_differs);

    PreferencePair varied = gen_synthetic_pair(t, 123, 1, TrainVariant::DpoBackgroundVaried);
    int bg_diffs = 0;
    for (int y = 0; y < t.image_height; ++y)
        for (int x = 0; x < t.image_width; ++x)
            if (!inside_motif(t, x, y) && varied.x_w.at(x, y) != varied.x_l.at(x, y)) ++bg_diffs;
    CHECK(bg_diffs > 0);

    // Same seed, same variant: fully reproducible.
    PreferencePair again = gen_synthetic_pair(t, 123, 1, TrainVariant::Di3po);
    CHECK(again.x_w.values == shared.x_w.values);
    CHECK(again.x_l.values == shared.x_l.values);
}

TEST_CASE("adam first step follows the bias-corrected closed form") {
    AdamConfig cfg;
    cfg.lr = 0.01;
    Adam opt(cfg);
    std::vector<double> params{1.0, -2.0, 0.5};
    std::vector<double> grad{0.3, -0.7, 0.0};
    std::vector<double> before = params;
    opt.step(params, grad);
    CHECK(opt.step_count() == 1);
    for (size_t i = 0; i < params.size(); ++i) {
        // m_hat = g, v_hat = g^2, so the move is lr * g / (|g| + eps).
        double want = before[i] - cfg.lr * grad[i] / (std::abs(grad[i]) + cfg.eps);
        CHECK(params[i] == doctest::Approx(want).epsilon(1e-12));
    }
    CHECK(params[2] == before[2]);  // zero gradient coordinate is untouched
}

TEST_CASE("zero learning rate training is a parameter no-op") {
    SyntheticTask t = small_task();
    NoiseSchedule schedule = make_schedule(ScheduleKind::Linear, 20, 1e-4, 0.02);
    Denoiser init = Denoiser::random_init(shape_for(t, 20), 5);
    std::vector<PreferencePair> data;
    for (int i = 0; i < 4; ++i) data.push_back(gen_synthetic_pair(t, derive_seed(9, i), i % t.vocab, TrainVariant::Di3po));

    TrainConfig cfg = quick_config(TrainVariant::Di3po, 6);
    cfg.learning_rate = 0.0;
    TrainResult r = train(TrainVariant::Di3po, data, cfg, schedule, init);
    CHECK(r.model.params() == init.params());
    CHECK(r.reference.params() == init.params());
}

TEST_CASE("trace cadence: one entry per step, diagnostics only for DPO variants") {
    SyntheticTask t = small_task();
    NoiseSchedule schedule = make_schedule(ScheduleKind::Linear, 20, 1e-4, 0.02);
    Denoiser init = Denoiser::random_init(shape_for(t, 20), 6);
    std::vector<PreferencePair> data;
    for (int i = 0; i < 6; ++i) data.push_back(gen_synthetic_pair(t, derive_seed(10, i), i % t.vocab, TrainVariant::Di3po));

    TrainResult dpo = train(TrainVariant::Di3po, data, quick_config(TrainVariant::Di3po, 11), schedule, init);
    REQUIRE(dpo.trace.size() == 11);
    for (size_t i = 0; i < dpo.trace.size(); ++i) {
        CHECK(dpo.trace[i].step == static_cast<int>(i));
        CHECK(std::isfinite(dpo.trace[i].loss));
        CHECK(dpo.trace[i].has_diagnostic == (i % 5 == 0));
        if (dpo.trace[i].has_diagnostic) {
            CHECK(dpo.trace[i].far_bg_residual <= 1e-10);  // exact diptych cancellation
            CHECK(dpo.trace[i].bg_fraction + dpo.trace[i].target_fraction == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    // The reference stays frozen at the initialization.
    CHECK(dpo.reference.params() == init.params());
    CHECK(dpo.model.params() != init.params());

    TrainResult sft = train(TrainVariant::SftWinners, data, quick_config(TrainVariant::SftWinners, 11), schedule, init);
    REQUIRE(sft.trace.size() == 11);
    for (const auto& e : sft.trace) CHECK(!e.has_diagnostic);
}

TEST_CASE("training is deterministic per config seed") {
    SyntheticTask t = small_task();
    NoiseSchedule schedule = make_schedule(ScheduleKind::Linear, 20, 1e-4, 0.02);
    Denoiser init = Denoiser::random_init(shape_for(t, 20), 8);
    std::vector<PreferencePair> data;
    for (int i = 0; i < 4; ++i) data.push_back(gen_synthetic_pair(t, derive_seed(3, i), i % t.vocab, TrainVariant::Di3po));

    TrainResult a = train(TrainVariant::Di3po, data, quick_config(TrainVariant::Di3po, 8), schedule, init);
    TrainResult b = train(TrainVariant::Di3po, data, quick_config(TrainVariant::Di3po, 8), schedule, init);
    CHECK(a.model.params() == b.model.params());
    CHECK(a.trace.size() == b.trace.size());
    for (size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].loss == b.trace[i].loss);
}

TEST_CASE("divergence is reported with the offending step") {
    SyntheticTask t = small_task();
    NoiseSchedule schedule = make_schedule(ScheduleKind::Linear, 20, 1e-4, 0.02);
    Denoiser init = Denoiser::random_init(shape_for(t, 20), 4);
    std::vector<PreferencePair> data{gen_synthetic_pair(t, 1, 0, TrainVariant::Di3po)};
    TrainConfig cfg = quick_config(TrainVariant::SftWinners, 200);
    cfg.learning_rate = 1e160;  // one step overflows the squared residuals
    try {
        train(TrainVariant::SftWinners, data, cfg, schedule, init);
        FAIL("expected divergence");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("diverged at step") != std::string::npos);
    }
}

TEST_CASE("pretraining reduces the denoising loss and is deterministic") {
    SyntheticTask t = small_task();
    NoiseSchedule schedule = make_schedule(ScheduleKind::Linear, 20, 1e-4, 0.02);
    Denoiser init = Denoiser::random_init(shape_for(t, 20), 12);
    std::vector<PreferencePair> data;
    for (int i = 0; i < 8; ++i) data.push_back(gen_synthetic_pair(t, derive_seed(21, i), i % t.vocab, TrainVariant::Di3po));
    TrainConfig cfg = quick_config(TrainVariant::Di3po, 1);
    cfg.learning_rate = 3e-3;

    Denoiser base = pretrain_base(data, cfg, schedule, init, 120);
    CHECK(base.params() == pretrain_base(data, cfg, schedule, init, 120).params());

    // Average denoising loss over a fixed probe set drops from init to base.
    auto probe_loss = [&](const Denoiser& m) {
        double total = 0.0;
        std::mt19937_64 eng(99);
        for (int i = 0; i < 32; ++i) {
            const PreferencePair& p = data[i % data.size()];
            int tt = 1 + static_cast<int>(eng() % 20);
            Grid eps = gaussian_grid(t.image_width, t.image_height, eng());
            total += ddpm_loss(m, p.x_w, tt, eps, p.condition, schedule);
        }
        return total / 32.0;
    };
    CHECK(probe_loss(base) < probe_loss(init));
}

TEST_CASE("untrained target accuracy sits in the chance band") {
    SyntheticTask t = small_task();
    NoiseSchedule schedule = make_schedule(ScheduleKind::Linear, 20, 1e-4, 0.02);
    Denoiser init = Denoiser::random_init(shape_for(t, 20), 31);
    SamplerConfig sampler;
    sampler.num_inference_steps = 10;
    sampler.guidance_scale = 1.0;
    TargetAccuracy acc = evaluate_target_accuracy(init, t, sampler, schedule, 120, 5);
    CHECK(acc.overall >= 0.2);
    CHECK(acc.overall <= 0.8);
    REQUIRE(acc.per_sample.size() == 120);
    double mean = std::accumulate(acc.per_sample.begin(), acc.per_sample.end(), 0.0) / 120.0;
    CHECK(mean == doctest::Approx(acc.overall).epsilon(1e-12));
    REQUIRE(static_cast<int>(acc.per_glyph.size()) == t.vocab);
    for (double g : acc.per_glyph) {
        CHECK(g >= 0.0);
        CHECK(g <= 1.0);
    }
}

TEST_CASE("variant names round-trip and bad names throw") {
    for (TrainVariant v : {TrainVariant::Di3po, TrainVariant::SftWinners, TrainVariant::DpoBackgroundVaried})
        CHECK(parse_train_variant(train_variant_name(v)) == v);
    CHECK_THROWS_AS(parse_train_variant("nonsense"), std::invalid_argument);
}

TEST_CASE("comparison report JSON round-trip preserves every field") {
    ComparisonReport r;
    r.untrained_accuracy = 0.51;
    r.untrained_half_width = 0.02;
    VariantReport a{"di3po", 0.9, 0.01, 0.25, 1e-12};
    VariantReport b{"sft-winners", 0.7, 0.03, 0.0, 0.0};
    r.variants = {a, b};
    ComparisonReport back = comparison_from_json(comparison_to_json(r));
    CHECK(back.untrained_accuracy == r.untrained_accuracy);
    CHECK(back.untrained_half_width == r.untrained_half_width);
    REQUIRE(back.variants.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(back.variants[i].variant == r.variants[i].variant);
        CHECK(back.variants[i].accuracy == r.variants[i].accuracy);
        CHECK(back.variants[i].accuracy_half_width == r.variants[i].accuracy_half_width);
        CHECK(back.variants[i].mean_bg_fraction == r.variants[i].mean_bg_fraction);
        CHECK(back.variants[i].mean_far_bg_residual == r.variants[i].mean_far_bg_residual);
    }
    CHECK_THROWS(comparison_from_json("not json"));
}
