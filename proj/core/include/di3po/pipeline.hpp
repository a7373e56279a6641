#pragma once

#include <string>
#include <utility>
#include <vector>

#include "di3po/clients.hpp"
#include "di3po/experiments.hpp"
#include "di3po/manifest.hpp"
#include "di3po/metrics.hpp"

namespace di3po {

struct EvalConfig {
    int n_seeds = 4;
    int prompt_count = 100;  // desk-scale default; the full-scale reference is 2000
    int bootstrap_replicas = 1000;
    std::string sampler = "checkpoint";  // "checkpoint" | "oracle" (hard-wired perfect renderer)
    std::string checkpoint;              // relative to the dataset root; default train/model.ckpt
    SamplerConfig sampler_config;
};

struct PipelineConfig {
    std::string dataset_root = "run";
    uint64_t master_seed = 0;
    int pair_count = 300;
    int threshold = 70;
    /// Fraction of generated records produced through the image model's
    /// corruption knob; the first round(fraction * count) records are the
    /// corrupted ones.
    double corruption_fraction = 0.0;
    std::string corruption;             // knob name applied to the corrupted subset
    std::vector<std::string> words;     // seed words; empty selects the built-in list

    ClientConfig text_client;
    ClientConfig image_client;
    ClientConfig verifier_client;
    ClientConfig ocr_client;

    TrainConfig train;
    std::string train_source = "synthetic";  // "synthetic" | "manifest"
    SyntheticTask task;
    int schedule_timesteps = 100;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    EvalConfig eval;
};

/// Built-in uppercase seed-word list (all renderable by the bitmap font).
const std::vector<std::string>& builtin_words();

/// Parses a JSON config document, then applies dotted-key overrides
/// (e.g. {"train.steps", "50"}); values are parsed as JSON where possible,
/// otherwise taken as strings. Unknown keys are an error.
PipelineConfig parse_pipeline_config(const std::string& json_text,
                                     const std::vector<std::pair<std::string, std::string>>& overrides = {});
PipelineConfig load_pipeline_config(const std::string& path,
                                    const std::vector<std::pair<std::string, std::string>>& overrides = {});
std::string pipeline_config_to_json(const PipelineConfig& cfg);

/// Stable exit-code contract shared by all subcommands.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitPartial = 2, kExitFatal = 3 };

struct FilterOutcome {
    std::vector<PairRecord> accepted;
    std::vector<AuditRecord> audit;  // one entry per input record
    int accepted_count = 0;
    int rejected_count = 0;
    int error_count = 0;
};

/// Verifies every record and gates on confidence. Client failures mark the
/// record as an error (third state), never as a rejection. Audit timestamps
/// are logical sequence numbers so reruns are byte-identical.
FilterOutcome filter_dataset(const std::vector<PairRecord>& manifest, VerifierClient& verifier, int threshold,
                             const std::string& dataset_root);

int cmd_gen_pairs(const PipelineConfig& cfg);
int cmd_filter(const PipelineConfig& cfg);
int cmd_train(const PipelineConfig& cfg);
int cmd_eval(const PipelineConfig& cfg);
int cmd_report(const PipelineConfig& cfg);

}  // namespace di3po
