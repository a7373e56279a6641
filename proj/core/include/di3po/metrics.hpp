#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace di3po {

/// Case-fold, strip punctuation (word-internal apostrophes survive),
/// collapse whitespace runs to single spaces, trim ends.
std::string normalize_text(const std::string& s);

std::vector<std::string> split_words(const std::string& normalized);

/// Unit-cost insert/delete/substitute edit distance.
int levenshtein(const std::string& a, const std::string& b);
int word_levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// 1 - d(hyp, ref) / max(|hyp|, |ref|); 1 when both are empty.
double edit_similarity(const std::string& hyp, const std::string& ref);

/// Word-level edit distance divided by the reference word count; unclamped.
/// Throws std::invalid_argument when the normalized reference is empty.
double word_error_rate(const std::string& hyp, const std::string& ref);

/// Fraction of normalized reference words occurring as contiguous substrings
/// of the normalized hypothesis. Throws on an empty reference.
double substring_match_ratio(const std::string& hyp, const std::string& ref);

struct EvalSample {
    std::string prompt_id;
    /// Ordered ground-truth spans; joined with single spaces for
    /// character-level metrics.
    std::vector<std::string> ground_truth_spans;
    std::vector<uint64_t> seed_ids;
    std::vector<std::string> ocr_texts;  // one per seed

    std::string ground_truth_joined() const;
};

struct BootstrapEstimate {
    double mean = 0.0;
    double half_width = 0.0;        // bootstrap SE: std of replica means
    double percentile_lo = 0.0;     // 2.5th percentile of replica means
    double percentile_hi = 0.0;     // 97.5th percentile
};

/// Nonparametric bootstrap: full-size resampling with replacement,
/// deterministic per (seed, replica index) regardless of scheduling.
BootstrapEstimate bootstrap_ci(const std::vector<double>& values, int replicas, uint64_t rng_seed);

struct MetricAggregate {
    double average = 0.0;       // mean over prompts of the per-seed mean
    double best_of_n = 0.0;     // mean over prompts of the per-prompt best seed
    BootstrapEstimate average_ci;
    BootstrapEstimate best_of_n_ci;
};

struct MetricReport {
    int n_seeds = 0;
    std::vector<std::string> prompt_ids;
    // Per prompt, per seed raw values.
    std::vector<std::vector<double>> edit_sim;
    std::vector<std::vector<double>> wer;
    std::vector<std::vector<double>> substring;
    MetricAggregate edit_sim_agg;
    MetricAggregate wer_agg;        // best = minimum (error metric)
    MetricAggregate substring_agg;
};

/// Average and Best-of-N over the first n seeds of every sample, with
/// bootstrap half-widths over the per-prompt statistics.
MetricReport aggregate_seeds(const std::vector<EvalSample>& samples, int n, int bootstrap_replicas = 1000,
                             uint64_t bootstrap_seed = 0);

/// Fixed-width plain-text table rendering of a report.
std::string render_report_table(const MetricReport& report, const std::string& title);

}  // namespace di3po
