#include "di3po/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>

#include "di3po/rng.hpp"

namespace di3po {

std::string normalize_text(const std::string& s) {
    std::string folded;
    folded.reserve(s.size());
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            folded += static_cast<char>(std::tolower(c));
        } else if (c == '\'') {
            folded += '\'';
        } else {
            folded += ' ';
        }
    }
    // Apostrophes survive only between alphanumerics ("what's"), otherwise
    // they count as punctuation.
    std::string kept;
    kept.reserve(folded.size());
    for (size_t i = 0; i < folded.size(); ++i) {
        if (folded[i] == '\'') {
            bool prev_ok = i > 0 && std::isalnum(static_cast<unsigned char>(folded[i - 1]));
            bool next_ok = i + 1 < folded.size() && std::isalnum(static_cast<unsigned char>(folded[i + 1]));
            kept += (prev_ok && next_ok) ? '\'' : ' ';
        } else {
            kept += folded[i];
        }
    }
    std::string out;
    out.reserve(kept.size());
    bool in_space = true;
    for (char c : kept) {
        if (c == ' ') {
            if (!in_space) out += ' ';
            in_space = true;
        } else {
            out += c;
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::vector<std::string> split_words(const std::string& normalized) {
    std::vector<std::string> words;
    std::istringstream in(normalized);
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

namespace {

template <typename Seq>
int edit_distance(const Seq& a, const Seq& b) {
    size_t n = a.size(), m = b.size();
    std::vector<int> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int>(i);
        for (size_t j = 1; j <= m; ++j) {
            int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

}  // namespace

int levenshtein(const std::string& a, const std::string& b) { return edit_distance(a, b); }

int word_levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    return edit_distance(a, b);
}

double edit_similarity(const std::string& hyp, const std::string& ref) {
    size_t denom = std::max(hyp.size(), ref.size());
    if (denom == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(hyp, ref)) / static_cast<double>(denom);
}

double word_error_rate(const std::string& hyp, const std::string& ref) {
    auto ref_words = split_words(normalize_text(ref));
    if (ref_words.empty()) throw std::invalid_argument("word_error_rate: empty reference");
    auto hyp_words = split_words(normalize_text(hyp));
    return static_cast<double>(word_levenshtein(hyp_words, ref_words)) / static_cast<double>(ref_words.size());
}

double substring_match_ratio(const std::string& hyp, const std::string& ref) {
    auto ref_words = split_words(normalize_text(ref));
    if (ref_words.empty()) throw std::invalid_argument("substring_match_ratio: empty reference");
    std::string hyp_norm = normalize_text(hyp);
    int hits = 0;
    for (const auto& w : ref_words)
        if (hyp_norm.find(w) != std::string::npos) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ref_words.size());
}

std::string EvalSample::ground_truth_joined() const {
    std::string out;
    for (size_t i = 0; i < ground_truth_spans.size(); ++i) {
        if (i) out += ' ';
        out += ground_truth_spans[i];
    }
    return out;
}

BootstrapEstimate bootstrap_ci(const std::vector<double>& values, int replicas, uint64_t rng_seed) {
    if (values.empty()) throw std::invalid_argument("bootstrap_ci: empty input");
    if (replicas < 1) throw std::invalid_argument("bootstrap_ci: replicas must be >= 1");

    BootstrapEstimate est;
    double sum = 0.0;
    for (double v : values) sum += v;
    est.mean = sum / static_cast<double>(values.size());

    std::vector<double> replica_means(replicas);
    const size_t n = values.size();
    // Resample values shifted by values[0] so a constant input yields
    // identical replica means (zero half-width, no rounding residue).
    const double shift = values[0];
    std::vector<double> centered(values);
    for (double& v : centered) v -= shift;
    for (int r = 0; r < replicas; ++r) {
        // Per-replica derived stream: deterministic under any scheduling.
        std::mt19937_64 eng(derive_seed(rng_seed, static_cast<uint64_t>(r)));
        std::uniform_int_distribution<size_t> pick(0, n - 1);
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += centered[pick(eng)];
        replica_means[r] = shift + s / static_cast<double>(n);
    }

    // Variance of the replica means, computed on deviations from the first
    // replica so identical replicas give exactly zero (no accumulation error).
    double dbar = 0.0;
    for (double v : replica_means) dbar += v - replica_means[0];
    dbar /= replicas;
    double var = 0.0;
    for (double v : replica_means) {
        double d = (v - replica_means[0]) - dbar;
        var += d * d;
    }
    est.half_width = replicas > 1 ? std::sqrt(var / (replicas - 1)) : 0.0;

    std::sort(replica_means.begin(), replica_means.end());
    auto quantile = [&](double q) {
        double idx = q * (replicas - 1);
        size_t lo = static_cast<size_t>(idx);
        size_t hi = std::min(lo + 1, static_cast<size_t>(replicas - 1));
        double frac = idx - static_cast<double>(lo);
        return replica_means[lo] * (1.0 - frac) + replica_means[hi] * frac;
    };
    est.percentile_lo = quantile(0.025);
    est.percentile_hi = quantile(0.975);
    return est;
}

namespace {

MetricAggregate aggregate_metric(const std::vector<std::vector<double>>& per_prompt, bool best_is_max, int replicas,
                                 uint64_t seed) {
    std::vector<double> prompt_means, prompt_bests;
    for (const auto& seeds : per_prompt) {
        double s = 0.0;
        double best = seeds.front();
        for (double v : seeds) {
            s += v;
            best = best_is_max ? std::max(best, v) : std::min(best, v);
        }
        prompt_means.push_back(s / static_cast<double>(seeds.size()));
        prompt_bests.push_back(best);
    }
    MetricAggregate agg;
    agg.average_ci = bootstrap_ci(prompt_means, replicas, derive_seed(seed, 1));
    agg.best_of_n_ci = bootstrap_ci(prompt_bests, replicas, derive_seed(seed, 2));
    agg.average = agg.average_ci.mean;
    agg.best_of_n = agg.best_of_n_ci.mean;
    return agg;
}

}  // namespace

MetricReport aggregate_seeds(const std::vector<EvalSample>& samples, int n, int bootstrap_replicas,
                             uint64_t bootstrap_seed) {
    if (samples.empty()) throw std::invalid_argument("aggregate_seeds: no samples");
    if (n < 1) throw std::invalid_argument("aggregate_seeds: n must be >= 1");

    MetricReport report;
    report.n_seeds = n;
    for (const auto& s : samples) {
        if (static_cast<int>(s.ocr_texts.size()) < n)
            throw std::invalid_argument("aggregate_seeds: sample " + s.prompt_id + " has fewer than n seeds");
        std::string ref = s.ground_truth_joined();
        std::string ref_norm = normalize_text(ref);
        std::vector<double> es, we, sm;
        for (int i = 0; i < n; ++i) {
            std::string hyp_norm = normalize_text(s.ocr_texts[i]);
            es.push_back(edit_similarity(hyp_norm, ref_norm));
            we.push_back(word_error_rate(s.ocr_texts[i], ref));
            sm.push_back(substring_match_ratio(s.ocr_texts[i], ref));
        }
        report.prompt_ids.push_back(s.prompt_id);
        report.edit_sim.push_back(std::move(es));
        report.wer.push_back(std::move(we));
        report.substring.push_back(std::move(sm));
    }

    report.edit_sim_agg = aggregate_metric(report.edit_sim, true, bootstrap_replicas, derive_seed(bootstrap_seed, 10));
    report.wer_agg = aggregate_metric(report.wer, false, bootstrap_replicas, derive_seed(bootstrap_seed, 20));
    report.substring_agg =
        aggregate_metric(report.substring, true, bootstrap_replicas, derive_seed(bootstrap_seed, 30));
    return report;
}

std::string render_report_table(const MetricReport& report, const std::string& title) {
    std::ostringstream out;
    out << title << " (n = " << report.n_seeds << ", " << report.prompt_ids.size() << " prompts)\n";
    out << std::left << std::setw(16) << "Row" << std::setw(24) << "Edit Similarity" << std::setw(24)
        << "Word Error Rate" << std::setw(24) << "Substring Match Ratio" << "\n";
    auto cell = [](const BootstrapEstimate& e) {
        std::ostringstream c;
        c << std::fixed << std::setprecision(4) << e.mean << " +/- " << e.half_width;
        return c.str();
    };
    out << std::left << std::setw(16) << "Average" << std::setw(24) << cell(report.edit_sim_agg.average_ci)
        << std::setw(24) << cell(report.wer_agg.average_ci) << std::setw(24)
        << cell(report.substring_agg.average_ci) << "\n";
    out << std::left << std::setw(16) << "BoN" << std::setw(24) << cell(report.edit_sim_agg.best_of_n_ci)
        << std::setw(24) << cell(report.wer_agg.best_of_n_ci) << std::setw(24)
        << cell(report.substring_agg.best_of_n_ci) << "\n";
    return out.str();
}

}  // namespace di3po
